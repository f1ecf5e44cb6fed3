#pragma once

#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgrec/checkpoint.hpp"
#include "kgrec/graph.hpp"
#include "kgrec/kg_model.hpp"

namespace kgrec {

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr const char* kContextFormat = "kgrec-context-v1";

struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;

  double density(double x) const {
    const double z = (x - mean) / stddev;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * stddev);
  }
  double log_density(double x) const {
    const double z = (x - mean) / stddev;
    return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(2.0 * std::numbers::pi);
  }

  friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

// Population mean and standard deviation, with the deviation floored.
inline Gaussian fit_gaussian(std::span<const double> values, bool* floored = nullptr) {
  require(!values.empty(), "fit_gaussian: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  double sd = std::sqrt(var);
  const bool hit_floor = !(sd >= kSigmaFloor);
  if (hit_floor) sd = kSigmaFloor;
  if (floored) *floored = hit_floor;
  return {mean, sd};
}

using RelationTail = std::pair<RelationId, EntityId>;

struct ContextStats {
  std::size_t known_entity_count = 0;
  std::map<RelationTail, std::size_t> counts;  // #heads h in E' with (h, r, e) known
  Gaussian truth;
  Gaussian falsity;
  // Optional per-relation fits; empty means the global fits apply.
  std::vector<Gaussian> relation_truth;
  std::vector<Gaussian> relation_falsity;
  double laplace = 0.0;

  double attention(RelationId r, EntityId e) const {
    auto it = counts.find({r, e});
    const double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    return (count + laplace) / (static_cast<double>(known_entity_count) + 2.0 * laplace);
  }

  const Gaussian& true_fit(RelationId r) const {
    return r < relation_truth.size() ? relation_truth[r] : truth;
  }
  const Gaussian& false_fit(RelationId r) const {
    return r < relation_falsity.size() ? relation_falsity[r] : falsity;
  }
};

struct ContextOptions {
  bool per_relation = false;
  double laplace = 0.0;
};

// Attention counts from the training store; Gaussian fits of the model's
// scores on all training triples and on `false_sample_size` tail corruptions.
inline ContextStats fit_context(const KgModel& model, const TripleStore& store,
                                std::size_t false_sample_size, Rng& rng,
                                const ContextOptions& options = {}) {
  require(!store.empty(), "fit_context: training store is empty");
  require(false_sample_size >= 2, "fit_context: false_sample_size must be >= 2");
  require(options.laplace >= 0.0, "fit_context: laplace must be >= 0");
  if (!(model.entities == store.entities()) || !(model.relations == store.relations()))
    throw std::invalid_argument("fit_context: model vocabulary does not match the store");

  ContextStats stats;
  stats.known_entity_count = store.entities().size();
  stats.laplace = options.laplace;
  for (const auto& t : store.triples()) ++stats.counts[{t.relation, t.tail}];

  const auto relation_count = store.relations().size();
  std::vector<double> true_scores, false_scores;
  std::vector<std::vector<double>> rel_true(relation_count), rel_false(relation_count);
  for (const auto& t : store.triples()) {
    const double s = score(model, t);
    true_scores.push_back(s);
    rel_true[t.relation].push_back(s);
  }
  std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
  for (std::size_t i = 0; i < false_sample_size; ++i) {
    const auto corrupted = corrupt_tail(store.triples()[pick(rng)], store, rng);
    const double s = score(model, corrupted);
    false_scores.push_back(s);
    rel_false[corrupted.relation].push_back(s);
  }

  bool floored_true = false, floored_false = false;
  stats.truth = fit_gaussian(true_scores, &floored_true);
  stats.falsity = fit_gaussian(false_scores, &floored_false);
  if (floored_true || floored_false)
    std::cerr << "warning: fit_context: degenerate score distribution, sigma floored at "
              << kSigmaFloor << '\n';

  if (options.per_relation) {
    for (std::size_t r = 0; r < relation_count; ++r) {
      stats.relation_truth.push_back(rel_true[r].empty() ? stats.truth : fit_gaussian(rel_true[r]));
      stats.relation_falsity.push_back(rel_false[r].size() < 2 ? stats.falsity
                                                               : fit_gaussian(rel_false[r]));
    }
  }
  return stats;
}

// u = a b1 / (a b1 + (1 - a) b2), evaluated from log densities so that the
// ratio stays defined when both densities underflow.
inline double posterior_from_log_densities(double a, double log_b1, double log_b2) {
  if (!(a > 0.0)) return 0.0;
  if (!(a < 1.0)) return 1.0;
  const double t = std::log1p(-a) - std::log(a) + (log_b2 - log_b1);
  return 1.0 / (1.0 + std::exp(t));
}

inline double rescore(const ContextStats& stats, double raw_score, RelationId r, EntityId e) {
  return posterior_from_log_densities(stats.attention(r, e),
                                      stats.true_fit(r).log_density(raw_score),
                                      stats.false_fit(r).log_density(raw_score));
}

inline nlohmann::json context_to_json(const ContextStats& stats, const Vocabulary& entities,
                                      const Vocabulary& relations) {
  nlohmann::json attention = nlohmann::json::array();
  for (const auto& [key, count] : stats.counts) {
    attention.push_back({relations.label(key.first), entities.label(key.second), count});
  }
  nlohmann::json j{{"format", kContextFormat},
                   {"mu_true", stats.truth.mean},
                   {"sigma_true", stats.truth.stddev},
                   {"mu_false", stats.falsity.mean},
                   {"sigma_false", stats.falsity.stddev},
                   {"attention", std::move(attention)},
                   {"known_entity_count", stats.known_entity_count}};
  if (stats.laplace > 0.0) j["laplace"] = stats.laplace;
  if (!stats.relation_truth.empty()) {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t r = 0; r < stats.relation_truth.size(); ++r) {
      per[relations.label(static_cast<RelationId>(r))] = {
          stats.relation_truth[r].mean, stats.relation_truth[r].stddev,
          stats.relation_falsity[r].mean, stats.relation_falsity[r].stddev};
    }
    j["per_relation"] = std::move(per);
  }
  return j;
}

inline ContextStats context_from_json(const nlohmann::json& j, const Vocabulary& entities,
                                      const Vocabulary& relations) {
  if (j.value("format", std::string{}) != kContextFormat)
    throw DataError(std::string("schema version mismatch: expected ") + kContextFormat);
  try {
    ContextStats stats;
    stats.truth = {j.at("mu_true").get<double>(), j.at("sigma_true").get<double>()};
    stats.falsity = {j.at("mu_false").get<double>(), j.at("sigma_false").get<double>()};
    stats.known_entity_count = j.at("known_entity_count").get<std::size_t>();
    stats.laplace = j.value("laplace", 0.0);
    for (const auto& row : j.at("attention")) {
      const auto r = relations.at(row.at(0).get<std::string>());
      const auto e = entities.at(row.at(1).get<std::string>());
      const auto count = row.at(2).get<std::size_t>();
      if (count > stats.known_entity_count)
        throw DataError("context: attention count exceeds known_entity_count");
      stats.counts[{r, e}] = count;
    }
    if (j.contains("per_relation")) {
      stats.relation_truth.assign(relations.size(), stats.truth);
      stats.relation_falsity.assign(relations.size(), stats.falsity);
      for (const auto& [label, v] : j.at("per_relation").items()) {
        const auto r = relations.at(label);
        stats.relation_truth[r] = {v.at(0).get<double>(), v.at(1).get<double>()};
        stats.relation_falsity[r] = {v.at(2).get<double>(), v.at(3).get<double>()};
      }
    }
    return stats;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("context: malformed stats file: ") + e.what());
  }
}

inline void save_context(const std::string& path, const ContextStats& stats,
                         const KgModel& model) {
  write_json_file(path, context_to_json(stats, model.entities, model.relations));
}

inline ContextStats load_context(const std::string& path, const KgModel& model) {
  return context_from_json(read_json_file(path, kContextFormat), model.entities,
                           model.relations);
}

}  // namespace kgrec
