#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "kgrec/graph.hpp"
#include "kgrec/kg_loss.hpp"

namespace kgrec {

// Plain gradient descent or RMSProp over every parameter block.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double decay = 0.9, double epsilon = 1e-8)
      : kind_(kind), learning_rate_(learning_rate), decay_(decay), epsilon_(epsilon) {}

  void step(Parameters& params, const GradientSet& grad) {
    if (kind_ == OptimizerKind::gradient_descent) {
      zip_blocks(params, grad, [&](auto p, auto g) { p -= learning_rate_ * g; });
      return;
    }
    if (!cache_) cache_ = params.zeros_like();
    zip_blocks(*cache_, grad, [&](auto c, auto g) {
      c = decay_ * c + (1.0 - decay_) * g.cwiseProduct(g);
    });
    std::vector<Eigen::VectorXd> scaled;
    zip_blocks(*cache_, grad, [&](auto c, auto g) {
      scaled.emplace_back(g.array() / (c.array().sqrt() + epsilon_));
    });
    std::size_t i = 0;
    zip_blocks(params, params, [&](auto p, auto) { p -= learning_rate_ * scaled[i++]; });
  }

 private:
  OptimizerKind kind_;
  double learning_rate_;
  double decay_;
  double epsilon_;
  std::optional<Parameters> cache_;
};

inline void project_entities(EntityMatrix& entities) {
  for (Eigen::Index i = 0; i < entities.rows(); ++i) {
    const double n = entities.row(i).norm();
    if (n > 1.0) entities.row(i) /= n;
  }
}

struct TrainReport {
  std::vector<double> epoch_loss;  // mean loss per epoch, weighted by batch size

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) out << e + 1 << ',' << epoch_loss[e] << '\n';
    return out.str();
  }

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
  KgModel model;
  TrainReport report;
};

inline Objective objective_for(Variant v) {
  return v == Variant::sntl ? Objective::smooth : Objective::hinge;
}

// Epochs of shuffled mini-batches; one tail corruption per positive. SNTL
// draws a fresh perturbation for every batch.
inline TrainResult train(KgModel model, const TripleStore& store, const ModelConfig& config) {
  config.validate();
  if (store.empty()) throw std::invalid_argument("train: training store is empty");
  if (!(model.entities == store.entities()) || !(model.relations == store.relations()))
    throw std::invalid_argument("train: model vocabulary does not match the training store");
  model.config.epochs = config.epochs;
  model.config.batch_size = config.batch_size;
  model.config.learning_rate = config.learning_rate;
  model.config.optimizer = config.optimizer;
  model.config.rmsprop_decay = config.rmsprop_decay;
  model.config.margin = config.margin;
  model.config.alpha = config.alpha;
  model.config.noise = config.noise;

  Rng rng(derive_seed(config.seed, 1));
  Optimizer optimizer(config.optimizer, config.learning_rate, config.rmsprop_decay);
  const auto objective = objective_for(model.variant());
  const auto& triples = store.triples();
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  TrainReport report;
  std::vector<Triple> positives, negatives;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const auto stop = std::min(order.size(), start + batch);
      positives.clear();
      negatives.clear();
      for (auto i = start; i < stop; ++i) {
        positives.push_back(triples[order[i]]);
        negatives.push_back(corrupt_tail(positives.back(), store, rng));
      }
      LossAndGradient step;
      if (objective == Objective::smooth && config.noise > 0.0 && config.alpha < 1.0) {
        const auto noise = draw_noise(model, positives, negatives, config.noise, rng);
        step = loss_and_gradients(model, positives, negatives, objective, config.alpha, &noise);
      } else {
        step = loss_and_gradients(model, positives, negatives, Objective::hinge);
      }
      if (!std::isfinite(step.loss)) {
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                               ", batch " + std::to_string(batch_index + 1));
      }
      epoch_total += step.loss * static_cast<double>(stop - start);
      if (config.learning_rate > 0.0) {
        optimizer.step(model.params, step.gradient);
        if (config.max_norm_entities) project_entities(model.params.entities);
      }
    }
    report.epoch_loss.push_back(epoch_total / static_cast<double>(order.size()));
  }
  return {std::move(model), std::move(report)};
}

enum class LipschitzMode { ratio, raw_difference };

// Mean over triples and draws of |f(g_hat(h), r, g_hat(t)) - f(g(h), r, g(t))|
// divided by ||(eps_h, eps_t)||_2 (ratio mode) or left undivided (raw mode).
inline double lipschitz_estimate(const KgModel& model, std::span<const Triple> triples, double s,
                                 Rng& rng, int samples_per_triple,
                                 LipschitzMode mode = LipschitzMode::ratio) {
  require(s > 0.0, "lipschitz_estimate: s must be > 0");
  require(!triples.empty(), "lipschitz_estimate: no triples");
  require(samples_per_triple >= 1, "lipschitz_estimate: samples_per_triple must be >= 1");
  double total = 0.0;
  for (const auto& t : triples) {
    const Eigen::VectorXd h = model.entity(t.head);
    const Eigen::VectorXd tail = model.entity(t.tail);
    const double base = score(model, h, t.relation, tail);
    for (int i = 0; i < samples_per_triple; ++i) {
      Eigen::VectorXd eh, et;
      double norm = 0.0;
      do {
        eh = gaussian_vector(model.dim(), s, rng);
        et = gaussian_vector(model.dim(), s, rng);
        norm = std::sqrt(eh.squaredNorm() + et.squaredNorm());
      } while (norm == 0.0);
      const double diff = std::abs(score(model, h + eh, t.relation, tail + et) - base);
      total += mode == LipschitzMode::ratio ? diff / norm : diff;
    }
  }
  return total / (static_cast<double>(triples.size()) * samples_per_triple);
}

struct FoldInConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

// Places entities that are unknown to `model` by minimizing the hinge loss of
// the triples in `links` that mention them, with every existing parameter
// frozen. Returns the model extended by one row per new entity. `links` may
// also contain triples among known entities; they act only as filters for
// tail corruption.
inline KgModel fold_in(const KgModel& model, const TripleStore& links, const FoldInConfig& config) {
  KgModel out = model;
  const auto known = model.entities.size();
  for (const auto& label : links.entities().labels()) out.entities.add(label);
  const auto total = out.entities.size();
  if (total == known) return out;

  Rng rng(derive_seed(config.seed, 3));
  const double bound = 0.5 / std::sqrt(static_cast<double>(model.dim()));
  out.params.entities.conservativeResize(static_cast<Eigen::Index>(total), model.dim());
  for (auto e = known; e < total; ++e)
    for (int j = 0; j < model.dim(); ++j)
      out.params.entities(static_cast<Eigen::Index>(e), j) = uniform(-bound, bound, rng);

  // Triples touching a new entity, re-indexed into the extended vocabulary.
  TripleStore store(out.entities, out.relations);
  std::vector<Triple> active;
  for (const auto& t : links.triples()) {
    const auto r = out.relations.find(links.relation_label(t));
    if (!r) continue;
    Triple mapped{out.entities.at(links.head_label(t)), *r, out.entities.at(links.tail_label(t))};
    store.insert(mapped);
    if (mapped.head >= known || mapped.tail >= known) active.push_back(mapped);
  }
  if (active.empty()) return out;

  std::vector<std::size_t> order(active.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<Triple> positives, negatives;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      positives.clear();
      negatives.clear();
      for (auto i = start; i < stop; ++i) {
        positives.push_back(active[order[i]]);
        negatives.push_back(corrupt_tail(positives.back(), store, rng));
      }
      auto step = loss_and_gradients(out, positives, negatives, Objective::hinge);
      const auto fresh = static_cast<Eigen::Index>(total - known);
      out.params.entities.bottomRows(fresh) -=
          config.learning_rate * step.gradient.entities.bottomRows(fresh);
      if (out.config.max_norm_entities) {
        for (auto e = static_cast<Eigen::Index>(known); e < static_cast<Eigen::Index>(total); ++e) {
          const double n = out.params.entities.row(e).norm();
          if (n > 1.0) out.params.entities.row(e) /= n;
        }
      }
    }
  }
  return out;
}

}  // namespace kgrec
