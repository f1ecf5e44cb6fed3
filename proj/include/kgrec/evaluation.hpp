#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgrec/context.hpp"
#include "kgrec/image_embedding.hpp"
#include "kgrec/kg_model.hpp"
#include "kgrec/parallel.hpp"

namespace kgrec {

inline constexpr const char* kUnlabeled = "?";

struct Link {
  RelationId relation = 0;
  EntityId entity = 0;

  friend auto operator<=>(const Link&, const Link&) = default;
};

// A vector (entity row, image embedding or class mean) and the candidate links
// to rank for it; truth[i] marks candidates[i] as a true link.
struct LinkQuery {
  std::string id;
  std::string label;
  Eigen::VectorXd vector;
  std::vector<Link> candidates;
  std::vector<bool> truth;

  bool labeled() const { return label != kUnlabeled; }
};

inline LinkQuery make_query(std::string id, std::string label, Eigen::VectorXd vector,
                            std::vector<Link> candidates, const std::vector<Link>& true_links) {
  LinkQuery q{std::move(id), std::move(label), std::move(vector), std::move(candidates), {}};
  std::vector<Link> sorted = q.candidates;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("query '" + q.id + "': duplicate candidates");
  const std::set<Link> truth(true_links.begin(), true_links.end());
  for (const auto& l : truth) {
    if (!std::binary_search(sorted.begin(), sorted.end(), l))
      throw std::invalid_argument("query '" + q.id + "': true link missing from candidates");
  }
  q.truth.reserve(q.candidates.size());
  for (const auto& c : q.candidates) q.truth.push_back(truth.contains(c));
  return q;
}

// Every (relation, entity) pair over the model vocabulary.
inline std::vector<Link> all_links(const KgModel& model) {
  std::vector<Link> links;
  links.reserve(model.relations.size() * model.entities.size());
  for (RelationId r = 0; r < model.relations.size(); ++r)
    for (EntityId e = 0; e < model.entities.size(); ++e) links.push_back({r, e});
  return links;
}

// (relation, tail) pairs observed in `store`, mapped into the model vocabulary.
inline std::vector<Link> observed_links(const KgModel& model, const TripleStore& store) {
  std::set<Link> links;
  for (const auto& t : store.triples()) {
    auto r = model.relations.find(store.relation_label(t));
    auto e = model.entities.find(store.tail_label(t));
    if (r && e) links.insert({*r, *e});
  }
  return {links.begin(), links.end()};
}

// Links (r, e) with (head_label, r, e) in any of the stores and r, e known to the model.
inline std::vector<Link> true_links_for(const KgModel& model, const std::string& head_label,
                                        std::span<const TripleStore* const> stores) {
  std::set<Link> links;
  for (const auto* store : stores) {
    const auto head = store->entities().find(head_label);
    if (!head) continue;
    for (const auto& t : store->triples()) {
      if (t.head != *head) continue;
      auto r = model.relations.find(store->relation_label(t));
      auto e = model.entities.find(store->tail_label(t));
      if (r && e) links.insert({*r, *e});
    }
  }
  return {links.begin(), links.end()};
}

struct RankedLink {
  std::size_t candidate = 0;  // index into the query's candidate list
  Link link;
  double raw_score = 0.0;
  double u_score = 0.0;  // 0 when ranked without context
  bool is_true = false;
};

struct QueryRanking {
  std::string query_id;
  std::string label;
  bool context = false;
  std::vector<RankedLink> links;  // best first
};

// Strict order used for ranking: higher u first (context mode), then lower raw
// score, then lower candidate index.
inline bool ranks_before(const RankedLink& a, const RankedLink& b, bool context) {
  if (context && a.u_score != b.u_score) return a.u_score > b.u_score;
  if (a.raw_score != b.raw_score) return a.raw_score < b.raw_score;
  return a.candidate < b.candidate;
}

// True when `a` is at least as good as `b`, ignoring the index tie-break.
inline bool ranks_at_least(const RankedLink& a, const RankedLink& b, bool context) {
  if (context && a.u_score != b.u_score) return a.u_score > b.u_score;
  return a.raw_score <= b.raw_score;
}

inline QueryRanking rank_links(const KgModel& model, const LinkQuery& query,
                               const ContextStats* context = nullptr) {
  if (query.vector.size() != model.dim())
    throw std::invalid_argument("rank_links: query '" + query.id + "' has dimension " +
                                std::to_string(query.vector.size()) + ", model has " +
                                std::to_string(model.dim()));
  if (query.truth.size() != query.candidates.size())
    throw std::invalid_argument("rank_links: truth flags misaligned with candidates");
  QueryRanking out{query.id, query.label, context != nullptr, {}};
  out.links.reserve(query.candidates.size());
  for (std::size_t i = 0; i < query.candidates.size(); ++i) {
    const auto& c = query.candidates[i];
    if (c.relation >= model.relations.size() || c.entity >= model.entities.size())
      throw DataError("rank_links: candidate references unknown entity or relation");
    RankedLink link{i, c, score(model, query.vector, c.relation, model.entity(c.entity)), 0.0,
                    query.truth[i]};
    if (context) link.u_score = rescore(*context, link.raw_score, c.relation, c.entity);
    out.links.push_back(link);
  }
  const bool ctx = out.context;
  std::sort(out.links.begin(), out.links.end(),
            [ctx](const RankedLink& a, const RankedLink& b) { return ranks_before(a, b, ctx); });
  return out;
}

// Mean over true candidates of (#false candidates ranked at or above it) /
// (#false candidates). Ties count against the true candidate. Queries without
// true candidates contribute nothing. Per query the counts are summed as
// integers before dividing.
inline double mean_rank_fraction(std::span<const QueryRanking> rankings) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& q : rankings) {
    const auto falses = static_cast<std::size_t>(
        std::count_if(q.links.begin(), q.links.end(), [](const auto& l) { return !l.is_true; }));
    if (falses == q.links.size()) continue;
    if (falses == 0)
      throw std::invalid_argument("mean_rank_fraction: query '" + q.query_id +
                                  "' has no false candidates");
    // Links are sorted, so equal keys form contiguous groups. Counts stay
    // integral per query so the result does not depend on summation order.
    std::size_t falses_before = 0;
    std::size_t above = 0;
    for (std::size_t begin = 0; begin < q.links.size();) {
      std::size_t end = begin + 1;
      while (end < q.links.size() && ranks_at_least(q.links[end], q.links[begin], q.context))
        ++end;
      std::size_t group_trues = 0;
      for (auto i = begin; i < end; ++i) group_trues += q.links[i].is_true ? 1 : 0;
      const std::size_t group_falses = end - begin - group_trues;
      above += group_trues * (falses_before + group_falses);
      count += group_trues;
      falses_before += group_falses;
      begin = end;
    }
    total += static_cast<double>(above) / static_cast<double>(falses);
  }
  if (count == 0) throw std::invalid_argument("mean_rank_fraction: no true candidates");
  return total / static_cast<double>(count);
}

inline std::size_t true_in_top(const QueryRanking& q, int n) {
  const auto limit = std::min(q.links.size(), static_cast<std::size_t>(n));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < limit; ++i) hits += q.links[i].is_true ? 1 : 0;
  return hits;
}

// Mean number of true links among the top n.
inline double t_at_n(std::span<const QueryRanking> rankings, int n) {
  require(n >= 1, "t_at_n: n must be >= 1");
  if (rankings.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : rankings) total += static_cast<double>(true_in_top(q, n));
  return total / static_cast<double>(rankings.size());
}

// Fraction of queries with at least one true link among the top n.
inline double f_at_n(std::span<const QueryRanking> rankings, int n) {
  require(n >= 1, "f_at_n: n must be >= 1");
  if (rankings.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& q : rankings) hits += true_in_top(q, n) > 0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

enum class EvalMode { per_image, per_class };

inline std::string to_string(EvalMode m) {
  return m == EvalMode::per_class ? "per_class" : "per_image";
}

struct RankingReport {
  std::vector<QueryRanking> rankings;  // scored queries, including unlabeled ones
  double mean_rank = 0.0;
  double t_at_n = 0.0;
  double f_at_n = 0.0;
  int n = 3;
  EvalMode mode = EvalMode::per_image;
  std::size_t scored_queries = 0;  // labeled queries entering the metrics

  nlohmann::json summary() const {
    return {{"mu_r", mean_rank}, {"t_at_n", t_at_n}, {"f_at_n", f_at_n}, {"n", n},
            {"mode", to_string(mode)}, {"queries", scored_queries}};
  }
};

// Collapses labeled queries sharing a label into one query on their class
// mean. Candidates and truth come from the first query of each class.
// Unlabeled queries pass through unchanged.
inline std::vector<LinkQuery> collapse_by_class(const std::vector<LinkQuery>& queries) {
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> order;
  std::vector<LinkQuery> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!queries[i].labeled()) continue;
    auto [it, inserted] = groups.try_emplace(queries[i].label);
    if (inserted) order.push_back(queries[i].label);
    it->second.push_back(i);
  }
  for (const auto& label : order) {
    const auto& members = groups[label];
    std::vector<Eigen::VectorXd> vectors;
    for (auto i : members) vectors.push_back(queries[i].vector);
    LinkQuery q = queries[members.front()];
    q.id = label;
    q.vector = class_mean(vectors);
    out.push_back(std::move(q));
  }
  for (const auto& q : queries) {
    if (!q.labeled()) out.push_back(q);
  }
  return out;
}

inline RankingReport evaluate_dataset(const KgModel& model, const std::vector<LinkQuery>& queries,
                                      const ContextStats* context, int n,
                                      EvalMode mode = EvalMode::per_image) {
  require(n >= 1, "evaluate_dataset: n must be >= 1");
  const auto effective = mode == EvalMode::per_class ? collapse_by_class(queries) : queries;

  RankingReport report;
  report.n = n;
  report.mode = mode;
  report.rankings.resize(effective.size());
  parallel_for(effective.size(),
               [&](std::size_t i) { report.rankings[i] = rank_links(model, effective[i], context); });

  std::vector<QueryRanking> scored;
  for (const auto& r : report.rankings) {
    if (r.label != kUnlabeled) scored.push_back(r);
  }
  report.scored_queries = scored.size();
  if (!scored.empty()) {
    bool any_true = false;
    for (const auto& q : scored)
      for (const auto& l : q.links) any_true = any_true || l.is_true;
    report.mean_rank = any_true ? mean_rank_fraction(scored) : 0.0;
    report.t_at_n = t_at_n(scored, n);
    report.f_at_n = f_at_n(scored, n);
  }
  return report;
}

inline std::string ranking_csv(const RankingReport& report, const KgModel& model,
                               std::size_t top = 0) {
  std::ostringstream out;
  out.precision(17);
  out << "query_id,rank,relation,entity,raw_score,u_score,is_true\n";
  for (const auto& q : report.rankings) {
    const auto limit = top == 0 ? q.links.size() : std::min(top, q.links.size());
    for (std::size_t i = 0; i < limit; ++i) {
      const auto& l = q.links[i];
      out << q.query_id << ',' << i + 1 << ',' << model.relations.label(l.link.relation) << ','
          << model.entities.label(l.link.entity) << ',' << l.raw_score << ',' << l.u_score << ','
          << (l.is_true ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

}  // namespace kgrec
