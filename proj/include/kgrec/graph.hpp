#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgrec/error.hpp"
#include "kgrec/random.hpp"
#include "kgrec/triple_store.hpp"

namespace kgrec {

namespace relation_names {
inline constexpr const char* hypernym = "hypernym";
inline constexpr const char* hyponym = "hyponym";
inline constexpr const char* part_meronym = "part_meronym";
inline constexpr const char* part_holonym = "part_holonym";
inline constexpr const char* member_meronym = "member_meronym";
inline constexpr const char* member_holonym = "member_holonym";
}  // namespace relation_names

// Relations expanded by default. Membership is not path-transitive.
inline std::vector<std::string> default_transitive_relations() {
  return {relation_names::hypernym, relation_names::hyponym, relation_names::part_meronym,
          relation_names::part_holonym};
}

// Adds (a, r, z) whenever z is reachable from a through at most `max_depth`
// r-edges of the input, for each r in `transitive`. Paths never mix relations.
// Input triples keep their order; added triples follow, sorted.
inline TripleStore transitive_expand(const TripleStore& store,
                                     const std::vector<RelationId>& transitive,
                                     int max_depth) {
  require(max_depth >= 1, "transitive_expand: max_depth must be >= 1");
  for (auto r : transitive) {
    if (r >= store.relations().size())
      throw DataError("transitive_expand: relation id " + std::to_string(r) +
                      " not in vocabulary");
  }

  TripleStore out(store.entities(), store.relations());
  for (const auto& t : store.triples()) out.insert(t);

  const std::set<RelationId> relations(transitive.begin(), transitive.end());
  const auto n = store.entities().size();
  std::vector<Triple> added;
  for (auto r : relations) {
    std::vector<std::vector<EntityId>> adjacency(n);
    for (const auto& t : store.triples()) {
      if (t.relation == r) adjacency[t.head].push_back(t.tail);
    }
    std::vector<int> depth(n, -1);
    std::vector<EntityId> touched;
    for (EntityId source = 0; source < n; ++source) {
      if (adjacency[source].empty()) continue;
      // Depth-bounded BFS; the source itself is only reachable through a cycle.
      std::deque<EntityId> frontier;
      for (auto v : adjacency[source]) {
        if (depth[v] < 0) {
          depth[v] = 1;
          touched.push_back(v);
          frontier.push_back(v);
        }
      }
      while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop_front();
        if (depth[u] >= max_depth) continue;
        for (auto v : adjacency[u]) {
          if (depth[v] < 0) {
            depth[v] = depth[u] + 1;
            touched.push_back(v);
            frontier.push_back(v);
          }
        }
      }
      for (auto v : touched) {
        if (!store.contains(source, r, v)) added.push_back({source, r, v});
        depth[v] = -1;
      }
      touched.clear();
    }
  }
  std::sort(added.begin(), added.end());
  for (const auto& t : added) out.insert(t);
  return out;
}

inline TripleStore transitive_expand(const TripleStore& store,
                                     const std::vector<std::string>& relation_labels,
                                     int max_depth) {
  std::vector<RelationId> ids;
  for (const auto& label : relation_labels) {
    // Relations absent from the store have nothing to expand.
    if (auto id = store.relations().find(label)) ids.push_back(*id);
  }
  return transitive_expand(store, ids, max_depth);
}

struct DatasetSplits {
  TripleStore train;          // vocabulary restricted to E'
  TripleStore standard_test;  // only entities of E'
  TripleStore hard_test;      // every triple touching a holdout entity
  std::vector<std::string> holdout;
};

namespace detail {

inline TripleStore restricted_store(const TripleStore& source,
                                    const std::vector<std::size_t>& indices) {
  TripleStore out;
  for (auto i : indices) {
    const auto& t = source.triples()[i];
    out.insert(source.head_label(t), source.relation_label(t), source.tail_label(t));
  }
  return out;
}

}  // namespace detail

// Holdout triples go to hard_test. The rest is partitioned at random into train
// and standard_test with |standard_test| = round(test_fraction * remaining).
// A triple is only moved to standard_test if both its entities keep at least
// one train triple, so standard_test never references an entity outside E'.
inline DatasetSplits make_splits(const TripleStore& store,
                                 const std::vector<EntityId>& holdout_entities,
                                 double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw std::invalid_argument("make_splits: test_fraction must lie in [0, 1]");
  std::vector<bool> held(store.entities().size(), false);
  for (auto e : holdout_entities) {
    if (e >= held.size()) throw DataError("make_splits: holdout entity not in store");
    held[e] = true;
  }

  const auto& triples = store.triples();
  std::vector<std::size_t> hard;
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (held[triples[i].head] || held[triples[i].tail])
      hard.push_back(i);
    else
      remaining.push_back(i);
  }

  const auto target = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(remaining.size())));

  std::vector<std::size_t> degree(store.entities().size(), 0);
  for (auto i : remaining) {
    ++degree[triples[i].head];
    ++degree[triples[i].tail];
  }

  Rng rng(seed);
  std::vector<std::size_t> order = remaining;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_test(triples.size(), false);
  std::size_t chosen = 0;
  for (auto i : order) {
    if (chosen == target) break;
    const auto& t = triples[i];
    const std::size_t need = t.head == t.tail ? 2 : 1;
    if (degree[t.head] > need && degree[t.tail] > need) {
      --degree[t.head];
      --degree[t.tail];
      in_test[i] = true;
      ++chosen;
    }
  }
  if (chosen < target) {
    throw Unsatisfiable("make_splits: only " + std::to_string(chosen) + " of " +
                        std::to_string(target) +
                        " test triples can be removed without orphaning an entity");
  }

  std::vector<std::size_t> train_idx, test_idx;
  for (auto i : remaining) (in_test[i] ? test_idx : train_idx).push_back(i);

  DatasetSplits splits;
  splits.train = detail::restricted_store(store, train_idx);
  splits.standard_test = detail::restricted_store(store, test_idx);
  splits.hard_test = detail::restricted_store(store, hard);
  for (auto e : holdout_entities) splits.holdout.push_back(store.entities().label(e));
  return splits;
}

inline nlohmann::json split_manifest(const DatasetSplits& splits, std::uint64_t seed,
                                     double test_fraction) {
  return {{"format", "kgrec-splits-v1"},
          {"holdout", splits.holdout},
          {"seed", seed},
          {"test_fraction", test_fraction}};
}

// Uniform corruption of the tail among entities t' != tail with
// (head, relation, t') not in the store.
inline Triple corrupt_tail(const Triple& triple, const TripleStore& store, Rng& rng) {
  const auto n = static_cast<EntityId>(store.entities().size());
  if (n < 2) throw Unsatisfiable("corrupt_tail: store needs at least two entities");
  std::uniform_int_distribution<EntityId> pick(0, n - 1);
  constexpr int kMaxRejections = 32;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const auto candidate = pick(rng);
    if (candidate != triple.tail && !store.contains(triple.head, triple.relation, candidate))
      return {triple.head, triple.relation, candidate};
  }
  std::vector<EntityId> valid;
  for (EntityId e = 0; e < n; ++e) {
    if (e != triple.tail && !store.contains(triple.head, triple.relation, e)) valid.push_back(e);
  }
  if (valid.empty()) {
    throw Unsatisfiable("corrupt_tail: no valid corruption for (" +
                        store.entities().label(triple.head) + ", " +
                        store.relations().label(triple.relation) + ", *)");
  }
  std::uniform_int_distribution<std::size_t> pick_valid(0, valid.size() - 1);
  return {triple.head, triple.relation, valid[pick_valid(rng)]};
}

// Balanced taxonomy with `branching` children per node and `depth` levels below
// the root, plus random part-meronym/holonym pairs. Meronym pairs always point
// from a lower to a higher node index, so the part-of graph is acyclic.
inline TripleStore gen_toy_graph(int branching, int depth, int meronym_count,
                                 std::uint64_t seed) {
  require(branching >= 1, "gen_toy_graph: branching must be >= 1");
  require(depth >= 1, "gen_toy_graph: depth must be >= 1");
  require(meronym_count >= 0, "gen_toy_graph: meronym_count must be >= 0");

  std::vector<std::string> labels{"e0"};
  TripleStore store;
  std::size_t begin = 0;
  for (int level = 1; level <= depth; ++level) {
    const std::size_t end = labels.size();
    for (std::size_t parent = begin; parent < end; ++parent) {
      for (int c = 0; c < branching; ++c) {
        labels.push_back(labels[parent] + "." + std::to_string(c));
        const auto& child = labels.back();
        store.insert(child, relation_names::hypernym, labels[parent]);
        store.insert(labels[parent], relation_names::hyponym, child);
      }
    }
    begin = end;
  }

  const auto nodes = labels.size();
  const std::size_t max_pairs = nodes * (nodes - 1) / 2;
  require(static_cast<std::size_t>(meronym_count) <= max_pairs,
          "gen_toy_graph: more meronym pairs requested than node pairs exist");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
  std::set<std::pair<std::size_t, std::size_t>> used;
  while (used.size() < static_cast<std::size_t>(meronym_count)) {
    auto a = pick(rng);
    auto b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!used.insert({a, b}).second) continue;
    store.insert(labels[a], relation_names::part_meronym, labels[b]);
    store.insert(labels[b], relation_names::part_holonym, labels[a]);
  }
  return store;
}

}  // namespace kgrec
