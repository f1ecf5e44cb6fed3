#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"

namespace kgrec {
namespace {

using testing::chain5;
using testing::parse;
using testing::store_of;

std::set<std::tuple<EntityId, RelationId, EntityId>> as_set(const TripleStore& s) {
  std::set<std::tuple<EntityId, RelationId, EntityId>> out;
  for (const auto& t : s.triples()) out.insert({t.head, t.relation, t.tail});
  return out;
}

TEST(TripleStoreTest, DuplicateLinesCollapse) {
  LoadStats stats;
  std::istringstream in("dog\thypernym\tmammal\ndog\thypernym\tmammal\n");
  const auto store = read_triples(in, &stats);
  EXPECT_EQ(store.size(), 1u);
  EXPECT_EQ(store.entities().size(), 2u);
  EXPECT_EQ(store.relations().size(), 1u);
  EXPECT_EQ(stats.duplicates, 1u);
}

TEST(TripleStoreTest, WrongFieldCountReportsLine) {
  std::istringstream in("a\tr\n");
  try {
    read_triples(in, nullptr, "f.tsv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("f.tsv:1:"), std::string::npos) << e.what();
  }
  std::istringstream later("a\tr\tb\n# note\n\nx\ty\tz\tw\n");
  try {
    read_triples(later, nullptr, "g.tsv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("g.tsv:4:"), std::string::npos) << e.what();
  }
}

TEST(TripleStoreTest, ThreeLineParse) {
  const auto store = parse("a\tr\tb\nb\tr\tc\na\ts\tc\n");
  EXPECT_EQ(store.size(), 3u);
  EXPECT_EQ(store.entities().labels(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(store.relations().labels(), (std::vector<std::string>{"r", "s"}));
  EXPECT_TRUE(store.contains(store.entities().at("a"), store.relations().at("s"),
                             store.entities().at("c")));
  EXPECT_FALSE(store.contains(store.entities().at("a"), store.relations().at("r"),
                              store.entities().at("c")));
}

TEST(TripleStoreTest, EmptyInputIsEmptyStore) {
  EXPECT_TRUE(parse("").empty());
  EXPECT_TRUE(parse("# only a comment\n\n").empty());
}

TEST(TripleStoreTest, WriteReadRoundTrip) {
  const auto store = parse("a\tr\tb\nb\tr\tc\na\ts\tc\n");
  std::ostringstream out;
  write_triples(out, store);
  EXPECT_EQ(out.str(), "a\tr\tb\nb\tr\tc\na\ts\tc\n");
  const auto again = parse(out.str());
  EXPECT_EQ(again.triples(), store.triples());
}

TEST(TripleStoreTest, MissingFileIsDataError) {
  EXPECT_THROW(load_triples("/nonexistent/kgrec.tsv"), DataError);
}

TEST(TripleStoreTest, VocabularyLookup) {
  Vocabulary v;
  EXPECT_EQ(v.add("x"), 0u);
  EXPECT_EQ(v.add("y"), 1u);
  EXPECT_EQ(v.add("x"), 0u);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_FALSE(v.find("z").has_value());
  EXPECT_THROW(v.at("z"), DataError);
}

TEST(TransitiveExpandTest, ThreeChain) {
  const auto store = store_of({{"a", "r", "b"}, {"b", "r", "c"}});
  const auto out = transitive_expand(store, std::vector<std::string>{"r"}, 4);
  EXPECT_EQ(out.size(), 3u);
  EXPECT_TRUE(out.contains(0, 0, 2));
}

TEST(TransitiveExpandTest, FiveChainDepthFour) {
  const auto out = transitive_expand(chain5(), std::vector<std::string>{"r"}, 4);
  EXPECT_EQ(out.size(), 10u);
  EXPECT_EQ(as_set(out), oracle::closure(chain5(), {0}, 4));
}

TEST(TransitiveExpandTest, FiveChainDepthTwo) {
  const auto store = chain5();
  const auto out = transitive_expand(store, std::vector<std::string>{"r"}, 2);
  EXPECT_EQ(out.size(), 7u);
  const auto& e = store.entities();
  EXPECT_TRUE(out.contains(e.at("a"), 0, e.at("c")));
  EXPECT_TRUE(out.contains(e.at("b"), 0, e.at("d")));
  EXPECT_TRUE(out.contains(e.at("c"), 0, e.at("e")));
}

TEST(TransitiveExpandTest, InputUnmodifiedAndPrefixPreserved) {
  const auto store = chain5();
  const auto before = store.triples();
  const auto out = transitive_expand(store, std::vector<std::string>{"r"}, 3);
  EXPECT_EQ(store.triples(), before);
  ASSERT_GE(out.size(), before.size());
  EXPECT_TRUE(std::equal(before.begin(), before.end(), out.triples().begin()));
}

TEST(TransitiveExpandTest, RelationsDoNotMix) {
  const auto store = store_of({{"a", "r", "b"}, {"b", "s", "c"}});
  const auto out = transitive_expand(store, std::vector<std::string>{"r", "s"}, 4);
  EXPECT_EQ(out.size(), 2u);
}

TEST(TransitiveExpandTest, NonTransitiveRelationUntouched) {
  const auto store = store_of({{"a", "r", "b"}, {"b", "r", "c"}, {"a", "m", "b"}, {"b", "m", "c"}});
  const auto out = transitive_expand(store, std::vector<std::string>{"r"}, 4);
  EXPECT_EQ(out.size(), 5u);
}

TEST(TransitiveExpandTest, CycleAddsSelfLoops) {
  const auto store = store_of({{"a", "r", "b"}, {"b", "r", "a"}});
  const auto out = transitive_expand(store, std::vector<std::string>{"r"}, 2);
  EXPECT_EQ(as_set(out), oracle::closure(store, {0}, 2));
  EXPECT_TRUE(out.contains(0, 0, 0));
}

TEST(TransitiveExpandTest, BadArguments) {
  EXPECT_THROW(transitive_expand(chain5(), std::vector<RelationId>{0}, 0), std::invalid_argument);
  EXPECT_THROW(transitive_expand(chain5(), std::vector<RelationId>{3}, 2), DataError);
}

TEST(TransitiveExpandTest, RandomGraphsMatchOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> nodes(2, 15), rels(1, 3);
    const int n = nodes(rng), m = rels(rng);
    TripleStore store;
    std::uniform_int_distribution<int> pick(0, n - 1), pr(0, m - 1);
    for (int i = 0; i < 2 * n; ++i)
      store.insert("n" + std::to_string(pick(rng)), "r" + std::to_string(pr(rng)),
                   "n" + std::to_string(pick(rng)));
    std::set<RelationId> transitive;
    std::vector<RelationId> ids;
    for (RelationId r = 0; r < store.relations().size(); r += 2) {
      transitive.insert(r);
      ids.push_back(r);
    }
    for (int depth = 1; depth <= 4; ++depth) {
      const auto out = transitive_expand(store, ids, depth);
      EXPECT_EQ(as_set(out), oracle::closure(store, transitive, depth)) << trial << " " << depth;
      EXPECT_EQ(out.size(), as_set(out).size());
      if (depth == 1) EXPECT_EQ(out.triples(), store.triples());
    }
  }
}

TEST(SplitTest, HoldoutPartition) {
  const auto store = store_of({{"a", "r", "b"}, {"a", "r", "c"}, {"c", "r", "b"}});
  const auto splits = make_splits(store, {store.entities().at("c")}, 0.0, 1);
  EXPECT_EQ(splits.train.size(), 1u);
  EXPECT_EQ(splits.hard_test.size(), 2u);
  EXPECT_TRUE(splits.standard_test.empty());
  EXPECT_EQ(splits.holdout, std::vector<std::string>{"c"});
  EXPECT_FALSE(splits.train.entities().contains("c"));
}

TEST(SplitTest, NoHoldoutNoTestIsIdentity) {
  const auto store = chain5();
  const auto splits = make_splits(store, {}, 0.0, 1);
  EXPECT_EQ(splits.train.size(), store.size());
  EXPECT_TRUE(splits.hard_test.empty());
  EXPECT_TRUE(splits.standard_test.empty());
}

TEST(SplitTest, TwoPercentOfThousand) {
  TripleStore store;
  Rng rng(3);
  std::uniform_int_distribution<int> pick(0, 99);
  while (store.size() < 1000)
    store.insert("n" + std::to_string(pick(rng)), "r", "n" + std::to_string(pick(rng)));
  const auto splits = make_splits(store, {}, 0.02, 9);
  EXPECT_EQ(splits.standard_test.size(), 20u);
  EXPECT_EQ(splits.train.size(), 980u);
}

TEST(SplitTest, InvariantsOnToyGraph) {
  const auto store = transitive_expand(gen_toy_graph(3, 3, 10, 2), default_transitive_relations(), 4);
  std::vector<EntityId> holdout{5, 17, 30};
  const auto splits = make_splits(store, holdout, 0.1, 4);
  auto labeled = [](const TripleStore& s) {
    std::set<std::array<std::string, 3>> out;
    for (const auto& t : s.triples()) out.insert({s.head_label(t), s.relation_label(t), s.tail_label(t)});
    return out;
  };
  const auto all = labeled(store);
  const auto train = labeled(splits.train), test = labeled(splits.standard_test),
             hard = labeled(splits.hard_test);
  std::set<std::array<std::string, 3>> joined;
  for (const auto* part : {&train, &test, &hard}) {
    for (const auto& t : *part) EXPECT_TRUE(joined.insert(t).second) << "overlap";
  }
  EXPECT_EQ(joined, all);
  const std::set<std::string> held(splits.holdout.begin(), splits.holdout.end());
  for (const auto& t : train) {
    EXPECT_FALSE(held.contains(t[0]) || held.contains(t[2]));
  }
  for (const auto& t : test) {
    EXPECT_TRUE(splits.train.entities().contains(t[0]));
    EXPECT_TRUE(splits.train.entities().contains(t[2]));
  }
  for (const auto& t : hard) EXPECT_TRUE(held.contains(t[0]) || held.contains(t[2]));
}

TEST(SplitTest, Deterministic) {
  const auto store = transitive_expand(gen_toy_graph(3, 3, 10, 2), default_transitive_relations(), 4);
  const auto a = make_splits(store, {}, 0.05, 8);
  const auto b = make_splits(store, {}, 0.05, 8);
  EXPECT_EQ(a.standard_test.triples(), b.standard_test.triples());
  EXPECT_EQ(a.train.triples(), b.train.triples());
}

TEST(SplitTest, Errors) {
  const auto store = chain5();
  EXPECT_THROW(make_splits(store, {}, 1.5, 1), std::invalid_argument);
  EXPECT_THROW(make_splits(store, {}, -0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_splits(store, {99}, 0.0, 1), DataError);
  // Every chain edge is the last train edge of an endpoint.
  EXPECT_THROW(make_splits(store_of({{"a", "r", "b"}, {"c", "r", "d"}}), {}, 0.5, 1), Unsatisfiable);
}

TEST(SplitTest, Manifest) {
  const auto store = store_of({{"a", "r", "b"}, {"a", "r", "c"}, {"c", "r", "b"}});
  const auto splits = make_splits(store, {2}, 0.0, 7);
  const auto j = split_manifest(splits, 7, 0.0);
  EXPECT_EQ(j.at("format"), "kgrec-splits-v1");
  EXPECT_EQ(j.at("holdout"), nlohmann::json::array({"c"}));
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("test_fraction"), 0.0);
}

TEST(CorruptTailTest, OnlyCandidate) {
  const auto store = store_of({{"a", "r", "b"}});
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto t = corrupt_tail(store.triples()[0], store, rng);
    EXPECT_EQ(t, (Triple{0, 0, 0}));
  }
}

TEST(CorruptTailTest, MembershipExcluded) {
  const auto store = store_of({{"a", "r", "b"}, {"a", "r", "c"}});
  Rng rng(2);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(corrupt_tail(store.triples()[0], store, rng).tail, 0u);
}

TEST(CorruptTailTest, FullRowIsUnsatisfiable) {
  const auto store = store_of({{"a", "r", "a"}, {"a", "r", "b"}});
  Rng rng(3);
  EXPECT_THROW(corrupt_tail(store.triples()[0], store, rng), Unsatisfiable);
}

TEST(CorruptTailTest, NeverOriginalNeverKnownAndUniform) {
  TripleStore store;
  for (int i = 1; i <= 4; ++i) store.insert("h", "r", "t" + std::to_string(i));
  for (int i = 5; i <= 10; ++i) store.insert("x", "r", "t" + std::to_string(i));
  // Valid corruptions of (h, r, t1): h, x, t5..t10 -> 8 entities.
  Rng rng(4);
  std::map<EntityId, int> hits;
  constexpr int kDraws = 40000;
  for (int i = 0; i < kDraws; ++i) {
    const auto c = corrupt_tail(store.triples()[0], store, rng);
    ASSERT_FALSE(store.contains(c));
    ASSERT_NE(c.tail, store.triples()[0].tail);
    ++hits[c.tail];
  }
  ASSERT_EQ(hits.size(), 8u);
  // Binomial(kDraws, 1/8): 5 standard deviations.
  const double p = 1.0 / 8.0, mean = kDraws * p, sd = std::sqrt(kDraws * p * (1 - p));
  for (const auto& [e, n] : hits) EXPECT_NEAR(n, mean, 5 * sd) << store.entities().label(e);
}

TEST(ToyGraphTest, TreeArithmetic) {
  const auto store = gen_toy_graph(2, 3, 0, 1);
  EXPECT_EQ(store.entities().size(), 15u);
  std::size_t hyper = 0, hypo = 0;
  for (const auto& t : store.triples()) {
    hyper += store.relation_label(t) == relation_names::hypernym;
    hypo += store.relation_label(t) == relation_names::hyponym;
  }
  EXPECT_EQ(hyper, 14u);
  EXPECT_EQ(hypo, 14u);
}

TEST(ToyGraphTest, MeronymCount) {
  const auto store = gen_toy_graph(2, 3, 5, 1);
  std::size_t mero = 0, holo = 0;
  for (const auto& t : store.triples()) {
    mero += store.relation_label(t) == relation_names::part_meronym;
    holo += store.relation_label(t) == relation_names::part_holonym;
  }
  EXPECT_EQ(mero, 5u);
  EXPECT_EQ(holo, 5u);
}

TEST(ToyGraphTest, SameSeedSameBytes) {
  std::ostringstream a, b, c;
  write_triples(a, gen_toy_graph(3, 3, 12, 5));
  write_triples(b, gen_toy_graph(3, 3, 12, 5));
  write_triples(c, gen_toy_graph(3, 3, 12, 6));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

}  // namespace
}  // namespace kgrec
