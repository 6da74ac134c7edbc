#include <gtest/gtest.h>

#include <cmath>

#include "gnce/error.hpp"
#include "gnce/eval.hpp"
#include "test_util.hpp"

using namespace gnce;
using gnce::testing::B;
using gnce::testing::ent;
using gnce::testing::P;
using gnce::testing::pred;
using gnce::testing::V;

namespace {

QueryGraph q_with(std::uint64_t card, std::size_t e1, std::size_t e2 = SIZE_MAX) {
  std::vector<TriplePattern> pats{P(V("x"), B(pred(0)), B(ent(e1)))};
  if (e2 != SIZE_MAX) pats.push_back(P(V("x"), B(pred(1)), B(ent(e2))));
  return QueryGraph(pats, card, QueryShape::Star);
}

}  // namespace

TEST(QError, Examples) {
  EXPECT_EQ(q_error(10, 10), 1.0);
  EXPECT_EQ(q_error(8, 2), 4.0);
  EXPECT_EQ(q_error(2, 8), 4.0);
  EXPECT_THROW(q_error(0, 1), PreconditionError);
  EXPECT_THROW(q_error(1, -2), PreconditionError);
}

TEST(QError, SymmetricAndReflexive) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    double x = std::exp(rng.uniform(-10, 15)), y = std::exp(rng.uniform(-10, 15));
    EXPECT_EQ(q_error(x, y), q_error(y, x));
    EXPECT_EQ(q_error(x, x), 1.0);
    EXPECT_GE(q_error(x, y), 1.0);
  }
}

TEST(Buckets, PowersOfFive) {
  EXPECT_EQ(bucket_of(1), 0u);
  EXPECT_EQ(bucket_of(4), 0u);
  EXPECT_EQ(bucket_of(5), 1u);
  EXPECT_EQ(bucket_of(24), 1u);
  EXPECT_EQ(bucket_of(25), 2u);
  EXPECT_EQ(bucket_of(1953124), 8u);
  EXPECT_EQ(bucket_of(1953125), 9u);
  EXPECT_EQ(bucket_of(UINT64_MAX), 9u);
  EXPECT_EQ(bucket_label(0), "[1,5)");
  EXPECT_EQ(bucket_label(9), "[1953125,inf)");
  // Exactly one bucket per value, matching the interval oracle.
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    std::uint64_t c = 1 + rng.index(5'000'000);
    std::size_t want = 0;
    double lo = 1;
    while (want < 9 && static_cast<double>(c) >= lo * 5) {
      lo *= 5;
      ++want;
    }
    ASSERT_EQ(bucket_of(c), want) << c;
  }
}

TEST(Evaluate, ConstantOneEstimator) {
  std::vector<QueryGraph> qs{q_with(1, 0), q_with(5, 1), q_with(25, 2)};
  auto r = evaluate("one", constant_estimator(1.0), qs, {0});
  EXPECT_NEAR(r.mean_q_error, (1.0 + 5 + 25) / 3, 1e-12);
  EXPECT_EQ(r.median_q_error, 5.0);
  EXPECT_EQ(r.max_q_error, 25.0);
  std::size_t total = 0;
  for (const auto& b : r.buckets) total += b.n;
  EXPECT_EQ(total, 3u);
  EXPECT_EQ(r.buckets[0].n, 1u);
  EXPECT_EQ(r.buckets[1].n, 1u);
  EXPECT_EQ(r.buckets[2].n, 1u);
}

TEST(Evaluate, OracleEstimatorScoresOneEverywhere) {
  Rng rng(3);
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 200; ++i) qs.push_back(q_with(1 + rng.index(10'000'000), i));
  Estimator oracle = [](const QueryGraph& q, std::size_t) {
    return EstimateResult{static_cast<double>(*q.true_cardinality())};
  };
  auto r = evaluate("oracle", oracle, qs);
  EXPECT_EQ(r.mean_q_error, 1.0);
  std::size_t total = 0;
  for (const auto& b : r.buckets) {
    total += b.n;
    if (b.n) {
      EXPECT_EQ(b.mean_q_error, 1.0);
    }
  }
  EXPECT_EQ(total, qs.size());
}

TEST(Evaluate, RefusalsAndNonPositiveEstimatesAreFailures) {
  std::vector<QueryGraph> qs{q_with(10, 0), q_with(10, 1), q_with(10, 2)};
  Estimator e = [](const QueryGraph&, std::size_t i) {
    EstimateResult r;
    if (i == 1) r.value = 0.0;
    if (i == 2) r.value = 100.0;
    return r;
  };
  auto r = evaluate("x", e, qs, {0});
  EXPECT_EQ(r.failures, 2u);
  EXPECT_TRUE(r.records[0].failed);
  EXPECT_EQ(r.records[0].estimate, 1.0);  // clamped
  EXPECT_EQ(r.records[0].q_error, 10.0);
  EXPECT_EQ(r.records[2].q_error, 10.0);
}

TEST(Evaluate, QueriesWithoutCardinalityRejected) {
  std::vector<QueryGraph> qs{QueryGraph({P(V("x"), B(pred(0)), V("y"))})};
  EXPECT_THROW(evaluate("x", constant_estimator(1), qs), PreconditionError);
}

TEST(Evaluate, WarmupExcludedFromLatency) {
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 15; ++i) qs.push_back(q_with(3, i));
  Estimator e = [](const QueryGraph&, std::size_t i) {
    return EstimateResult{1.0, 0.0, i < 10 ? 1000.0 : 2.0};
  };
  auto r = evaluate("x", e, qs, {10});
  EXPECT_EQ(r.warmup, 10u);
  EXPECT_NEAR(r.mean_inference_ms, 2.0, 1e-12);
  EXPECT_NEAR(r.mean_latency_ms, 2.0, 1e-12);
}

TEST(EvalReport, JsonRoundTrip) {
  Rng rng(4);
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 50; ++i) qs.push_back(q_with(1 + rng.index(100000), i));
  Estimator e = [&](const QueryGraph&, std::size_t i) {
    EstimateResult r{std::exp(rng.uniform(-2, 12)), rng.uniform(0, 1), rng.uniform(0, 1)};
    if (i % 17 == 3) r.value.reset();
    return r;
  };
  auto r = evaluate("noisy", e, qs, {5});
  auto back = EvalReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back, r);
  auto csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "estimator,bucket,mean_q_error,n,mean_latency_ms");
}

TEST(InductiveSplit, SidesShareNoEntity) {
  Rng rng(5);
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 400; ++i) qs.push_back(q_with(1 + i, rng.index(300), rng.index(300)));
  auto sp = inductive_split(qs, 0.2, 7);
  std::set<Atom> train_atoms, test_atoms;
  for (const auto& q : sp.train)
    for (const auto& x : query_entities(q)) train_atoms.insert(x);
  for (const auto& q : sp.test)
    for (const auto& x : query_entities(q)) test_atoms.insert(x);
  for (const auto& x : test_atoms) EXPECT_FALSE(train_atoms.contains(x));
  EXPECT_EQ(sp.held_out, test_atoms);
  EXPECT_EQ(sp.train.size() + sp.test.size() + sp.discarded, qs.size());
  EXPECT_GT(sp.test.size(), 0u);
  EXPECT_LE(sp.achieved_fraction, 0.2 + 1e-9);
  EXPECT_NEAR(sp.achieved_fraction, double(sp.test.size()) / double(sp.train.size() + sp.test.size()), 1e-12);
  // Predicates are shared freely.
  EXPECT_FALSE(test_atoms.contains(pred(0)));
}

TEST(InductiveSplit, SharedEntityForcesOneSide) {
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 30; ++i) qs.push_back(q_with(1 + i, 0, 1 + i));
  auto sp = inductive_split(qs, 0.2, 1);
  EXPECT_TRUE(sp.train.empty() || sp.test.empty());
  EXPECT_EQ(sp.train.size() + sp.test.size() + sp.discarded, qs.size());
}

TEST(InductiveSplit, DisjointEntitiesReachTheFraction) {
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 100; ++i) qs.push_back(q_with(1 + i, i));
  for (double f : {0.1, 0.2, 0.5}) {
    auto sp = inductive_split(qs, f, 3);
    EXPECT_EQ(sp.discarded, 0u);
    EXPECT_LE(std::abs(static_cast<double>(sp.test.size()) - 100 * f), 1.0);
  }
}

TEST(InductiveSplit, Deterministic) {
  Rng rng(6);
  std::vector<QueryGraph> qs;
  for (int i = 0; i < 200; ++i) qs.push_back(q_with(1 + i, rng.index(150), rng.index(150)));
  auto a = inductive_split(qs, 0.2, 9), b = inductive_split(qs, 0.2, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}
