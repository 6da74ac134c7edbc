#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gnce/error.hpp"
#include "gnce/matcher.hpp"
#include "gnce/model.hpp"
#include "gnce/train.hpp"
#include "test_util.hpp"

using namespace gnce;
using gnce::testing::B;
using gnce::testing::P;
using gnce::testing::V;

namespace {

ModelConfig small_config(MessageFn m, std::size_t D = 6, std::size_t H = 5) {
  ModelConfig c;
  c.D = D;
  c.H = H;
  c.message = m;
  return c;
}

const MessageFn kAll[] = {MessageFn::Tpn, MessageFn::GineConv, MessageFn::TpnUndirected};

// Store plus embedding table of width D - 1 over every atom.
struct World {
  TripleStore store;
  EmbeddingTable table;
  World(std::size_t dim, std::uint64_t seed) : table(dim) {
    Rng rng(seed);
    store = gnce::testing::random_store(rng, 40, 4, 300);
    for (AtomId id = 0; id < store.num_atoms(); ++id) {
      std::vector<float> in(dim), out(dim, 0.0f);
      for (auto& x : in) x = static_cast<float>(rng.uniform(-1, 1));
      table.add(id, in, out);
    }
  }
};

std::vector<QueryGraph> labelled_queries(const TripleStore& s, Rng& rng, std::size_t n) {
  std::vector<QueryGraph> out;
  while (out.size() < n) {
    auto q = gnce::testing::random_query(s, rng, 3, 3);
    auto c = count_solutions(s, q).count;
    if (c >= 1) out.push_back(q.with_cardinality(c));
  }
  return out;
}

}  // namespace

TEST(Model, ZeroParametersGiveZero) {
  Rng rng(1);
  for (auto m : kAll) {
    GnceModel model(small_config(m));
    model.set_zero();
    for (int i = 0; i < 5; ++i) EXPECT_EQ(model.forward(gnce::testing::random_featurization(rng, 6, 4, 5)), 0.0);
  }
}

TEST(Model, FreshModelPredictsZeroLog) {
  Rng rng(2);
  GnceModel model(small_config(MessageFn::Tpn));
  EXPECT_EQ(model.forward(gnce::testing::random_featurization(rng, 6, 3, 3)), 0.0);
}

TEST(Model, ParameterCount) {
  GnceModel tpn(ModelConfig{});
  EXPECT_EQ(tpn.num_parameters(), 113'020u);
  // 2 layers x (W 101x303 + b 101 + 2 x (101x101 + 101)) + head (101x101 + 101 + 101 + 1)
  EXPECT_EQ(tpn.num_parameters(), 2u * (101 * 303 + 101 + 2 * (101 * 101 + 101)) + (101 * 101 + 101 + 101 + 1));
  ModelConfig g;
  g.message = MessageFn::GineConv;
  EXPECT_EQ(GnceModel(g).num_parameters(), 2u * 2 * (101 * 101 + 101) + (101 * 101 + 101 + 101 + 1));
}

TEST(Model, PermutationInvariance) {
  Rng rng(3);
  for (auto m : kAll) {
    GnceModel model(small_config(m));
    model.randomize(7);
    for (int i = 0; i < 50; ++i) {
      auto f = gnce::testing::random_featurization(rng, 6, 2 + rng.index(6), 8);
      auto g = gnce::testing::permute_featurization(f, rng);
      EXPECT_NEAR(model.forward(f), model.forward(g), 1e-9);
    }
  }
}

TEST(Model, TpnIsDirectionSensitive) {
  Rng rng(4);
  int differ = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GnceModel model(small_config(MessageFn::Tpn));
    model.randomize(seed);
    auto f = gnce::testing::random_featurization(rng, 6, 2, 1);
    differ += std::abs(model.forward(f) - model.forward(gnce::testing::reverse_edges(f))) > 1e-9;
  }
  EXPECT_GE(differ, 19);
}

TEST(Model, UndirectedArmsIgnoreDirection) {
  Rng rng(5);
  for (auto m : {MessageFn::GineConv, MessageFn::TpnUndirected}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      GnceModel model(small_config(m));
      model.randomize(seed);
      auto f = gnce::testing::random_featurization(rng, 6, 4, 6);
      EXPECT_NEAR(model.forward(f), model.forward(gnce::testing::reverse_edges(f)), 1e-12);
    }
  }
}

TEST(Model, EpsilonChangesGineConv) {
  Rng rng(6);
  auto c0 = small_config(MessageFn::GineConv), c1 = c0;
  c1.epsilon = 1.0;
  GnceModel m0(c0), m1(c1);
  m0.randomize(3);
  m1.randomize(3);
  auto f = gnce::testing::random_featurization(rng, 6, 3, 3);
  EXPECT_NE(m0.forward(f), m1.forward(f));
}

TEST(Model, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  for (auto m : kAll) {
    std::size_t checked = 0, passed = 0;
    for (int q = 0; q < 10; ++q) {
      GnceModel model(small_config(m, 7, 6));
      model.randomize(100 + q);
      auto f = gnce::testing::random_featurization(rng, 7, 2 + rng.index(5), 6);
      auto r = gnce::testing::gradient_check(model, f, rng.uniform(0, 5), 200, 1e-4, 1e-4, rng);
      checked += r.checked;
      passed += r.passed;
    }
    EXPECT_GE(static_cast<double>(passed), 0.99 * static_cast<double>(checked)) << message_fn_name(m);
  }
}

TEST(Model, BatchGradientIsMeanOfSingles) {
  Rng rng(8);
  GnceModel model(small_config(MessageFn::Tpn));
  model.randomize(9);
  auto f1 = gnce::testing::random_featurization(rng, 6, 3, 3);
  auto f2 = gnce::testing::random_featurization(rng, 6, 5, 6);
  const QueryFeaturization* both[] = {&f1, &f2};
  const QueryFeaturization* one[] = {&f1};
  const QueryFeaturization* two[] = {&f2};
  std::vector<Tensor> gb, g1, g2;
  double lb = model.loss_and_gradient(both, std::vector<double>{1.0, 2.0}, &gb);
  double l1 = model.loss_and_gradient(one, std::vector<double>{1.0}, &g1);
  double l2 = model.loss_and_gradient(two, std::vector<double>{2.0}, &g2);
  EXPECT_NEAR(lb, 0.5 * (l1 + l2), 1e-12);
  for (std::size_t t = 0; t < gb.size(); ++t)
    for (std::size_t i = 0; i < gb[t].size(); ++i)
      ASSERT_NEAR(gb[t].data[i], 0.5 * (g1[t].data[i] + g2[t].data[i]), 1e-10);
  auto outs = model.forward_batch(both);
  EXPECT_NEAR(outs[0], model.forward(f1), 1e-12);
  EXPECT_NEAR(outs[1], model.forward(f2), 1e-12);
}

TEST(Model, HeadBiasGradientOfZeroModel) {
  Rng rng(9);
  GnceModel model(small_config(MessageFn::Tpn));
  model.set_zero();
  auto f = gnce::testing::random_featurization(rng, 6, 3, 2);
  const QueryFeaturization* batch[] = {&f};
  const double y = 40.0;
  std::vector<Tensor> grads;
  model.loss_and_gradient(batch, std::vector<double>{std::log(y)}, &grads);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (model.params()[t].name == "head.b2")
      EXPECT_NEAR(grads[t].data[0], 2 * (0 - std::log(y)), 1e-12);
    else
      for (double g : grads[t].data) EXPECT_EQ(g, 0.0) << model.params()[t].name;
  }
}

TEST(Model, IsolatedNodeLeavesMessageWeightsUntouched) {
  GnceModel model(small_config(MessageFn::Tpn));
  model.randomize(11);
  QueryFeaturization f;
  f.dim = 6;
  f.num_nodes = 1;
  f.node_atoms = {QueryAtom::var("x")};
  f.node_features.assign(6, 0.0);
  const QueryFeaturization* batch[] = {&f};
  std::vector<Tensor> grads;
  model.loss_and_gradient(batch, std::vector<double>{2.0}, &grads);
  double other = 0;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    const auto& name = model.params()[t].name;
    bool message = name == "l1.W" || name == "l1.b" || name == "l2.W" || name == "l2.b";
    for (double g : grads[t].data) {
      if (message) ASSERT_EQ(g, 0.0) << name;
      else other += std::abs(g);
    }
  }
  EXPECT_GT(other, 0.0);
}

TEST(Model, WrongFeatureWidthRejected) {
  Rng rng(10);
  GnceModel model(small_config(MessageFn::Tpn));
  EXPECT_THROW(model.forward(gnce::testing::random_featurization(rng, 5, 2, 1)), PreconditionError);
}

TEST(Loss, Examples) {
  GnceModel model(small_config(MessageFn::Tpn));
  Rng rng(11);
  auto f = gnce::testing::random_featurization(rng, 6, 2, 1);
  // Fresh model outputs 0; move the head bias to reach any target output.
  auto with_output = [&](double out) {
    model.param("head.b2").data[0] = out;
    return model;
  };
  EXPECT_NEAR(query_loss(with_output(std::log(8.0)), f, 8), 0.0, 1e-24);
  EXPECT_EQ(query_loss(with_output(0.0), f, 1), 0.0);
  EXPECT_NEAR(query_loss(with_output(1.0), f, std::exp(2.0)), 1.0, 1e-12);
  EXPECT_THROW(query_loss(model, f, 0.5), PreconditionError);
}

TEST(Adam, FirstStepMovesEachCoordinateByLr) {
  GnceModel model(small_config(MessageFn::Tpn));
  auto before = model.params();
  auto grads = model.zeros_like();
  for (auto& g : grads)
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = (i % 2 ? 3.0 : -0.01);
  model.adam_step(grads, AdamConfig{0.01});
  EXPECT_EQ(model.adam.step, 1u);
  for (std::size_t t = 0; t < grads.size(); ++t)
    for (std::size_t i = 0; i < grads[t].size(); ++i)
      ASSERT_NEAR(model.params()[t].data[i] - before[t].data[i], i % 2 ? -0.01 : 0.01, 1e-8);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(12);
  auto c = small_config(MessageFn::TpnUndirected);
  c.epsilon = 0.25;
  c.seed = 99;
  GnceModel model(c);
  model.randomize(5);
  auto grads = model.zeros_like();
  for (auto& g : grads)
    for (auto& x : g.data) x = rng.uniform(-1, 1);
  model.adam_step(grads, {});
  std::stringstream buf;
  model.write(buf);
  auto back = GnceModel::read(buf);
  EXPECT_EQ(back, model);
  auto f = gnce::testing::random_featurization(rng, 6, 4, 4);
  EXPECT_EQ(back.forward(f), model.forward(f));
}

TEST(Checkpoint, TruncatedAndCorruptFiles) {
  GnceModel model(small_config(MessageFn::Tpn));
  std::stringstream buf;
  model.write(buf);
  const std::string bytes = buf.str();
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    EXPECT_THROW(GnceModel::read(in), DataError) << cut;
  }
  std::istringstream extra(bytes + "x");
  EXPECT_THROW(GnceModel::read(extra), DataError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_in(bad);
  EXPECT_THROW(GnceModel::read(bad_in), DataError);
}

TEST(Checkpoint, MessageFunctionMismatch) {
  GnceModel model(small_config(MessageFn::Tpn));
  std::stringstream buf;
  model.write(buf);
  std::istringstream in(buf.str());
  EXPECT_THROW(GnceModel::read(in, MessageFn::GineConv), ConfigMismatchError);
  std::istringstream ok(buf.str());
  EXPECT_NO_THROW(GnceModel::read(ok, MessageFn::Tpn));
}

TEST(Train, UntrainedLossIsMeanSquaredLog) {
  World w(5, 13);
  Rng rng(13);
  auto qs = labelled_queries(w.store, rng, 40);
  GnceModel model(small_config(MessageFn::Tpn));
  auto fz = make_featurizer(model, w.store, &w.table);
  double want = 0;
  for (const auto& q : qs) want += std::pow(std::log(double(*q.true_cardinality())), 2);
  want /= static_cast<double>(qs.size());
  double got = 0;
  for (const auto& q : qs) got += query_loss(model, fz.featurize(q), double(*q.true_cardinality()));
  EXPECT_NEAR(got / static_cast<double>(qs.size()), want, 1e-12);

  TrainConfig tc;
  tc.epochs = 1;
  auto trace = train(model, qs, fz, tc).epoch_loss;
  ASSERT_EQ(trace.size(), 1u);
  EXPECT_NEAR(trace[0], want, 0.05 * want);
}

TEST(Train, MemorizesOneQuery) {
  // Full-width model with the default optimizer settings.
  World w(100, 14);
  Rng rng(14);
  auto qs = labelled_queries(w.store, rng, 1);
  GnceModel model(ModelConfig{});
  auto fz = make_featurizer(model, w.store, &w.table);
  TrainConfig tc;
  tc.epochs = 500;
  auto trace = train(model, qs, fz, tc).epoch_loss;
  const double y = double(*qs[0].true_cardinality());
  EXPECT_LT(query_loss(model, fz.featurize(qs[0]), y), 1e-3) << "trace end " << trace.back();
  EXPECT_NEAR(predict(model, fz, qs[0]), y, 0.05 * y);
}

TEST(Train, DeterministicTrace) {
  World w(5, 15);
  Rng rng(15);
  auto qs = labelled_queries(w.store, rng, 60);
  auto run = [&] {
    GnceModel model(small_config(MessageFn::Tpn));
    auto fz = make_featurizer(model, w.store, &w.table);
    TrainConfig tc;
    tc.epochs = 5;
    tc.lr = 1e-3;
    auto trace = train(model, qs, fz, tc).epoch_loss;
    return std::pair(trace, model);
  };
  auto [t1, m1] = run();
  auto [t2, m2] = run();
  EXPECT_EQ(t1, t2);
  EXPECT_EQ(m1, m2);
}

TEST(Train, RejectsBadCorpus) {
  World w(5, 16);
  GnceModel model(small_config(MessageFn::Tpn));
  auto fz = make_featurizer(model, w.store, &w.table);
  EXPECT_THROW(train(model, std::vector<QueryGraph>{}, fz, {}), PreconditionError);
  auto q = QueryGraph({P(V("x"), B(gnce::testing::pred(0)), V("y"))}, 0);
  EXPECT_THROW(train(model, std::vector<QueryGraph>{q}, fz, {}), PreconditionError);
  EmbeddingTable wrong(3);
  EXPECT_THROW(make_featurizer(model, w.store, &wrong), ConfigMismatchError);
}

TEST(Predict, PositiveAndOrderInvariant) {
  World w(5, 17);
  Rng rng(17);
  GnceModel model(small_config(MessageFn::Tpn));
  auto fz = make_featurizer(model, w.store, &w.table);
  auto qs = labelled_queries(w.store, rng, 30);
  for (const auto& q : qs) EXPECT_EQ(predict(model, fz, q), 1.0);
  model.randomize(4);
  for (const auto& q : qs) {
    auto pats = q.patterns();
    rng.shuffle(std::span(pats));
    double a = predict(model, fz, q), b = predict(model, fz, QueryGraph(pats));
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(std::log(a), std::log(b), 1e-9);
  }
  auto all = predict_all(model, fz, qs, 7);
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_NEAR(all[i], predict(model, fz, qs[i]), 1e-9 * all[i]);
}

TEST(Predict, DirectionMattersUnderRandomWeights) {
  World w(5, 18);
  GnceModel model(small_config(MessageFn::Tpn));
  model.randomize(6);
  auto fz = make_featurizer(model, w.store, &w.table);
  auto e = w.store.atom(w.store.triples()[0].s);
  auto p = w.store.atom(w.store.triples()[0].p);
  double fwd = predict(model, fz, QueryGraph({P(B(e), B(p), V("o"))}));
  double bwd = predict(model, fz, QueryGraph({P(V("s"), B(p), B(e))}));
  EXPECT_NE(fwd, bwd);
}
