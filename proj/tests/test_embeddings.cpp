#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "gnce/embeddings.hpp"
#include "gnce/error.hpp"
#include "test_util.hpp"

using namespace gnce;
using gnce::testing::ent;
using gnce::testing::pred;

namespace {

Atom a(const char* s) { return Atom::iri(s); }

AtomId id(const TripleStore& s, const Atom& x) { return *s.find(x); }

// Two communities of n entities each; edges stay inside a community and each
// community has its own predicates.
TripleStore two_communities(Rng& rng, std::size_t n, std::size_t edges) {
  TripleStore::Builder b;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < edges; ++i)
      b.add(ent(c * n + rng.index(n)), pred(c * 3 + rng.index(3)), ent(c * n + rng.index(n)));
  return std::move(b).build();
}

double mean_cosine(const EmbeddingTable& t, const std::vector<AtomId>& xs, const std::vector<AtomId>& ys, bool same) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (same && j <= i) continue;
      auto u = t.lookup(xs[i]), v = t.lookup(ys[j]);
      if (!u || !v) continue;
      sum += cosine_similarity(*u, *v);
      ++n;
    }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST(Walks, DeadEndYieldsSingleAtom) {
  auto s = TripleStore::from_triples(std::vector<Triple>{{a("a"), a("p"), a("b")}});
  AtomId b = id(s, a("b"));
  auto walks = generate_walks(s, std::vector<AtomId>{b}, WalkConfig{});
  ASSERT_EQ(walks.size(), 5u);
  for (const auto& w : walks) EXPECT_EQ(w.atoms, std::vector<AtomId>{b});
}

TEST(Walks, SingleTriple) {
  auto s = TripleStore::from_triples(std::vector<Triple>{{a("a"), a("p"), a("b")}});
  auto walks = generate_walks(s, std::vector<AtomId>{id(s, a("a"))}, WalkConfig{1, 4, false, 1});
  ASSERT_EQ(walks.size(), 1u);
  EXPECT_EQ(walks[0].atoms, (std::vector<AtomId>{id(s, a("a")), id(s, a("p")), id(s, a("b"))}));
}

TEST(Walks, ChainOfFourHops) {
  std::vector<Triple> ts;
  const char* nodes[] = {"a", "b", "c", "d", "e", "f"};
  const char* preds[] = {"p1", "p2", "p3", "p4", "p5"};
  for (int i = 0; i < 5; ++i) ts.push_back({a(nodes[i]), a(preds[i]), a(nodes[i + 1])});
  auto s = TripleStore::from_triples(ts);
  auto walks = generate_walks(s, std::vector<AtomId>{id(s, a("a"))}, WalkConfig{5, 4, false, 9});
  ASSERT_EQ(walks.size(), 5u);
  std::vector<AtomId> want;
  for (int i = 0; i < 4; ++i) {
    want.push_back(id(s, a(nodes[i])));
    want.push_back(id(s, a(preds[i])));
  }
  want.push_back(id(s, a("e")));
  for (const auto& w : walks) EXPECT_EQ(w.atoms, want);
}

TEST(Walks, EveryStepIsAStoreTriple) {
  Rng rng(1);
  auto s = gnce::testing::random_store(rng, 100, 6, 600);
  std::set<IdTriple> triples(s.triples().begin(), s.triples().end());
  for (bool bidi : {false, true}) {
    auto walks = generate_walks(s, s.subjects(), WalkConfig{5, 4, bidi, 3});
    auto pw = generate_predicate_walks(s, s.predicates(), WalkConfig{5, 4, bidi, 3});
    walks.insert(walks.end(), pw.begin(), pw.end());
    for (const auto& w : walks) {
      ASSERT_EQ(w.atoms.size() % 2, 1u);
      ASSERT_LE(w.atoms.size(), 9u);
      for (std::size_t i = 0; i + 2 < w.atoms.size(); i += 2) {
        IdTriple fwd{w.atoms[i], w.atoms[i + 1], w.atoms[i + 2]};
        IdTriple back{w.atoms[i + 2], w.atoms[i + 1], w.atoms[i]};
        ASSERT_TRUE(triples.contains(fwd) || (bidi && triples.contains(back)));
      }
    }
  }
}

TEST(Walks, BlockedAtomsNeverAppear) {
  Rng rng(2);
  auto s = gnce::testing::random_store(rng, 50, 4, 400);
  std::unordered_set<AtomId> blocked;
  for (AtomId x = 0; x < s.num_atoms(); x += 7) blocked.insert(x);
  std::vector<AtomId> all(s.num_atoms());
  for (AtomId x = 0; x < s.num_atoms(); ++x) all[x] = x;
  auto walks = generate_walks(s, all, WalkConfig{5, 4, true, 3}, &blocked);
  auto pw = generate_predicate_walks(s, s.predicates(), WalkConfig{5, 4, true, 3}, &blocked);
  walks.insert(walks.end(), pw.begin(), pw.end());
  ASSERT_FALSE(walks.empty());
  for (const auto& w : walks)
    for (AtomId x : w.atoms) ASSERT_FALSE(blocked.contains(x));
}

TEST(SkipGram, ZeroEpochsKeepsInitialization) {
  std::vector<Walk> walks{{{3, 1, 4}}, {{1, 5}}};
  SkipGramConfig c;
  c.dim = 8;
  c.epochs = 0;
  c.seed = 77;
  auto r = train_skipgram(walks, c);
  EXPECT_TRUE(r.epoch_loss.empty());
  // Vocabulary in first-occurrence order, inputs drawn in row-major order.
  Rng rng(mix_seed({77, 0x5e1f}));
  for (AtomId x : {3u, 1u, 4u, 5u}) {
    auto row = r.table.lookup(x);
    ASSERT_TRUE(row);
    for (float v : *row) {
      EXPECT_FLOAT_EQ(v, static_cast<float>(rng.uniform(-0.5 / 8, 0.5 / 8)));
      EXPECT_LE(std::abs(v), 0.5f / 8);
    }
  }
  for (std::size_t i = 0; i < r.table.size(); ++i)
    for (float v : r.table.output_row(i)) EXPECT_EQ(v, 0.0f);
}

TEST(SkipGram, RepeatedPairScoreRises) {
  std::vector<Walk> walks(20, Walk{{0, 1}});
  walks.push_back(Walk{{2, 3}});
  SkipGramConfig c;
  c.dim = 16;
  c.window = 1;
  c.negatives = 2;
  c.seed = 4;
  auto score = [&](std::size_t epochs) {
    c.epochs = epochs;
    auto t = train_skipgram(walks, c).table;
    auto v = *t.lookup(0);
    double f = 0;
    const auto* rows = &t.ids();
    std::size_t b_row = std::find(rows->begin(), rows->end(), 1u) - rows->begin();
    auto u = t.output_row(b_row);
    for (std::size_t k = 0; k < v.size(); ++k) f += double(v[k]) * u[k];
    return 1.0 / (1.0 + std::exp(-f));
  };
  double prev = score(1);
  for (std::size_t e : {10, 50, 200}) {
    double now = score(e);
    EXPECT_GT(now, prev);
    prev = now;
  }
  EXPECT_GT(prev, 0.9);
}

TEST(SkipGram, CommunitiesSeparate) {
  Rng rng(5);
  const std::size_t n = 40;
  auto s = two_communities(rng, n, 300);
  std::vector<AtomId> all;
  for (AtomId x = 0; x < s.num_atoms(); ++x)
    if (!s.is_predicate(x)) all.push_back(x);
  auto walks = generate_walks(s, all, WalkConfig{10, 4, false, 5});
  SkipGramConfig c;
  c.dim = 32;
  c.epochs = 10;
  auto r = train_skipgram(walks, c);
  std::vector<AtomId> g0, g1;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    if (auto x = s.find(ent(i))) (i < n ? g0 : g1).push_back(*x);
  }
  double intra = 0.5 * (mean_cosine(r.table, g0, g0, true) + mean_cosine(r.table, g1, g1, true));
  double inter = mean_cosine(r.table, g0, g1, false);
  EXPECT_GT(intra - inter, 0.1) << "intra " << intra << " inter " << inter;
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) EXPECT_LE(r.epoch_loss[e], r.epoch_loss[e - 1] * 1.05);
}

TEST(SkipGram, DeterministicBytes) {
  Rng rng(6);
  auto s = gnce::testing::random_store(rng, 60, 5, 400);
  auto walks = generate_walks(s, s.subjects(), WalkConfig{5, 4, false, 8});
  SkipGramConfig c;
  c.dim = 12;
  c.epochs = 3;
  auto one = train_skipgram(walks, c).table;
  auto two = train_skipgram(walks, c).table;
  std::ostringstream b1, b2;
  one.write_binary(b1);
  two.write_binary(b2);
  EXPECT_EQ(b1.str(), b2.str());
  c.seed = 43;
  std::ostringstream b3;
  train_skipgram(walks, c).table.write_binary(b3);
  EXPECT_NE(b1.str(), b3.str());
}

TEST(SkipGram, RejectsEmptyAndBadConfig) {
  SkipGramConfig c;
  EXPECT_THROW(train_skipgram(std::vector<Walk>{}, c), DataError);
  c.dim = 0;
  std::vector<Walk> w{{{1, 2}}};
  EXPECT_THROW(train_skipgram(w, c), PreconditionError);
  c.dim = 4;
  c.window = 0;
  EXPECT_THROW(train_skipgram(w, c), PreconditionError);
}

TEST(EmbeddingTable, LookupAndFormats) {
  auto s = TripleStore::from_triples(
      std::vector<Triple>{{a("a"), a("p"), Atom::literal("\"x y\"@en")}, {Atom::blank("n"), a("p"), a("a")}});
  EmbeddingTable t(3);
  for (AtomId x = 0; x < s.num_atoms(); ++x) {
    std::vector<float> in{float(x), 0.5f, -1.25f}, out{1.0f, 2.0f, float(x)};
    t.add(x, in, out);
  }
  EXPECT_THROW(t.add(0, std::vector<float>{1, 2, 3}, std::vector<float>{1, 2, 3}), DataError);
  EXPECT_FALSE(t.lookup(99));
  EXPECT_FALSE(t.lookup(s, a("missing")));
  auto r1 = t.lookup(s, a("a"));
  ASSERT_TRUE(r1);
  EXPECT_EQ(r1->data(), t.lookup(s, a("a"))->data());

  std::stringstream bin;
  t.write_binary(bin);
  EXPECT_EQ(EmbeddingTable::read_binary(bin), t);

  std::stringstream tsv;
  t.write_tsv(s, tsv);
  auto back = EmbeddingTable::read_tsv(s, tsv);
  ASSERT_EQ(back.size(), t.size());
  for (AtomId x = 0; x < s.num_atoms(); ++x) {
    auto u = *back.lookup(x), v = *t.lookup(x);
    EXPECT_TRUE(std::equal(u.begin(), u.end(), v.begin()));
  }

  std::string bytes = bin.str();
  std::istringstream cut(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(EmbeddingTable::read_binary(cut), DataError);
}
