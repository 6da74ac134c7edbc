#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "gnce/error.hpp"
#include "gnce/kg_store.hpp"
#include "gnce/ntriples.hpp"
#include "test_util.hpp"

using namespace gnce;
using gnce::testing::ent;
using gnce::testing::pred;

namespace {

TripleStore parse(const std::string& text, ParseMode mode = ParseMode::Strict, ParseStats* stats = nullptr) {
  std::istringstream in(text);
  return parse_ntriples(in, mode, stats);
}

const char* kSmall = "<a> <p> <b> .\n<a> <p> <c> .\n<b> <q> <c> .\n";

std::set<Triple> triple_set(const TripleStore& s) {
  std::set<Triple> out;
  for (const auto& t : s.triples()) out.insert(s.decode(t));
  return out;
}

}  // namespace

TEST(NTriples, DuplicateLinesCollapse) {
  ParseStats stats;
  auto s = parse("<a> <p> <b> .\n<a> <p> <b> .", ParseMode::Strict, &stats);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(stats.duplicates, 1u);
}

TEST(NTriples, EmptyInput) {
  auto s = parse("");
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.num_atoms(), 0u);
  EXPECT_EQ(s.occ(Atom::iri("a")), 0u);
}

TEST(NTriples, ThreeLineStore) {
  auto s = parse(kSmall);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.num_atoms(), 5u);  // a b c + p q
  EXPECT_EQ(s.subjects().size(), 2u);
  EXPECT_EQ(s.predicates().size(), 2u);
}

TEST(NTriples, CommentsAndBlankLines) {
  auto s = parse("# header. with dots.\n\n<a> <p> <b> . # trailing. comment\n   \n");
  EXPECT_EQ(s.size(), 1u);
}

TEST(NTriples, LiteralsKeepTheirLexicalForm) {
  auto s = parse("<a> <p> \"x\"@en .\n<a> <p> \"x\" .\n<a> <p> \"x\"^^<http://www.w3.org/2001/XMLSchema#string> .\n"
                 "<a> <p> \"say \\\"hi\\\" .\" .\n");
  EXPECT_EQ(s.size(), 4u);
  EXPECT_TRUE(s.find(Atom::literal("\"x\"@en")));
  EXPECT_TRUE(s.find(Atom::literal("\"say \\\"hi\\\" .\"")));
  EXPECT_FALSE(s.find(Atom::iri("\"x\"")));
}

TEST(NTriples, BlankNodesAreSkolemized) {
  auto s = parse("_:b1 <p> <a> .\n_:b1 <q> _:b2 .\n");
  auto b1 = Atom::blank("b1");
  EXPECT_EQ(b1.kind, AtomKind::BlankSkolemized);
  EXPECT_TRUE(b1.value.starts_with(kSkolemPrefix));
  ASSERT_TRUE(s.find(b1));
  EXPECT_EQ(s.occ(b1), 2u);
  // The skolem IRI read back is the same atom.
  EXPECT_EQ(Atom::iri(b1.value), b1);
}

TEST(NTriples, StrictModeReportsLine) {
  try {
    parse("<a> <p> <b> .\n<a> <p> .\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("<a> <p> <b>\n"), ParseError);          // missing dot
  EXPECT_THROW(parse("<a> \"lit\" <b> .\n"), ParseError);    // literal predicate
  EXPECT_THROW(parse("<a> <p> <b> . junk\n"), ParseError);   // trailing garbage
  EXPECT_THROW(parse("<a> <p> \"open .\n"), ParseError);     // unterminated literal
}

TEST(NTriples, LenientModeSkipsAndCounts) {
  ParseStats stats;
  auto s = parse("<a> <p> <b> .\nbroken line\n<a> <q> <b> .\n<x> .\n", ParseMode::Lenient, &stats);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(stats.skipped, 2u);
  ASSERT_EQ(stats.errors.size(), 2u);
  EXPECT_TRUE(stats.errors[0].starts_with("line 2"));
}

TEST(NTriples, SerializeParseIsIdentityOnTripleSets) {
  Rng rng(3);
  for (int round = 0; round < 10; ++round) {
    TripleStore::Builder b;
    for (int i = 0; i < 200; ++i) {
      Atom o = rng.bernoulli(0.3) ? Atom::literal("\"v" + std::to_string(rng.index(20)) + "\"@en")
               : rng.bernoulli(0.2) ? Atom::blank("n" + std::to_string(rng.index(10)))
                                    : ent(rng.index(40));
      b.add(ent(rng.index(40)), pred(rng.index(5)), o);
    }
    TripleStore s = std::move(b).build();
    std::ostringstream out;
    write_ntriples(s, out);
    TripleStore back = parse(out.str());
    EXPECT_EQ(triple_set(s), triple_set(back));
  }
}

TEST(TripleStore, OccExamples) {
  auto s = parse(kSmall);
  EXPECT_EQ(s.occ(Atom::iri("a")), 2u);
  EXPECT_EQ(s.occ(Atom::iri("b")), 2u);
  EXPECT_EQ(s.occ(Atom::iri("c")), 2u);
  EXPECT_EQ(s.occ(Atom::iri("p")), 2u);
  EXPECT_EQ(s.occ(Atom::iri("unknown")), 0u);
}

TEST(TripleStore, OccCountsSelfLoopOnce) {
  auto s = parse("<a> <p> <a> .\n<a> <a> <b> .\n");
  EXPECT_EQ(s.occ(Atom::iri("a")), 2u);
}

TEST(TripleStore, OccMatchesBruteForce) {
  Rng rng(11);
  for (int round = 0; round < 5; ++round) {
    TripleStore s = gnce::testing::random_store(rng, 300, 12, 10'000);
    // Atoms may be shared between predicate and entity positions.
    TripleStore::Builder b;
    for (const auto& t : s.triples()) b.add(s.decode(t));
    for (int i = 0; i < 200; ++i) b.add(pred(rng.index(12)), pred(rng.index(12)), ent(rng.index(300)));
    s = std::move(b).build();
    ASSERT_LE(s.size(), 10'000u + 200u);
    std::vector<std::uint64_t> oracle(s.num_atoms(), 0);
    for (const auto& t : s.triples()) {
      std::set<AtomId> in{t.s, t.p, t.o};
      for (AtomId a : in) ++oracle[a];
    }
    for (AtomId a = 0; a < s.num_atoms(); ++a) ASSERT_EQ(s.occ(a), oracle[a]) << to_ntriples_term(s.atom(a));
  }
}

TEST(TripleStore, MatchPatternExamples) {
  auto s = parse(kSmall);
  auto a = Atom::iri("a");
  auto r = s.match_pattern(AtomPattern{a, std::nullopt, std::nullopt});
  std::set<Triple> got(r.begin(), r.end());
  std::set<Triple> want{{a, Atom::iri("p"), Atom::iri("b")}, {a, Atom::iri("p"), Atom::iri("c")}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(s.match_pattern(AtomPattern{}).size(), 3u);
  EXPECT_TRUE(s.match_pattern(AtomPattern{Atom::iri("c"), std::nullopt, std::nullopt}).empty());
  EXPECT_TRUE(s.match_pattern(AtomPattern{Atom::iri("nope"), std::nullopt, std::nullopt}).empty());
}

TEST(TripleStore, EveryIndexMatchesNaiveFilter) {
  Rng rng(5);
  TripleStore s = gnce::testing::random_store(rng, 30, 4, 600);
  auto all = s.triples();
  for (int trial = 0; trial < 400; ++trial) {
    IdPattern p;
    const IdTriple& seed = all[rng.index(all.size())];
    auto pick = [&](AtomId from_seed) -> std::optional<AtomId> {
      if (rng.bernoulli(0.5)) return std::nullopt;
      return rng.bernoulli(0.8) ? from_seed : static_cast<AtomId>(rng.index(s.num_atoms()));
    };
    p.s = pick(seed.s);
    p.p = pick(seed.p);
    p.o = pick(seed.o);
    std::vector<IdTriple> naive;
    for (const auto& t : all)
      if ((!p.s || t.s == *p.s) && (!p.p || t.p == *p.p) && (!p.o || t.o == *p.o)) naive.push_back(t);
    auto got = s.match(p);
    std::vector<IdTriple> got_sorted(got.begin(), got.end()), want = naive;
    std::sort(got_sorted.begin(), got_sorted.end());
    std::sort(want.begin(), want.end());
    ASSERT_EQ(got_sorted, want);
  }
  // Each index alone, with one- and two-component prefixes.
  for (int o = 0; o < 6; ++o) {
    auto order = static_cast<IndexOrder>(o);
    auto pos = index_positions(order);
    const IdTriple& t = all[rng.index(all.size())];
    const AtomId parts[3] = {t.s, t.p, t.o};
    for (std::size_t len = 0; len <= 3; ++len) {
      std::vector<AtomId> prefix;
      for (std::size_t k = 0; k < len; ++k) prefix.push_back(parts[pos[k]]);
      std::size_t naive = 0;
      for (const auto& u : all) {
        const AtomId up[3] = {u.s, u.p, u.o};
        bool ok = true;
        for (std::size_t k = 0; k < len; ++k) ok = ok && up[pos[k]] == prefix[k];
        naive += ok;
      }
      EXPECT_EQ(s.scan(order, prefix).size(), naive);
    }
  }
}

TEST(TripleStore, AtomIdsAreDenseFirstSeen) {
  auto s = parse(kSmall);
  EXPECT_EQ(*s.find(Atom::iri("a")), 0u);
  EXPECT_EQ(*s.find(Atom::iri("p")), 1u);
  EXPECT_EQ(*s.find(Atom::iri("b")), 2u);
  EXPECT_EQ(*s.find(Atom::iri("c")), 3u);
  EXPECT_EQ(*s.find(Atom::iri("q")), 4u);
  for (AtomId id = 0; id < s.num_atoms(); ++id) EXPECT_EQ(*s.find(s.atom(id)), id);
}

TEST(TripleStore, LiteralAndIriWithSameTextDiffer) {
  TripleStore::Builder b;
  b.add(ent(0), pred(0), Atom::literal("\"x\""));
  b.add(ent(0), pred(0), Atom::iri("\"x\""));
  auto s = std::move(b).build();
  EXPECT_EQ(s.size(), 2u);
}

TEST(TripleStore, LiteralPredicateRejected) {
  TripleStore::Builder b;
  EXPECT_THROW(b.add(ent(0), Atom::literal("\"p\""), ent(1)), DataError);
}

TEST(TripleStore, BinaryRoundTrip) {
  Rng rng(8);
  TripleStore::Builder b;
  for (int i = 0; i < 500; ++i)
    b.add(ent(rng.index(50)), pred(rng.index(5)),
          rng.bernoulli(0.3) ? Atom::literal("\"l" + std::to_string(i % 7) + "\"") : ent(rng.index(50)));
  b.add(Atom::blank("z"), pred(0), ent(1));
  auto s = std::move(b).build();
  std::stringstream buf;
  s.save(buf);
  std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), std::string("GNCEKG1\0", 8));
  std::istringstream in(bytes);
  auto back = TripleStore::load(in);
  ASSERT_EQ(back.size(), s.size());
  ASSERT_EQ(back.num_atoms(), s.num_atoms());
  for (AtomId a = 0; a < s.num_atoms(); ++a) {
    EXPECT_EQ(back.atom(a), s.atom(a));
    EXPECT_EQ(back.occ(a), s.occ(a));
  }
  EXPECT_TRUE(std::equal(s.triples().begin(), s.triples().end(), back.triples().begin()));

  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(TripleStore::load(truncated), DataError);
  std::string bad = bytes;
  bad[3] = 'X';
  std::istringstream bad_in(bad);
  EXPECT_THROW(TripleStore::load(bad_in), DataError);
}
