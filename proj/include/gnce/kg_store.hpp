#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gnce {

enum class AtomKind : std::uint8_t { Iri = 0, Literal = 1, BlankSkolemized = 2 };

// Skolemized blank nodes become IRIs under this prefix.
inline constexpr std::string_view kSkolemPrefix = "urn:gnce:bnode:";

// A term of the knowledge graph. IRIs hold the IRI text without angle
// brackets; literals hold their full N-Triples token (quotes, escapes, language
// tag or datatype), so they compare by exact lexical form.
struct Atom {
  AtomKind kind = AtomKind::Iri;
  std::string value;

  // Classifies IRIs under kSkolemPrefix as skolemized blank nodes.
  static Atom iri(std::string value);
  static Atom literal(std::string token);
  static Atom blank(std::string_view label);

  friend bool operator==(const Atom&, const Atom&) = default;
  friend auto operator<=>(const Atom&, const Atom&) = default;
};

// N-Triples rendering of a term: <iri> for IRIs and skolem IRIs, raw token
// for literals.
std::string to_ntriples_term(const Atom& atom);

struct Triple {
  Atom s, p, o;
  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

using AtomId = std::uint32_t;

struct IdTriple {
  AtomId s = 0, p = 0, o = 0;
  friend bool operator==(const IdTriple&, const IdTriple&) = default;
  friend auto operator<=>(const IdTriple&, const IdTriple&) = default;
};

struct IdTripleHash {
  std::size_t operator()(const IdTriple& t) const noexcept {
    std::uint64_t h = (static_cast<std::uint64_t>(t.s) << 32) ^ (static_cast<std::uint64_t>(t.p) << 16) ^ t.o;
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<std::size_t>(h);
  }
};

// Position-wise pattern: nullopt is a wildcard.
struct IdPattern {
  std::optional<AtomId> s, p, o;
};

struct AtomPattern {
  std::optional<Atom> s, p, o;
};

enum class IndexOrder : std::uint8_t { SPO = 0, SOP, PSO, POS, OSP, OPS };

// Position of each triple component in the sort key of an index order.
std::array<int, 3> index_positions(IndexOrder order);

// Indexed, immutable in-memory knowledge graph. Atoms get dense ids in
// first-seen order; the triple list keeps first-seen order with duplicates
// removed. All six permutation indexes are built eagerly.
class TripleStore {
 public:
  class Builder {
   public:
    AtomId intern(const Atom& atom);
    // Returns false when the triple was already present.
    bool add(const Atom& s, const Atom& p, const Atom& o);
    bool add(const Triple& t) { return add(t.s, t.p, t.o); }
    std::size_t size() const { return triples_.size(); }
    TripleStore build() &&;

   private:
    std::vector<Atom> atoms_;
    std::unordered_map<std::string, AtomId> ids_;
    std::vector<IdTriple> triples_;
    std::unordered_map<IdTriple, std::uint32_t, IdTripleHash> seen_;
  };

  TripleStore() = default;

  static TripleStore from_triples(std::span<const Triple> triples);

  std::size_t size() const { return triples_.size(); }
  std::size_t num_atoms() const { return atoms_.size(); }
  bool empty() const { return triples_.empty(); }

  const Atom& atom(AtomId id) const { return atoms_.at(id); }
  std::optional<AtomId> find(const Atom& atom) const;

  // Number of distinct triples containing the atom in any position. A triple
  // counts once even if the atom occurs twice in it.
  std::uint64_t occ(AtomId id) const { return id < occ_.size() ? occ_[id] : 0; }
  std::uint64_t occ(const Atom& atom) const;

  std::span<const IdTriple> triples() const { return triples_; }
  Triple decode(const IdTriple& t) const { return {atoms_[t.s], atoms_[t.p], atoms_[t.o]}; }

  // Contiguous range of one permutation index whose leading components equal
  // `prefix` (at most three ids, in that index's order).
  std::span<const IdTriple> scan(IndexOrder order, std::span<const AtomId> prefix) const;

  // Triples agreeing with every bound position, served from the index whose
  // prefix covers the bound positions. Order is the index order.
  std::span<const IdTriple> match(const IdPattern& pattern) const;
  std::size_t count(const IdPattern& pattern) const { return match(pattern).size(); }

  // Atom-level lookup. Patterns naming atoms absent from the store match
  // nothing.
  std::vector<Triple> match_pattern(const AtomPattern& pattern) const;

  // Outgoing triples of a node (SPO range).
  std::span<const IdTriple> outgoing(AtomId subject) const;
  std::span<const IdTriple> incoming(AtomId object) const;

  // Distinct subjects in ascending id order.
  const std::vector<AtomId>& subjects() const { return subjects_; }
  const std::vector<AtomId>& predicates() const { return predicates_; }
  bool is_predicate(AtomId id) const { return id < is_predicate_.size() && is_predicate_[id]; }

  // Versioned binary format, magic "GNCEKG1\0", little-endian.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static TripleStore load(std::istream& in);
  static TripleStore load(const std::filesystem::path& path);

 private:
  void finalize();

  std::vector<Atom> atoms_;
  std::unordered_map<std::string, AtomId> ids_;
  std::vector<IdTriple> triples_;
  std::vector<std::uint64_t> occ_;
  std::array<std::vector<IdTriple>, 6> indexes_;
  std::vector<AtomId> subjects_;
  std::vector<AtomId> predicates_;
  std::vector<bool> is_predicate_;
};

// Key used for interning: kind tag followed by the lexical value.
std::string atom_key(const Atom& atom);

}  // namespace gnce
