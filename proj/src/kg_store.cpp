#include "gnce/kg_store.hpp"

#include <algorithm>
#include <fstream>

#include "gnce/binary_io.hpp"
#include "gnce/error.hpp"

namespace gnce {

namespace {

constexpr std::string_view kStoreMagic{"GNCEKG1\0", 8};

AtomId component(const IdTriple& t, int pos) {
  switch (pos) {
    case 0: return t.s;
    case 1: return t.p;
    default: return t.o;
  }
}

}  // namespace

Atom Atom::iri(std::string value) {
  AtomKind kind = value.starts_with(kSkolemPrefix) ? AtomKind::BlankSkolemized : AtomKind::Iri;
  return Atom{kind, std::move(value)};
}

Atom Atom::literal(std::string token) { return Atom{AtomKind::Literal, std::move(token)}; }

Atom Atom::blank(std::string_view label) {
  return Atom{AtomKind::BlankSkolemized, std::string(kSkolemPrefix) + std::string(label)};
}

std::string to_ntriples_term(const Atom& atom) {
  if (atom.kind == AtomKind::Literal) return atom.value;
  return "<" + atom.value + ">";
}

std::string atom_key(const Atom& atom) {
  // Skolem IRIs and plain IRIs live in the same IRI namespace.
  char tag = atom.kind == AtomKind::Literal ? 'L' : 'I';
  std::string key;
  key.reserve(atom.value.size() + 1);
  key.push_back(tag);
  key += atom.value;
  return key;
}

std::array<int, 3> index_positions(IndexOrder order) {
  switch (order) {
    case IndexOrder::SPO: return {0, 1, 2};
    case IndexOrder::SOP: return {0, 2, 1};
    case IndexOrder::PSO: return {1, 0, 2};
    case IndexOrder::POS: return {1, 2, 0};
    case IndexOrder::OSP: return {2, 0, 1};
    case IndexOrder::OPS: return {2, 1, 0};
  }
  return {0, 1, 2};
}

AtomId TripleStore::Builder::intern(const Atom& atom) {
  if (atom.value.empty()) throw DataError("atom value must be non-empty");
  auto [it, inserted] = ids_.try_emplace(atom_key(atom), static_cast<AtomId>(atoms_.size()));
  if (inserted) atoms_.push_back(atom);
  return it->second;
}

bool TripleStore::Builder::add(const Atom& s, const Atom& p, const Atom& o) {
  if (p.kind == AtomKind::Literal) throw DataError("predicate must be an IRI");
  IdTriple t{intern(s), intern(p), intern(o)};
  auto [it, inserted] = seen_.try_emplace(t, static_cast<std::uint32_t>(triples_.size()));
  if (!inserted) return false;
  triples_.push_back(t);
  return true;
}

TripleStore TripleStore::Builder::build() && {
  TripleStore store;
  store.atoms_ = std::move(atoms_);
  store.ids_ = std::move(ids_);
  store.triples_ = std::move(triples_);
  seen_.clear();
  store.finalize();
  return store;
}

TripleStore TripleStore::from_triples(std::span<const Triple> triples) {
  Builder b;
  for (const auto& t : triples) b.add(t);
  return std::move(b).build();
}

void TripleStore::finalize() {
  occ_.assign(atoms_.size(), 0);
  is_predicate_.assign(atoms_.size(), false);
  std::vector<bool> is_subject(atoms_.size(), false);
  for (const auto& t : triples_) {
    ++occ_[t.s];
    if (t.p != t.s) ++occ_[t.p];
    if (t.o != t.s && t.o != t.p) ++occ_[t.o];
    is_predicate_[t.p] = true;
    is_subject[t.s] = true;
  }
  subjects_.clear();
  predicates_.clear();
  for (AtomId id = 0; id < atoms_.size(); ++id) {
    if (is_subject[id]) subjects_.push_back(id);
    if (is_predicate_[id]) predicates_.push_back(id);
  }
  for (int k = 0; k < 6; ++k) {
    auto pos = index_positions(static_cast<IndexOrder>(k));
    auto& index = indexes_[k];
    index = triples_;
    std::sort(index.begin(), index.end(), [&](const IdTriple& a, const IdTriple& b) {
      for (int i = 0; i < 3; ++i) {
        AtomId x = component(a, pos[i]), y = component(b, pos[i]);
        if (x != y) return x < y;
      }
      return false;
    });
  }
}

std::optional<AtomId> TripleStore::find(const Atom& atom) const {
  auto it = ids_.find(atom_key(atom));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t TripleStore::occ(const Atom& atom) const {
  auto id = find(atom);
  return id ? occ_[*id] : 0;
}

std::span<const IdTriple> TripleStore::scan(IndexOrder order, std::span<const AtomId> prefix) const {
  const auto& index = indexes_[static_cast<int>(order)];
  if (prefix.size() > 3) throw PreconditionError("index prefix longer than 3");
  auto pos = index_positions(order);
  auto lower = std::lower_bound(index.begin(), index.end(), prefix, [&](const IdTriple& t, std::span<const AtomId> key) {
    for (std::size_t i = 0; i < key.size(); ++i) {
      AtomId x = component(t, pos[i]);
      if (x != key[i]) return x < key[i];
    }
    return false;
  });
  auto upper = std::upper_bound(lower, index.end(), prefix, [&](std::span<const AtomId> key, const IdTriple& t) {
    for (std::size_t i = 0; i < key.size(); ++i) {
      AtomId x = component(t, pos[i]);
      if (x != key[i]) return key[i] < x;
    }
    return false;
  });
  return {lower, upper};
}

std::span<const IdTriple> TripleStore::match(const IdPattern& pattern) const {
  const bool s = pattern.s.has_value(), p = pattern.p.has_value(), o = pattern.o.has_value();
  std::array<AtomId, 3> key{};
  std::size_t n = 0;
  IndexOrder order = IndexOrder::SPO;
  if (s && p && o) {
    key = {*pattern.s, *pattern.p, *pattern.o};
    n = 3;
  } else if (s && p) {
    key = {*pattern.s, *pattern.p, 0};
    n = 2;
  } else if (s && o) {
    order = IndexOrder::SOP;
    key = {*pattern.s, *pattern.o, 0};
    n = 2;
  } else if (p && o) {
    order = IndexOrder::POS;
    key = {*pattern.p, *pattern.o, 0};
    n = 2;
  } else if (s) {
    key[0] = *pattern.s;
    n = 1;
  } else if (p) {
    order = IndexOrder::PSO;
    key[0] = *pattern.p;
    n = 1;
  } else if (o) {
    order = IndexOrder::OSP;
    key[0] = *pattern.o;
    n = 1;
  }
  return scan(order, std::span<const AtomId>(key.data(), n));
}

std::vector<Triple> TripleStore::match_pattern(const AtomPattern& pattern) const {
  IdPattern ids;
  auto resolve = [&](const std::optional<Atom>& a, std::optional<AtomId>& out) {
    if (!a) return true;
    auto id = find(*a);
    if (!id) return false;
    out = *id;
    return true;
  };
  std::vector<Triple> result;
  if (!resolve(pattern.s, ids.s) || !resolve(pattern.p, ids.p) || !resolve(pattern.o, ids.o)) return result;
  for (const auto& t : match(ids)) result.push_back(decode(t));
  return result;
}

std::span<const IdTriple> TripleStore::outgoing(AtomId subject) const {
  return scan(IndexOrder::SPO, std::span<const AtomId>(&subject, 1));
}

std::span<const IdTriple> TripleStore::incoming(AtomId object) const {
  return scan(IndexOrder::OSP, std::span<const AtomId>(&object, 1));
}

void TripleStore::save(std::ostream& out) const {
  binio::write_bytes(out, kStoreMagic);
  binio::write_le<std::uint64_t>(out, atoms_.size());
  for (const auto& a : atoms_) {
    binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(a.kind));
    binio::write_string(out, a.value);
  }
  binio::write_le<std::uint64_t>(out, triples_.size());
  for (const auto& t : triples_) {
    binio::write_le<std::uint32_t>(out, t.s);
    binio::write_le<std::uint32_t>(out, t.p);
    binio::write_le<std::uint32_t>(out, t.o);
  }
  if (!out) throw ResourceError("failed writing store");
}

void TripleStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open " + path.string() + " for writing");
  save(out);
}

TripleStore TripleStore::load(std::istream& in) {
  binio::expect_magic(in, kStoreMagic, "store file");
  TripleStore store;
  auto n_atoms = binio::read_le<std::uint64_t>(in);
  if (n_atoms > (1ULL << 32)) throw DataError("store file: atom count out of range");
  store.atoms_.reserve(n_atoms);
  for (std::uint64_t i = 0; i < n_atoms; ++i) {
    auto kind = binio::read_le<std::uint8_t>(in);
    if (kind > 2) throw DataError("store file: bad atom kind");
    Atom a{static_cast<AtomKind>(kind), binio::read_string(in)};
    if (a.value.empty()) throw DataError("store file: empty atom");
    if (!store.ids_.try_emplace(atom_key(a), static_cast<AtomId>(i)).second)
      throw DataError("store file: duplicate atom");
    store.atoms_.push_back(std::move(a));
  }
  auto n_triples = binio::read_le<std::uint64_t>(in);
  if (n_triples > (1ULL << 34)) throw DataError("store file: triple count out of range");
  store.triples_.reserve(n_triples);
  for (std::uint64_t i = 0; i < n_triples; ++i) {
    IdTriple t;
    t.s = binio::read_le<std::uint32_t>(in);
    t.p = binio::read_le<std::uint32_t>(in);
    t.o = binio::read_le<std::uint32_t>(in);
    if (t.s >= n_atoms || t.p >= n_atoms || t.o >= n_atoms) throw DataError("store file: atom id out of range");
    store.triples_.push_back(t);
  }
  store.finalize();
  return store;
}

TripleStore TripleStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open store " + path.string());
  return load(in);
}

}  // namespace gnce
