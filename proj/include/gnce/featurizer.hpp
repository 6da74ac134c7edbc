#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gnce/aligned.hpp"
#include "gnce/embeddings.hpp"
#include "gnce/kg_store.hpp"
#include "gnce/query.hpp"
#include "gnce/rng.hpp"

namespace gnce {

enum class OccScale { Raw, Log1p };
enum class FeatureMode { Embedding, BinaryId };

std::string_view occ_scale_name(OccScale s);
OccScale parse_occ_scale(std::string_view name);
std::string_view feature_mode_name(FeatureMode m);
FeatureMode parse_feature_mode(std::string_view name);

// Numeric form of a query: one row per distinct subject/object term, one edge
// per pattern (subject node -> object node) carrying the predicate's row.
struct QueryFeaturization {
  std::size_t dim = 0;
  std::size_t num_nodes = 0;
  AlignedDoubles node_features;  // num_nodes x dim, row-major
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  AlignedDoubles edge_features;  // num_edges x dim, row-major
  std::vector<QueryAtom> node_atoms;

  std::size_t num_edges() const { return edges.size(); }
  std::span<const double> node(std::size_t i) const { return {node_features.data() + i * dim, dim}; }
  std::span<const double> edge(std::size_t k) const { return {edge_features.data() + k * dim, dim}; }
};

// Builds featurizations. Bound atoms map to e(x) || occ(x) (embedding mode) or
// binary(id) || occ(x) (binary mode); atoms without an embedding map to the
// fixed unseen vector || 0. Variables map to [id, 1, ..., 1] with ids
// 1..n_vars: a fresh random permutation when an Rng is passed, the canonical
// variable order otherwise.
class Featurizer {
 public:
  Featurizer(const TripleStore& store, const EmbeddingTable& table, std::vector<double> unseen_vector,
             OccScale occ_scale = OccScale::Log1p);

  static Featurizer binary(const TripleStore& store, std::size_t id_width = 100, OccScale occ_scale = OccScale::Log1p);

  std::size_t dim() const { return dim_; }
  FeatureMode mode() const { return mode_; }

  // Masked atoms are treated as unseen: no embedding, occ reported as 0.
  void set_masked(const std::unordered_set<AtomId>* masked) { masked_ = masked; }

  // Called for every bound atom featurized, with whether an embedding (or
  // binary code) was used.
  using Observer = std::function<void(const Atom&, bool known)>;
  void set_observer(Observer observer) { observer_ = std::move(observer); }

  QueryFeaturization featurize(const QueryGraph& query, Rng* rng = nullptr) const;

  // Feature row for one term (without variable handling).
  void bound_row(const Atom& atom, std::span<double> out) const;

 private:
  Featurizer(const TripleStore& store, FeatureMode mode, std::size_t dim, OccScale occ_scale);

  const TripleStore* store_;
  const EmbeddingTable* table_ = nullptr;
  FeatureMode mode_;
  std::size_t dim_;
  std::size_t id_width_ = 0;
  OccScale occ_scale_;
  std::vector<double> unseen_;
  const std::unordered_set<AtomId>* masked_ = nullptr;
  Observer observer_;
};

// Draws the fixed unseen-entity vector: uniform in [-0.5/dim, 0.5/dim].
std::vector<double> make_unseen_vector(std::size_t dim, std::uint64_t seed);

}  // namespace gnce
