#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gnce/kg_store.hpp"
#include "gnce/query.hpp"

namespace gnce {

// Alternating node, predicate, node, ... atom ids.
struct Walk {
  std::vector<AtomId> atoms;
  AtomId start() const { return atoms.front(); }
};

struct WalkConfig {
  std::size_t walks_per_entity = 5;
  std::size_t max_depth = 4;  // triple hops
  bool bidirectional = false;
  std::uint64_t seed = 42;
};

// Up to walks_per_entity walks per entity, each following outgoing edges for at
// most max_depth hops and stopping at dead ends. Atoms in `blocked` are never
// entered. Each entity draws from its own RNG stream.
std::vector<Walk> generate_walks(const TripleStore& store, std::span<const AtomId> entities, const WalkConfig& config,
                                 const std::unordered_set<AtomId>* blocked = nullptr);

// Walks that begin with a uniformly chosen triple of `predicate`, so predicates
// used by queries get context even when no entity walk crosses them.
std::vector<Walk> generate_predicate_walks(const TripleStore& store, std::span<const AtomId> predicates,
                                           const WalkConfig& config,
                                           const std::unordered_set<AtomId>* blocked = nullptr);

// Walk corpus for a query workload: walks from every bound subject/object of
// the queries (or every node when all_atoms is set) plus predicate walks.
std::vector<Walk> walks_for_corpus(const TripleStore& store, std::span<const QueryGraph> corpus,
                                   const WalkConfig& config, bool all_atoms = false,
                                   const std::unordered_set<AtomId>* blocked = nullptr);

struct SkipGramConfig {
  std::size_t dim = 100;
  std::size_t window = 4;
  std::size_t negatives = 5;
  std::size_t epochs = 10;
  double lr = 0.025;
  std::uint64_t seed = 42;
};

// Atom id -> input (published) and output vectors, stored as f32.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<AtomId>& ids() const { return ids_; }

  // Appends a row; returns its index. Throws if the id exists.
  std::size_t add(AtomId id, std::span<const float> input, std::span<const float> output);

  std::optional<std::span<const float>> lookup(AtomId id) const;
  std::optional<std::span<const float>> lookup(const TripleStore& store, const Atom& atom) const;
  std::span<const float> input_row(std::size_t row) const { return {input_.data() + row * dim_, dim_}; }
  std::span<const float> output_row(std::size_t row) const { return {output_.data() + row * dim_, dim_}; }
  std::span<float> mutable_input_row(std::size_t row) { return {input_.data() + row * dim_, dim_}; }
  std::span<float> mutable_output_row(std::size_t row) { return {output_.data() + row * dim_, dim_}; }

  std::size_t trained_epochs = 0;
  std::size_t window = 0;
  std::size_t negatives = 0;
  std::uint64_t seed = 0;

  // TSV: "<atom term>\t<f1> <f2> ... <f_dim>" per row (input vectors).
  void write_tsv(const TripleStore& store, std::ostream& out) const;
  static EmbeddingTable read_tsv(const TripleStore& store, std::istream& in);

  // Binary: "GNCEEMB1", dim u32, count u64, count x (id u32, f32[dim]) for
  // input vectors, then an "OUTV" block with the output vectors and metadata.
  void write_binary(std::ostream& out) const;
  static EmbeddingTable read_binary(std::istream& in);

  void save(const std::filesystem::path& path) const;  // binary
  static EmbeddingTable load(const std::filesystem::path& path);

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<AtomId> ids_;
  std::unordered_map<AtomId, std::size_t> rows_;
  std::vector<float> input_;
  std::vector<float> output_;
};

struct SkipGramResult {
  EmbeddingTable table;
  // Mean negative-sampling loss (-objective) per training pair, per epoch.
  std::vector<double> epoch_loss;
};

// Skip-gram with negative sampling over the walk corpus: for every position
// and every offset 1 <= |j| <= window, one positive update on the
// (centre, context) pair and `negatives` updates against draws from the
// unigram^0.75 distribution. Plain SGD, learning rate decaying linearly.
SkipGramResult train_skipgram(std::span<const Walk> walks, const SkipGramConfig& config);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace gnce
