#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <unordered_set>
#include <string>
#include <vector>

#include "gnce/demo_kg.hpp"
#include "gnce/embeddings.hpp"
#include "gnce/eval.hpp"
#include "gnce/model.hpp"
#include "gnce/sampler.hpp"
#include "gnce/train.hpp"

namespace gnce {

struct PipelineConfig {
  std::uint64_t seed = 42;
  unsigned threads = 1;
  std::filesystem::path out_dir = "gnce-run";

  // Knowledge graph: an N-Triples or binary store file, else the demo generator.
  std::optional<std::filesystem::path> kg_path;
  DemoKgConfig demo;

  // Workload
  std::vector<QueryShape> shapes{QueryShape::Star, QueryShape::Path};
  std::vector<std::size_t> sizes{2, 3, 5};
  std::size_t count_per_size = 200;
  BindingPolicy binding;
  std::uint64_t max_cardinality = 100'000'000ULL;
  MatchLimits limits = default_sampling_limits();

  // Split
  bool inductive = false;
  double test_fraction = 0.2;

  WalkConfig walks;
  SkipGramConfig skipgram;

  std::size_t hidden = 101;
  MessageFn message = MessageFn::Tpn;
  double epsilon = 0.0;
  FeatureMode featurization = FeatureMode::Embedding;
  std::size_t binary_id_width = 100;
  OccScale occ_scale = OccScale::Log1p;

  std::size_t epochs = 50;
  std::size_t batch = 32;
  double lr = 1e-4;

  std::vector<std::string> baselines{"cset", "wanderjoin", "geomean"};
  std::size_t wanderjoin_runs = 30;
  std::size_t warmup = 10;

  // Unknown keys and ill-typed values raise SchemaError with a JSON path.
  static PipelineConfig from_json(const nlohmann::json& doc);
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
  void validate() const;

  // Stage configs derived from this one; every stage seed is `seed`.
  SamplerConfig sampler(QueryShape shape) const;
  WalkConfig walk_config() const;
  SkipGramConfig skipgram_config() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;
};

// Loads a binary store (by magic) or parses N-Triples.
TripleStore load_store_any(const std::filesystem::path& path);

TripleStore build_kg(const PipelineConfig& config);

// Workloads of every configured shape, concatenated in shape order.
std::vector<QueryGraph> build_corpus(const TripleStore& store, const PipelineConfig& config,
                                     std::map<std::string, WorkloadReport>* reports = nullptr);

struct Split {
  std::vector<QueryGraph> train;
  std::vector<QueryGraph> test;
  std::set<Atom> held_out;  // empty for random splits
  std::size_t discarded = 0;
  double achieved_fraction = 0.0;
};

// Seeded shuffle, last `fraction` to test.
Split random_split(std::span<const QueryGraph> corpus, double fraction, std::uint64_t seed);
Split make_split(std::span<const QueryGraph> corpus, const PipelineConfig& config);

std::unordered_set<AtomId> atom_ids(const TripleStore& store, const std::set<Atom>& atoms);

// Skip-gram over walks from the atoms of `queries`; held-out atoms are never
// walked through.
SkipGramResult build_embeddings(const TripleStore& store, std::span<const QueryGraph> queries,
                                const PipelineConfig& config, const std::unordered_set<AtomId>* held_out = nullptr);

struct GnceRun {
  GnceModel model;
  TrainResult trace;
};

GnceRun train_gnce(const TripleStore& store, const EmbeddingTable* table, std::span<const QueryGraph> train,
                   const PipelineConfig& config);

// exp(mean ln c) over the training cardinalities.
double geometric_mean_cardinality(std::span<const QueryGraph> queries);

struct PipelineResult {
  TripleStore store;
  std::vector<QueryGraph> corpus;
  Split split;
  SkipGramResult embeddings;
  std::optional<GnceRun> gnce;
  std::map<std::string, EvalReport> reports;
  // Held-out atoms that reached the model with an embedding (must be 0).
  std::size_t masking_violations = 0;
  std::size_t held_out_lookups = 0;
  nlohmann::ordered_json report_json;  // what report.json holds
};

using Logger = std::function<void(const std::string&)>;

// Runs every stage. When write_files is set, writes kg.bin, corpus.json,
// train.json, test.json, embeddings.bin, model.ckpt, report.json, report.csv
// (no latency column), latency.csv and timings.json into out_dir.
PipelineResult run_pipeline(const PipelineConfig& config, bool write_files = true, const Logger& log = {});

struct AblationArm {
  std::string name;
  FeatureMode featurization;
  MessageFn message;
};

std::vector<AblationArm> default_ablation_arms();

struct AblationResult {
  std::vector<std::string> arms;
  // arm -> shape ("all", "star", ...) -> mean q-error
  std::map<std::string, std::map<std::string, double>> mean_q_error;
  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

AblationResult run_ablation(const TripleStore& store, const EmbeddingTable& table, std::span<const QueryGraph> train,
                            std::span<const QueryGraph> test, const PipelineConfig& config,
                            const std::vector<AblationArm>& arms, const Logger& log = {});

}  // namespace gnce
