#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gnce/baselines.hpp"
#include "gnce/kg_store.hpp"
#include "gnce/model.hpp"
#include "gnce/query.hpp"

namespace gnce {

// max(t/e, e/t); both arguments must be positive.
double q_error(double true_card, double estimate);

// Buckets [5^k, 5^(k+1)) for k = 0..8, then [5^9, inf).
inline constexpr std::size_t kNumBuckets = 10;
std::size_t bucket_of(std::uint64_t cardinality);
std::string bucket_label(std::size_t bucket);

struct EstimateResult {
  std::optional<double> value;  // nullopt: the estimator refused the query
  double prepare_ms = 0.0;      // featurization / lookup
  double inference_ms = 0.0;
};

// Called with the query and its position in the corpus.
using Estimator = std::function<EstimateResult(const QueryGraph&, std::size_t)>;

Estimator gnce_estimator(const GnceModel& model, const Featurizer& featurizer);
Estimator cset_estimator(const CsetSummary& summary, const TripleStore& store);
// Query i uses the RNG stream mix_seed(seed, i).
Estimator wanderjoin_estimator(const TripleStore& store, std::size_t runs, std::uint64_t seed);
Estimator constant_estimator(double value);

struct QueryRecord {
  std::uint64_t true_cardinality = 0;
  std::optional<double> raw_estimate;  // as returned; nullopt on refusal or non-finite output
  double estimate = 1.0;               // clamped to >= 1
  double q_error = 1.0;
  bool failed = false;                 // refusal, non-finite or estimate <= 0
  std::size_t size = 0;
  std::string shape;
  double prepare_ms = 0.0;
  double inference_ms = 0.0;

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct BucketSummary {
  std::string label;
  std::size_t n = 0;
  double mean_q_error = 0.0;
  double mean_latency_ms = 0.0;

  friend bool operator==(const BucketSummary&, const BucketSummary&) = default;
};

struct EvalReport {
  std::string estimator;
  std::vector<QueryRecord> records;
  std::size_t failures = 0;
  double mean_q_error = 0.0;
  double median_q_error = 0.0;
  double max_q_error = 0.0;
  std::vector<BucketSummary> buckets;  // always kNumBuckets entries
  // Latency aggregates skip the first `warmup` queries.
  std::size_t warmup = 0;
  double mean_prepare_ms = 0.0;
  double mean_inference_ms = 0.0;
  double mean_latency_ms = 0.0;

  // Without timings the document depends only on estimates, so repeated runs
  // produce identical files.
  nlohmann::ordered_json to_json(bool include_timings = true) const;
  static EvalReport from_json(const nlohmann::json& doc);
  // estimator,bucket,mean_q_error,n,mean_latency_ms; one "all" row first.
  // The latency column is dropped when include_timings is false.
  std::string to_csv(bool include_timings = true) const;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvalOptions {
  std::size_t warmup = 10;
};

EvalReport evaluate(const std::string& name, const Estimator& estimator, std::span<const QueryGraph> corpus,
                    const EvalOptions& options = {});

struct InductiveSplit {
  std::vector<QueryGraph> train;
  std::vector<QueryGraph> test;
  std::set<Atom> held_out;  // bound subject/object atoms of the test side
  std::size_t discarded = 0;
  double achieved_fraction = 0.0;  // test / (train + test)
};

// Greedy split in which no bound subject/object atom appears on both sides
// (predicates may be shared). Queries are visited in a seeded random order; a
// query joins the side its already-assigned atoms dictate, is dropped when
// they conflict, and otherwise goes to the test side while that keeps the test
// share at or below `fraction` and none of its atoms is more frequent than the
// remaining test budget.
InductiveSplit inductive_split(std::span<const QueryGraph> corpus, double fraction, std::uint64_t seed);

// Bound subject/object atoms of a query.
std::set<Atom> query_entities(const QueryGraph& query);

}  // namespace gnce
