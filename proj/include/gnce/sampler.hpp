#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gnce/kg_store.hpp"
#include "gnce/matcher.hpp"
#include "gnce/query.hpp"
#include "gnce/rng.hpp"

namespace gnce {

struct BindingPolicy {
  double p_var_subject = 0.5;    // path start endpoint becomes a variable
  double p_var_object = 0.5;     // star objects and path end endpoint
  double p_var_predicate = 0.0;  // predicates stay bound by default
};

struct SamplerConfig {
  QueryShape shape = QueryShape::Star;
  std::vector<std::size_t> sizes{2, 3, 5, 8};
  std::size_t count_per_size = 1000;
  BindingPolicy binding;
  std::uint64_t seed = 42;
  std::uint64_t max_cardinality = 100'000'000ULL;
  MatchLimits limits = default_sampling_limits();
  // Attempts per size = retry_factor * count_per_size.
  std::size_t retry_factor = 100;
  unsigned threads = 1;

  void validate() const;
};

// Draws single queries from a store. Eligible start nodes are cached per
// required out-degree.
class QuerySampler {
 public:
  explicit QuerySampler(const TripleStore& store, BindingPolicy binding = {});

  // Subject-star: one shared subject variable, `size` distinct outgoing
  // triples of a uniformly chosen subject with out-degree >= size.
  QueryGraph sample_star(std::size_t size, Rng& rng) const;
  // Directed chain of `size` triples without repeated nodes; interior join
  // nodes are always variables.
  QueryGraph sample_path(std::size_t size, Rng& rng) const;
  // Path with a star at its end node (size >= 3).
  QueryGraph sample_flower(std::size_t size, Rng& rng) const;
  // Path with stars at both ends (size >= 5).
  QueryGraph sample_snowflake(std::size_t size, Rng& rng) const;

  QueryGraph sample(QueryShape shape, std::size_t size, Rng& rng) const;

  // Attempts made by sample_path/flower/snowflake before giving up.
  static constexpr int kWalkAttempts = 64;

 private:
  struct Chain {
    std::vector<IdTriple> triples;  // s_i -> o_i == s_{i+1}
  };
  const std::vector<AtomId>& subjects_with_outdegree(std::size_t min_degree) const;
  bool walk_chain(std::size_t length, AtomId start, Rng& rng, Chain& out) const;
  // Picks `k` distinct outgoing triples of `center`, skipping `excluded`.
  std::vector<IdTriple> pick_star(AtomId center, std::size_t k, const std::vector<IdTriple>& excluded, Rng& rng) const;
  // Turns a chain plus optional stars at its start/end node into a query.
  QueryGraph compose(const Chain& chain, const std::vector<IdTriple>& end_star, const std::vector<IdTriple>& start_star,
                     QueryShape shape, Rng& rng) const;

  const TripleStore& store_;
  BindingPolicy binding_;
  mutable std::map<std::size_t, std::vector<AtomId>> eligible_;
};

struct WorkloadReport {
  std::map<std::size_t, std::size_t> emitted;  // per size
  std::size_t attempts = 0;
  std::size_t exhausted = 0;
  std::size_t duplicates = 0;
  std::size_t resource_limited = 0;  // AtLeast results
  std::size_t too_large = 0;
  std::size_t zero = 0;
};

// Generates up to count_per_size unique (by canonical form) queries per size,
// each annotated with its exact cardinality. Each size uses its own RNG
// stream, so output does not depend on scheduling.
std::vector<QueryGraph> build_workload(const TripleStore& store, const SamplerConfig& config,
                                       WorkloadReport* report = nullptr);

}  // namespace gnce
