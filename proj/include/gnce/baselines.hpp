#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnce/kg_store.hpp"
#include "gnce/query.hpp"
#include "gnce/rng.hpp"

namespace gnce {

// Characteristic sets: subjects grouped by their outgoing predicate set.
//
// Internally each set is further split by the subject's per-predicate degree
// signature, so a group's multiplicities are the same for all its subjects and
// bound-predicate stars with variable objects are estimated exactly.
class CsetSummary {
 public:
  struct Set {
    std::vector<AtomId> predicates;           // sorted
    std::uint64_t count = 0;                  // subjects with exactly this set
    std::vector<std::uint64_t> multiplicity;  // per predicate, summed over those subjects
  };

  static CsetSummary build(const TripleStore& store);

  // Aggregated view, sorted by predicate set.
  std::vector<Set> sets() const;
  std::size_t num_groups() const { return groups_.size(); }
  std::uint64_t num_subjects() const { return num_subjects_; }
  std::uint64_t total_triples() const { return total_triples_; }

  // Estimated cardinality. Throws PreconditionError when a predicate is a
  // variable. Each maximal subject-star is estimated from the groups whose
  // set covers its predicates; a bound object scales its pattern by
  // occ(o)/total_triples and a bound subject by 1/num_subjects. Stars are
  // combined assuming independence with 1/num_subjects per join.
  double estimate(const TripleStore& store, const QueryGraph& query) const;

 private:
  struct Group {
    std::vector<AtomId> predicates;   // sorted
    std::vector<std::uint64_t> degree;  // per predicate, identical for every member
    std::uint64_t count = 0;
  };
  double star_estimate(const std::vector<AtomId>& pattern_predicates) const;

  std::vector<Group> groups_;
  std::vector<std::vector<std::uint32_t>> groups_by_predicate_;  // indexed by atom id
  std::uint64_t num_subjects_ = 0;
  std::uint64_t total_triples_ = 0;
};

struct WanderJoinResult {
  double estimate = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;  // runs whose walk hit an empty candidate set
};

// Pattern order: fewest matches first, then repeatedly the connected pattern
// with the fewest matches (ties by position).
std::vector<std::size_t> wanderjoin_plan(const TripleStore& store, const QueryGraph& query);

// Mean of `runs` Horvitz-Thompson walk estimates: each run samples one
// consistent triple per pattern along the plan and returns the product of the
// candidate-set sizes, or 0 when a candidate set is empty.
WanderJoinResult estimate_wanderjoin(const TripleStore& store, const QueryGraph& query, std::size_t runs, Rng& rng);

// Single walk; returns the run estimate.
double wanderjoin_run(const TripleStore& store, const QueryGraph& query, std::span<const std::size_t> plan, Rng& rng);

}  // namespace gnce
