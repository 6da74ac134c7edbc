#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnce/kg_store.hpp"
#include "gnce/query.hpp"

namespace gnce {

// A query resolved against a store: constants become atom ids, variables
// become dense indexes in first-occurrence order.
struct CompiledQuery {
  struct Slot {
    bool is_var = false;
    std::uint32_t value = 0;  // atom id, or variable index
  };
  using Pattern = std::array<Slot, 3>;

  std::vector<Pattern> patterns;
  std::vector<std::string> var_names;
  // Some constant does not occur in the store, so nothing can match.
  bool unsatisfiable = false;

  static CompiledQuery compile(const TripleStore& store, const QueryGraph& query);

  std::size_t num_vars() const { return var_names.size(); }

  // Index pattern for `pattern` under a partial assignment (kUnbound = free).
  static constexpr std::uint32_t kUnbound = UINT32_MAX;
  IdPattern bind(const Pattern& pattern, const std::vector<std::uint32_t>& assignment) const;

  // True when `t` is consistent with the pattern under the assignment,
  // including repeated variables inside the pattern.
  bool consistent(const Pattern& pattern, const IdTriple& t, const std::vector<std::uint32_t>& assignment) const;
};

struct CountResult {
  std::uint64_t count = 0;
  bool exact = true;
  std::string reason;  // "limit" or "timeout" when not exact

  static CountResult Exact(std::uint64_t n) { return {n, true, {}}; }
  static CountResult AtLeast(std::uint64_t n, std::string why) { return {n, false, std::move(why)}; }
  friend bool operator==(const CountResult&, const CountResult&) = default;
};

struct MatchLimits {
  std::optional<std::uint64_t> limit;
  std::optional<std::chrono::milliseconds> timeout;
};

// Default sampling limits: 10^7 solutions, 30 s per query.
MatchLimits default_sampling_limits();

// Number of total variable bindings mapping every pattern into the store
// (homomorphism semantics). Backtracking join, next pattern chosen by the
// smallest index range under the current bindings (ties by position).
// Independent sub-queries are multiplied and sub-results memoized on the
// bindings they depend on.
CountResult count_solutions(const TripleStore& store, const QueryGraph& query, const MatchLimits& limits = {});

using Binding = std::map<std::string, Atom>;

// Materialized solutions, in deterministic order, at most `limit` of them.
std::vector<Binding> enumerate_solutions(const TripleStore& store, const QueryGraph& query,
                                         std::optional<std::size_t> limit = std::nullopt);

}  // namespace gnce
