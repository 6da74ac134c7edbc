#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gnce/kg_store.hpp"

namespace gnce {

struct Variable {
  std::string name;
  friend bool operator==(const Variable&, const Variable&) = default;
  friend auto operator<=>(const Variable&, const Variable&) = default;
};

// A query term: either a bound atom or a variable.
class QueryAtom {
 public:
  QueryAtom() : value_(Variable{"_"}) {}
  static QueryAtom bound(Atom atom) { return QueryAtom(std::move(atom)); }
  static QueryAtom var(std::string name);

  bool is_var() const { return std::holds_alternative<Variable>(value_); }
  const Atom& atom() const { return std::get<Atom>(value_); }
  const std::string& var_name() const { return std::get<Variable>(value_).name; }

  // "?name" for variables, N-Triples term otherwise.
  std::string to_string() const;

  friend bool operator==(const QueryAtom&, const QueryAtom&) = default;
  friend auto operator<=>(const QueryAtom& a, const QueryAtom& b) { return a.value_ <=> b.value_; }

 private:
  explicit QueryAtom(Atom atom) : value_(std::move(atom)) {}
  explicit QueryAtom(Variable v) : value_(std::move(v)) {}
  std::variant<Atom, Variable> value_;
};

struct TriplePattern {
  QueryAtom s, p, o;
  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

enum class QueryShape { Star, Path, Flower, Snowflake, Other };

std::string_view shape_name(QueryShape shape);
std::optional<QueryShape> parse_shape(std::string_view name);

// Conjunctive query. Construction enforces: at least one pattern, at least one
// variable, and connectivity of the graph whose nodes are the distinct
// subject/object terms and whose edges are the patterns.
class QueryGraph {
 public:
  explicit QueryGraph(std::vector<TriplePattern> patterns, std::optional<std::uint64_t> cardinality = std::nullopt,
                      std::optional<QueryShape> shape = std::nullopt);

  const std::vector<TriplePattern>& patterns() const { return patterns_; }
  std::size_t size() const { return patterns_.size(); }
  const std::optional<std::uint64_t>& true_cardinality() const { return cardinality_; }
  const std::optional<QueryShape>& shape() const { return shape_; }

  // Variable names in order of first occurrence (s, p, o per pattern).
  std::vector<std::string> variables() const;
  // Distinct subject/object terms in order of first occurrence.
  std::vector<QueryAtom> nodes() const;

  QueryGraph with_cardinality(std::optional<std::uint64_t> cardinality) const;
  QueryGraph with_shape(std::optional<QueryShape> shape) const;

  // Unknown corpus fields kept by the lenient reader, as serialized JSON.
  const std::map<std::string, std::string>& extra() const { return extra_; }
  QueryGraph with_extra(std::map<std::string, std::string> extra) const;

  friend bool operator==(const QueryGraph&, const QueryGraph&) = default;

 private:
  std::vector<TriplePattern> patterns_;
  std::optional<std::uint64_t> cardinality_;
  std::optional<QueryShape> shape_;
  std::map<std::string, std::string> extra_;
};

inline constexpr std::size_t kMaxCanonicalVariables = 16;

// Key shared exactly by queries equal up to variable renaming and pattern
// reordering. Throws PreconditionError above kMaxCanonicalVariables.
std::string canonical_form(const QueryGraph& query);

// Variables in the order the canonical labelling numbers them. Queries with
// equal canonical forms list corresponding variables at equal positions (up to
// automorphisms). Same limit as canonical_form.
std::vector<std::string> canonical_variable_order(const QueryGraph& query);

}  // namespace gnce
