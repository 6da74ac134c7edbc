#include "gnce/query.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "gnce/error.hpp"

namespace gnce {

QueryAtom QueryAtom::var(std::string name) {
  if (!name.empty() && name.front() == '?') name.erase(0, 1);
  if (name.empty()) throw PreconditionError("variable name must be non-empty");
  return QueryAtom(Variable{std::move(name)});
}

std::string QueryAtom::to_string() const {
  if (is_var()) return "?" + var_name();
  return to_ntriples_term(atom());
}

std::string_view shape_name(QueryShape shape) {
  switch (shape) {
    case QueryShape::Star: return "star";
    case QueryShape::Path: return "path";
    case QueryShape::Flower: return "flower";
    case QueryShape::Snowflake: return "snowflake";
    case QueryShape::Other: return "other";
  }
  return "other";
}

std::optional<QueryShape> parse_shape(std::string_view name) {
  for (auto s : {QueryShape::Star, QueryShape::Path, QueryShape::Flower, QueryShape::Snowflake, QueryShape::Other})
    if (shape_name(s) == name) return s;
  return std::nullopt;
}

QueryGraph::QueryGraph(std::vector<TriplePattern> patterns, std::optional<std::uint64_t> cardinality,
                       std::optional<QueryShape> shape)
    : patterns_(std::move(patterns)), cardinality_(cardinality), shape_(shape) {
  if (patterns_.empty()) throw PreconditionError("query must have at least one triple pattern");
  bool has_var = false;
  for (const auto& tp : patterns_) {
    if (tp.p.is_var() == false && tp.p.atom().kind == AtomKind::Literal)
      throw PreconditionError("predicate must be an IRI or a variable");
    has_var = has_var || tp.s.is_var() || tp.p.is_var() || tp.o.is_var();
  }
  if (!has_var) throw PreconditionError("query must contain at least one variable");

  auto node_list = nodes();
  auto index_of = [&](const QueryAtom& a) {
    return static_cast<std::size_t>(std::find(node_list.begin(), node_list.end(), a) - node_list.begin());
  };
  std::vector<std::size_t> parent(node_list.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& tp : patterns_) parent[root(index_of(tp.s))] = root(index_of(tp.o));
  for (std::size_t i = 1; i < node_list.size(); ++i)
    if (root(i) != root(0)) throw PreconditionError("query graph must be connected");
}

std::vector<std::string> QueryGraph::variables() const {
  std::vector<std::string> vars;
  for (const auto& tp : patterns_)
    for (const QueryAtom* a : {&tp.s, &tp.p, &tp.o})
      if (a->is_var() && std::find(vars.begin(), vars.end(), a->var_name()) == vars.end())
        vars.push_back(a->var_name());
  return vars;
}

std::vector<QueryAtom> QueryGraph::nodes() const {
  std::vector<QueryAtom> out;
  for (const auto& tp : patterns_)
    for (const QueryAtom* a : {&tp.s, &tp.o})
      if (std::find(out.begin(), out.end(), *a) == out.end()) out.push_back(*a);
  return out;
}

QueryGraph QueryGraph::with_cardinality(std::optional<std::uint64_t> cardinality) const {
  QueryGraph q = *this;
  q.cardinality_ = cardinality;
  return q;
}

QueryGraph QueryGraph::with_shape(std::optional<QueryShape> shape) const {
  QueryGraph q = *this;
  q.shape_ = shape;
  return q;
}

QueryGraph QueryGraph::with_extra(std::map<std::string, std::string> extra) const {
  QueryGraph q = *this;
  q.extra_ = std::move(extra);
  return q;
}

namespace {

// Exact canonical labelling: the lexicographically smallest token sequence
// over all pattern orderings, with variables numbered by first occurrence.
// Only minimal next tokens can lead to the minimum, so the search branches on
// ties only; repeated states are cut with a memo.
class Canonicalizer {
 public:
  explicit Canonicalizer(const QueryGraph& q) {
    std::unordered_map<std::string, int> var_index;
    for (const auto& tp : q.patterns()) {
      std::array<Slot, 3> slots;
      int k = 0;
      for (const QueryAtom* a : {&tp.s, &tp.p, &tp.o}) {
        Slot& slot = slots[k++];
        if (a->is_var()) {
          auto [it, inserted] = var_index.try_emplace(a->var_name(), static_cast<int>(var_index.size()));
          if (inserted) names_.push_back(a->var_name());
          slot.var = it->second;
        } else {
          slot.bound = "B" + atom_key(a->atom());
        }
      }
      patterns_.push_back(slots);
    }
    num_vars_ = static_cast<int>(var_index.size());
    if (static_cast<std::size_t>(num_vars_) > kMaxCanonicalVariables)
      throw PreconditionError("canonical_form: too many variables (" + std::to_string(num_vars_) + ")");
    if (patterns_.size() > 64) throw PreconditionError("canonical_form: too many patterns");
    var_patterns_.assign(num_vars_, {});
    for (std::size_t i = 0; i < patterns_.size(); ++i)
      for (const auto& s : patterns_[i])
        if (s.var >= 0) var_patterns_[s.var] |= (1ULL << i);
  }

  std::string run() {
    std::vector<int> labels(num_vars_, -1);
    std::vector<std::string> seq;
    search(0, labels, 0, seq);
    std::string key;
    for (const auto& t : best_) {
      key += t;
      key.push_back('\x1e');
    }
    return key;
  }

  // Variable names ordered by their label in the minimal sequence.
  std::vector<std::string> variable_order() {
    run();
    std::vector<std::string> out(names_.size());
    for (std::size_t v = 0; v < names_.size(); ++v) out[static_cast<std::size_t>(best_labels_[v])] = names_[v];
    return out;
  }

 private:
  struct Slot {
    int var = -1;
    std::string bound;
  };

  std::string token(std::size_t i, const std::vector<int>& labels, int next_label) const {
    std::string t;
    int fresh[3] = {-1, -1, -1};
    int k = 0;
    for (const auto& s : patterns_[i]) {
      if (s.var < 0) {
        t += s.bound;
      } else {
        int label = labels[s.var];
        if (label < 0) {
          // same unlabeled variable repeated within this pattern
          for (int j = 0; j < k; ++j)
            if (patterns_[i][j].var == s.var) label = fresh[j];
          if (label < 0) label = next_label++;
        }
        fresh[k] = label;
        t.push_back('V');
        t.push_back(static_cast<char>('a' + label));
      }
      t.push_back('\x1f');
      ++k;
    }
    return t;
  }

  void search(std::uint64_t placed, std::vector<int>& labels, int next_label, std::vector<std::string>& seq) {
    const std::size_t depth = seq.size();
    if (depth == patterns_.size()) {
      if (best_.empty() || seq < best_) {
        best_ = seq;
        best_labels_ = labels;
      }
      return;
    }
    std::string min_token;
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      if (placed & (1ULL << i)) continue;
      std::string t = token(i, labels, next_label);
      if (ties.empty() || t < min_token) {
        min_token = std::move(t);
        ties.assign(1, i);
      } else if (t == min_token) {
        ties.push_back(i);
      }
    }
    seq.push_back(min_token);
    if (!best_.empty() && !prefix_can_improve(seq)) {
      seq.pop_back();
      return;
    }
    for (std::size_t i : ties) {
      std::vector<int> saved = labels;
      int nl = next_label;
      for (const auto& s : patterns_[i])
        if (s.var >= 0 && labels[s.var] < 0) labels[s.var] = nl++;
      std::uint64_t now = placed | (1ULL << i);
      std::string key = state_key(now, labels, nl);
      auto it = memo_.find(key);
      if (it == memo_.end() || seq < it->second) {
        memo_[key] = seq;
        search(now, labels, nl, seq);
      }
      labels = std::move(saved);
    }
    seq.pop_back();
  }

  bool prefix_can_improve(const std::vector<std::string>& seq) const {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] < best_[i]) return true;
      if (seq[i] > best_[i]) return false;
    }
    return true;
  }

  std::string state_key(std::uint64_t placed, const std::vector<int>& labels, int next_label) const {
    std::string key = std::to_string(placed) + ":" + std::to_string(next_label) + ":";
    const std::uint64_t remaining = ~placed;
    for (int v = 0; v < num_vars_; ++v) {
      if (var_patterns_[v] & remaining) key.push_back(static_cast<char>('a' + labels[v] + 1));
      else key.push_back('-');
    }
    return key;
  }

  std::vector<std::array<Slot, 3>> patterns_;
  std::vector<std::uint64_t> var_patterns_;
  int num_vars_ = 0;
  std::vector<std::string> names_;
  std::vector<std::string> best_;
  std::vector<int> best_labels_;
  std::unordered_map<std::string, std::vector<std::string>> memo_;
};

}  // namespace

std::string canonical_form(const QueryGraph& query) { return Canonicalizer(query).run(); }

std::vector<std::string> canonical_variable_order(const QueryGraph& query) {
  return Canonicalizer(query).variable_order();
}

}  // namespace gnce
