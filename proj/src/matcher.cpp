#include "gnce/matcher.hpp"

#include <limits>
#include <unordered_map>

#include "gnce/error.hpp"

namespace gnce {

namespace {

using Clock = std::chrono::steady_clock;

std::uint32_t component(const IdTriple& t, int pos) { return pos == 0 ? t.s : (pos == 1 ? t.p : t.o); }

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b, bool& overflow) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) {
    overflow = true;
    return UINT64_MAX;
  }
  return r;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b, bool& overflow) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) {
    overflow = true;
    return UINT64_MAX;
  }
  return r;
}

}  // namespace

MatchLimits default_sampling_limits() {
  return MatchLimits{10'000'000ULL, std::chrono::milliseconds(30'000)};
}

CompiledQuery CompiledQuery::compile(const TripleStore& store, const QueryGraph& query) {
  CompiledQuery cq;
  cq.var_names = query.variables();
  for (const auto& tp : query.patterns()) {
    Pattern p;
    int k = 0;
    for (const QueryAtom* a : {&tp.s, &tp.p, &tp.o}) {
      Slot& slot = p[k++];
      if (a->is_var()) {
        slot.is_var = true;
        for (std::size_t v = 0; v < cq.var_names.size(); ++v)
          if (cq.var_names[v] == a->var_name()) slot.value = static_cast<std::uint32_t>(v);
      } else {
        auto id = store.find(a->atom());
        if (!id) cq.unsatisfiable = true;
        slot.value = id.value_or(0);
      }
    }
    cq.patterns.push_back(p);
  }
  return cq;
}

IdPattern CompiledQuery::bind(const Pattern& pattern, const std::vector<std::uint32_t>& assignment) const {
  std::array<std::optional<AtomId>, 3> ids;
  for (int k = 0; k < 3; ++k) {
    const Slot& s = pattern[k];
    if (!s.is_var) ids[k] = s.value;
    else if (assignment[s.value] != kUnbound) ids[k] = assignment[s.value];
  }
  return IdPattern{ids[0], ids[1], ids[2]};
}

bool CompiledQuery::consistent(const Pattern& pattern, const IdTriple& t,
                               const std::vector<std::uint32_t>& assignment) const {
  for (int k = 0; k < 3; ++k) {
    const Slot& s = pattern[k];
    std::uint32_t actual = component(t, k);
    if (!s.is_var) {
      if (actual != s.value) return false;
    } else if (assignment[s.value] != kUnbound) {
      if (assignment[s.value] != actual) return false;
    } else {
      for (int j = 0; j < k; ++j)
        if (pattern[j].is_var && pattern[j].value == s.value && component(t, j) != actual) return false;
    }
  }
  return true;
}

namespace {

class Counter {
 public:
  Counter(const TripleStore& store, const CompiledQuery& cq, const MatchLimits& limits)
      : store_(store), cq_(cq), limits_(limits), assignment_(cq.num_vars(), CompiledQuery::kUnbound) {
    if (cq.num_vars() > 64 || cq.patterns.size() > 64) throw PreconditionError("query too large for the matcher");
    for (const auto& p : cq.patterns) {
      std::uint64_t m = 0;
      bool repeated = false;
      for (int k = 0; k < 3; ++k) {
        if (!p[k].is_var) continue;
        if (m & (1ULL << p[k].value)) repeated = true;
        m |= 1ULL << p[k].value;
      }
      pattern_vars_.push_back(m);
      repeated_var_.push_back(repeated);
    }
    if (limits.timeout) deadline_ = Clock::now() + *limits.timeout;
  }

  CountResult run() {
    if (cq_.unsatisfiable) return CountResult::Exact(0);
    const std::uint64_t all = cq_.patterns.size() == 64 ? ~0ULL : ((1ULL << cq_.patterns.size()) - 1);
    std::uint64_t n = count(all, true);
    if (aborted_) return CountResult::AtLeast(n, abort_reason_);
    if (overflow_) return CountResult::AtLeast(n, "limit");
    if (limits_.limit && n > *limits_.limit) return CountResult::AtLeast(n, "limit");
    return CountResult::Exact(n);
  }

 private:
  std::uint64_t bound_vars() const {
    std::uint64_t m = 0;
    for (std::size_t v = 0; v < assignment_.size(); ++v)
      if (assignment_[v] != CompiledQuery::kUnbound) m |= 1ULL << v;
    return m;
  }

  // Splits `mask` into groups of patterns connected through unbound variables.
  std::vector<std::uint64_t> components(std::uint64_t mask) const {
    const std::uint64_t free_vars = ~bound_vars();
    std::vector<std::uint64_t> out;
    std::uint64_t left = mask;
    while (left) {
      std::uint64_t comp = left & (~left + 1);
      std::uint64_t vars = 0;
      bool grew = true;
      while (grew) {
        grew = false;
        for (std::uint64_t m = comp; m; m &= m - 1) vars |= pattern_vars_[__builtin_ctzll(m)] & free_vars;
        for (std::uint64_t m = left & ~comp; m; m &= m - 1) {
          int i = __builtin_ctzll(m);
          if (pattern_vars_[i] & vars) {
            comp |= 1ULL << i;
            grew = true;
          }
        }
      }
      out.push_back(comp);
      left &= ~comp;
    }
    return out;
  }

  std::uint64_t count(std::uint64_t mask, bool top) {
    if (mask == 0) return 1;
    auto comps = components(mask);
    if (comps.size() == 1) return count_component(mask, top);
    std::uint64_t product = 1;
    for (auto comp : comps) {
      std::uint64_t c = count_component(comp, false);
      if (c == 0) return 0;
      product = sat_mul(product, c, overflow_);
      if (aborted_) return 0;
    }
    return product;
  }

  std::string memo_key(std::uint64_t mask) const {
    std::uint64_t touched = 0;
    for (std::uint64_t m = mask; m; m &= m - 1) touched |= pattern_vars_[__builtin_ctzll(m)];
    std::string key(reinterpret_cast<const char*>(&mask), sizeof(mask));
    for (std::uint64_t m = touched; m; m &= m - 1) {
      std::uint32_t v = assignment_[__builtin_ctzll(m)];
      key.append(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    return key;
  }

  bool check_deadline() {
    if (++ticks_ % 1024 != 0 || !deadline_) return false;
    if (Clock::now() > *deadline_) {
      aborted_ = true;
      abort_reason_ = "timeout";
    }
    return aborted_;
  }

  std::uint64_t count_component(std::uint64_t mask, bool top) {
    std::string key = memo_key(mask);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    int best = -1;
    std::span<const IdTriple> best_range;
    for (std::uint64_t m = mask; m; m &= m - 1) {
      int i = __builtin_ctzll(m);
      auto range = store_.match(cq_.bind(cq_.patterns[i], assignment_));
      if (best < 0 || range.size() < best_range.size()) {
        best = i;
        best_range = range;
      }
    }
    const auto& pattern = cq_.patterns[best];
    const std::uint64_t rest = mask & ~(1ULL << best);
    std::uint64_t sum = 0;

    if (rest == 0 && !repeated_var_[best]) {
      sum = best_range.size();
    } else {
      std::array<int, 3> newly{-1, -1, -1};
      for (const auto& t : best_range) {
        if (check_deadline()) break;
        if (!cq_.consistent(pattern, t, assignment_)) continue;
        int n = 0;
        for (int k = 0; k < 3; ++k) {
          const auto& s = pattern[k];
          if (s.is_var && assignment_[s.value] == CompiledQuery::kUnbound) {
            assignment_[s.value] = component(t, k);
            newly[n++] = static_cast<int>(s.value);
          }
        }
        std::uint64_t c = count(rest, false);
        for (int j = 0; j < n; ++j) assignment_[newly[j]] = CompiledQuery::kUnbound;
        sum = sat_add(sum, c, overflow_);
        if (aborted_) break;
        if (top && limits_.limit && sum > *limits_.limit) {
          aborted_ = true;
          abort_reason_ = "limit";
          break;
        }
      }
    }
    if (!aborted_ && memo_.size() < kMemoCap) memo_.emplace(std::move(key), sum);
    return sum;
  }

  static constexpr std::size_t kMemoCap = 1 << 20;

  const TripleStore& store_;
  const CompiledQuery& cq_;
  const MatchLimits& limits_;
  std::vector<std::uint32_t> assignment_;
  std::vector<std::uint64_t> pattern_vars_;
  std::vector<bool> repeated_var_;
  std::unordered_map<std::string, std::uint64_t> memo_;
  std::optional<Clock::time_point> deadline_;
  std::uint64_t ticks_ = 0;
  bool aborted_ = false;
  bool overflow_ = false;
  std::string abort_reason_;
};

void enumerate_rec(const TripleStore& store, const CompiledQuery& cq, std::uint64_t mask,
                   std::vector<std::uint32_t>& assignment, std::vector<Binding>& out, std::size_t limit) {
  if (out.size() >= limit) return;
  if (mask == 0) {
    Binding b;
    for (std::size_t v = 0; v < cq.num_vars(); ++v) b.emplace(cq.var_names[v], store.atom(assignment[v]));
    out.push_back(std::move(b));
    return;
  }
  int best = -1;
  std::span<const IdTriple> best_range;
  for (std::uint64_t m = mask; m; m &= m - 1) {
    int i = __builtin_ctzll(m);
    auto range = store.match(cq.bind(cq.patterns[i], assignment));
    if (best < 0 || range.size() < best_range.size()) {
      best = i;
      best_range = range;
    }
  }
  const auto& pattern = cq.patterns[best];
  for (const auto& t : best_range) {
    if (!cq.consistent(pattern, t, assignment)) continue;
    std::array<int, 3> newly{-1, -1, -1};
    int n = 0;
    for (int k = 0; k < 3; ++k) {
      const auto& s = pattern[k];
      if (s.is_var && assignment[s.value] == CompiledQuery::kUnbound) {
        assignment[s.value] = component(t, k);
        newly[n++] = static_cast<int>(s.value);
      }
    }
    enumerate_rec(store, cq, mask & ~(1ULL << best), assignment, out, limit);
    for (int j = 0; j < n; ++j) assignment[newly[j]] = CompiledQuery::kUnbound;
    if (out.size() >= limit) return;
  }
}

}  // namespace

CountResult count_solutions(const TripleStore& store, const QueryGraph& query, const MatchLimits& limits) {
  CompiledQuery cq = CompiledQuery::compile(store, query);
  return Counter(store, cq, limits).run();
}

std::vector<Binding> enumerate_solutions(const TripleStore& store, const QueryGraph& query,
                                         std::optional<std::size_t> limit) {
  CompiledQuery cq = CompiledQuery::compile(store, query);
  std::vector<Binding> out;
  if (cq.unsatisfiable) return out;
  if (cq.patterns.size() > 64) throw PreconditionError("query too large for the matcher");
  std::vector<std::uint32_t> assignment(cq.num_vars(), CompiledQuery::kUnbound);
  const std::uint64_t all = cq.patterns.size() == 64 ? ~0ULL : ((1ULL << cq.patterns.size()) - 1);
  enumerate_rec(store, cq, all, assignment, out, limit.value_or(std::numeric_limits<std::size_t>::max()));
  return out;
}

}  // namespace gnce
