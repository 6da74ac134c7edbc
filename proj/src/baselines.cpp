#include "gnce/baselines.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "gnce/error.hpp"
#include "gnce/matcher.hpp"

namespace gnce {

CsetSummary CsetSummary::build(const TripleStore& store) {
  CsetSummary cs;
  cs.total_triples_ = store.size();
  std::map<std::pair<std::vector<AtomId>, std::vector<std::uint64_t>>, std::uint64_t> signatures;
  for (AtomId s : store.subjects()) {
    std::vector<AtomId> preds;
    std::vector<std::uint64_t> degree;
    // SPO order groups a subject's triples by predicate.
    for (const auto& t : store.match(IdPattern{s, std::nullopt, std::nullopt})) {
      if (!preds.empty() && preds.back() == t.p) {
        ++degree.back();
      } else {
        preds.push_back(t.p);
        degree.push_back(1);
      }
    }
    ++signatures[{std::move(preds), std::move(degree)}];
    ++cs.num_subjects_;
  }
  cs.groups_by_predicate_.assign(store.num_atoms(), {});
  for (auto& [key, count] : signatures) {
    const auto g = static_cast<std::uint32_t>(cs.groups_.size());
    for (AtomId p : key.first) cs.groups_by_predicate_[p].push_back(g);
    cs.groups_.push_back(Group{key.first, key.second, count});
  }
  return cs;
}

std::vector<CsetSummary::Set> CsetSummary::sets() const {
  std::map<std::vector<AtomId>, Set> merged;
  for (const auto& g : groups_) {
    auto& s = merged[g.predicates];
    if (s.predicates.empty()) {
      s.predicates = g.predicates;
      s.multiplicity.assign(g.predicates.size(), 0);
    }
    s.count += g.count;
    for (std::size_t i = 0; i < g.degree.size(); ++i) s.multiplicity[i] += g.degree[i] * g.count;
  }
  std::vector<Set> out;
  for (auto& [_, s] : merged) out.push_back(std::move(s));
  return out;
}

double CsetSummary::star_estimate(const std::vector<AtomId>& pattern_predicates) const {
  std::vector<AtomId> needed = pattern_predicates;
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  const std::vector<std::uint32_t>* candidates = nullptr;
  for (AtomId p : needed) {
    if (p >= groups_by_predicate_.size()) return 0.0;
    if (!candidates || groups_by_predicate_[p].size() < candidates->size()) candidates = &groups_by_predicate_[p];
  }
  if (!candidates) return 0.0;
  double total = 0.0;
  for (std::uint32_t gi : *candidates) {
    const Group& g = groups_[gi];
    if (!std::includes(g.predicates.begin(), g.predicates.end(), needed.begin(), needed.end())) continue;
    double per_subject = 1.0;
    for (AtomId p : pattern_predicates) {
      auto it = std::lower_bound(g.predicates.begin(), g.predicates.end(), p);
      per_subject *= static_cast<double>(g.degree[static_cast<std::size_t>(it - g.predicates.begin())]);
    }
    total += static_cast<double>(g.count) * per_subject;
  }
  return total;
}

double CsetSummary::estimate(const TripleStore& store, const QueryGraph& query) const {
  // Group patterns by subject term.
  std::vector<QueryAtom> centers;
  std::vector<std::vector<std::size_t>> stars;
  const auto& patterns = query.patterns();
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    if (patterns[i].p.is_var()) throw PreconditionError("characteristic sets need bound predicates");
    auto it = std::find(centers.begin(), centers.end(), patterns[i].s);
    if (it == centers.end()) {
      centers.push_back(patterns[i].s);
      stars.emplace_back();
      it = centers.end() - 1;
    }
    stars[static_cast<std::size_t>(it - centers.begin())].push_back(i);
  }
  if (num_subjects_ == 0) return 0.0;
  const double subjects = static_cast<double>(num_subjects_);

  double est = 1.0;
  for (std::size_t k = 0; k < stars.size(); ++k) {
    std::vector<AtomId> preds;
    double scale = centers[k].is_var() ? 1.0 : 1.0 / subjects;
    for (std::size_t i : stars[k]) {
      auto p = store.find(patterns[i].p.atom());
      if (!p) return 0.0;
      preds.push_back(*p);
      if (!patterns[i].o.is_var())
        scale *= static_cast<double>(store.occ(patterns[i].o.atom())) / static_cast<double>(total_triples_);
    }
    est *= star_estimate(preds) * scale;
  }
  // Every extra star mentioning a variable is one join.
  std::map<std::string, std::size_t> stars_per_var;
  for (std::size_t k = 0; k < stars.size(); ++k) {
    std::vector<std::string> seen;
    auto note = [&](const QueryAtom& a) {
      if (a.is_var() && std::find(seen.begin(), seen.end(), a.var_name()) == seen.end()) seen.push_back(a.var_name());
    };
    note(centers[k]);
    for (std::size_t i : stars[k]) note(patterns[i].o);
    for (const auto& v : seen) ++stars_per_var[v];
  }
  for (const auto& [_, n] : stars_per_var)
    for (std::size_t j = 1; j < n; ++j) est /= subjects;
  return est;
}

std::vector<std::size_t> wanderjoin_plan(const TripleStore& store, const QueryGraph& query) {
  const CompiledQuery cq = CompiledQuery::compile(store, query);
  const std::vector<std::uint32_t> none(cq.num_vars(), CompiledQuery::kUnbound);
  std::vector<std::size_t> sizes;
  for (const auto& p : cq.patterns) sizes.push_back(store.match(cq.bind(p, none)).size());

  auto vars_of = [&](std::size_t i) {
    std::vector<std::uint32_t> v;
    for (const auto& s : cq.patterns[i])
      if (s.is_var) v.push_back(s.value);
    return v;
  };
  std::vector<std::size_t> plan;
  std::vector<bool> used(cq.patterns.size(), false), var_seen(cq.num_vars(), false);
  while (plan.size() < cq.patterns.size()) {
    std::size_t best = cq.patterns.size();
    for (std::size_t i = 0; i < cq.patterns.size(); ++i) {
      if (used[i]) continue;
      bool connected = plan.empty();
      for (auto v : vars_of(i)) connected = connected || var_seen[v];
      if (!connected) continue;
      if (best == cq.patterns.size() || sizes[i] < sizes[best]) best = i;
    }
    // Joined only through constants: continue with the cheapest remaining pattern.
    if (best == cq.patterns.size())
      for (std::size_t i = 0; i < cq.patterns.size(); ++i)
        if (!used[i] && (best == cq.patterns.size() || sizes[i] < sizes[best])) best = i;
    used[best] = true;
    for (auto v : vars_of(best)) var_seen[v] = true;
    plan.push_back(best);
  }
  return plan;
}

namespace {

// Patterns mentioning one variable twice need per-triple filtering; for the
// rest every triple in the index range is consistent.
std::vector<bool> repeated_vars(const CompiledQuery& cq) {
  std::vector<bool> out;
  for (const auto& p : cq.patterns) {
    bool r = false;
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) r = r || (p[a].is_var && p[b].is_var && p[a].value == p[b].value);
    out.push_back(r);
  }
  return out;
}

double run_walk(const TripleStore& store, const CompiledQuery& cq, std::span<const std::size_t> plan,
                const std::vector<bool>& repeated, Rng& rng, std::vector<std::uint32_t>& assignment,
                std::vector<const IdTriple*>& candidates) {
  std::fill(assignment.begin(), assignment.end(), CompiledQuery::kUnbound);
  double estimate = 1.0;
  for (std::size_t i : plan) {
    const auto& pattern = cq.patterns[i];
    auto range = store.match(cq.bind(pattern, assignment));
    const IdTriple* pick = nullptr;
    if (!repeated[i]) {
      if (range.empty()) return 0.0;
      pick = &range[rng.index(range.size())];
      estimate *= static_cast<double>(range.size());
    } else {
      candidates.clear();
      for (const auto& t : range)
        if (cq.consistent(pattern, t, assignment)) candidates.push_back(&t);
      if (candidates.empty()) return 0.0;
      pick = candidates[rng.index(candidates.size())];
      estimate *= static_cast<double>(candidates.size());
    }
    const IdTriple& t = *pick;
    const AtomId parts[3] = {t.s, t.p, t.o};
    for (int k = 0; k < 3; ++k)
      if (pattern[k].is_var) assignment[pattern[k].value] = parts[k];
  }
  return estimate;
}

}  // namespace

double wanderjoin_run(const TripleStore& store, const QueryGraph& query, std::span<const std::size_t> plan,
                      Rng& rng) {
  const CompiledQuery cq = CompiledQuery::compile(store, query);
  if (cq.unsatisfiable) return 0.0;
  std::vector<std::uint32_t> assignment(cq.num_vars());
  std::vector<const IdTriple*> candidates;
  return run_walk(store, cq, plan, repeated_vars(cq), rng, assignment, candidates);
}

WanderJoinResult estimate_wanderjoin(const TripleStore& store, const QueryGraph& query, std::size_t runs, Rng& rng) {
  if (runs == 0) throw PreconditionError("wanderjoin needs at least one run");
  WanderJoinResult r;
  r.runs = runs;
  const CompiledQuery cq = CompiledQuery::compile(store, query);
  if (cq.unsatisfiable) {
    r.failures = runs;
    return r;
  }
  const auto plan = wanderjoin_plan(store, query);
  const auto repeated = repeated_vars(cq);
  std::vector<std::uint32_t> assignment(cq.num_vars());
  std::vector<const IdTriple*> candidates;
  double sum = 0.0;
  for (std::size_t k = 0; k < runs; ++k) {
    const double e = run_walk(store, cq, plan, repeated, rng, assignment, candidates);
    if (e == 0.0) ++r.failures;
    sum += e;
  }
  r.estimate = sum / static_cast<double>(runs);
  return r;
}

}  // namespace gnce
