#include "gnce/sampler.hpp"

#include <algorithm>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "gnce/error.hpp"

namespace gnce {

void SamplerConfig::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(binding.p_var_subject) || !prob_ok(binding.p_var_object) || !prob_ok(binding.p_var_predicate))
    throw PreconditionError("binding probabilities must lie in [0, 1]");
  if (sizes.empty()) throw PreconditionError("at least one query size is required");
  for (auto s : sizes)
    if (s < 2) throw PreconditionError("query sizes must be >= 2");
  if (count_per_size < 1) throw PreconditionError("count_per_size must be >= 1");
  if (shape == QueryShape::Other) throw PreconditionError("cannot sample shape 'other'");
}

QuerySampler::QuerySampler(const TripleStore& store, BindingPolicy binding) : store_(store), binding_(binding) {}

const std::vector<AtomId>& QuerySampler::subjects_with_outdegree(std::size_t min_degree) const {
  auto it = eligible_.find(min_degree);
  if (it != eligible_.end()) return it->second;
  std::vector<AtomId> out;
  for (AtomId s : store_.subjects())
    if (store_.outgoing(s).size() >= min_degree) out.push_back(s);
  return eligible_.emplace(min_degree, std::move(out)).first->second;
}

std::vector<IdTriple> QuerySampler::pick_star(AtomId center, std::size_t k, const std::vector<IdTriple>& excluded,
                                              Rng& rng) const {
  std::vector<IdTriple> candidates;
  for (const auto& t : store_.outgoing(center))
    if (std::find(excluded.begin(), excluded.end(), t) == excluded.end()) candidates.push_back(t);
  if (candidates.size() < k) return {};
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.index(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

bool QuerySampler::walk_chain(std::size_t length, AtomId start, Rng& rng, Chain& out) const {
  out.triples.clear();
  std::vector<AtomId> visited{start};
  AtomId cur = start;
  std::vector<IdTriple> candidates;
  for (std::size_t i = 0; i < length; ++i) {
    candidates.clear();
    for (const auto& t : store_.outgoing(cur))
      if (std::find(visited.begin(), visited.end(), t.o) == visited.end()) candidates.push_back(t);
    if (candidates.empty()) return false;
    const IdTriple& t = candidates[rng.index(candidates.size())];
    out.triples.push_back(t);
    visited.push_back(t.o);
    cur = t.o;
  }
  return true;
}

QueryGraph QuerySampler::sample_star(std::size_t size, Rng& rng) const {
  if (size < 1) throw PreconditionError("star size must be >= 1");
  const auto& eligible = subjects_with_outdegree(size);
  if (eligible.empty())
    throw SamplingExhausted("no subject with out-degree >= " + std::to_string(size));
  AtomId s = eligible[rng.index(eligible.size())];
  auto triples = pick_star(s, size, {}, rng);
  std::vector<TriplePattern> patterns;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    QueryAtom p = rng.bernoulli(binding_.p_var_predicate) ? QueryAtom::var("p" + std::to_string(i + 1))
                                                           : QueryAtom::bound(store_.atom(t.p));
    QueryAtom o = rng.bernoulli(binding_.p_var_object) ? QueryAtom::var("o" + std::to_string(i + 1))
                                                        : QueryAtom::bound(store_.atom(t.o));
    patterns.push_back({QueryAtom::var("s"), std::move(p), std::move(o)});
  }
  return QueryGraph(std::move(patterns), std::nullopt, QueryShape::Star);
}

QueryGraph QuerySampler::compose(const Chain& chain, const std::vector<IdTriple>& end_star,
                                 const std::vector<IdTriple>& start_star, QueryShape shape, Rng& rng) const {
  const std::size_t len = chain.triples.size();
  std::vector<QueryAtom> nodes;
  nodes.reserve(len + 1);
  for (std::size_t i = 0; i <= len; ++i) {
    AtomId id = i == 0 ? chain.triples[0].s : chain.triples[i - 1].o;
    bool as_var;
    if (i == 0) as_var = !start_star.empty() || rng.bernoulli(binding_.p_var_subject);
    else if (i == len) as_var = !end_star.empty() || rng.bernoulli(binding_.p_var_object);
    else as_var = true;
    nodes.push_back(as_var ? QueryAtom::var("v" + std::to_string(i)) : QueryAtom::bound(store_.atom(id)));
  }
  int pred_vars = 0;
  auto predicate = [&](AtomId p) {
    return rng.bernoulli(binding_.p_var_predicate) ? QueryAtom::var("p" + std::to_string(++pred_vars))
                                                    : QueryAtom::bound(store_.atom(p));
  };
  auto star_patterns = [&](const std::vector<IdTriple>& star, const QueryAtom& center, const std::string& prefix,
                           std::vector<TriplePattern>& out) {
    for (std::size_t k = 0; k < star.size(); ++k) {
      QueryAtom p = predicate(star[k].p);
      QueryAtom o = rng.bernoulli(binding_.p_var_object) ? QueryAtom::var(prefix + std::to_string(k + 1))
                                                          : QueryAtom::bound(store_.atom(star[k].o));
      out.push_back({center, std::move(p), std::move(o)});
    }
  };
  std::vector<TriplePattern> patterns;
  star_patterns(start_star, nodes.front(), "a", patterns);
  for (std::size_t i = 0; i < len; ++i) patterns.push_back({nodes[i], predicate(chain.triples[i].p), nodes[i + 1]});
  star_patterns(end_star, nodes.back(), "b", patterns);

  bool has_var = std::any_of(patterns.begin(), patterns.end(), [](const TriplePattern& tp) {
    return tp.s.is_var() || tp.p.is_var() || tp.o.is_var();
  });
  if (!has_var) {
    // single fully bound triple: unbind its end
    for (auto& tp : patterns)
      if (tp.o == nodes.back()) tp.o = QueryAtom::var("v" + std::to_string(len));
  }
  return QueryGraph(std::move(patterns), std::nullopt, shape);
}

QueryGraph QuerySampler::sample_path(std::size_t size, Rng& rng) const {
  if (size < 1) throw PreconditionError("path size must be >= 1");
  const auto& starts = store_.subjects();
  if (starts.empty()) throw SamplingExhausted("store has no subjects");
  Chain chain;
  for (int attempt = 0; attempt < kWalkAttempts; ++attempt) {
    AtomId start = starts[rng.index(starts.size())];
    if (walk_chain(size, start, rng, chain)) return compose(chain, {}, {}, QueryShape::Path, rng);
  }
  throw SamplingExhausted("no directed path of length " + std::to_string(size) + " found");
}

QueryGraph QuerySampler::sample_flower(std::size_t size, Rng& rng) const {
  if (size < 3) throw PreconditionError("flower size must be >= 3");
  const std::size_t star = std::max<std::size_t>(2, (size + 1) / 2);
  const std::size_t path = size - star;
  const auto& starts = store_.subjects();
  if (starts.empty()) throw SamplingExhausted("store has no subjects");
  Chain chain;
  for (int attempt = 0; attempt < kWalkAttempts; ++attempt) {
    AtomId start = starts[rng.index(starts.size())];
    if (!walk_chain(path, start, rng, chain)) continue;
    AtomId end = chain.triples.back().o;
    auto end_star = pick_star(end, star, {}, rng);
    if (end_star.empty()) continue;
    return compose(chain, end_star, {}, QueryShape::Flower, rng);
  }
  throw SamplingExhausted("no flower of size " + std::to_string(size) + " found");
}

QueryGraph QuerySampler::sample_snowflake(std::size_t size, Rng& rng) const {
  if (size < 5) throw PreconditionError("snowflake size must be >= 5");
  const std::size_t path = std::max<std::size_t>(1, size / 5);
  const std::size_t rest = size - path;
  const std::size_t head = (rest + 1) / 2, tail = rest / 2;
  const auto& starts = subjects_with_outdegree(head + 1);
  if (starts.empty()) throw SamplingExhausted("no subject with out-degree >= " + std::to_string(head + 1));
  Chain chain;
  for (int attempt = 0; attempt < kWalkAttempts; ++attempt) {
    AtomId start = starts[rng.index(starts.size())];
    if (!walk_chain(path, start, rng, chain)) continue;
    AtomId end = chain.triples.back().o;
    auto end_star = pick_star(end, tail, {}, rng);
    if (end_star.empty()) continue;
    auto start_star = pick_star(start, head, {chain.triples.front()}, rng);
    if (start_star.empty()) continue;
    return compose(chain, end_star, start_star, QueryShape::Snowflake, rng);
  }
  throw SamplingExhausted("no snowflake of size " + std::to_string(size) + " found");
}

QueryGraph QuerySampler::sample(QueryShape shape, std::size_t size, Rng& rng) const {
  switch (shape) {
    case QueryShape::Star: return sample_star(size, rng);
    case QueryShape::Path: return sample_path(size, rng);
    case QueryShape::Flower: return sample_flower(size, rng);
    case QueryShape::Snowflake: return sample_snowflake(size, rng);
    case QueryShape::Other: break;
  }
  throw PreconditionError("cannot sample shape 'other'");
}

namespace {

std::vector<QueryGraph> workload_for_size(const TripleStore& store, const SamplerConfig& config, std::size_t size,
                                          WorkloadReport& report) {
  QuerySampler sampler(store, config.binding);
  Rng rng(mix_seed({config.seed, static_cast<std::uint64_t>(config.shape), size}));
  std::unordered_set<std::string> keys;
  std::vector<QueryGraph> out;
  const std::size_t budget = config.retry_factor * config.count_per_size;
  std::size_t consecutive_exhausted = 0;
  for (std::size_t attempt = 0; attempt < budget && out.size() < config.count_per_size; ++attempt) {
    ++report.attempts;
    std::optional<QueryGraph> q;
    try {
      q = sampler.sample(config.shape, size, rng);
    } catch (const SamplingExhausted&) {
      ++report.exhausted;
      if (config.shape == QueryShape::Star || ++consecutive_exhausted >= 20) break;
      continue;
    }
    consecutive_exhausted = 0;
    std::string key = canonical_form(*q);
    if (keys.contains(key)) {
      ++report.duplicates;
      continue;
    }
    keys.insert(std::move(key));
    CountResult c = count_solutions(store, *q, config.limits);
    if (!c.exact) {
      ++report.resource_limited;
      continue;
    }
    if (c.count > config.max_cardinality) {
      ++report.too_large;
      continue;
    }
    if (c.count == 0) {
      ++report.zero;
      continue;
    }
    out.push_back(q->with_cardinality(c.count));
  }
  report.emitted[size] = out.size();
  return out;
}

void merge(WorkloadReport& into, const WorkloadReport& r) {
  for (auto [k, v] : r.emitted) into.emitted[k] += v;
  into.attempts += r.attempts;
  into.exhausted += r.exhausted;
  into.duplicates += r.duplicates;
  into.resource_limited += r.resource_limited;
  into.too_large += r.too_large;
  into.zero += r.zero;
}

}  // namespace

std::vector<QueryGraph> build_workload(const TripleStore& store, const SamplerConfig& config,
                                       WorkloadReport* report) {
  config.validate();
  const std::size_t n = config.sizes.size();
  std::vector<std::vector<QueryGraph>> per_size(n);
  std::vector<WorkloadReport> reports(n);
  if (config.threads > 1 && n > 1) {
    std::vector<std::thread> workers;
    std::size_t next = 0;
    std::mutex mu;
    auto work = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= n) return;
          i = next++;
        }
        per_size[i] = workload_for_size(store, config, config.sizes[i], reports[i]);
      }
    };
    for (unsigned t = 0; t < std::min<std::size_t>(config.threads, n); ++t) workers.emplace_back(work);
    for (auto& w : workers) w.join();
  } else {
    for (std::size_t i = 0; i < n; ++i) per_size[i] = workload_for_size(store, config, config.sizes[i], reports[i]);
  }
  std::vector<QueryGraph> out;
  WorkloadReport total;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& q : per_size[i]) out.push_back(std::move(q));
    merge(total, reports[i]);
  }
  if (report) *report = total;
  return out;
}

}  // namespace gnce
