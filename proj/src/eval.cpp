#include "gnce/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "gnce/error.hpp"
#include "gnce/rng.hpp"

namespace gnce {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

double q_error(double true_card, double estimate) {
  if (!(true_card > 0.0) || !(estimate > 0.0)) throw PreconditionError("q-error needs positive arguments");
  return std::max(true_card / estimate, estimate / true_card);
}

std::size_t bucket_of(std::uint64_t cardinality) {
  std::size_t k = 0;
  std::uint64_t upper = 5;
  while (k + 1 < kNumBuckets && cardinality >= upper) {
    ++k;
    upper *= 5;
  }
  return k;
}

std::string bucket_label(std::size_t bucket) {
  std::uint64_t lo = 1;
  for (std::size_t i = 0; i < bucket; ++i) lo *= 5;
  if (bucket + 1 >= kNumBuckets) return "[" + std::to_string(lo) + ",inf)";
  return "[" + std::to_string(lo) + "," + std::to_string(lo * 5) + ")";
}

Estimator gnce_estimator(const GnceModel& model, const Featurizer& featurizer) {
  return [&model, &featurizer](const QueryGraph& q, std::size_t) {
    EstimateResult r;
    auto t0 = Clock::now();
    QueryFeaturization f = featurizer.featurize(q);
    r.prepare_ms = elapsed_ms(t0);
    auto t1 = Clock::now();
    r.value = std::exp(model.forward(f));
    r.inference_ms = elapsed_ms(t1);
    return r;
  };
}

Estimator cset_estimator(const CsetSummary& summary, const TripleStore& store) {
  return [&summary, &store](const QueryGraph& q, std::size_t) {
    EstimateResult r;
    auto t0 = Clock::now();
    try {
      r.value = summary.estimate(store, q);
    } catch (const PreconditionError&) {
      r.value.reset();
    }
    r.inference_ms = elapsed_ms(t0);
    return r;
  };
}

Estimator wanderjoin_estimator(const TripleStore& store, std::size_t runs, std::uint64_t seed) {
  return [&store, runs, seed](const QueryGraph& q, std::size_t index) {
    EstimateResult r;
    Rng rng(mix_seed({seed, index}));
    auto t0 = Clock::now();
    r.value = estimate_wanderjoin(store, q, runs, rng).estimate;
    r.inference_ms = elapsed_ms(t0);
    return r;
  };
}

Estimator constant_estimator(double value) {
  return [value](const QueryGraph&, std::size_t) { return EstimateResult{value, 0.0, 0.0}; };
}

EvalReport evaluate(const std::string& name, const Estimator& estimator, std::span<const QueryGraph> corpus,
                    const EvalOptions& options) {
  EvalReport report;
  report.estimator = name;
  report.warmup = options.warmup;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& q = corpus[i];
    if (!q.true_cardinality() || *q.true_cardinality() < 1)
      throw PreconditionError("query " + std::to_string(i) + " has no cardinality >= 1");
    EstimateResult est = estimator(q, i);
    QueryRecord rec;
    rec.true_cardinality = *q.true_cardinality();
    rec.size = q.size();
    rec.shape = q.shape() ? std::string(shape_name(*q.shape())) : "";
    rec.prepare_ms = est.prepare_ms;
    rec.inference_ms = est.inference_ms;
    if (est.value && std::isfinite(*est.value)) rec.raw_estimate = *est.value;
    rec.failed = !rec.raw_estimate || *rec.raw_estimate <= 0.0;
    rec.estimate = rec.raw_estimate ? std::max(1.0, *rec.raw_estimate) : 1.0;
    rec.q_error = q_error(static_cast<double>(rec.true_cardinality), rec.estimate);
    report.records.push_back(std::move(rec));
  }

  std::vector<double> qs;
  for (const auto& r : report.records) {
    qs.push_back(r.q_error);
    report.failures += r.failed ? 1 : 0;
  }
  if (!qs.empty()) {
    report.mean_q_error = std::accumulate(qs.begin(), qs.end(), 0.0) / static_cast<double>(qs.size());
    report.max_q_error = *std::max_element(qs.begin(), qs.end());
    std::sort(qs.begin(), qs.end());
    const std::size_t n = qs.size();
    report.median_q_error = n % 2 ? qs[n / 2] : 0.5 * (qs[n / 2 - 1] + qs[n / 2]);
  }

  std::vector<double> qsum(kNumBuckets, 0.0), lsum(kNumBuckets, 0.0);
  std::vector<std::size_t> timed(kNumBuckets, 0);
  report.buckets.resize(kNumBuckets);
  std::size_t timed_total = 0;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& r = report.records[i];
    const std::size_t b = bucket_of(r.true_cardinality);
    ++report.buckets[b].n;
    qsum[b] += r.q_error;
    if (i < options.warmup) continue;
    lsum[b] += r.prepare_ms + r.inference_ms;
    ++timed[b];
    report.mean_prepare_ms += r.prepare_ms;
    report.mean_inference_ms += r.inference_ms;
    ++timed_total;
  }
  for (std::size_t b = 0; b < kNumBuckets; ++b) {
    auto& s = report.buckets[b];
    s.label = bucket_label(b);
    if (s.n) s.mean_q_error = qsum[b] / static_cast<double>(s.n);
    if (timed[b]) s.mean_latency_ms = lsum[b] / static_cast<double>(timed[b]);
  }
  if (timed_total) {
    report.mean_prepare_ms /= static_cast<double>(timed_total);
    report.mean_inference_ms /= static_cast<double>(timed_total);
  }
  report.mean_latency_ms = report.mean_prepare_ms + report.mean_inference_ms;
  return report;
}

nlohmann::ordered_json EvalReport::to_json(bool include_timings) const {
  nlohmann::ordered_json doc;
  doc["estimator"] = estimator;
  doc["queries"] = records.size();
  doc["failures"] = failures;
  doc["mean_q_error"] = mean_q_error;
  doc["median_q_error"] = median_q_error;
  doc["max_q_error"] = max_q_error;
  if (include_timings) {
    doc["warmup"] = warmup;
    doc["mean_prepare_ms"] = mean_prepare_ms;
    doc["mean_inference_ms"] = mean_inference_ms;
    doc["mean_latency_ms"] = mean_latency_ms;
  }
  auto& bs = doc["buckets"] = nlohmann::ordered_json::array();
  for (const auto& b : buckets) {
    nlohmann::ordered_json j{{"range", b.label}, {"n", b.n}, {"mean_q_error", b.mean_q_error}};
    if (include_timings) j["mean_latency_ms"] = b.mean_latency_ms;
    bs.push_back(std::move(j));
  }
  auto& rs = doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json j{{"true", r.true_cardinality}};
    j["raw_estimate"] = r.raw_estimate ? nlohmann::ordered_json(*r.raw_estimate) : nlohmann::ordered_json();
    j["estimate"] = r.estimate;
    j["q_error"] = r.q_error;
    j["failed"] = r.failed;
    j["size"] = r.size;
    j["shape"] = r.shape;
    if (include_timings) {
      j["prepare_ms"] = r.prepare_ms;
      j["inference_ms"] = r.inference_ms;
    }
    rs.push_back(std::move(j));
  }
  return doc;
}

EvalReport EvalReport::from_json(const nlohmann::json& doc) {
  EvalReport r;
  try {
    r.estimator = doc.at("estimator").get<std::string>();
    r.failures = doc.at("failures").get<std::size_t>();
    r.mean_q_error = doc.at("mean_q_error").get<double>();
    r.median_q_error = doc.at("median_q_error").get<double>();
    r.max_q_error = doc.at("max_q_error").get<double>();
    r.warmup = doc.value("warmup", std::size_t{0});
    r.mean_prepare_ms = doc.value("mean_prepare_ms", 0.0);
    r.mean_inference_ms = doc.value("mean_inference_ms", 0.0);
    r.mean_latency_ms = doc.value("mean_latency_ms", 0.0);
    for (const auto& b : doc.at("buckets")) {
      BucketSummary s;
      s.label = b.at("range").get<std::string>();
      s.n = b.at("n").get<std::size_t>();
      s.mean_q_error = b.at("mean_q_error").get<double>();
      s.mean_latency_ms = b.value("mean_latency_ms", 0.0);
      r.buckets.push_back(std::move(s));
    }
    for (const auto& j : doc.at("records")) {
      QueryRecord q;
      q.true_cardinality = j.at("true").get<std::uint64_t>();
      if (!j.at("raw_estimate").is_null()) q.raw_estimate = j.at("raw_estimate").get<double>();
      q.estimate = j.at("estimate").get<double>();
      q.q_error = j.at("q_error").get<double>();
      q.failed = j.at("failed").get<bool>();
      q.size = j.at("size").get<std::size_t>();
      q.shape = j.at("shape").get<std::string>();
      q.prepare_ms = j.value("prepare_ms", 0.0);
      q.inference_ms = j.value("inference_ms", 0.0);
      r.records.push_back(std::move(q));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("$", std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string EvalReport::to_csv(bool include_timings) const {
  std::ostringstream out;
  out.precision(17);
  out << "estimator,bucket,mean_q_error,n" << (include_timings ? ",mean_latency_ms\n" : "\n");
  auto row = [&](const std::string& bucket, double q, std::size_t n, double ms) {
    out << estimator << ',' << bucket << ',' << q << ',' << n;
    if (include_timings) out << ',' << ms;
    out << '\n';
  };
  row("all", mean_q_error, records.size(), mean_latency_ms);
  for (const auto& b : buckets) row("\"" + b.label + "\"", b.mean_q_error, b.n, b.mean_latency_ms);
  return out.str();
}

std::set<Atom> query_entities(const QueryGraph& query) {
  std::set<Atom> out;
  for (const auto& tp : query.patterns()) {
    if (!tp.s.is_var()) out.insert(tp.s.atom());
    if (!tp.o.is_var()) out.insert(tp.o.atom());
  }
  return out;
}

InductiveSplit inductive_split(std::span<const QueryGraph> corpus, double fraction, std::uint64_t seed) {
  if (corpus.empty()) throw PreconditionError("cannot split an empty corpus");
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("split fraction must lie in (0, 1)");

  std::vector<std::set<Atom>> entities;
  std::map<Atom, std::size_t> frequency;
  for (const auto& q : corpus) {
    entities.push_back(query_entities(q));
    for (const auto& a : entities.back()) ++frequency[a];
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed({seed, 0x5711}));
  rng.shuffle(std::span<std::size_t>(order));

  enum class Side : std::uint8_t { Train, Test };
  std::map<Atom, Side> side_of;
  std::vector<std::optional<Side>> assigned(corpus.size());
  InductiveSplit out;
  std::size_t n_train = 0, n_test = 0;
  const double target_test = fraction * static_cast<double>(corpus.size());
  for (std::size_t i : order) {
    bool wants_train = false, wants_test = false;
    for (const auto& a : entities[i]) {
      auto it = side_of.find(a);
      if (it == side_of.end()) continue;
      (it->second == Side::Train ? wants_train : wants_test) = true;
    }
    Side side;
    if (wants_train && wants_test) {
      ++out.discarded;
      continue;
    } else if (wants_train) {
      side = Side::Train;
    } else if (wants_test) {
      side = Side::Test;
    } else {
      const double assigned_n = static_cast<double>(n_train + n_test);
      bool test = static_cast<double>(n_test + 1) <= fraction * (assigned_n + 1.0);
      const double budget = target_test - static_cast<double>(n_test);
      for (const auto& a : entities[i]) test = test && static_cast<double>(frequency[a]) <= budget;
      side = test ? Side::Test : Side::Train;
    }
    for (const auto& a : entities[i]) side_of.emplace(a, side);
    assigned[i] = side;
    (side == Side::Test ? n_test : n_train) += 1;
  }
  // Emit in corpus order.
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!assigned[i]) continue;
    if (*assigned[i] == Side::Test) {
      out.test.push_back(corpus[i]);
      out.held_out.insert(entities[i].begin(), entities[i].end());
    } else {
      out.train.push_back(corpus[i]);
    }
  }
  out.achieved_fraction =
      static_cast<double>(out.test.size()) / static_cast<double>(std::max<std::size_t>(1, out.test.size() + out.train.size()));
  return out;
}

}  // namespace gnce
