// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "gnce/baselines.hpp"
#include "gnce/embeddings.hpp"
#include "gnce/eval.hpp"
#include "gnce/matcher.hpp"
#include "gnce/pipeline.hpp"
#include "gnce/train.hpp"
#include "test_util.hpp"

using namespace gnce;
using gnce::testing::B;
using gnce::testing::ent;
using gnce::testing::P;
using gnce::testing::pred;
using gnce::testing::V;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs one criterion, turning an escaped exception into a FAIL line.
void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Store with random embeddings over every atom, for featurized-query checks.
struct World {
  TripleStore store;
  EmbeddingTable table;
  World(std::size_t dim, std::uint64_t seed) : table(dim) {
    Rng rng(seed);
    store = gnce::testing::random_store(rng, 80, 6, 800);
    for (AtomId id = 0; id < store.num_atoms(); ++id) {
      std::vector<float> in(dim), out(dim, 0.0f);
      for (auto& x : in) x = static_cast<float>(rng.uniform(-1, 1));
      table.add(id, in, out);
    }
  }
};

ModelConfig config_for(MessageFn m) {
  ModelConfig c;
  c.message = m;
  return c;
}

void criterion1() {
  auto t0 = Clock::now();
  Rng rng(1001);
  std::size_t agree = 0, total = 0, nonzero = 0;
  for (int s = 0; s < 20; ++s) {
    auto store = gnce::testing::random_store(rng, 20 + rng.index(25), 2 + rng.index(5), 200 + rng.index(1800));
    for (int i = 0; i < 25; ++i) {
      auto q = gnce::testing::random_query(store, rng, 4, 4);
      auto got = count_solutions(store, q);
      auto want = gnce::testing::brute_force_count(store, q);
      agree += got.exact && got.count == want;
      nonzero += want > 0;
      ++total;
    }
  }
  double secs = seconds_since(t0);
  report(1, agree == total && secs <= 120,
         fmt("%zu/%zu queries match exhaustive enumeration (%zu nonzero), %.1f s", agree, total, nonzero, secs));
}

void criterion2() {
  auto t0 = Clock::now();
  World w(100, 1002);
  Rng rng(1002);
  std::size_t ok_sets = 0, sets = 0, worst_pass = 200;
  for (auto m : {MessageFn::Tpn, MessageFn::GineConv}) {
    for (int q = 0; q < 10; ++q) {
      GnceModel model(config_for(m));
      model.randomize(2000 + q);
      auto fz = make_featurizer(model, w.store, &w.table);
      QueryGraph query = gnce::testing::random_query(w.store, rng, 5, 4);
      auto feat = fz.featurize(query, &rng);
      auto r = gnce::testing::gradient_check(model, feat, rng.uniform(0, 8), 200, 1e-4, 1e-4, rng);
      worst_pass = std::min(worst_pass, r.passed);
      ok_sets += r.passed >= 198;
      ++sets;
    }
  }
  double secs = seconds_since(t0);
  report(2, ok_sets == sets && secs <= 60,
         fmt("%zu/%zu (query, message fn) sets with >=99%% of 200 coordinates within 1e-4; worst set %zu/200; %.1f s",
             ok_sets, sets, worst_pass, secs));
}

void criterion3() {
  World w(100, 1003);
  Rng rng(1003);
  double worst = 0;
  for (auto m : {MessageFn::Tpn, MessageFn::GineConv, MessageFn::TpnUndirected}) {
    GnceModel model(config_for(m));
    model.randomize(3003);
    auto fz = make_featurizer(model, w.store, &w.table);
    for (int i = 0; i < 200; ++i) {
      auto feat = fz.featurize(gnce::testing::random_query(w.store, rng, 6, 5), &rng);
      auto perm = gnce::testing::permute_featurization(feat, rng);
      worst = std::max(worst, std::abs(model.forward(feat) - model.forward(perm)));
    }
  }
  int tpn_changed = 0;
  double undirected_worst = 0;
  const QueryGraph single({P(V("x"), B(w.store.atom(w.store.triples()[0].p)), B(w.store.atom(w.store.triples()[0].o)))});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (auto m : {MessageFn::Tpn, MessageFn::GineConv, MessageFn::TpnUndirected}) {
      GnceModel model(config_for(m));
      model.randomize(seed);
      auto fz = make_featurizer(model, w.store, &w.table);
      auto feat = fz.featurize(single);
      double delta = std::abs(model.forward(feat) - model.forward(gnce::testing::reverse_edges(feat)));
      if (m == MessageFn::Tpn) tpn_changed += delta > 1e-6;
      else undirected_worst = std::max(undirected_worst, delta);
    }
  }
  report(3, worst <= 1e-9 && tpn_changed >= 19 && undirected_worst < 1e-12,
         fmt("max permutation change %.2e; TPN changed on %d/20 seeds; undirected max change %.2e", worst, tpn_changed,
             undirected_worst));
}

void criterion4() {
  std::size_t n = GnceModel(ModelConfig{}).num_parameters();
  report(4, n >= 100'000 && n <= 150'000, fmt("%zu parameters with D=101, H=101", n));
}

void criterion6() {
  Rng rng(1006);
  std::size_t exact = 0, total = 0;
  for (int s = 0; s < 50; ++s) {
    const std::size_t preds = 2 + rng.index(4);
    auto store = gnce::testing::random_store(rng, 15 + rng.index(40), preds, 40 + rng.index(400));
    auto summary = CsetSummary::build(store);
    // Every predicate multiset of size 1..3.
    std::vector<std::size_t> combo;
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t from, std::size_t left) {
      if (!combo.empty()) {
        std::vector<TriplePattern> pats;
        for (std::size_t k = 0; k < combo.size(); ++k)
          pats.push_back(P(V("s"), B(pred(combo[k])), V("o" + std::to_string(k))));
        QueryGraph q(pats);
        exact += summary.estimate(store, q) == static_cast<double>(count_solutions(store, q).count);
        ++total;
      }
      if (left == 0) return;
      for (std::size_t p = from; p < preds; ++p) {
        combo.push_back(p);
        rec(p, left - 1);
        combo.pop_back();
      }
    };
    rec(0, 3);
  }
  report(6, exact == total, fmt("%zu/%zu subject-stars estimated exactly over 50 stores", exact, total));
}

void criterion7() {
  Rng rng(1007);
  auto store = gnce::testing::random_store(rng, 120, 5, 5000);
  double worst = 0;
  int checked = 0;
  while (checked < 10) {
    auto q = gnce::testing::random_query(store, rng, 3, 4);
    if (q.size() < 2) continue;
    auto truth = count_solutions(store, q).count;
    if (truth < 10 || truth > 10'000'000) continue;
    auto r = estimate_wanderjoin(store, q, 10'000, rng);
    worst = std::max(worst, std::abs(r.estimate - double(truth)) / double(truth));
    ++checked;
  }
  std::size_t exact_runs = 0, runs = 0;
  for (int i = 0; i < 20; ++i) {
    QueryGraph q({P(V("x"), B(pred(rng.index(5))), rng.bernoulli(0.5) ? V("y") : B(ent(rng.index(120))))});
    auto truth = static_cast<double>(count_solutions(store, q).count);
    auto plan = wanderjoin_plan(store, q);
    for (int k = 0; k < 100; ++k, ++runs) exact_runs += wanderjoin_run(store, q, plan, rng) == truth;
  }
  report(7, worst <= 0.05 && exact_runs == runs,
         fmt("worst relative error %.4f over 10 multi-pattern queries; %zu/%zu single-pattern runs exact", worst,
             exact_runs, runs));
}

void criterion8() {
  Rng rng(1008);
  const std::size_t n = 60;
  TripleStore::Builder b;
  for (std::size_t c = 0; c < 2; ++c)
    for (int i = 0; i < 500; ++i) b.add(ent(c * n + rng.index(n)), pred(c * 4 + rng.index(4)), ent(c * n + rng.index(n)));
  auto store = std::move(b).build();
  std::vector<AtomId> nodes;
  for (AtomId x = 0; x < store.num_atoms(); ++x)
    if (!store.is_predicate(x)) nodes.push_back(x);
  auto walks = generate_walks(store, nodes, WalkConfig{5, 4, false, 8});
  SkipGramConfig sc;
  auto r = train_skipgram(walks, sc);
  std::vector<AtomId> g[2];
  for (std::size_t i = 0; i < 2 * n; ++i)
    if (auto id = store.find(ent(i)); id && r.table.lookup(*id)) g[i < n].push_back(*id);
  auto mean_cos = [&](const std::vector<AtomId>& xs, const std::vector<AtomId>& ys, bool same) {
    double sum = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = same ? i + 1 : 0; j < ys.size(); ++j, ++cnt)
        sum += cosine_similarity(*r.table.lookup(xs[i]), *r.table.lookup(ys[j]));
    return sum / static_cast<double>(cnt);
  };
  double intra = 0.5 * (mean_cos(g[0], g[0], true) + mean_cos(g[1], g[1], true));
  double inter = mean_cos(g[0], g[1], false);
  bool decreasing = r.epoch_loss.back() < r.epoch_loss.front();
  report(8, intra - inter >= 0.1 && decreasing,
         fmt("intra %.3f, inter %.3f, margin %.3f; objective %.4f -> %.4f", intra, inter, intra - inter,
             r.epoch_loss.front(), r.epoch_loss.back()));
}

PipelineConfig scale_config() {
  PipelineConfig c;
  c.seed = 42;
  c.demo.triples = 50'000;
  c.demo.entities = 10'000;
  c.demo.predicates = 50;
  c.demo.classes = 20;
  c.count_per_size = 2667;  // x 3 sizes = 8k per shape
  c.sizes = {2, 3, 5};
  c.shapes = {QueryShape::Star, QueryShape::Path};
  c.epochs = 50;
  c.batch = 32;
  c.lr = 1e-4;
  return c;
}

double shape_mean(const EvalReport& r, const std::string& shape) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& rec : r.records)
    if (rec.shape == shape) {
      sum += rec.q_error;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

}  // namespace

int main() {
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);

  const fs::path root = fs::temp_directory_path() / "gnce_acceptance";
  fs::remove_all(root);
  std::optional<PipelineResult> base;
  double base_secs = 0;
  guarded(5, [&] {
    auto c = scale_config();
    c.out_dir = root / "run1";
    auto t0 = Clock::now();
    base = run_pipeline(c);
    base_secs = seconds_since(t0);
    const double g = base->reports.at("gnce").mean_q_error;
    const double cs = base->reports.at("cset").mean_q_error;
    const double gm = base->reports.at("geomean").mean_q_error;
    report(5, g <= 20 && g < cs && g < gm && base_secs <= 45 * 60,
           fmt("%zu triples, %zu queries (%zu test); mean q-error GNCE %.2f, CSET %.2f, geomean %.2f, WanderJoin %.2f; "
               "%.0f s",
               base->store.size(), base->corpus.size(), base->split.test.size(), g, cs, gm,
               base->reports.at("wanderjoin").mean_q_error, base_secs));
  });

  guarded(6, criterion6);
  guarded(7, criterion7);
  guarded(8, criterion8);

  guarded(9, [&] {
    if (!base) throw std::runtime_error("criterion 5 run unavailable");
    auto c = scale_config();
    c.inductive = true;
    auto r = run_pipeline(c, false);
    const auto& rep = r.reports.at("gnce");
    bool finite = true;
    for (const auto& rec : rep.records)
      finite = finite && rec.raw_estimate && std::isfinite(*rec.raw_estimate) && *rec.raw_estimate > 0;
    const double ratio = rep.mean_q_error / base->reports.at("gnce").mean_q_error;
    report(9, finite && ratio <= 50 && r.masking_violations == 0,
           fmt("inductive mean q-error %.2f vs transductive %.2f, ratio %.1f; %zu test queries, %zu held-out atoms, "
               "%zu masked lookups, %zu violations",
               rep.mean_q_error, base->reports.at("gnce").mean_q_error, ratio, rep.records.size(), r.split.held_out.size(),
               r.held_out_lookups, r.masking_violations));
  });

  guarded(10, [&] {
    if (!base) throw std::runtime_error("criterion 5 run unavailable");
    auto c = scale_config();
    std::vector<AblationArm> arms;
    for (const auto& arm : default_ablation_arms())
      if (arm.name == "-rdf2vec") arms.push_back(arm);
    auto abl = run_ablation(base->store, base->embeddings.table, base->split.train, base->split.test, c, arms);
    // The full arm is the criterion-5 model: same config, same deterministic training.
    const double full = shape_mean(base->reports.at("gnce"), "path");
    const double binary = abl.mean_q_error.at("-rdf2vec").at("path");
    report(10, binary / full >= 1.0,
           fmt("path mean q-error: embedding %.2f, binary ids %.2f, ratio %.3f", full, binary, binary / full));
  });

  guarded(11, [&] {
    if (!base) throw std::runtime_error("criterion 5 run unavailable");
    const auto& model = base->gnce->model;
    Featurizer f = make_featurizer(model, base->store, &base->embeddings.table);
    std::vector<QueryGraph> sample(base->split.test.begin(),
                                   base->split.test.begin() + std::min<std::size_t>(1010, base->split.test.size()));
    auto rep = evaluate("gnce", gnce_estimator(model, f), sample, EvalOptions{.warmup = 10});
    report(11, rep.mean_latency_ms <= 10 && sample.size() - rep.warmup >= 1000,
           fmt("mean latency %.4f ms (featurize %.4f + forward %.4f) over %zu queries", rep.mean_latency_ms,
               rep.mean_prepare_ms, rep.mean_inference_ms, sample.size() - rep.warmup));
  });

  guarded(12, [&] {
    if (!base) throw std::runtime_error("criterion 5 run unavailable");
    auto c = scale_config();
    c.out_dir = root / "run2";
    run_pipeline(c);
    std::string mismatched;
    for (const char* f : {"corpus.json", "train.json", "test.json", "model.ckpt", "report.json", "report.csv"})
      if (read_bytes(root / "run1" / f) != read_bytes(root / "run2" / f) || read_bytes(root / "run1" / f).empty())
        mismatched += std::string(" ") + f;
    report(12, mismatched.empty(),
           mismatched.empty() ? "corpus, split, checkpoint and report files byte-identical across two runs"
                              : "differing files:" + mismatched);
  });

  std::printf("summary: %d of 12 criteria failed\n", failures);
  return failures ? 1 : 0;
}
