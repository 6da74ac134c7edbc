#include "gnce/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gnce/corpus.hpp"
#include "gnce/error.hpp"
#include "gnce/ntriples.hpp"

namespace gnce {

namespace {

using json = nlohmann::json;

// Typed access to one JSON object with unknown-key detection.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw SchemaError(path_, "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw SchemaError(path_ + "." + key, "unexpected type " + std::string(it->type_name()));
    }
  }

  bool has(const char* key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    auto it = doc_.find(key);
    return Section(it == doc_.end() || it->is_null() ? empty : *it, path_ + "." + key);
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      if (!seen_.contains(it.key())) throw SchemaError(path_ + "." + it.key(), "unknown key");
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto wrap_precondition(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    throw SchemaError(path, e.what());
  }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw ResourceError("write failed: " + path.string());
}

std::string shape_key(const QueryGraph& q) { return q.shape() ? std::string(shape_name(*q.shape())) : "other"; }

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
  PipelineConfig c;
  Section root(doc, "$");
  root.get("seed", c.seed);
  root.get("threads", c.threads);
  std::string out_dir = c.out_dir.string();
  root.get("out_dir", out_dir);
  c.out_dir = out_dir;

  {
    Section kg = root.sub("kg");
    std::string p;
    kg.get("path", p);
    if (!p.empty()) c.kg_path = p;
    Section demo = kg.sub("demo");
    demo.get("triples", c.demo.triples);
    demo.get("entities", c.demo.entities);
    demo.get("predicates", c.demo.predicates);
    demo.get("classes", c.demo.classes);
    demo.get("literal_predicate_fraction", c.demo.literal_predicate_fraction);
    demo.get("literal_values", c.demo.literal_values);
    demo.get("zipf_exponent", c.demo.zipf_exponent);
    demo.finish();
    kg.finish();
  }
  {
    Section w = root.sub("workload");
    if (w.has("shapes")) {
      std::vector<std::string> names;
      w.get("shapes", names);
      c.shapes.clear();
      for (const auto& n : names) {
        auto s = parse_shape(n);
        if (!s || *s == QueryShape::Other) throw SchemaError(w.path("shapes"), "unknown shape '" + n + "'");
        c.shapes.push_back(*s);
      }
    }
    w.get("sizes", c.sizes);
    w.get("count_per_size", c.count_per_size);
    w.get("max_cardinality", c.max_cardinality);
    w.get("p_var_subject", c.binding.p_var_subject);
    w.get("p_var_object", c.binding.p_var_object);
    w.get("p_var_predicate", c.binding.p_var_predicate);
    if (w.has("limit")) {
      std::uint64_t limit = 0;
      w.get("limit", limit);
      c.limits.limit = limit;
    }
    if (w.has("timeout_ms")) {
      std::int64_t ms = 0;
      w.get("timeout_ms", ms);
      c.limits.timeout = std::chrono::milliseconds(ms);
    }
    w.finish();
  }
  {
    Section s = root.sub("split");
    s.get("inductive", c.inductive);
    s.get("test_fraction", c.test_fraction);
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
      throw SchemaError(s.path("test_fraction"), "must lie in (0, 1)");
    s.finish();
  }
  {
    Section e = root.sub("embeddings");
    e.get("dim", c.skipgram.dim);
    e.get("epochs", c.skipgram.epochs);
    e.get("window", c.skipgram.window);
    e.get("negatives", c.skipgram.negatives);
    e.get("lr", c.skipgram.lr);
    e.get("walks_per_entity", c.walks.walks_per_entity);
    e.get("max_depth", c.walks.max_depth);
    e.get("bidirectional", c.walks.bidirectional);
    e.finish();
  }
  {
    Section m = root.sub("model");
    m.get("hidden", c.hidden);
    std::string name;
    if (m.has("message")) {
      m.get("message", name);
      c.message = wrap_precondition(m.path("message"), [&] { return parse_message_fn(name); });
    }
    m.get("epsilon", c.epsilon);
    if (m.has("featurization")) {
      m.get("featurization", name);
      c.featurization = wrap_precondition(m.path("featurization"), [&] { return parse_feature_mode(name); });
    }
    m.get("binary_id_width", c.binary_id_width);
    if (m.has("occ_scale")) {
      m.get("occ_scale", name);
      c.occ_scale = wrap_precondition(m.path("occ_scale"), [&] { return parse_occ_scale(name); });
    }
    m.finish();
  }
  {
    Section t = root.sub("training");
    t.get("epochs", c.epochs);
    t.get("batch", c.batch);
    t.get("lr", c.lr);
    t.finish();
  }
  {
    Section e = root.sub("eval");
    e.get("baselines", c.baselines);
    e.get("wanderjoin_runs", c.wanderjoin_runs);
    e.get("warmup", c.warmup);
    e.finish();
  }
  root.finish();
  c.demo.seed = c.seed;
  wrap_precondition("$", [&] {
    c.validate();
    return 0;
  });
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("config " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["out_dir"] = out_dir.string();
  j["kg"]["path"] = kg_path ? nlohmann::ordered_json(kg_path->string()) : nlohmann::ordered_json();
  j["kg"]["demo"] = {{"triples", demo.triples},
                     {"entities", demo.entities},
                     {"predicates", demo.predicates},
                     {"classes", demo.classes},
                     {"literal_predicate_fraction", demo.literal_predicate_fraction},
                     {"literal_values", demo.literal_values},
                     {"zipf_exponent", demo.zipf_exponent}};
  auto shape_names = nlohmann::ordered_json::array();
  for (auto s : shapes) shape_names.push_back(std::string(shape_name(s)));
  j["workload"] = {{"shapes", shape_names},
                   {"sizes", sizes},
                   {"count_per_size", count_per_size},
                   {"max_cardinality", max_cardinality},
                   {"p_var_subject", binding.p_var_subject},
                   {"p_var_object", binding.p_var_object},
                   {"p_var_predicate", binding.p_var_predicate}};
  j["workload"]["limit"] = limits.limit ? nlohmann::ordered_json(*limits.limit) : nlohmann::ordered_json();
  j["workload"]["timeout_ms"] =
      limits.timeout ? nlohmann::ordered_json(limits.timeout->count()) : nlohmann::ordered_json();
  j["split"] = {{"inductive", inductive}, {"test_fraction", test_fraction}};
  j["embeddings"] = {{"dim", skipgram.dim},
                     {"epochs", skipgram.epochs},
                     {"window", skipgram.window},
                     {"negatives", skipgram.negatives},
                     {"lr", skipgram.lr},
                     {"walks_per_entity", walks.walks_per_entity},
                     {"max_depth", walks.max_depth},
                     {"bidirectional", walks.bidirectional}};
  j["model"] = {{"hidden", hidden},
                {"message", std::string(message_fn_name(message))},
                {"epsilon", epsilon},
                {"featurization", std::string(feature_mode_name(featurization))},
                {"binary_id_width", binary_id_width},
                {"occ_scale", std::string(occ_scale_name(occ_scale))}};
  j["training"] = {{"epochs", epochs}, {"batch", batch}, {"lr", lr}};
  j["eval"] = {{"baselines", baselines}, {"wanderjoin_runs", wanderjoin_runs}, {"warmup", warmup}};
  return j;
}

void PipelineConfig::validate() const {
  if (threads == 0) throw PreconditionError("threads must be >= 1");
  if (!kg_path) demo.validate();
  if (shapes.empty()) throw PreconditionError("workload needs at least one shape");
  for (auto s : shapes) sampler(s).validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw PreconditionError("test_fraction must lie in (0, 1)");
  if (skipgram.dim == 0 || skipgram.window == 0) throw PreconditionError("embedding dim and window must be positive");
  if (hidden == 0 || batch == 0) throw PreconditionError("hidden width and batch must be positive");
  if (binary_id_width == 0) throw PreconditionError("binary_id_width must be positive");
  if (!(lr > 0.0) || !(skipgram.lr > 0.0)) throw PreconditionError("learning rates must be positive");
  if (!std::isfinite(epsilon)) throw PreconditionError("epsilon must be finite");
  for (const auto& b : baselines)
    if (b != "cset" && b != "wanderjoin" && b != "geomean") throw PreconditionError("unknown baseline '" + b + "'");
  if (wanderjoin_runs == 0) throw PreconditionError("wanderjoin_runs must be positive");
}

SamplerConfig PipelineConfig::sampler(QueryShape shape) const {
  SamplerConfig s;
  s.shape = shape;
  s.sizes = sizes;
  s.count_per_size = count_per_size;
  s.binding = binding;
  s.seed = seed;
  s.max_cardinality = max_cardinality;
  s.limits = limits;
  s.threads = threads;
  return s;
}

WalkConfig PipelineConfig::walk_config() const {
  WalkConfig w = walks;
  w.seed = seed;
  return w;
}

SkipGramConfig PipelineConfig::skipgram_config() const {
  SkipGramConfig s = skipgram;
  s.seed = seed;
  return s;
}

ModelConfig PipelineConfig::model_config() const {
  ModelConfig m;
  m.D = (featurization == FeatureMode::BinaryId ? binary_id_width : skipgram.dim) + 1;
  m.H = hidden;
  m.message = message;
  m.epsilon = epsilon;
  m.seed = seed;
  m.featurization = featurization;
  m.occ_scale = occ_scale;
  return m;
}

TrainConfig PipelineConfig::train_config() const {
  TrainConfig t;
  t.batch = batch;
  t.epochs = epochs;
  t.lr = lr;
  t.seed = seed;
  return t;
}

TripleStore load_store_any(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open store " + path.string());
  char head[8] = {};
  in.read(head, 8);
  if (in.gcount() == 8 && std::string_view(head, 7) == "GNCEKG1") {
    in.seekg(0);
    return TripleStore::load(in);
  }
  return parse_ntriples_file(path, ParseMode::Strict);
}

TripleStore build_kg(const PipelineConfig& config) {
  if (config.kg_path) return load_store_any(*config.kg_path);
  DemoKgConfig demo = config.demo;
  demo.seed = config.seed;
  return generate_demo_kg(demo);
}

std::vector<QueryGraph> build_corpus(const TripleStore& store, const PipelineConfig& config,
                                     std::map<std::string, WorkloadReport>* reports) {
  std::vector<QueryGraph> corpus;
  for (auto shape : config.shapes) {
    WorkloadReport report;
    auto queries = build_workload(store, config.sampler(shape), &report);
    corpus.insert(corpus.end(), std::make_move_iterator(queries.begin()), std::make_move_iterator(queries.end()));
    if (reports) (*reports)[std::string(shape_name(shape))] = report;
  }
  return corpus;
}

Split random_split(std::span<const QueryGraph> corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("split fraction must lie in (0, 1)");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed({seed, 0x5b11}));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(corpus.size())));
  Split s;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < order.size() - n_test ? s.train : s.test).push_back(corpus[order[k]]);
  s.achieved_fraction = corpus.empty() ? 0.0 : static_cast<double>(s.test.size()) / static_cast<double>(corpus.size());
  return s;
}

Split make_split(std::span<const QueryGraph> corpus, const PipelineConfig& config) {
  if (!config.inductive) return random_split(corpus, config.test_fraction, config.seed);
  InductiveSplit is = inductive_split(corpus, config.test_fraction, config.seed);
  Split s;
  s.train = std::move(is.train);
  s.test = std::move(is.test);
  s.held_out = std::move(is.held_out);
  s.discarded = is.discarded;
  s.achieved_fraction = is.achieved_fraction;
  return s;
}

std::unordered_set<AtomId> atom_ids(const TripleStore& store, const std::set<Atom>& atoms) {
  std::unordered_set<AtomId> ids;
  for (const auto& a : atoms)
    if (auto id = store.find(a)) ids.insert(*id);
  return ids;
}

SkipGramResult build_embeddings(const TripleStore& store, std::span<const QueryGraph> queries,
                                const PipelineConfig& config, const std::unordered_set<AtomId>* held_out) {
  auto walks = walks_for_corpus(store, queries, config.walk_config(), false, held_out);
  return train_skipgram(walks, config.skipgram_config());
}

GnceRun train_gnce(const TripleStore& store, const EmbeddingTable* table, std::span<const QueryGraph> train_set,
                   const PipelineConfig& config) {
  GnceRun run{GnceModel(config.model_config()), {}};
  Featurizer f = make_featurizer(run.model, store, table);
  run.trace = train(run.model, train_set, f, config.train_config());
  return run;
}

double geometric_mean_cardinality(std::span<const QueryGraph> queries) {
  if (queries.empty()) throw PreconditionError("no queries");
  double s = 0.0;
  for (const auto& q : queries) s += std::log(static_cast<double>(q.true_cardinality().value_or(1)));
  return std::exp(s / static_cast<double>(queries.size()));
}

PipelineResult run_pipeline(const PipelineConfig& config, bool write_files, const Logger& log) {
  config.validate();
  auto note = [&](const std::string& msg) {
    if (log) log(msg);
  };
  nlohmann::ordered_json timings;
  PipelineResult r;
  if (write_files) std::filesystem::create_directories(config.out_dir);
  const auto& dir = config.out_dir;

  auto t = Clock::now();
  r.store = build_kg(config);
  timings["stages"]["kg"] = seconds_since(t);
  note("kg: " + std::to_string(r.store.size()) + " triples, " + std::to_string(r.store.num_atoms()) + " atoms");

  t = Clock::now();
  std::map<std::string, WorkloadReport> workload_reports;
  r.corpus = build_corpus(r.store, config, &workload_reports);
  timings["stages"]["workload"] = seconds_since(t);
  note("workload: " + std::to_string(r.corpus.size()) + " queries");
  if (r.corpus.size() < 2) throw ResourceError("workload too small to split (" + std::to_string(r.corpus.size()) + ")");

  r.split = make_split(r.corpus, config);
  if (r.split.train.empty() || r.split.test.empty()) throw ResourceError("split left one side empty");
  note("split: " + std::to_string(r.split.train.size()) + " train, " + std::to_string(r.split.test.size()) + " test");
  const auto held_out = atom_ids(r.store, r.split.held_out);

  t = Clock::now();
  if (config.featurization == FeatureMode::Embedding) {
    std::span<const QueryGraph> source = config.inductive ? std::span<const QueryGraph>(r.split.train) : r.corpus;
    r.embeddings = build_embeddings(r.store, source, config, config.inductive ? &held_out : nullptr);
    note("embeddings: " + std::to_string(r.embeddings.table.size()) + " atoms");
  }
  timings["stages"]["embeddings"] = seconds_since(t);

  t = Clock::now();
  const EmbeddingTable* table = config.featurization == FeatureMode::Embedding ? &r.embeddings.table : nullptr;
  r.gnce = train_gnce(r.store, table, r.split.train, config);
  timings["stages"]["training"] = seconds_since(t);
  note("training: final loss " + std::to_string(r.gnce->trace.epoch_loss.empty() ? 0.0 : r.gnce->trace.epoch_loss.back()));

  t = Clock::now();
  Featurizer featurizer = make_featurizer(r.gnce->model, r.store, table);
  if (config.inductive) {
    featurizer.set_masked(&held_out);
    featurizer.set_observer([&](const Atom& atom, bool known) {
      if (!r.split.held_out.contains(atom)) return;
      ++r.held_out_lookups;
      if (known) ++r.masking_violations;
    });
  }
  EvalOptions opts{.warmup = config.warmup};
  r.reports["gnce"] = evaluate("gnce", gnce_estimator(r.gnce->model, featurizer), r.split.test, opts);
  featurizer.set_observer({});
  std::optional<CsetSummary> cset;
  for (const auto& b : config.baselines) {
    if (b == "cset") {
      cset = CsetSummary::build(r.store);
      r.reports[b] = evaluate(b, cset_estimator(*cset, r.store), r.split.test, opts);
    } else if (b == "wanderjoin") {
      r.reports[b] = evaluate(b, wanderjoin_estimator(r.store, config.wanderjoin_runs, config.seed), r.split.test, opts);
    } else if (b == "geomean") {
      r.reports[b] = evaluate(b, constant_estimator(geometric_mean_cardinality(r.split.train)), r.split.test, opts);
    }
  }
  timings["stages"]["evaluation"] = seconds_since(t);

  auto& rep = r.report_json;
  // Output placement and thread count do not affect results; leaving them out
  // keeps repeated runs byte-identical.
  rep["config"] = config.to_json();
  rep["config"].erase("out_dir");
  rep["config"].erase("threads");
  rep["kg"] = {{"triples", r.store.size()}, {"atoms", r.store.num_atoms()}};
  nlohmann::ordered_json per_shape = nlohmann::ordered_json::object();
  for (const auto& q : r.corpus) per_shape[shape_key(q)] = per_shape.value(shape_key(q), 0) + 1;
  rep["workload"] = {{"queries", r.corpus.size()},
                     {"per_shape", per_shape},
                     {"train", r.split.train.size()},
                     {"test", r.split.test.size()},
                     {"discarded", r.split.discarded},
                     {"test_fraction", r.split.achieved_fraction}};
  if (config.inductive)
    rep["inductive"] = {{"held_out_entities", r.split.held_out.size()},
                        {"held_out_lookups", r.held_out_lookups},
                        {"masking_violations", r.masking_violations}};
  rep["embeddings"] = {{"vocabulary", r.embeddings.table.size()}, {"epoch_loss", r.embeddings.epoch_loss}};
  rep["training"] = {{"parameters", r.gnce->model.num_parameters()}, {"epoch_loss", r.gnce->trace.epoch_loss}};
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [name, report] : r.reports) summary[name] = report.mean_q_error;
  rep["summary"] = summary;
  for (const auto& [name, report] : r.reports) {
    rep["estimators"][name] = report.to_json(false);
    timings["estimators"][name] = {{"mean_prepare_ms", report.mean_prepare_ms},
                                   {"mean_inference_ms", report.mean_inference_ms},
                                   {"mean_latency_ms", report.mean_latency_ms}};
  }

  if (write_files) {
    r.store.save(dir / "kg.bin");
    write_corpus(r.corpus, dir / "corpus.json");
    write_corpus(r.split.train, dir / "train.json");
    write_corpus(r.split.test, dir / "test.json");
    if (table) table->save(dir / "embeddings.bin");
    r.gnce->model.save(dir / "model.ckpt");
    write_text(dir / "report.json", rep.dump(2) + "\n");
    auto merged_csv = [&](bool timed) {
      std::string csv;
      for (const auto& [name, report] : r.reports) {
        std::string part = report.to_csv(timed);
        csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
      }
      return csv;
    };
    write_text(dir / "report.csv", merged_csv(false));
    write_text(dir / "latency.csv", merged_csv(true));
    write_text(dir / "timings.json", timings.dump(2) + "\n");
  }
  return r;
}

std::vector<AblationArm> default_ablation_arms() {
  return {{"full", FeatureMode::Embedding, MessageFn::Tpn},
          {"-rdf2vec", FeatureMode::BinaryId, MessageFn::Tpn},
          {"-directed", FeatureMode::Embedding, MessageFn::TpnUndirected}};
}

AblationResult run_ablation(const TripleStore& store, const EmbeddingTable& table, std::span<const QueryGraph> train_set,
                            std::span<const QueryGraph> test, const PipelineConfig& config,
                            const std::vector<AblationArm>& arms, const Logger& log) {
  AblationResult out;
  for (const auto& arm : arms) {
    PipelineConfig c = config;
    c.featurization = arm.featurization;
    c.message = arm.message;
    if (arm.featurization == FeatureMode::Embedding && table.dim() != c.skipgram.dim)
      throw ConfigMismatchError("embedding table dimension differs from the configured dim");
    GnceRun run = train_gnce(store, &table, train_set, c);
    Featurizer f = make_featurizer(run.model, store, &table);
    EvalReport report = evaluate(arm.name, gnce_estimator(run.model, f), test, EvalOptions{.warmup = c.warmup});
    auto& row = out.mean_q_error[arm.name];
    row["all"] = report.mean_q_error;
    std::map<std::string, std::pair<double, std::size_t>> by_shape;
    for (const auto& rec : report.records) {
      auto& [sum, n] = by_shape[rec.shape.empty() ? "other" : rec.shape];
      sum += rec.q_error;
      ++n;
    }
    for (const auto& [shape, sn] : by_shape) row[shape] = sn.first / static_cast<double>(sn.second);
    out.arms.push_back(arm.name);
    if (log) log("ablation " + arm.name + ": mean q-error " + std::to_string(report.mean_q_error));
  }
  return out;
}

nlohmann::ordered_json AblationResult::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& arm : arms) {
    nlohmann::ordered_json row;
    for (const auto& [shape, q] : mean_q_error.at(arm)) row[shape] = q;
    j["arms"][arm] = row;
  }
  if (!arms.empty()) {
    const auto& base = mean_q_error.at(arms.front());
    for (std::size_t i = 1; i < arms.size(); ++i)
      for (const auto& [shape, q] : mean_q_error.at(arms[i]))
        if (auto it = base.find(shape); it != base.end()) j["ratio_vs_" + arms.front()][arms[i]][shape] = q / it->second;
  }
  return j;
}

std::string AblationResult::to_table() const {
  std::set<std::string> shapes;
  for (const auto& [_, row] : mean_q_error)
    for (const auto& [s, __] : row) shapes.insert(s);
  std::ostringstream out;
  out << std::left << std::setw(12) << "arm";
  for (const auto& s : shapes) out << std::right << std::setw(12) << s;
  out << '\n';
  for (const auto& arm : arms) {
    out << std::left << std::setw(12) << arm;
    const auto& row = mean_q_error.at(arm);
    for (const auto& s : shapes) {
      auto it = row.find(s);
      out << std::right << std::setw(12);
      if (it == row.end()) out << "-";
      else out << std::fixed << std::setprecision(3) << it->second;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace gnce
