#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gnce/baselines.hpp"
#include "gnce/binary_io.hpp"
#include "gnce/corpus.hpp"
#include "gnce/demo_kg.hpp"
#include "gnce/embeddings.hpp"
#include "gnce/error.hpp"
#include "gnce/eval.hpp"
#include "gnce/featurizer.hpp"
#include "gnce/matcher.hpp"
#include "gnce/model.hpp"
#include "gnce/ntriples.hpp"
#include "gnce/pipeline.hpp"
#include "gnce/sampler.hpp"
#include "gnce/train.hpp"

using namespace gnce;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kResource = 3 };

// Thrown for bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  unsigned threads = 1;
  std::uint64_t seed = 42;
  bool quiet = false;
};

void info(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ResourceError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Binary tables by default; .tsv files are read against the store.
EmbeddingTable load_embeddings(const std::string& path, const TripleStore& store) {
  if (std::filesystem::path(path).extension() != ".tsv") return EmbeddingTable::load(path);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings " + path);
  return EmbeddingTable::read_tsv(store, in);
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      long v = std::stol(item, &pos);
      if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("invalid size list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty size list");
  return out;
}

QueryShape shape_arg(const std::string& name) {
  auto s = parse_shape(name);
  if (!s || *s == QueryShape::Other) throw UsageError("unknown shape '" + name + "'");
  return *s;
}

MatchLimits limits_arg(std::optional<std::uint64_t> limit, std::optional<std::int64_t> timeout_ms,
                       MatchLimits base) {
  if (limit) base.limit = *limit == 0 ? std::nullopt : limit;
  if (timeout_ms) base.timeout = *timeout_ms <= 0 ? std::nullopt : std::optional(std::chrono::milliseconds(*timeout_ms));
  return base;
}

json predictions_json(const std::string& estimator, std::span<const QueryGraph> queries,
                      const std::vector<std::optional<double>>& estimates) {
  json doc;
  doc["estimator"] = estimator;
  auto& rows = doc["predictions"] = json::array();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    json row{{"index", i}};
    row["estimate"] = estimates[i] ? json(*estimates[i]) : json();
    row["true"] = queries[i].true_cardinality() ? json(*queries[i].true_cardinality()) : json();
    rows.push_back(std::move(row));
  }
  return doc;
}

// Loads a JSON config, applying GNCE_SEED when the file sets no seed.
nlohmann::json config_doc(const std::string& path, const char* env_seed) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    try {
      doc = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config " + path + ": " + e.what());
    }
  }
  if (!doc.is_object()) throw SchemaError("$", "config must be an object");
  if (!doc.contains("seed") && env_seed) doc["seed"] = std::strtoull(env_seed, nullptr, 10);
  return doc;
}

void write_features(std::ostream& out, std::span<const QueryFeaturization> feats) {
  binio::write_bytes(out, "GNCEFEA1");
  binio::write_le<std::uint64_t>(out, feats.size());
  for (const auto& f : feats) {
    binio::write_le<std::uint64_t>(out, f.dim);
    binio::write_le<std::uint64_t>(out, f.num_nodes);
    binio::write_le<std::uint64_t>(out, f.num_edges());
    for (double x : f.node_features) binio::write_le<double>(out, x);
    for (const auto& [s, d] : f.edges) {
      binio::write_le<std::uint32_t>(out, s);
      binio::write_le<std::uint32_t>(out, d);
    }
    for (double x : f.edge_features) binio::write_le<double>(out, x);
  }
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Knowledge-graph cardinality estimation with graph neural networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gnce 0.1.0");
  Globals g;
  const char* env_seed = std::getenv("GNCE_SEED");
  if (env_seed) {
    char* end = nullptr;
    g.seed = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0') throw UsageError("GNCE_SEED must be an unsigned integer");
  }
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Report errors as JSON on stderr");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress output");

  std::optional<std::uint64_t> seed_flag;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed_flag, "Random seed (default $GNCE_SEED or 42)"); };
  auto seed = [&] { return seed_flag.value_or(g.seed); };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse N-Triples into a binary store");
  std::string in_path, out_path;
  bool lenient = false;
  ingest->add_option("--input,--in", in_path, "N-Triples file")->required();
  ingest->add_option("--out", out_path, "Binary store output")->required();
  auto* lenient_flag = ingest->add_flag("--lenient", lenient, "Skip malformed lines instead of failing");
  ingest->add_flag("--strict", "Fail on the first malformed line (default)")->excludes(lenient_flag);

  // stats
  auto* stats = app.add_subcommand("stats", "Store statistics, or generate the demo KG");
  std::string store_path;
  bool gen_demo = false;
  DemoKgConfig demo;
  stats->add_option("--store", store_path, "Store (binary or N-Triples)");
  stats->add_flag("--gen-demo", gen_demo, "Generate the synthetic demo KG");
  stats->add_option("--out", out_path, "Demo KG output (.nt for N-Triples, otherwise binary)");
  stats->add_option("--triples", demo.triples, "Demo triples");
  stats->add_option("--entities", demo.entities, "Demo entities");
  stats->add_option("--predicates", demo.predicates, "Demo predicates");
  stats->add_option("--classes", demo.classes, "Demo classes");
  stats->add_option("--zipf", demo.zipf_exponent, "Demo Zipf exponent");
  std::size_t top = 10;
  stats->add_option("--top", top, "Most frequent atoms to list");
  add_seed(stats);

  // gen-queries
  auto* genq = app.add_subcommand("gen-queries", "Sample a query workload with exact cardinalities");
  std::string shape_name_arg = "star", sizes_arg = "2,3,5,8";
  SamplerConfig sc;
  std::optional<std::uint64_t> limit_flag;
  std::optional<std::int64_t> timeout_flag;
  genq->add_option("--store", store_path, "Store")->required();
  genq->add_option("--shape", shape_name_arg, "star|path|flower|snowflake");
  genq->add_option("--sizes", sizes_arg, "Comma-separated pattern counts");
  genq->add_option("--count", sc.count_per_size, "Queries per size");
  genq->add_option("--max-card", sc.max_cardinality, "Discard queries above this cardinality");
  genq->add_option("--p-var-subject", sc.binding.p_var_subject);
  genq->add_option("--p-var-object", sc.binding.p_var_object);
  genq->add_option("--p-var-predicate", sc.binding.p_var_predicate);
  genq->add_option("--limit", limit_flag, "Counting limit (0 = none)");
  genq->add_option("--timeout-ms", timeout_flag, "Counting timeout per query (0 = none)");
  genq->add_option("--out", out_path, "Corpus output")->required();
  add_seed(genq);

  // exec
  auto* exec = app.add_subcommand("exec", "Count the solutions of each query");
  std::string queries_path;
  exec->add_option("--store", store_path, "Store")->required();
  exec->add_option("--queries", queries_path, "Corpus")->required();
  exec->add_option("--out", out_path, "Corpus annotated with cardinalities");
  exec->add_option("--limit", limit_flag, "Counting limit (0 = none)");
  exec->add_option("--timeout-ms", timeout_flag, "Timeout per query (0 = none)");

  // train-embeddings
  auto* temb = app.add_subcommand("train-embeddings", "Random walks plus skip-gram");
  WalkConfig wc;
  SkipGramConfig sg;
  bool all_atoms = false;
  std::string tsv_path;
  temb->add_option("--store", store_path, "Store")->required();
  temb->add_option("--queries,--corpus", queries_path, "Corpus whose atoms get embeddings");
  temb->add_flag("--all-atoms", all_atoms, "Walk from every atom of the store");
  temb->add_option("--dim", sg.dim);
  temb->add_option("--epochs", sg.epochs);
  temb->add_option("--window", sg.window);
  temb->add_option("--negatives", sg.negatives);
  temb->add_option("--lr", sg.lr);
  temb->add_option("--walks", wc.walks_per_entity, "Walks per entity");
  temb->add_option("--depth", wc.max_depth, "Maximum hops per walk");
  temb->add_flag("--bidirectional", wc.bidirectional, "Also walk incoming edges");
  temb->add_option("--out", out_path, "Embedding file; a .tsv name also gets a binary .bin sidecar")->required();
  temb->add_option("--tsv", tsv_path, "Also write a TSV table");
  add_seed(temb);

  // train-gnce
  auto* tg = app.add_subcommand("train-gnce", "Train the GNN estimator");
  std::string emb_path, message = "tpn", featurization = "embedding", occ_scale = "log1p", loss_out;
  TrainConfig tc;
  std::size_t hidden = 101, id_width = 100;
  double epsilon = 0.0;
  tg->add_option("--store", store_path, "Store")->required();
  tg->add_option("--queries", queries_path, "Training corpus with cardinalities")->required();
  tg->add_option("--embeddings", emb_path, "Embedding file (embedding featurization)");
  tg->add_option("--epochs", tc.epochs);
  tg->add_option("--batch", tc.batch);
  tg->add_option("--lr", tc.lr);
  tg->add_option("--message", message, "tpn|gineconv|tpn-undirected");
  tg->add_option("--featurization", featurization, "embedding|binary");
  tg->add_option("--occ-scale", occ_scale, "raw|log1p");
  tg->add_option("--hidden", hidden, "Head hidden width");
  tg->add_option("--id-width", id_width, "Bits of the binary id featurization");
  tg->add_option("--epsilon", epsilon, "GINECONV self-term");
  tg->add_option("--out", out_path, "Checkpoint output")->required();
  tg->add_option("--loss-out", loss_out, "Per-epoch loss trace (JSON)");
  add_seed(tg);

  // predict
  auto* pred = app.add_subcommand("predict", "Estimate cardinalities with a trained model");
  std::string model_path;
  pred->add_option("--model", model_path, "Checkpoint")->required();
  pred->add_option("--queries", queries_path, "Corpus")->required();
  pred->add_option("--store", store_path, "Store")->required();
  pred->add_option("--embeddings", emb_path, "Embedding file");
  pred->add_option("--out", out_path, "Predictions JSON (- for stdout)")->required();

  // baseline
  auto* base = app.add_subcommand("baseline", "Characteristic sets or WanderJoin estimates");
  std::string method;
  std::size_t runs = 30;
  base->add_option("--method", method, "cset|wanderjoin")->required()->check(CLI::IsMember({"cset", "wanderjoin"}));
  base->add_option("--store", store_path, "Store")->required();
  base->add_option("--queries", queries_path, "Corpus")->required();
  base->add_option("--runs", runs, "WanderJoin walks per query");
  base->add_option("--out", out_path, "Predictions JSON (- for stdout)")->required();
  add_seed(base);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "q-error report for a model or baseline");
  std::string csv_path, train_path;
  std::size_t warmup = 10;
  ev->add_option("--model", model_path, "Checkpoint");
  ev->add_option("--method", method, "cset|wanderjoin|geomean")->check(CLI::IsMember({"cset", "wanderjoin", "geomean"}));
  ev->add_option("--queries", queries_path, "Test corpus with cardinalities")->required();
  ev->add_option("--store", store_path, "Store")->required();
  ev->add_option("--embeddings", emb_path, "Embedding file");
  ev->add_option("--train", train_path, "Training corpus (geomean)");
  ev->add_option("--runs", runs, "WanderJoin walks per query");
  ev->add_option("--warmup", warmup, "Queries excluded from latency");
  ev->add_option("--out", out_path, "Report JSON")->required();
  ev->add_option("--csv", csv_path, "CSV summary");
  add_seed(ev);

  // featurize
  auto* feat = app.add_subcommand("featurize", "Write query featurizations (diagnostic)");
  feat->add_option("--queries", queries_path, "Corpus")->required();
  feat->add_option("--store", store_path, "Store")->required();
  feat->add_option("--embeddings", emb_path, "Embedding file");
  feat->add_option("--model", model_path, "Checkpoint supplying the unseen vector and mode");
  feat->add_flag("--binary", [&](std::int64_t) { featurization = "binary"; }, "Binary id featurization");
  feat->add_option("--occ-scale", occ_scale, "raw|log1p");
  feat->add_option("--out", out_path, "Feature file")->required();
  add_seed(feat);

  // pipeline / ablate
  std::string config_path, out_dir;
  std::optional<std::size_t> epochs_flag, count_flag;
  auto add_pipeline_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config");
    sub->add_option("--out-dir", out_dir, "Output directory");
    sub->add_option("--epochs", epochs_flag, "GNN training epochs");
    sub->add_option("--count", count_flag, "Queries per shape and size");
    add_seed(sub);
  };
  auto* pipe = app.add_subcommand("pipeline", "KG, workload, embeddings, training and evaluation");
  add_pipeline_flags(pipe);
  pipe->add_option("--message", message, "tpn|gineconv|tpn-undirected");
  bool inductive = false;
  pipe->add_flag("--inductive", inductive, "Entity-disjoint train/test split");
  auto* abl = app.add_subcommand("ablate", "Full model vs binary-id and undirected variants");
  add_pipeline_flags(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  auto load_store = [&] {
    TripleStore s = load_store_any(store_path);
    info(g, "store: " + std::to_string(s.size()) + " triples, " + std::to_string(s.num_atoms()) + " atoms");
    return s;
  };

  if (*ingest) {
    ParseStats ps;
    TripleStore s = parse_ntriples_file(in_path, lenient ? ParseMode::Lenient : ParseMode::Strict, &ps);
    s.save(std::filesystem::path(out_path));
    json out{{"triples", s.size()},      {"atoms", s.num_atoms()}, {"lines", ps.lines},
             {"duplicates", ps.duplicates}, {"skipped", ps.skipped}, {"errors", ps.errors}};
    std::cout << out.dump(2) << '\n';
    return kOk;
  }

  if (*stats) {
    if (gen_demo) {
      if (out_path.empty()) throw UsageError("--gen-demo needs --out");
      demo.seed = seed();
      TripleStore s = generate_demo_kg(demo);
      if (out_path.ends_with(".nt")) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw ResourceError("cannot open " + out_path + " for writing");
        write_ntriples(s, out);
      } else {
        s.save(std::filesystem::path(out_path));
      }
      info(g, "wrote " + std::to_string(s.size()) + " triples to " + out_path);
      if (store_path.empty()) store_path = out_path;
    }
    if (store_path.empty()) throw UsageError("stats needs --store or --gen-demo");
    TripleStore s = load_store_any(store_path);
    std::vector<AtomId> ids(s.num_atoms());
    std::iota(ids.begin(), ids.end(), AtomId{0});
    std::stable_sort(ids.begin(), ids.end(), [&](AtomId a, AtomId b) { return s.occ(a) > s.occ(b); });
    json out{{"triples", s.size()},
             {"atoms", s.num_atoms()},
             {"subjects", s.subjects().size()},
             {"predicates", s.predicates().size()}};
    auto& topj = out["top_atoms"] = json::array();
    for (std::size_t i = 0; i < std::min(top, ids.size()); ++i)
      topj.push_back({{"atom", to_ntriples_term(s.atom(ids[i]))}, {"occ", s.occ(ids[i])}});
    std::cout << out.dump(2) << '\n';
    return kOk;
  }

  if (*genq) {
    TripleStore s = load_store();
    sc.shape = shape_arg(shape_name_arg);
    sc.sizes = parse_sizes(sizes_arg);
    sc.seed = seed();
    sc.threads = g.threads;
    sc.limits = limits_arg(limit_flag, timeout_flag, sc.limits);
    WorkloadReport report;
    auto queries = build_workload(s, sc, &report);
    write_corpus(queries, out_path);
    json out{{"queries", queries.size()},
             {"attempts", report.attempts},
             {"exhausted", report.exhausted},
             {"duplicates", report.duplicates},
             {"resource_limited", report.resource_limited},
             {"too_large", report.too_large},
             {"zero", report.zero}};
    for (const auto& [size, n] : report.emitted) out["emitted"][std::to_string(size)] = n;
    std::cout << out.dump(2) << '\n';
    return kOk;
  }

  if (*exec) {
    TripleStore s = load_store();
    auto queries = read_corpus(queries_path);
    MatchLimits limits = limits_arg(limit_flag, timeout_flag, MatchLimits{});
    std::vector<QueryGraph> annotated;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      CountResult r = count_solutions(s, queries[i], limits);
      json row{{"index", i}, {"count", r.count}, {"exact", r.exact}};
      if (!r.exact) row["reason"] = r.reason;
      std::cout << row.dump() << '\n';
      annotated.push_back(r.exact ? queries[i].with_cardinality(r.count) : queries[i].with_cardinality(std::nullopt));
    }
    if (!out_path.empty()) write_corpus(annotated, out_path);
    return kOk;
  }

  if (*temb) {
    TripleStore s = load_store();
    if (queries_path.empty() && !all_atoms) throw UsageError("train-embeddings needs --queries or --all-atoms");
    std::vector<QueryGraph> queries;
    if (!queries_path.empty()) queries = read_corpus(queries_path);
    wc.seed = seed();
    sg.seed = seed();
    auto walks = walks_for_corpus(s, queries, wc, all_atoms);
    info(g, "walks: " + std::to_string(walks.size()));
    SkipGramResult r = train_skipgram(walks, sg);
    if (std::filesystem::path(out_path).extension() == ".tsv") {
      if (tsv_path.empty()) tsv_path = out_path;
      out_path = std::filesystem::path(out_path).replace_extension(".bin").string();
    }
    r.table.save(out_path);
    if (!tsv_path.empty()) {
      std::ofstream tsv(tsv_path);
      if (!tsv) throw ResourceError("cannot open " + tsv_path + " for writing");
      r.table.write_tsv(s, tsv);
    }
    json out{{"atoms", r.table.size()}, {"dim", r.table.dim()}, {"epoch_loss", r.epoch_loss}};
    std::cout << out.dump(2) << '\n';
    return kOk;
  }

  if (*tg) {
    TripleStore s = load_store();
    auto queries = read_corpus(queries_path);
    ModelConfig mc;
    mc.message = parse_message_fn(message);
    mc.featurization = parse_feature_mode(featurization);
    mc.occ_scale = parse_occ_scale(occ_scale);
    mc.epsilon = epsilon;
    mc.H = hidden;
    mc.seed = seed();
    std::optional<EmbeddingTable> table;
    if (mc.featurization == FeatureMode::Embedding) {
      if (emb_path.empty()) throw UsageError("embedding featurization needs --embeddings");
      table = load_embeddings(emb_path, s);
      mc.D = table->dim() + 1;
    } else {
      mc.D = id_width + 1;
    }
    GnceModel model(mc);
    Featurizer f = make_featurizer(model, s, table ? &*table : nullptr);
    tc.seed = seed();
    tc.on_epoch = [&](std::size_t epoch, double loss) {
      info(g, "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(tc.epochs) + " loss " + std::to_string(loss));
    };
    TrainResult r = train(model, queries, f, tc);
    model.save(out_path);
    json out{{"parameters", model.num_parameters()}, {"epoch_loss", r.epoch_loss}};
    if (!loss_out.empty()) write_text(loss_out, out.dump(2) + "\n");
    std::cout << out.dump(2) << '\n';
    return kOk;
  }

  auto load_model_and_featurizer = [&](const TripleStore& s, std::optional<EmbeddingTable>& table) {
    GnceModel model = GnceModel::load(model_path);
    if (model.config().featurization == FeatureMode::Embedding) {
      if (emb_path.empty()) throw UsageError("this model needs --embeddings");
      table = load_embeddings(emb_path, s);
    }
    return model;
  };

  if (*pred) {
    TripleStore s = load_store();
    auto queries = read_corpus(queries_path);
    std::optional<EmbeddingTable> table;
    GnceModel model = load_model_and_featurizer(s, table);
    Featurizer f = make_featurizer(model, s, table ? &*table : nullptr);
    std::vector<std::optional<double>> est;
    for (double e : predict_all(model, f, queries)) est.emplace_back(e);
    write_text(out_path, predictions_json("gnce", queries, est).dump(2) + "\n");
    return kOk;
  }

  if (*base) {
    TripleStore s = load_store();
    auto queries = read_corpus(queries_path);
    std::vector<std::optional<double>> est;
    json failures = json::array();
    if (method == "cset") {
      CsetSummary cs = CsetSummary::build(s);
      for (const auto& q : queries) {
        try {
          est.emplace_back(cs.estimate(s, q));
        } catch (const PreconditionError&) {
          est.emplace_back(std::nullopt);
        }
      }
    } else {
      for (std::size_t i = 0; i < queries.size(); ++i) {
        Rng rng(mix_seed({seed(), i}));
        auto r = estimate_wanderjoin(s, queries[i], runs, rng);
        est.emplace_back(r.estimate);
        failures.push_back(r.failures);
      }
    }
    json doc = predictions_json(method, queries, est);
    if (method == "wanderjoin")
      for (std::size_t i = 0; i < queries.size(); ++i) doc["predictions"][i]["failed_runs"] = failures[i];
    write_text(out_path, doc.dump(2) + "\n");
    return kOk;
  }

  if (*ev) {
    if (model_path.empty() == method.empty()) {
      std::cerr << ev->help();
      throw UsageError("evaluate needs exactly one of --model or --method");
    }
    TripleStore s = load_store();
    auto queries = read_corpus(queries_path);
    EvalOptions opts{.warmup = warmup};
    EvalReport report;
    if (!model_path.empty()) {
      std::optional<EmbeddingTable> table;
      GnceModel model = load_model_and_featurizer(s, table);
      Featurizer f = make_featurizer(model, s, table ? &*table : nullptr);
      report = evaluate("gnce", gnce_estimator(model, f), queries, opts);
    } else if (method == "cset") {
      CsetSummary cs = CsetSummary::build(s);
      report = evaluate(method, cset_estimator(cs, s), queries, opts);
    } else if (method == "wanderjoin") {
      report = evaluate(method, wanderjoin_estimator(s, runs, seed()), queries, opts);
    } else {
      if (train_path.empty()) throw UsageError("geomean needs --train");
      auto train_set = read_corpus(train_path);
      report = evaluate(method, constant_estimator(geometric_mean_cardinality(train_set)), queries, opts);
    }
    write_text(out_path, report.to_json().dump(2) + "\n");
    if (!csv_path.empty()) write_text(csv_path, report.to_csv());
    info(g, report.estimator + ": mean q-error " + std::to_string(report.mean_q_error) + " over " +
                std::to_string(report.records.size()) + " queries");
    return kOk;
  }

  if (*feat) {
    TripleStore s = load_store();
    auto queries = read_corpus(queries_path);
    std::optional<EmbeddingTable> table;
    std::optional<GnceModel> model;
    if (!model_path.empty()) model = load_model_and_featurizer(s, table);
    std::optional<Featurizer> f;
    if (model) {
      f = make_featurizer(*model, s, table ? &*table : nullptr);
    } else if (featurization == "binary") {
      f = Featurizer::binary(s, 100, parse_occ_scale(occ_scale));
    } else {
      if (emb_path.empty()) throw UsageError("featurize needs --embeddings, --binary or --model");
      table = load_embeddings(emb_path, s);
      f.emplace(s, *table, make_unseen_vector(table->dim(), seed()), parse_occ_scale(occ_scale));
    }
    std::vector<QueryFeaturization> feats;
    for (const auto& q : queries) feats.push_back(f->featurize(q));
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ResourceError("cannot open " + out_path + " for writing");
    write_features(out, feats);
    if (!out) throw ResourceError("write failed: " + out_path);
    return kOk;
  }

  if (*pipe || *abl) {
    nlohmann::json doc = config_doc(config_path, env_seed);
    if (seed_flag) doc["seed"] = *seed_flag;
    if (app.count("--threads")) doc["threads"] = g.threads;
    if (!out_dir.empty()) doc["out_dir"] = out_dir;
    if (epochs_flag) doc["training"]["epochs"] = *epochs_flag;
    if (count_flag) doc["workload"]["count_per_size"] = *count_flag;
    if (*pipe && pipe->count("--message")) doc["model"]["message"] = message;
    if (*pipe && inductive) doc["split"]["inductive"] = true;
    PipelineConfig pc = PipelineConfig::from_json(doc);
    Logger log = [&](const std::string& m) { info(g, m); };

    if (*pipe) {
      PipelineResult r = run_pipeline(pc, true, log);
      for (const auto& [name, report] : r.reports)
        std::cout << name << ": mean q-error " << report.mean_q_error << " (" << report.records.size()
                  << " queries, " << report.failures << " failures)\n";
      std::cout << "wrote " << (pc.out_dir / "report.json").string() << '\n';
      return kOk;
    }
    std::filesystem::create_directories(pc.out_dir);
    TripleStore s = build_kg(pc);
    auto corpus = build_corpus(s, pc);
    Split split = make_split(corpus, pc);
    if (split.train.empty() || split.test.empty()) throw ResourceError("split left one side empty");
    auto held_out = atom_ids(s, split.held_out);
    SkipGramResult emb = build_embeddings(s, pc.inductive ? std::span<const QueryGraph>(split.train) : corpus, pc,
                                          pc.inductive ? &held_out : nullptr);
    AblationResult ar = run_ablation(s, emb.table, split.train, split.test, pc, default_ablation_arms(), log);
    write_text((pc.out_dir / "ablation.json").string(), ar.to_json().dump(2) + "\n");
    std::cout << ar.to_table();
    return kOk;
  }
  return kUsage;
}

int main(int argc, char** argv) {
  bool json_errors = false;
  for (int i = 1; i < argc; ++i)
    if (std::string_view(argv[i]) == "--json-errors") json_errors = true;

  auto fail = [&](int code, const char* kind, const std::string& message, json extra = json::object()) {
    if (json_errors) {
      json j{{"error", kind}, {"message", message}, {"exit_code", code}};
      j.update(extra);
      std::cerr << j.dump() << '\n';
    } else {
      std::cerr << "gnce: " << message << '\n';
    }
    return code;
  };

  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const PreconditionError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const ParseError& e) {
    return fail(kData, "parse", e.what(), json{{"line", e.line()}});
  } catch (const SchemaError& e) {
    return fail(kData, "schema", e.what(), json{{"path", e.path()}});
  } catch (const ConfigMismatchError& e) {
    return fail(kData, "config_mismatch", e.what());
  } catch (const DataError& e) {
    return fail(kData, "data", e.what());
  } catch (const ResourceError& e) {
    return fail(kResource, "resource", e.what());
  } catch (const std::bad_alloc&) {
    return fail(kResource, "resource", "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kResource, "resource", e.what());
  } catch (const std::exception& e) {
    return fail(kData, "error", e.what());
  }
}
