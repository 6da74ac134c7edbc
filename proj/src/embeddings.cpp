#include "gnce/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gnce/binary_io.hpp"
#include "gnce/error.hpp"
#include "gnce/rng.hpp"

namespace gnce {

namespace {

constexpr std::string_view kEmbMagic = "GNCEEMB1";
constexpr std::string_view kOutputMagic = "OUTV";

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

bool is_blocked(const std::unordered_set<AtomId>* blocked, AtomId id) {
  return blocked != nullptr && blocked->contains(id);
}

// Extends `walk` from its last node for up to `hops` hops.
void extend_walk(const TripleStore& store, Walk& walk, std::size_t hops, bool bidirectional,
                 const std::unordered_set<AtomId>* blocked, Rng& rng) {
  std::vector<std::pair<AtomId, AtomId>> steps;  // (predicate, next node)
  for (std::size_t h = 0; h < hops; ++h) {
    AtomId cur = walk.atoms.back();
    steps.clear();
    for (const auto& t : store.outgoing(cur))
      if (!is_blocked(blocked, t.o) && !is_blocked(blocked, t.p)) steps.emplace_back(t.p, t.o);
    if (bidirectional)
      for (const auto& t : store.incoming(cur))
        if (!is_blocked(blocked, t.s) && !is_blocked(blocked, t.p)) steps.emplace_back(t.p, t.s);
    if (steps.empty()) return;
    auto [p, next] = steps[rng.index(steps.size())];
    walk.atoms.push_back(p);
    walk.atoms.push_back(next);
  }
}

}  // namespace

std::vector<Walk> generate_walks(const TripleStore& store, std::span<const AtomId> entities, const WalkConfig& config,
                                 const std::unordered_set<AtomId>* blocked) {
  std::vector<Walk> walks;
  walks.reserve(entities.size() * config.walks_per_entity);
  for (AtomId e : entities) {
    if (is_blocked(blocked, e)) continue;
    Rng rng(mix_seed({config.seed, 0x57a1c, e}));
    for (std::size_t k = 0; k < config.walks_per_entity; ++k) {
      Walk w;
      w.atoms.push_back(e);
      extend_walk(store, w, config.max_depth, config.bidirectional, blocked, rng);
      walks.push_back(std::move(w));
    }
  }
  return walks;
}

std::vector<Walk> generate_predicate_walks(const TripleStore& store, std::span<const AtomId> predicates,
                                           const WalkConfig& config, const std::unordered_set<AtomId>* blocked) {
  std::vector<Walk> walks;
  for (AtomId p : predicates) {
    if (is_blocked(blocked, p)) continue;
    Rng rng(mix_seed({config.seed, 0x9ed1c, p}));
    std::vector<IdTriple> usable;
    for (const auto& t : store.match(IdPattern{std::nullopt, p, std::nullopt}))
      if (!is_blocked(blocked, t.s) && !is_blocked(blocked, t.o)) usable.push_back(t);
    if (usable.empty()) continue;
    for (std::size_t k = 0; k < config.walks_per_entity; ++k) {
      const IdTriple& t = usable[rng.index(usable.size())];
      Walk w;
      w.atoms = {t.s, t.p, t.o};
      if (config.max_depth > 1) extend_walk(store, w, config.max_depth - 1, config.bidirectional, blocked, rng);
      walks.push_back(std::move(w));
    }
  }
  return walks;
}

std::vector<Walk> walks_for_corpus(const TripleStore& store, std::span<const QueryGraph> corpus,
                                   const WalkConfig& config, bool all_atoms,
                                   const std::unordered_set<AtomId>* blocked) {
  std::vector<AtomId> entities, predicates;
  std::unordered_set<AtomId> seen_e, seen_p;
  auto add = [&](std::vector<AtomId>& out, std::unordered_set<AtomId>& seen, AtomId id) {
    if (seen.insert(id).second) out.push_back(id);
  };
  if (all_atoms) {
    for (AtomId id = 0; id < store.num_atoms(); ++id) {
      if (store.is_predicate(id)) add(predicates, seen_p, id);
      else add(entities, seen_e, id);
    }
  } else {
    for (const auto& q : corpus) {
      for (const auto& tp : q.patterns()) {
        for (const QueryAtom* a : {&tp.s, &tp.o}) {
          if (a->is_var()) continue;
          if (auto id = store.find(a->atom())) add(entities, seen_e, *id);
        }
        if (!tp.p.is_var())
          if (auto id = store.find(tp.p.atom())) add(predicates, seen_p, *id);
      }
    }
  }
  auto walks = generate_walks(store, entities, config, blocked);
  auto pwalks = generate_predicate_walks(store, predicates, config, blocked);
  walks.insert(walks.end(), std::make_move_iterator(pwalks.begin()), std::make_move_iterator(pwalks.end()));
  return walks;
}

std::size_t EmbeddingTable::add(AtomId id, std::span<const float> input, std::span<const float> output) {
  if (input.size() != dim_ || output.size() != dim_) throw PreconditionError("embedding row has wrong dimension");
  auto [it, inserted] = rows_.try_emplace(id, ids_.size());
  if (!inserted) throw DataError("duplicate embedding for atom id " + std::to_string(id));
  ids_.push_back(id);
  input_.insert(input_.end(), input.begin(), input.end());
  output_.insert(output_.end(), output.begin(), output.end());
  return it->second;
}

std::optional<std::span<const float>> EmbeddingTable::lookup(AtomId id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) return std::nullopt;
  return input_row(it->second);
}

std::optional<std::span<const float>> EmbeddingTable::lookup(const TripleStore& store, const Atom& atom) const {
  auto id = store.find(atom);
  if (!id) return std::nullopt;
  return lookup(*id);
}

void EmbeddingTable::write_tsv(const TripleStore& store, std::ostream& out) const {
  char buf[64];
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    out << to_ntriples_term(store.atom(ids_[r])) << '\t';
    auto row = input_row(r);
    for (std::size_t k = 0; k < dim_; ++k) {
      auto res = std::to_chars(buf, buf + sizeof(buf), row[k]);
      if (k) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

EmbeddingTable EmbeddingTable::read_tsv(const TripleStore& store, std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "missing tab separator");
    std::string term = line.substr(0, tab);
    Atom atom = term.size() >= 2 && term.front() == '<' && term.back() == '>'
                    ? Atom::iri(term.substr(1, term.size() - 2))
                    : Atom::literal(term);
    values.clear();
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      float v;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw ParseError(line_no, "bad number");
      values.push_back(v);
      p = res.ptr;
    }
    if (table.dim_ == 0) table.dim_ = values.size();
    if (values.size() != table.dim_ || values.empty()) throw ParseError(line_no, "inconsistent dimension");
    auto id = store.find(atom);
    if (!id) continue;
    std::vector<float> zeros(table.dim_, 0.0f);
    table.add(*id, values, zeros);
  }
  return table;
}

void EmbeddingTable::write_binary(std::ostream& out) const {
  binio::write_bytes(out, kEmbMagic);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  binio::write_le<std::uint64_t>(out, ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    binio::write_le<std::uint32_t>(out, ids_[r]);
    for (float v : input_row(r)) binio::write_le<float>(out, v);
  }
  binio::write_bytes(out, kOutputMagic);
  binio::write_le<std::uint64_t>(out, ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    binio::write_le<std::uint32_t>(out, ids_[r]);
    for (float v : output_row(r)) binio::write_le<float>(out, v);
  }
  binio::write_le<std::uint64_t>(out, trained_epochs);
  binio::write_le<std::uint64_t>(out, window);
  binio::write_le<std::uint64_t>(out, negatives);
  binio::write_le<std::uint64_t>(out, seed);
  if (!out) throw ResourceError("failed writing embeddings");
}

EmbeddingTable EmbeddingTable::read_binary(std::istream& in) {
  binio::expect_magic(in, kEmbMagic, "embedding file");
  auto dim = binio::read_le<std::uint32_t>(in);
  auto count = binio::read_le<std::uint64_t>(in);
  if (dim == 0 || dim > (1u << 16) || count > (1ULL << 32)) throw DataError("embedding file: bad header");
  EmbeddingTable table(dim);
  std::vector<float> row(dim), zeros(dim, 0.0f);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto id = binio::read_le<std::uint32_t>(in);
    for (auto& v : row) {
      v = binio::read_le<float>(in);
      if (!std::isfinite(v)) throw DataError("embedding file: non-finite value");
    }
    table.add(id, row, zeros);
  }
  if (in.peek() == std::char_traits<char>::eof()) return table;
  binio::expect_magic(in, kOutputMagic, "embedding file output block");
  if (binio::read_le<std::uint64_t>(in) != count) throw DataError("embedding file: output block size mismatch");
  for (std::uint64_t i = 0; i < count; ++i) {
    auto id = binio::read_le<std::uint32_t>(in);
    if (id != table.ids_[i]) throw DataError("embedding file: output block id mismatch");
    for (auto& v : table.mutable_output_row(i)) v = binio::read_le<float>(in);
  }
  table.trained_epochs = binio::read_le<std::uint64_t>(in);
  table.window = binio::read_le<std::uint64_t>(in);
  table.negatives = binio::read_le<std::uint64_t>(in);
  table.seed = binio::read_le<std::uint64_t>(in);
  return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot open " + path.string() + " for writing");
  write_binary(out);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings " + path.string());
  return read_binary(in);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

SkipGramResult train_skipgram(std::span<const Walk> walks, const SkipGramConfig& config) {
  if (config.dim < 1) throw PreconditionError("embedding dim must be >= 1");
  if (config.window < 1) throw PreconditionError("window must be >= 1");

  std::unordered_map<AtomId, std::uint32_t> vocab_index;
  std::vector<AtomId> vocab;
  std::vector<std::uint64_t> counts;
  std::vector<std::vector<std::uint32_t>> corpus;
  corpus.reserve(walks.size());
  for (const auto& w : walks) {
    std::vector<std::uint32_t> seq;
    seq.reserve(w.atoms.size());
    for (AtomId a : w.atoms) {
      auto [it, inserted] = vocab_index.try_emplace(a, static_cast<std::uint32_t>(vocab.size()));
      if (inserted) {
        vocab.push_back(a);
        counts.push_back(0);
      }
      ++counts[it->second];
      seq.push_back(it->second);
    }
    corpus.push_back(std::move(seq));
  }
  if (vocab.empty()) throw DataError("skip-gram: empty vocabulary");

  const std::size_t dim = config.dim;
  const std::size_t V = vocab.size();
  Rng rng(mix_seed({config.seed, 0x5e1f}));

  std::vector<double> in(V * dim), out(V * dim, 0.0);
  const double bound = 0.5 / static_cast<double>(dim);
  for (auto& x : in) x = rng.uniform(-bound, bound);

  std::vector<double> cdf(V);
  double acc = 0;
  for (std::size_t i = 0; i < V; ++i) {
    acc += std::pow(static_cast<double>(counts[i]), 0.75);
    cdf[i] = acc;
  }
  auto draw_negative = [&]() -> std::uint32_t {
    double u = rng.uniform01() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::uint32_t>(std::min<std::size_t>(it - cdf.begin(), V - 1));
  };

  std::size_t positions = 0;
  for (const auto& seq : corpus) positions += seq.size();
  const double total = static_cast<double>(std::max<std::size_t>(1, positions * config.epochs));

  SkipGramResult result;
  std::vector<double> neu(dim);
  std::size_t processed = 0;
  const int window = static_cast<int>(config.window);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0;
    std::size_t pairs = 0;
    for (const auto& seq : corpus) {
      const int n = static_cast<int>(seq.size());
      for (int t = 0; t < n; ++t, ++processed) {
        const double lr = config.lr * std::max(1e-4, 1.0 - static_cast<double>(processed) / total);
        double* v = &in[seq[t] * dim];
        for (int j = -window; j <= window; ++j) {
          if (j == 0 || t + j < 0 || t + j >= n) continue;
          const std::uint32_t ctx = seq[t + j];
          std::fill(neu.begin(), neu.end(), 0.0);
          for (std::size_t d = 0; d <= config.negatives; ++d) {
            std::uint32_t target;
            double label;
            if (d == 0) {
              target = ctx;
              label = 1.0;
            } else {
              target = draw_negative();
              if (target == ctx) continue;
              label = 0.0;
            }
            double* u = &out[target * dim];
            double f = 0;
            for (std::size_t k = 0; k < dim; ++k) f += u[k] * v[k];
            const double sig = 1.0 / (1.0 + std::exp(-f));
            // -log sigma(f) for the positive, -log sigma(-f) for negatives
            loss_sum += label > 0 ? softplus(-f) : softplus(f);
            const double g = (label - sig) * lr;
            for (std::size_t k = 0; k < dim; ++k) {
              neu[k] += g * u[k];
              u[k] += g * v[k];
            }
          }
          for (std::size_t k = 0; k < dim; ++k) v[k] += neu[k];
          ++pairs;
        }
      }
    }
    result.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }

  EmbeddingTable table(dim);
  std::vector<float> fin(dim), fout(dim);
  for (std::size_t i = 0; i < V; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      fin[k] = static_cast<float>(in[i * dim + k]);
      fout[k] = static_cast<float>(out[i * dim + k]);
    }
    table.add(vocab[i], fin, fout);
  }
  table.trained_epochs = config.epochs;
  table.window = config.window;
  table.negatives = config.negatives;
  table.seed = config.seed;
  result.table = std::move(table);
  return result;
}

}  // namespace gnce
