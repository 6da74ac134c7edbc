#include "gnce/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnce/error.hpp"

namespace gnce {

std::string_view occ_scale_name(OccScale s) { return s == OccScale::Raw ? "raw" : "log1p"; }

OccScale parse_occ_scale(std::string_view name) {
  if (name == "raw") return OccScale::Raw;
  if (name == "log1p") return OccScale::Log1p;
  throw PreconditionError("unknown occ scale '" + std::string(name) + "'");
}

std::string_view feature_mode_name(FeatureMode m) { return m == FeatureMode::Embedding ? "embedding" : "binary"; }

FeatureMode parse_feature_mode(std::string_view name) {
  if (name == "embedding") return FeatureMode::Embedding;
  if (name == "binary") return FeatureMode::BinaryId;
  throw PreconditionError("unknown featurization '" + std::string(name) + "'");
}

std::vector<double> make_unseen_vector(std::size_t dim, std::uint64_t seed) {
  Rng rng(mix_seed({seed, 0x0a5ee4}));
  const double bound = 0.5 / static_cast<double>(dim);
  std::vector<double> r(dim);
  for (auto& x : r) x = rng.uniform(-bound, bound);
  return r;
}

Featurizer::Featurizer(const TripleStore& store, FeatureMode mode, std::size_t dim, OccScale occ_scale)
    : store_(&store), mode_(mode), dim_(dim), occ_scale_(occ_scale) {}

Featurizer::Featurizer(const TripleStore& store, const EmbeddingTable& table, std::vector<double> unseen_vector,
                       OccScale occ_scale)
    : Featurizer(store, FeatureMode::Embedding, table.dim() + 1, occ_scale) {
  if (table.dim() == 0) throw PreconditionError("embedding table has dimension 0");
  if (unseen_vector.size() != table.dim())
    throw ConfigMismatchError("embedding dimension " + std::to_string(table.dim()) +
                              " does not match model input dimension " + std::to_string(unseen_vector.size() + 1));
  table_ = &table;
  unseen_ = std::move(unseen_vector);
}

Featurizer Featurizer::binary(const TripleStore& store, std::size_t id_width, OccScale occ_scale) {
  if (id_width == 0) throw PreconditionError("binary id width must be positive");
  if (id_width < 32 && store.num_atoms() > (std::size_t{1} << id_width))
    throw PreconditionError("atom ids do not fit in " + std::to_string(id_width) + " bits");
  Featurizer f(store, FeatureMode::BinaryId, id_width + 1, occ_scale);
  f.id_width_ = id_width;
  return f;
}

void Featurizer::bound_row(const Atom& atom, std::span<double> out) const {
  auto id = store_->find(atom);
  const bool masked = id && masked_ && masked_->contains(*id);
  const std::size_t width = dim_ - 1;
  bool known = false;
  if (mode_ == FeatureMode::Embedding) {
    std::optional<std::span<const float>> e;
    if (id && !masked) e = table_->lookup(*id);
    if (e) {
      std::copy(e->begin(), e->end(), out.begin());
      known = true;
    } else {
      std::copy(unseen_.begin(), unseen_.end(), out.begin());
    }
  } else {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(width), 0.0);
    if (id && !masked) {
      // LSB first
      for (std::size_t b = 0; b < width && b < 32; ++b) out[b] = static_cast<double>((*id >> b) & 1u);
      known = true;
    }
  }
  double occ_feature = 0.0;
  if (known) {
    auto occ = static_cast<double>(store_->occ(*id));
    occ_feature = occ_scale_ == OccScale::Log1p ? std::log1p(occ) : occ;
  }
  out[width] = occ_feature;
  if (observer_) observer_(atom, known);
}

QueryFeaturization Featurizer::featurize(const QueryGraph& query, Rng* rng) const {
  QueryFeaturization f;
  f.dim = dim_;
  f.node_atoms = query.nodes();
  f.num_nodes = f.node_atoms.size();

  // Without an RNG, ids follow the canonical labelling so that renamed or
  // reordered copies of a query featurize identically.
  auto vars = query.variables();
  if (!rng && vars.size() <= kMaxCanonicalVariables) vars = canonical_variable_order(query);
  std::vector<double> var_ids(vars.size());
  std::iota(var_ids.begin(), var_ids.end(), 1.0);
  if (rng) rng->shuffle(std::span<double>(var_ids));
  auto var_id = [&](const std::string& name) {
    return var_ids[static_cast<std::size_t>(std::find(vars.begin(), vars.end(), name) - vars.begin())];
  };
  auto fill = [&](const QueryAtom& a, std::span<double> out) {
    if (a.is_var()) {
      std::fill(out.begin(), out.end(), 1.0);
      out[0] = var_id(a.var_name());
    } else {
      bound_row(a.atom(), out);
    }
  };

  f.node_features.assign(f.num_nodes * dim_, 0.0);
  for (std::size_t i = 0; i < f.num_nodes; ++i)
    fill(f.node_atoms[i], std::span<double>(f.node_features.data() + i * dim_, dim_));

  const auto& patterns = query.patterns();
  f.edge_features.assign(patterns.size() * dim_, 0.0);
  auto node_index = [&](const QueryAtom& a) {
    return static_cast<std::uint32_t>(std::find(f.node_atoms.begin(), f.node_atoms.end(), a) - f.node_atoms.begin());
  };
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    f.edges.emplace_back(node_index(patterns[k].s), node_index(patterns[k].o));
    fill(patterns[k].p, std::span<double>(f.edge_features.data() + k * dim_, dim_));
  }
  return f;
}

}  // namespace gnce
