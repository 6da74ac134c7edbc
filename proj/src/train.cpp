#include "gnce/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnce/error.hpp"
#include "gnce/rng.hpp"

namespace gnce {

Featurizer make_featurizer(const GnceModel& model, const TripleStore& store, const EmbeddingTable* table) {
  const auto& cfg = model.config();
  if (cfg.featurization == FeatureMode::BinaryId) {
    Featurizer f = Featurizer::binary(store, cfg.D - 1, cfg.occ_scale);
    return f;
  }
  if (!table) throw PreconditionError("embedding featurization needs an embedding table");
  if (table->dim() + 1 != cfg.D)
    throw ConfigMismatchError("embedding dimension " + std::to_string(table->dim()) + " does not match model width " +
                              std::to_string(cfg.D));
  return Featurizer(store, *table, model.unseen_vector, cfg.occ_scale);
}

TrainResult train(GnceModel& model, std::span<const QueryGraph> corpus, const Featurizer& featurizer,
                  const TrainConfig& config) {
  if (corpus.empty()) throw PreconditionError("training corpus is empty");
  if (config.batch == 0) throw PreconditionError("batch size must be positive");
  if (!(config.lr > 0.0)) throw PreconditionError("learning rate must be positive");
  if (featurizer.dim() != model.config().D) throw ConfigMismatchError("featurizer width does not match the model");
  std::vector<double> targets;
  targets.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto c = corpus[i].true_cardinality();
    if (!c || *c < 1) throw PreconditionError("query " + std::to_string(i) + " has no cardinality >= 1");
    targets.push_back(std::log(static_cast<double>(*c)));
  }

  Rng rng(mix_seed({config.seed, 0x7a41}));
  AdamConfig adam{.lr = config.lr};
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  std::vector<QueryFeaturization> feats;
  std::vector<const QueryFeaturization*> ptrs;
  std::vector<double> batch_targets;
  std::vector<Tensor> grads;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      feats.clear();
      ptrs.clear();
      batch_targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        feats.push_back(featurizer.featurize(corpus[order[i]], config.randomize_variable_ids ? &rng : nullptr));
        batch_targets.push_back(targets[order[i]]);
      }
      for (const auto& f : feats) ptrs.push_back(&f);
      const double loss = model.loss_and_gradient(ptrs, batch_targets, &grads);
      total += loss * static_cast<double>(end - start);
      model.adam_step(grads, adam);
    }
    for (const auto& t : model.params())
      for (double x : t.data)
        if (!std::isfinite(x)) throw Error("training diverged: non-finite parameter in " + t.name);
    const double mean = total / static_cast<double>(corpus.size());
    result.epoch_loss.push_back(mean);
    if (config.on_epoch) config.on_epoch(epoch, mean);
  }
  return result;
}

double predict(const GnceModel& model, const Featurizer& featurizer, const QueryGraph& query) {
  return std::exp(model.forward(featurizer.featurize(query)));
}

std::vector<double> predict_all(const GnceModel& model, const Featurizer& featurizer,
                                std::span<const QueryGraph> queries, std::size_t batch) {
  std::vector<double> out;
  out.reserve(queries.size());
  std::vector<QueryFeaturization> feats;
  std::vector<const QueryFeaturization*> ptrs;
  for (std::size_t start = 0; start < queries.size(); start += std::max<std::size_t>(batch, 1)) {
    const std::size_t end = std::min(queries.size(), start + std::max<std::size_t>(batch, 1));
    feats.clear();
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) feats.push_back(featurizer.featurize(queries[i]));
    for (const auto& f : feats) ptrs.push_back(&f);
    for (double f : model.forward_batch(ptrs)) out.push_back(std::exp(f));
  }
  return out;
}

}  // namespace gnce
