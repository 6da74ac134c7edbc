#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gnce/embeddings.hpp"
#include "gnce/featurizer.hpp"
#include "gnce/model.hpp"
#include "gnce/query.hpp"

namespace gnce {

struct TrainConfig {
  std::size_t batch = 32;
  std::size_t epochs = 50;
  double lr = 1e-4;
  std::uint64_t seed = 42;
  // Fresh random variable ids per query per epoch; otherwise canonical ids.
  bool randomize_variable_ids = true;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean squared log error seen during each epoch
};

// Featurizer matching the model's featurization mode. The embedding table is
// required in embedding mode and ignored in binary mode.
Featurizer make_featurizer(const GnceModel& model, const TripleStore& store, const EmbeddingTable* table);

// Adam on the mean batch loss; queries must carry a cardinality >= 1.
TrainResult train(GnceModel& model, std::span<const QueryGraph> corpus, const Featurizer& featurizer,
                  const TrainConfig& config);

// exp(f) with canonical variable ids.
double predict(const GnceModel& model, const Featurizer& featurizer, const QueryGraph& query);
std::vector<double> predict_all(const GnceModel& model, const Featurizer& featurizer,
                                std::span<const QueryGraph> queries, std::size_t batch = 256);

}  // namespace gnce
