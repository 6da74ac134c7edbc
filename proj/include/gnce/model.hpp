#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gnce/featurizer.hpp"

namespace gnce {

enum class MessageFn { Tpn, GineConv, TpnUndirected };

std::string_view message_fn_name(MessageFn m);
MessageFn parse_message_fn(std::string_view name);

struct ModelConfig {
  std::size_t D = 101;  // node/edge feature width (embedding dim + 1)
  std::size_t H = 101;  // head hidden width
  MessageFn message = MessageFn::Tpn;
  double epsilon = 0.0;  // GINECONV self-term
  std::uint64_t seed = 42;
  FeatureMode featurization = FeatureMode::Embedding;
  OccScale occ_scale = OccScale::Log1p;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Row-major dense tensor.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  AlignedDoubles data;

  std::size_t size() const { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Two message-passing layers, global sum readout, MLP head.
//
// Parameters per layer l (1, 2):
//   l<l>.W [D x 3D], l<l>.b [D]   edge projection (TPN variants only);
//                                  column blocks act on object | predicate | subject
//   l<l>.h1.W, l<l>.h2.W [D x D] with biases   the update MLP h_theta
// Head: head.W1 [H x D], head.b1 [H], head.W2 [1 x H], head.b2 [1].
class GnceModel {
 public:
  // Weights uniform in +-1/sqrt(fan_in); the head output layer starts at zero
  // so an untrained model predicts log-cardinality 0.
  explicit GnceModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  Tensor& param(std::string_view name);
  const Tensor& param(std::string_view name) const;
  std::size_t num_parameters() const;

  // Fresh zero tensors with the parameter layout.
  std::vector<Tensor> zeros_like() const;

  void set_zero();
  // Every parameter (head included) uniform in +-scale/sqrt(fan_in).
  void randomize(std::uint64_t seed, double scale = 1.0);

  std::vector<double> unseen_vector;  // length D - 1
  AdamState adam;

  double forward(const QueryFeaturization& feat) const;
  std::vector<double> forward_batch(std::span<const QueryFeaturization* const> feats) const;

  // Mean over the batch of (f - target)^2, with targets given as ln(cardinality).
  // When grads is non-null it receives the gradient (overwritten).
  double loss_and_gradient(std::span<const QueryFeaturization* const> feats, std::span<const double> log_targets,
                           std::vector<Tensor>* grads) const;

  void adam_step(const std::vector<Tensor>& grads, const AdamConfig& config);

  // "GNCEMDL1", u64 header length, JSON header, then named f64 tensors.
  void write(std::ostream& out) const;
  static GnceModel read(std::istream& in, std::optional<MessageFn> expected = std::nullopt);
  void save(const std::filesystem::path& path) const;
  static GnceModel load(const std::filesystem::path& path, std::optional<MessageFn> expected = std::nullopt);

  friend bool operator==(const GnceModel&, const GnceModel&) = default;

 private:
  GnceModel() = default;
  void build_layout();

  ModelConfig config_;
  std::vector<Tensor> params_;
};

// (f - ln(card))^2 for a single query; card must be >= 1.
double query_loss(const GnceModel& model, const QueryFeaturization& feat, double true_card);

}  // namespace gnce
