#include "gnce/model.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "gnce/error.hpp"
#include "gnce/rng.hpp"

namespace gnce {

std::string_view message_fn_name(MessageFn m) {
  switch (m) {
    case MessageFn::Tpn: return "tpn";
    case MessageFn::GineConv: return "gineconv";
    case MessageFn::TpnUndirected: return "tpn-undirected";
  }
  return "tpn";
}

MessageFn parse_message_fn(std::string_view name) {
  if (name == "tpn") return MessageFn::Tpn;
  if (name == "gineconv") return MessageFn::GineConv;
  if (name == "tpn-undirected" || name == "tpn_undirected") return MessageFn::TpnUndirected;
  throw PreconditionError("unknown message function '" + std::string(name) + "'");
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CRow = Eigen::Map<const Eigen::RowVectorXd>;
using MRow = Eigen::Map<Eigen::RowVectorXd>;

bool has_projection(MessageFn m) { return m != MessageFn::GineConv; }

// Disjoint union of a batch of query graphs.
struct Batch {
  Mat X;  // nodes x D
  Mat E;  // edges x D
  std::vector<int> src, dst, graph;
  std::size_t graphs = 0;
};

Batch make_batch(std::span<const QueryFeaturization* const> feats, std::size_t D) {
  Batch b;
  std::size_t n = 0, m = 0;
  for (const auto* f : feats) {
    if (f->dim != D)
      throw PreconditionError("feature width " + std::to_string(f->dim) + " does not match model width " +
                              std::to_string(D));
    n += f->num_nodes;
    m += f->num_edges();
  }
  b.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  b.E.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(D));
  b.graphs = feats.size();
  std::size_t node_base = 0, edge_base = 0;
  for (std::size_t g = 0; g < feats.size(); ++g) {
    const auto& f = *feats[g];
    if (f.num_nodes)
      b.X.middleRows(static_cast<Eigen::Index>(node_base), static_cast<Eigen::Index>(f.num_nodes)) =
          CMap(f.node_features.data(), static_cast<Eigen::Index>(f.num_nodes), static_cast<Eigen::Index>(D));
    if (f.num_edges())
      b.E.middleRows(static_cast<Eigen::Index>(edge_base), static_cast<Eigen::Index>(f.num_edges())) =
          CMap(f.edge_features.data(), static_cast<Eigen::Index>(f.num_edges()), static_cast<Eigen::Index>(D));
    for (std::size_t i = 0; i < f.num_nodes; ++i) b.graph.push_back(static_cast<int>(g));
    for (const auto& [s, d] : f.edges) {
      if (s >= f.num_nodes || d >= f.num_nodes) throw PreconditionError("edge endpoint out of range");
      b.src.push_back(static_cast<int>(node_base + s));
      b.dst.push_back(static_cast<int>(node_base + d));
    }
    node_base += f.num_nodes;
    edge_base += f.num_edges();
  }
  return b;
}

struct LayerView {
  const double* W = nullptr;
  const double* b = nullptr;
  const double* h1W;
  const double* h1b;
  const double* h2W;
  const double* h2b;
};

struct LayerGrad {
  double* W = nullptr;
  double* b = nullptr;
  double* h1W;
  double* h1b;
  double* h2W;
  double* h2b;
};

struct LayerCache {
  Mat C, Z;    // message toward the object node (or GINECONV message to dst)
  Mat Cu, Zu;  // message toward the subject node (undirected variants)
  Mat A, P, Hd, Y;
};

// C rows: [x_first | e | x_second]
void concat(const Mat& X, const Mat& E, const std::vector<int>& first, const std::vector<int>& second, Mat& C) {
  const Eigen::Index D = X.cols();
  C.resize(E.rows(), 3 * D);
  for (Eigen::Index k = 0; k < E.rows(); ++k) {
    C.row(k).segment(0, D) = X.row(first[k]);
    C.row(k).segment(D, D) = E.row(k);
    C.row(k).segment(2 * D, D) = X.row(second[k]);
  }
}

void layer_forward(const ModelConfig& cfg, const LayerView& p, const Batch& b, const Mat& X, LayerCache& c) {
  const Eigen::Index D = static_cast<Eigen::Index>(cfg.D);
  const Eigen::Index M = b.E.rows();
  switch (cfg.message) {
    case MessageFn::Tpn: {
      concat(X, b.E, b.dst, b.src, c.C);
      c.Z.noalias() = c.C * CMap(p.W, D, 3 * D).transpose();
      c.Z.rowwise() += CRow(p.b, D);
      c.A = X;
      for (Eigen::Index k = 0; k < M; ++k) {
        auto m = c.Z.row(k).cwiseMax(0.0);
        c.A.row(b.dst[k]) += m;
        c.A.row(b.src[k]) += m;
      }
      break;
    }
    case MessageFn::TpnUndirected: {
      concat(X, b.E, b.dst, b.src, c.C);
      concat(X, b.E, b.src, b.dst, c.Cu);
      auto W = CMap(p.W, D, 3 * D);
      c.Z.noalias() = c.C * W.transpose();
      c.Z.rowwise() += CRow(p.b, D);
      c.Zu.noalias() = c.Cu * W.transpose();
      c.Zu.rowwise() += CRow(p.b, D);
      c.A = X;
      for (Eigen::Index k = 0; k < M; ++k) {
        c.A.row(b.dst[k]) += c.Z.row(k).cwiseMax(0.0);
        c.A.row(b.src[k]) += c.Zu.row(k).cwiseMax(0.0);
      }
      break;
    }
    case MessageFn::GineConv: {
      c.Z.resize(M, D);
      c.Zu.resize(M, D);
      for (Eigen::Index k = 0; k < M; ++k) {
        c.Z.row(k) = X.row(b.src[k]) + b.E.row(k);
        c.Zu.row(k) = X.row(b.dst[k]) + b.E.row(k);
      }
      c.A = (1.0 + cfg.epsilon) * X;
      for (Eigen::Index k = 0; k < M; ++k) {
        c.A.row(b.dst[k]) += c.Z.row(k).cwiseMax(0.0);
        c.A.row(b.src[k]) += c.Zu.row(k).cwiseMax(0.0);
      }
      break;
    }
  }
  c.P.noalias() = c.A * CMap(p.h1W, D, D).transpose();
  c.P.rowwise() += CRow(p.h1b, D);
  c.Hd = c.P.cwiseMax(0.0);
  c.Y.noalias() = c.Hd * CMap(p.h2W, D, D).transpose();
  c.Y.rowwise() += CRow(p.h2b, D);
}

Mat relu_mask(const Mat& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

// Accumulates parameter gradients; returns dL/dX when need_dx.
Mat layer_backward(const ModelConfig& cfg, const LayerView& p, const LayerGrad& g, const Batch& b,
                   const LayerCache& c, const Mat& dY, bool need_dx) {
  const Eigen::Index D = static_cast<Eigen::Index>(cfg.D);
  const Eigen::Index M = b.E.rows();
  MMap(g.h2W, D, D).noalias() += dY.transpose() * c.Hd;
  MRow(g.h2b, D) += dY.colwise().sum();
  Mat dP = (dY * CMap(p.h2W, D, D)).cwiseProduct(relu_mask(c.P));
  MMap(g.h1W, D, D).noalias() += dP.transpose() * c.A;
  MRow(g.h1b, D) += dP.colwise().sum();
  Mat dA = dP * CMap(p.h1W, D, D);

  Mat dX;
  if (need_dx) dX = (cfg.message == MessageFn::GineConv ? 1.0 + cfg.epsilon : 1.0) * dA;

  switch (cfg.message) {
    case MessageFn::Tpn: {
      Mat dZ(M, D);
      for (Eigen::Index k = 0; k < M; ++k) dZ.row(k) = dA.row(b.dst[k]) + dA.row(b.src[k]);
      dZ = dZ.cwiseProduct(relu_mask(c.Z));
      MMap(g.W, D, 3 * D).noalias() += dZ.transpose() * c.C;
      MRow(g.b, D) += dZ.colwise().sum();
      if (need_dx) {
        Mat dC = dZ * CMap(p.W, D, 3 * D);
        for (Eigen::Index k = 0; k < M; ++k) {
          dX.row(b.dst[k]) += dC.row(k).segment(0, D);
          dX.row(b.src[k]) += dC.row(k).segment(2 * D, D);
        }
      }
      break;
    }
    case MessageFn::TpnUndirected: {
      Mat dZ(M, D), dZu(M, D);
      for (Eigen::Index k = 0; k < M; ++k) {
        dZ.row(k) = dA.row(b.dst[k]);
        dZu.row(k) = dA.row(b.src[k]);
      }
      dZ = dZ.cwiseProduct(relu_mask(c.Z));
      dZu = dZu.cwiseProduct(relu_mask(c.Zu));
      MMap(g.W, D, 3 * D).noalias() += dZ.transpose() * c.C + dZu.transpose() * c.Cu;
      MRow(g.b, D) += dZ.colwise().sum() + dZu.colwise().sum();
      if (need_dx) {
        auto W = CMap(p.W, D, 3 * D);
        Mat dC = dZ * W;
        Mat dCu = dZu * W;
        for (Eigen::Index k = 0; k < M; ++k) {
          dX.row(b.dst[k]) += dC.row(k).segment(0, D) + dCu.row(k).segment(2 * D, D);
          dX.row(b.src[k]) += dC.row(k).segment(2 * D, D) + dCu.row(k).segment(0, D);
        }
      }
      break;
    }
    case MessageFn::GineConv: {
      if (need_dx) {
        for (Eigen::Index k = 0; k < M; ++k) {
          for (Eigen::Index j = 0; j < D; ++j) {
            if (c.Z(k, j) > 0.0) dX(b.src[k], j) += dA(b.dst[k], j);
            if (c.Zu(k, j) > 0.0) dX(b.dst[k], j) += dA(b.src[k], j);
          }
        }
      }
      break;
    }
  }
  return dX;
}

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

GnceModel::GnceModel(ModelConfig config) : config_(config) {
  if (config_.D < 2 || config_.H < 1) throw PreconditionError("model widths must be positive (D >= 2)");
  if (!std::isfinite(config_.epsilon)) throw PreconditionError("epsilon must be finite");
  build_layout();
  randomize(config_.seed);
  param("head.W2").data.assign(config_.H, 0.0);
  param("head.b2").data.assign(1, 0.0);
  unseen_vector = make_unseen_vector(config_.D - 1, config_.seed);
}

void GnceModel::build_layout() {
  const std::size_t D = config_.D, H = config_.H;
  params_.clear();
  auto add = [&](std::string name, std::size_t r, std::size_t c) {
    params_.push_back(Tensor{std::move(name), r, c, AlignedDoubles(r * c, 0.0)});
  };
  for (int l = 1; l <= 2; ++l) {
    std::string pre = "l" + std::to_string(l) + ".";
    if (has_projection(config_.message)) {
      add(pre + "W", D, 3 * D);
      add(pre + "b", 1, D);
    }
    add(pre + "h1.W", D, D);
    add(pre + "h1.b", 1, D);
    add(pre + "h2.W", D, D);
    add(pre + "h2.b", 1, D);
  }
  add("head.W1", H, D);
  add("head.b1", 1, H);
  add("head.W2", 1, H);
  add("head.b2", 1, 1);
  adam.step = 0;
  adam.m = zeros_like();
  adam.v = zeros_like();
}

Tensor& GnceModel::param(std::string_view name) {
  for (auto& t : params_)
    if (t.name == name) return t;
  throw PreconditionError("no parameter named '" + std::string(name) + "'");
}

const Tensor& GnceModel::param(std::string_view name) const { return const_cast<GnceModel*>(this)->param(name); }

std::size_t GnceModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.size();
  return n;
}

std::vector<Tensor> GnceModel::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& t : params_) out.push_back(Tensor{t.name, t.rows, t.cols, AlignedDoubles(t.size(), 0.0)});
  return out;
}

void GnceModel::set_zero() {
  for (auto& t : params_) std::fill(t.data.begin(), t.data.end(), 0.0);
}

void GnceModel::randomize(std::uint64_t seed, double scale) {
  Rng rng(mix_seed({seed, 0x1417}));
  // Biases share the fan-in of the weight matrix listed before them.
  std::size_t fan_in = 1;
  for (auto& t : params_) {
    if (t.name[t.name.rfind('.') + 1] == 'W') fan_in = t.cols;
    const double bound = scale * fan_in_bound(fan_in);
    for (auto& x : t.data) x = rng.uniform(-bound, bound);
  }
}

namespace {

struct Views {
  LayerView layer[2];
  const double *W1, *b1, *W2, *b2;
};

template <class Model>
Views views(Model& m) {
  Views v{};
  for (int l = 0; l < 2; ++l) {
    std::string pre = "l" + std::to_string(l + 1) + ".";
    if (has_projection(m.config().message)) {
      v.layer[l].W = m.param(pre + "W").data.data();
      v.layer[l].b = m.param(pre + "b").data.data();
    }
    v.layer[l].h1W = m.param(pre + "h1.W").data.data();
    v.layer[l].h1b = m.param(pre + "h1.b").data.data();
    v.layer[l].h2W = m.param(pre + "h2.W").data.data();
    v.layer[l].h2b = m.param(pre + "h2.b").data.data();
  }
  v.W1 = m.param("head.W1").data.data();
  v.b1 = m.param("head.b1").data.data();
  v.W2 = m.param("head.W2").data.data();
  v.b2 = m.param("head.b2").data.data();
  return v;
}

double* grad_ptr(std::vector<Tensor>& grads, const std::string& name) {
  for (auto& t : grads)
    if (t.name == name) return t.data.data();
  throw PreconditionError("gradient layout does not match the model");
}

struct Forward {
  Batch batch;
  LayerCache cache[2];
  Mat G, Upre, U;
  Eigen::VectorXd f;
};

void run_forward(const GnceModel& model, const Views& v, std::span<const QueryFeaturization* const> feats,
                 Forward& fw) {
  const auto& cfg = model.config();
  const Eigen::Index D = static_cast<Eigen::Index>(cfg.D), H = static_cast<Eigen::Index>(cfg.H);
  fw.batch = make_batch(feats, cfg.D);
  layer_forward(cfg, v.layer[0], fw.batch, fw.batch.X, fw.cache[0]);
  layer_forward(cfg, v.layer[1], fw.batch, fw.cache[0].Y, fw.cache[1]);
  const Mat& Y = fw.cache[1].Y;
  fw.G = Mat::Zero(static_cast<Eigen::Index>(fw.batch.graphs), D);
  for (Eigen::Index i = 0; i < Y.rows(); ++i) fw.G.row(fw.batch.graph[i]) += Y.row(i);
  fw.Upre.noalias() = fw.G * CMap(v.W1, H, D).transpose();
  fw.Upre.rowwise() += CRow(v.b1, H);
  fw.U = fw.Upre.cwiseMax(0.0);
  fw.f = fw.U * CRow(v.W2, H).transpose();
  fw.f.array() += v.b2[0];
}

}  // namespace

std::vector<double> GnceModel::forward_batch(std::span<const QueryFeaturization* const> feats) const {
  if (feats.empty()) return {};
  Forward fw;
  run_forward(*this, views(*this), feats, fw);
  return std::vector<double>(fw.f.data(), fw.f.data() + fw.f.size());
}

double GnceModel::forward(const QueryFeaturization& feat) const {
  const QueryFeaturization* one[] = {&feat};
  return forward_batch(one).front();
}

double GnceModel::loss_and_gradient(std::span<const QueryFeaturization* const> feats,
                                    std::span<const double> log_targets, std::vector<Tensor>* grads) const {
  if (feats.empty()) throw PreconditionError("empty batch");
  if (feats.size() != log_targets.size()) throw PreconditionError("batch and target sizes differ");
  const Views v = views(*this);
  Forward fw;
  run_forward(*this, v, feats, fw);
  const auto B = static_cast<double>(feats.size());
  Eigen::VectorXd diff = fw.f - Eigen::Map<const Eigen::VectorXd>(log_targets.data(), fw.f.size());
  const double loss = diff.squaredNorm() / B;
  if (!grads) return loss;

  *grads = zeros_like();
  const auto& cfg = config_;
  const Eigen::Index D = static_cast<Eigen::Index>(cfg.D), H = static_cast<Eigen::Index>(cfg.H);
  Eigen::VectorXd dF = (2.0 / B) * diff;

  MRow(grad_ptr(*grads, "head.W2"), H) += dF.transpose() * fw.U;
  grad_ptr(*grads, "head.b2")[0] += dF.sum();
  Mat dU = (dF * CRow(v.W2, H)).cwiseProduct(relu_mask(fw.Upre));
  MMap(grad_ptr(*grads, "head.W1"), H, D).noalias() += dU.transpose() * fw.G;
  MRow(grad_ptr(*grads, "head.b1"), H) += dU.colwise().sum();
  Mat dG = dU * CMap(v.W1, H, D);

  Mat dY(fw.cache[1].Y.rows(), D);
  for (Eigen::Index i = 0; i < dY.rows(); ++i) dY.row(i) = dG.row(fw.batch.graph[i]);

  for (int l = 1; l >= 0; --l) {
    std::string pre = "l" + std::to_string(l + 1) + ".";
    LayerGrad g;
    if (has_projection(cfg.message)) {
      g.W = grad_ptr(*grads, pre + "W");
      g.b = grad_ptr(*grads, pre + "b");
    }
    g.h1W = grad_ptr(*grads, pre + "h1.W");
    g.h1b = grad_ptr(*grads, pre + "h1.b");
    g.h2W = grad_ptr(*grads, pre + "h2.W");
    g.h2b = grad_ptr(*grads, pre + "h2.b");
    dY = layer_backward(cfg, v.layer[l], g, fw.batch, fw.cache[l], dY, l > 0);
  }
  return loss;
}

void GnceModel::adam_step(const std::vector<Tensor>& grads, const AdamConfig& c) {
  if (grads.size() != params_.size()) throw PreconditionError("gradient layout does not match the model");
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].data;
    auto& m = adam.m[i].data;
    auto& v = adam.v[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      p[j] -= c.lr * (m[j] / corr1) / (std::sqrt(v[j] / corr2) + c.eps);
    }
  }
}

double query_loss(const GnceModel& model, const QueryFeaturization& feat, double true_card) {
  if (!(true_card >= 1.0)) throw PreconditionError("true cardinality must be >= 1");
  const double d = model.forward(feat) - std::log(true_card);
  return d * d;
}

}  // namespace gnce
