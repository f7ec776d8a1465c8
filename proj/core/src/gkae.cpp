#include "shellkoop/gkae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_io.hpp"

namespace shellkoop {

using nn::Activation;
using nn::Matrix;

void GkaeConfig::validate() const {
  if (gcn_layers < 1) throw ConfigError("gkae.gcn_layers", "must be >= 1");
  if (hidden < 1) throw ConfigError("gkae.hidden", "must be >= 1");
  if (node_latent < 1) throw ConfigError("gkae.node_latent", "must be >= 1");
  if (embed_dim < 1) throw ConfigError("gkae.embed_dim", "must be >= 1");
  if (identity_dim < 1) throw ConfigError("gkae.identity_dim", "must be >= 1");
  if (train_horizon < 1) throw ConfigError("gkae.train_horizon", "must be >= 1");
  if (eval_horizon < train_horizon) throw ConfigError("gkae.eval_horizon", "must be >= train_horizon");
  if (!(alpha >= 0.0)) throw ConfigError("gkae.alpha", "must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("gkae.beta", "must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gkae.gamma", "must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("gkae.lr", "must be > 0");
  if (epochs < 0) throw ConfigError("gkae.epochs", "must be >= 0");
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) throw ConfigError("gkae.mask_rate", "must lie in [0, 1)");
  if (masked_training && mask_rate <= 0.0) throw ConfigError("gkae.mask_rate", "masked training needs a rate > 0");
}

void TrainReport::write_csv(std::ostream& os) const {
  os << "epoch,total,recon,pred,lin\n";
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& l = epochs[e];
    os << (e + 1) << ',' << detail::format_double(l.total) << ',' << detail::format_double(l.recon) << ','
       << detail::format_double(l.pred) << ',' << detail::format_double(l.lin) << '\n';
  }
}

Matrix identity_embeddings(const ShellConfig& shell, int dim) {
  const auto n = static_cast<std::size_t>(shell.size());
  Matrix e(n, static_cast<std::size_t>(dim));
  const double two_pi = 2.0 * constants::kPi;
  for (std::size_t id = 0; id < n; ++id) {
    const auto idx = SatelliteIndex::from_flat(shell, static_cast<int>(id));
    const double fp = static_cast<double>(idx.plane) / shell.num_planes;
    const double fs = static_cast<double>(idx.slot) / shell.sats_per_plane;
    // Columns cycle through sin/cos of plane then slot at rising harmonics.
    for (int c = 0; c < dim; ++c) {
      const int harmonic = c / 4 + 1;
      const double phase = two_pi * harmonic * ((c / 2) % 2 == 0 ? fp : fs);
      e(id, static_cast<std::size_t>(c)) = c % 2 == 0 ? std::sin(phase) : std::cos(phase);
    }
  }
  return e;
}

// Parameter layout: gcn_w{l}, gcn_b{l} for each layer, then read_w, read_b,
// koopman, dec1_w, dec1_b, dec2_w, dec2_b, identity.
void GkaeModel::allocate() {
  const auto& c = config_;
  params_.clear();
  for (int l = 0; l < c.gcn_layers; ++l) {
    const int in = l == 0 ? features::kCount : c.hidden;
    const int out = l == c.gcn_layers - 1 ? c.node_latent : c.hidden;
    params_.emplace_back("gcn_w" + std::to_string(l), Matrix(in, out));
    params_.emplace_back("gcn_b" + std::to_string(l), Matrix(1, out));
  }
  params_.emplace_back("read_w", Matrix(c.node_latent, c.embed_dim));
  params_.emplace_back("read_b", Matrix(1, c.embed_dim));
  params_.emplace_back("koopman", Matrix(c.embed_dim, c.embed_dim));
  params_.emplace_back("dec1_w", Matrix(c.embed_dim + c.identity_dim, c.hidden));
  params_.emplace_back("dec1_b", Matrix(1, c.hidden));
  params_.emplace_back("dec2_w", Matrix(c.hidden, features::kDynamicCount));
  params_.emplace_back("dec2_b", Matrix(1, features::kDynamicCount));
  params_.emplace_back("identity", Matrix(shell_.size(), c.identity_dim), false);
}

GkaeModel::GkaeModel(const GkaeConfig& config, const ShellConfig& shell, double buffer_B, double se_max)
    : config_(config), shell_(shell), buffer_B_(buffer_B), se_max_(se_max) {
  config_.validate();
  shell_.validate();
  allocate();
  Rng rng(derive_seed(config_.seed, 0x6B1E));
  for (auto& p : params_) {
    if (p.name == "identity") {
      p.value = identity_embeddings(shell_, config_.identity_dim);
    } else if (p.name == "koopman") {
      p.value = Matrix::identity(p.value.rows());
      for (double& v : p.value.data()) v += 0.01 * rng.normal();
    } else if (p.name.find("_w") != std::string::npos) {
      p.value = nn::xavier_uniform(p.value.rows(), p.value.cols(), rng);
    }
  }
}

std::vector<nn::Parameter*> GkaeModel::parameter_ptrs() {
  std::vector<nn::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

const nn::Parameter& GkaeModel::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + name);
}

nn::Parameter& GkaeModel::parameter(const std::string& name) {
  return const_cast<nn::Parameter&>(std::as_const(*this).parameter(name));
}

std::size_t GkaeModel::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

bool GkaeModel::operator==(const GkaeModel& other) const {
  if (!(config_ == other.config_ && shell_ == other.shell_ && buffer_B_ == other.buffer_B_ &&
        se_max_ == other.se_max_ && params_.size() == other.params_.size())) {
    return false;
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

namespace {

struct EncodeCache {
  const Matrix* adj = nullptr;
  std::vector<Matrix> h;  // h[0] = X, h[l + 1] = layer l output
  Matrix pooled;          // 1 x d_z
  Matrix z;               // 1 x m
};

struct DecodeCache {
  Matrix z;
  Matrix hidden;  // N x d_h, post-tanh
  Matrix out;     // N x 5
};

/// Rows [begin, begin + count) of m.
Matrix row_block(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(count, m.cols());
  std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()), count * m.cols(),
              out.data().begin());
  return out;
}

void add_row_block(Matrix& m, std::size_t begin, const Matrix& block) {
  for (std::size_t r = 0; r < block.rows(); ++r)
    for (std::size_t c = 0; c < block.cols(); ++c) m(begin + r, c) += block(r, c);
}

/// Forward/backward over a model's parameter vector. Backward passes need the
/// mutable constructor; they accumulate into Parameter::grad.
class Network {
 public:
  Network(const std::vector<nn::Parameter>& params, const GkaeConfig& cfg)
      : p_(params), layers_(static_cast<std::size_t>(cfg.gcn_layers)), m_(static_cast<std::size_t>(cfg.embed_dim)) {}
  Network(std::vector<nn::Parameter>& params, const GkaeConfig& cfg) : Network(std::as_const(params), cfg) {
    grads_ = &params;
  }

  const Matrix& w(std::size_t i) const { return p_[i].value; }
  Matrix& g(std::size_t i) {
    if (grads_ == nullptr) throw std::logic_error("Network: backward on a read-only network");
    return (*grads_)[i].grad;
  }

  std::size_t read_w() const { return 2 * layers_; }
  std::size_t read_b() const { return 2 * layers_ + 1; }
  std::size_t koopman() const { return 2 * layers_ + 2; }
  std::size_t dec1_w() const { return 2 * layers_ + 3; }
  std::size_t dec1_b() const { return 2 * layers_ + 4; }
  std::size_t dec2_w() const { return 2 * layers_ + 5; }
  std::size_t dec2_b() const { return 2 * layers_ + 6; }
  std::size_t identity() const { return 2 * layers_ + 7; }

  EncodeCache encode(const Matrix& adj, const Matrix& x) const {
    EncodeCache c;
    c.adj = &adj;
    c.h.reserve(layers_ + 1);
    c.h.push_back(x);
    for (std::size_t l = 0; l < layers_; ++l) {
      const auto act = l + 1 == layers_ ? Activation::linear : Activation::tanh;
      c.h.push_back(nn::gcn_forward(adj, c.h.back(), w(2 * l), w(2 * l + 1), act));
    }
    c.pooled = nn::mean_pool(c.h.back());
    c.z = nn::dense_forward(c.pooled, w(read_w()), w(read_b()), Activation::linear);
    return c;
  }

  void encode_backward(const EncodeCache& c, const Matrix& grad_z) {
    Matrix g_pooled =
        nn::dense_backward(c.pooled, w(read_w()), c.z, grad_z, Activation::linear, g(read_w()), g(read_b()));
    Matrix g_h = nn::mean_pool_backward(g_pooled, c.h.back().rows());
    for (std::size_t l = layers_; l-- > 0;) {
      const auto act = l + 1 == layers_ ? Activation::linear : Activation::tanh;
      g_h = nn::gcn_backward(*c.adj, c.h[l], w(2 * l), c.h[l + 1], g_h, act, g(2 * l), g(2 * l + 1));
    }
  }

  /// Identity part of the first decoder layer, E_id * W_dec1[m:, :]; fixed per parameter state.
  Matrix identity_projection() const {
    const Matrix& w1 = w(dec1_w());
    return nn::matmul(w(identity()), row_block(w1, m_, w1.rows() - m_));
  }

  DecodeCache decode(const Matrix& z, const Matrix& id_proj) const {
    DecodeCache c;
    c.z = z;
    // concat(z, E_v) W1 = z W1[:m] + E_v W1[m:]
    const Matrix zw = nn::matmul(z, row_block(w(dec1_w()), 0, m_));
    c.hidden = id_proj;
    nn::add_row_broadcast(c.hidden, zw);
    nn::add_row_broadcast(c.hidden, w(dec1_b()));
    nn::tanh_inplace(c.hidden);
    c.out = nn::dense_forward(c.hidden, w(dec2_w()), w(dec2_b()), Activation::linear);
    return c;
  }

  /// Returns dL/dz; accumulates decoder gradients.
  Matrix decode_backward(const DecodeCache& c, const Matrix& grad_out) {
    const Matrix g_hidden =
        nn::dense_backward(c.hidden, w(dec2_w()), c.out, grad_out, Activation::linear, g(dec2_w()), g(dec2_b()));
    Matrix g_pre = g_hidden;
    for (std::size_t i = 0; i < g_pre.size(); ++i) {
      const double y = c.hidden.data()[i];
      g_pre.data()[i] *= 1.0 - y * y;
    }
    const Matrix col = nn::column_sums(g_pre);  // d/d(zW1[:m] + b1)
    g(dec1_b()) += col;
    add_row_block(g(dec1_w()), 0, nn::matmul_tn(c.z, col));
    add_row_block(g(dec1_w()), m_, nn::matmul_tn(w(identity()), g_pre));
    return nn::matmul_nt(col, row_block(w(dec1_w()), 0, m_));
  }

  Matrix advance_once(const Matrix& z) const { return nn::matmul_nt(z, w(koopman())); }

  /// Backward of z' = z K^T: returns dz, accumulates dK.
  Matrix advance_backward(const Matrix& z, const Matrix& grad_next) {
    g(koopman()) += nn::matmul_tn(grad_next, z);
    return nn::matmul(grad_next, w(koopman()));
  }

 private:
  const std::vector<nn::Parameter>& p_;
  std::vector<nn::Parameter>* grads_ = nullptr;
  std::size_t layers_;
  std::size_t m_;
};

std::vector<bool> effective_mask(const GraphSnapshot& s) {
  return std::any_of(s.mask.begin(), s.mask.end(), [](bool b) { return b; }) ? s.mask : std::vector<bool>{};
}

}  // namespace

LatentState GkaeModel::encode(const GraphSnapshot& snap) const {
  if (snap.num_nodes() != num_nodes()) {
    throw std::invalid_argument("encode: snapshot has " + std::to_string(snap.num_nodes()) +
                                " nodes, model expects " + std::to_string(num_nodes()));
  }
  const Network net(params_, config_);
  const Matrix adj = normalized_adjacency(snap);
  return {net.encode(adj, snap.features).z, snap.t};
}

Matrix GkaeModel::advance(const Matrix& z, int steps) const {
  if (steps < 0) throw std::invalid_argument("advance: negative step count");
  Matrix out = z;
  for (int k = 0; k < steps; ++k) out = nn::matmul_nt(out, koopman());
  return out;
}

Matrix GkaeModel::decode(const Matrix& z) const {
  const Network net(params_, config_);
  return net.decode(z, net.identity_projection()).out;
}

std::vector<Matrix> GkaeModel::predict(const GraphSnapshot& snap, int horizon) const {
  if (horizon < 1) throw std::invalid_argument("predict: horizon must be >= 1");
  const Network net(params_, config_);
  const Matrix id_proj = net.identity_projection();
  Matrix z = encode(snap).z;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) {
    z = net.advance_once(z);
    out.push_back(net.decode(z, id_proj).out);
  }
  return out;
}

LossBreakdown GkaeModel::loss(std::span<const GraphSnapshot> window, bool compute_grad) {
  std::vector<Matrix> adj, targets;
  adj.reserve(window.size());
  targets.reserve(window.size());
  for (const auto& s : window) {
    adj.push_back(normalized_adjacency(s));
    targets.push_back(s.dynamic_channels());
  }
  return loss(window, adj, targets, compute_grad);
}

LossBreakdown GkaeModel::loss(std::span<const GraphSnapshot> window, std::span<const Matrix> adjacencies,
                              std::span<const Matrix> targets, bool compute_grad) {
  const bool masked = config_.masked_training;
  const std::size_t horizon = masked ? 0 : static_cast<std::size_t>(config_.train_horizon);
  if (window.size() < horizon + 1) throw std::invalid_argument("loss: window shorter than train_horizon + 1");
  if (adjacencies.size() < horizon + 1 || targets.size() < horizon + 1) {
    throw std::invalid_argument("loss: missing adjacencies or targets");
  }
  const double alpha = config_.alpha;
  const double beta = masked ? 0.0 : config_.beta;
  const double gamma = masked ? 0.0 : config_.gamma;

  Network net(params_, config_);
  const Matrix id_proj = net.identity_projection();

  std::vector<EncodeCache> enc;
  enc.reserve(horizon + 1);
  for (std::size_t j = 0; j <= horizon; ++j) enc.push_back(net.encode(adjacencies[j], window[j].features));

  LossBreakdown out;
  std::vector<Matrix> grad_z(horizon + 1);
  for (auto& gz : grad_z) gz = Matrix(1, enc[0].z.cols());

  // Reconstruction.
  std::vector<std::vector<bool>> masks(horizon + 1);
  for (std::size_t j = 0; j <= horizon; ++j) {
    masks[j] = masked ? effective_mask(window[j]) : std::vector<bool>{};
    const DecodeCache dc = net.decode(enc[j].z, id_proj);
    out.recon += nn::mse(dc.out, targets[j], masks[j]).mse;
    if (compute_grad && alpha != 0.0) {
      grad_z[j] += net.decode_backward(dc, nn::mse_backward(dc.out, targets[j], masks[j], alpha));
    }
  }

  // Multi-step prediction and latent linearity along the Koopman rollout.
  if (horizon > 0) {
    std::vector<Matrix> roll(horizon + 1);
    roll[0] = enc[0].z;
    std::vector<DecodeCache> dcs(horizon + 1);
    for (std::size_t k = 1; k <= horizon; ++k) {
      roll[k] = net.advance_once(roll[k - 1]);
      dcs[k] = net.decode(roll[k], id_proj);
      out.pred += nn::mse(dcs[k].out, targets[k]).mse;
      out.lin += nn::mse(roll[k], enc[k].z).mse;
    }
    if (compute_grad && (beta != 0.0 || gamma != 0.0)) {
      Matrix carry(1, roll[0].cols());
      for (std::size_t k = horizon; k >= 1; --k) {
        Matrix g_roll = carry;
        if (beta != 0.0) g_roll += net.decode_backward(dcs[k], nn::mse_backward(dcs[k].out, targets[k], {}, beta));
        if (gamma != 0.0) {
          const Matrix g_lin = nn::mse_backward(roll[k], enc[k].z, {}, gamma);
          g_roll += g_lin;
          grad_z[k] -= g_lin;
        }
        carry = net.advance_backward(roll[k - 1], g_roll);
      }
      grad_z[0] += carry;
    }
  }

  if (compute_grad) {
    for (std::size_t j = 0; j <= horizon; ++j) net.encode_backward(enc[j], grad_z[j]);
  }
  out.total = alpha * out.recon + beta * out.pred + gamma * out.lin;
  return out;
}

TrainResult train(const Dataset& dataset, const GkaeConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto train_split = dataset.train();
  const std::size_t span = config.masked_training ? 1 : static_cast<std::size_t>(config.train_horizon) + 1;
  if (train_split.size() < static_cast<std::size_t>(config.train_horizon) + 2) {
    throw ConfigError("gkae.train_horizon", "train split shorter than train_horizon + 2 snapshots");
  }

  TrainResult result{GkaeModel(config, dataset.shell, dataset.buffer_B, dataset.se_max), {}};
  GkaeModel& model = result.model;

  std::vector<Matrix> adj, targets;
  adj.reserve(train_split.size());
  targets.reserve(train_split.size());
  for (const auto& s : train_split) {
    adj.push_back(normalized_adjacency(s));
    targets.push_back(s.dynamic_channels());
  }

  nn::Adam adam(config.lr);
  auto ptrs = model.parameter_ptrs();
  for (auto* p : ptrs) p->zero_grad();
  const std::size_t windows = train_split.size() - span + 1;
  Rng mask_rng(derive_seed(config.seed, 0x3A5C));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLoss acc;
    for (std::size_t t = 0; t < windows; ++t) {
      LossBreakdown l;
      if (config.masked_training) {
        const GraphSnapshot masked = mask_features(train_split[t], config.mask_rate, mask_rng.next_u64());
        const Matrix a = normalized_adjacency(masked);
        l = model.loss(std::span(&masked, 1), std::span(&a, 1), std::span(&targets[t], 1), true);
      } else {
        l = model.loss(train_split.subspan(t, span), std::span(adj).subspan(t, span),
                       std::span(targets).subspan(t, span), true);
      }
      if (!std::isfinite(l.total)) throw DivergenceError(epoch, "non-finite training loss");
      adam.step(ptrs);
      acc.total += l.total;
      acc.recon += l.recon;
      acc.pred += l.pred;
      acc.lin += l.lin;
    }
    const double inv = 1.0 / static_cast<double>(windows);
    acc.total *= inv, acc.recon *= inv, acc.pred *= inv, acc.lin *= inv;
    result.report.epochs.push_back(acc);
    for (const auto& p : model.parameters()) {
      if (!p.value.all_finite()) throw DivergenceError(epoch, "non-finite parameter " + p.name);
    }
  }

  result.report.spectral_radius = spectral_radius(model.koopman()).radius;
  result.report.parameter_count = model.trainable_parameter_count();
  result.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> mat_vec(const Matrix& k, const std::vector<double>& x) {
  std::vector<double> y(k.rows(), 0.0);
  for (std::size_t i = 0; i < k.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k.cols(); ++j) s += k(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct RunEstimate {
  double value = 0.0;
  bool converged = false;
};

/// One power-iteration run. Tracks a single dominant real eigenvalue via the
/// norm ratio, and a dominant complex pair via the two-term recurrence
/// x_{k+2} ~ a x_{k+1} + b x_k, whose roots have modulus sqrt(-b).
RunEstimate power_run(const Matrix& k, Rng& rng, int max_iter, double tol) {
  const std::size_t n = k.rows();
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  double nx = norm2(x);
  for (double& v : x) v /= nx;

  double prev = -1.0;
  int stable = 0;
  double best = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> y1 = mat_vec(k, x);
    const double n1 = norm2(y1);
    if (n1 == 0.0) return {0.0, true};
    std::vector<double> y2 = mat_vec(k, y1);

    // Least squares for (a, b) in y2 = a y1 + b x.
    const double g11 = dot(y1, y1), g12 = dot(y1, x), g22 = dot(x, x);
    const double r1 = dot(y2, y1), r2 = dot(y2, x);
    const double det = g11 * g22 - g12 * g12;
    double estimate = n1;
    if (det > 1e-10 * g11 * g22) {
      const double a = (r1 * g22 - r2 * g12) / det;
      const double b = (g11 * r2 - g12 * r1) / det;
      const double disc = a * a + 4.0 * b;
      if (disc < 0.0) {
        estimate = std::sqrt(-b);
      } else {
        const double s = std::sqrt(disc);
        estimate = std::max(std::abs((a + s) / 2.0), std::abs((a - s) / 2.0));
      }
    }
    best = estimate;
    if (prev >= 0.0 && std::abs(estimate - prev) <= tol * std::max(1.0, estimate)) {
      if (++stable >= 3) return {estimate, true};
    } else {
      stable = 0;
    }
    prev = estimate;
    for (std::size_t i = 0; i < n; ++i) x[i] = y1[i] / n1;
  }
  return {best, false};
}

}  // namespace

SpectralEstimate spectral_radius(const Matrix& k, std::uint64_t seed) {
  if (k.rows() != k.cols() || k.rows() == 0) throw std::invalid_argument("spectral_radius: K must be square");
  constexpr int kRestarts = 8;
  constexpr int kMaxIter = 500;
  constexpr double kTol = 1e-10;
  Rng rng(seed);
  SpectralEstimate out;

  // sigma_max from power iteration on K^T K.
  const Matrix ktk = nn::matmul_tn(k, k);
  std::vector<double> x(k.rows());
  for (double& v : x) v = rng.normal();
  double lambda = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    const double nx = norm2(x);
    if (nx == 0.0) break;
    for (double& v : x) v /= nx;
    auto y = mat_vec(ktk, x);
    const double next = dot(x, y);
    x = std::move(y);
    if (std::abs(next - lambda) <= kTol * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  out.sigma_max = std::sqrt(std::max(0.0, lambda));

  double best_converged = -1.0, best_any = 0.0;
  for (int r = 0; r < kRestarts; ++r) {
    const RunEstimate e = power_run(k, rng, kMaxIter, kTol);
    best_any = std::max(best_any, e.value);
    if (e.converged) best_converged = std::max(best_converged, e.value);
  }
  if (best_converged >= 0.0) {
    out.radius = best_converged;
  } else {
    out.radius = best_any;
    out.approximate = true;
  }
  return out;
}

void write_model(const GkaeModel& model, std::ostream& os) {
  detail::Json params = detail::Json::object();
  for (const auto& p : model.parameters()) params[p.name] = detail::to_json(p.value);
  detail::Json doc{{"schema", 1},
                   {"kind", "gkae"},
                   {"config", detail::to_json(model.config())},
                   {"shell", detail::to_json(model.shell())},
                   {"normalization", {{"buffer_B", model.buffer_B()}, {"se_max", model.se_max()}}},
                   {"parameters", params}};
  detail::write_json(os, doc);
  os << '\n';
}

GkaeModel parse_model(std::istream& is) {
  detail::Json doc;
  try {
    doc = detail::Json::parse(is);
  } catch (const detail::Json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (detail::get_int(doc, "schema", "checkpoint") != 1) throw FormatError("checkpoint: unsupported schema");
    if (detail::get_string(doc, "kind", "checkpoint") != "gkae") throw FormatError("checkpoint: kind is not gkae");
    GkaeModel m;
    m.config_ = detail::gkae_from_json(detail::require_field(doc, "config", "checkpoint"), "checkpoint.config", true);
    m.shell_ = detail::shell_from_json(detail::require_field(doc, "shell", "checkpoint"), "checkpoint.shell", true);
    const auto& norm = detail::require_field(doc, "normalization", "checkpoint");
    m.buffer_B_ = detail::get_double(norm, "buffer_B", "checkpoint.normalization");
    m.se_max_ = detail::get_double(norm, "se_max", "checkpoint.normalization");
    m.config_.validate();
    m.shell_.validate();
    m.allocate();
    const auto& params = detail::require_field(doc, "parameters", "checkpoint");
    for (auto& p : m.params_) {
      const std::string field = "checkpoint.parameters." + p.name;
      Matrix v = detail::matrix_from_json(detail::require_field(params, p.name, "checkpoint.parameters"), field);
      if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
        throw FormatError(field + ": expected shape " + std::to_string(p.value.rows()) + "x" +
                          std::to_string(p.value.cols()) + ", got " + std::to_string(v.rows()) + "x" +
                          std::to_string(v.cols()));
      }
      p.value = std::move(v);
      p.grad = Matrix(p.value.rows(), p.value.cols());
    }
    return m;
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

void save_model(const GkaeModel& model, const std::filesystem::path& path) {
  std::ostringstream os;
  write_model(model, os);
  detail::atomic_write(path, os.str());
}

GkaeModel load_model(const std::filesystem::path& path) {
  std::istringstream is(detail::read_file(path));
  return parse_model(is);
}

}  // namespace shellkoop
