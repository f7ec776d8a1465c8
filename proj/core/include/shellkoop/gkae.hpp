#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "shellkoop/nn.hpp"
#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

namespace shellkoop {

struct GkaeConfig {
  int gcn_layers = 2;
  int hidden = 16;        // d_h, GCN and decoder width
  int node_latent = 4;    // d_z
  int embed_dim = 32;     // m, graph embedding and Koopman size
  int identity_dim = 8;   // d_e, frozen node identity table width
  int train_horizon = 5;  // K_h
  int eval_horizon = 20;
  double alpha = 1.0;     // reconstruction weight
  double beta = 1.0;      // prediction weight
  double gamma = 0.3;     // latent linearity weight
  double lr = 1e-3;
  int epochs = 300;
  /// Masked-reconstruction training: single-snapshot windows, a fresh mask
  /// per window at this rate, loss on masked rows only, beta = gamma = 0.
  bool masked_training = false;
  double mask_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const GkaeConfig&) const = default;
};

/// Graph embedding at a timestamp.
struct LatentState {
  nn::Matrix z;  // 1 x m
  double t = 0.0;
};

struct EpochLoss {
  double total = 0.0;
  double recon = 0.0;
  double pred = 0.0;
  double lin = 0.0;
};

struct TrainReport {
  std::vector<EpochLoss> epochs;
  double spectral_radius = 0.0;
  double wall_time_s = 0.0;
  std::size_t parameter_count = 0;

  /// Header "epoch,total,recon,pred,lin", one row per epoch.
  void write_csv(std::ostream& os) const;
};

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double pred = 0.0;
  double lin = 0.0;
};

struct SpectralEstimate {
  double radius = 0.0;     // largest |lambda| estimate
  double sigma_max = 0.0;  // largest singular value
  bool approximate = false;
};

/// Graph Koopman autoencoder: GCN encoder -> mean-pool readout -> m-dim
/// graph embedding, linear Koopman advance, identity-conditioned decoder.
class GkaeModel {
 public:
  GkaeModel() = default;
  /// Fresh initialization: Xavier weights, zero biases, K = I + N(0, 0.01^2).
  GkaeModel(const GkaeConfig& config, const ShellConfig& shell, double buffer_B, double se_max = features::kSeMax);

  const GkaeConfig& config() const noexcept { return config_; }
  const ShellConfig& shell() const noexcept { return shell_; }
  double buffer_B() const noexcept { return buffer_B_; }
  double se_max() const noexcept { return se_max_; }
  int num_nodes() const noexcept { return shell_.size(); }

  /// All tensors in checkpoint order; the identity table is last and frozen.
  std::vector<nn::Parameter>& parameters() noexcept { return params_; }
  const std::vector<nn::Parameter>& parameters() const noexcept { return params_; }
  std::vector<nn::Parameter*> parameter_ptrs();
  const nn::Parameter& parameter(const std::string& name) const;
  nn::Parameter& parameter(const std::string& name);

  const nn::Matrix& koopman() const { return params_[koopman_index()].value; }
  nn::Matrix& koopman() { return params_[koopman_index()].value; }
  const nn::Matrix& identity_table() const { return params_.back().value; }

  LatentState encode(const GraphSnapshot& snap) const;
  /// z' = z (K^T)^k by k successive products.
  nn::Matrix advance(const nn::Matrix& z, int steps) const;
  /// N x 5 dynamic channels [queue, se_1..se_4], normalized units.
  nn::Matrix decode(const nn::Matrix& z) const;
  /// decode(advance(encode(snap), k)) for k = 1..horizon.
  std::vector<nn::Matrix> predict(const GraphSnapshot& snap, int horizon) const;

  /// Loss and (optionally) gradients over snapshots x_t..x_{t+K_h}. The
  /// gradients accumulate into parameters(). In masked mode the window is a
  /// single (already masked) snapshot scored against `targets`.
  LossBreakdown loss(std::span<const GraphSnapshot> window, bool compute_grad);
  /// Same, with precomputed adjacencies and explicit targets (N x 5 each).
  LossBreakdown loss(std::span<const GraphSnapshot> window, std::span<const nn::Matrix> adjacencies,
                     std::span<const nn::Matrix> targets, bool compute_grad);

  std::size_t trainable_parameter_count() const;

  bool operator==(const GkaeModel&) const;

 private:
  friend GkaeModel parse_model(std::istream& is);

  std::size_t koopman_index() const { return static_cast<std::size_t>(2 * config_.gcn_layers + 2); }
  void allocate();

  GkaeConfig config_;
  ShellConfig shell_;
  double buffer_B_ = 1000.0;
  double se_max_ = features::kSeMax;
  std::vector<nn::Parameter> params_;
};

/// Sinusoidal encodings of (p / P, s / Q), N x dim.
nn::Matrix identity_embeddings(const ShellConfig& shell, int dim);

struct TrainResult {
  GkaeModel model;
  TrainReport report;
};
/// Trains on the dataset's train split with Adam over stride-1 windows.
/// Throws DivergenceError carrying the epoch on a non-finite loss.
TrainResult train(const Dataset& dataset, const GkaeConfig& config);

/// Power iteration with 8 random restarts (500 iterations, tol 1e-10).
SpectralEstimate spectral_radius(const nn::Matrix& k, std::uint64_t seed = 11);

void save_model(const GkaeModel& model, const std::filesystem::path& path);
GkaeModel load_model(const std::filesystem::path& path);
void write_model(const GkaeModel& model, std::ostream& os);
GkaeModel parse_model(std::istream& is);

}  // namespace shellkoop
