#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "shellkoop/gkae.hpp"
#include "shellkoop/nn.hpp"
#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

namespace shellkoop {

struct DenseAeConfig {
  int hidden = 64;     // d_h
  int embed_dim = 32;  // m
  double lr = 1e-3;
  int epochs = 300;
  bool masked_training = false;
  double mask_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const DenseAeConfig&) const = default;
};

/// Feed-forward autoencoder over the flattened feature matrix:
/// N*d_in -> d_h (tanh) -> m -> d_h (tanh) -> N*5. Tied to one N.
class DenseAeModel {
 public:
  DenseAeModel() = default;
  DenseAeModel(const DenseAeConfig& config, const ShellConfig& shell, double buffer_B,
               double se_max = features::kSeMax);

  const DenseAeConfig& config() const noexcept { return config_; }
  const ShellConfig& shell() const noexcept { return shell_; }
  double buffer_B() const noexcept { return buffer_B_; }
  double se_max() const noexcept { return se_max_; }

  std::vector<nn::Parameter>& parameters() noexcept { return params_; }
  const std::vector<nn::Parameter>& parameters() const noexcept { return params_; }
  std::vector<nn::Parameter*> parameter_ptrs();

  /// N x 5 reconstruction of the dynamic channels.
  nn::Matrix reconstruct(const GraphSnapshot& snap) const;
  /// Reconstruction mse against `target` (masked rows only when the snapshot
  /// carries a mask and masked training is on). Accumulates gradients.
  double loss(const GraphSnapshot& snap, const nn::Matrix& target, bool compute_grad);

  std::size_t trainable_parameter_count() const;
  bool operator==(const DenseAeModel&) const;

 private:
  friend DenseAeModel parse_dense_ae(std::istream& is);
  void allocate();

  DenseAeConfig config_;
  ShellConfig shell_;
  double buffer_B_ = 1000.0;
  double se_max_ = features::kSeMax;
  std::vector<nn::Parameter> params_;
};

struct DenseAeTrainResult {
  DenseAeModel model;
  TrainReport report;  // recon column only
};

/// Adam over every train snapshot in order, one step per snapshot.
DenseAeTrainResult train_dense_ae(const Dataset& dataset, const DenseAeConfig& config);

std::size_t param_count(const GkaeModel& model);
std::size_t param_count(const DenseAeModel& model);

/// The snapshot's dynamic channels repeated `horizon` times.
std::vector<nn::Matrix> persistence_forecast(const GraphSnapshot& snap, int horizon);

/// W = argmin sum ||y_t - x_t W||^2 + lambda ||W||_F^2 via Cholesky of X^T X + lambda I.
/// X and Y hold one sample per row.
nn::Matrix ridge_fit(const nn::Matrix& x, const nn::Matrix& y, double lambda);
/// ||(X^T X + lambda I) W - X^T Y||_F
double ridge_normal_residual(const nn::Matrix& x, const nn::Matrix& y, const nn::Matrix& w, double lambda);

/// One-step linear map on the flattened N x 5 dynamic channels, iterated.
class RidgeForecaster {
 public:
  RidgeForecaster() = default;
  RidgeForecaster(const ShellConfig& shell, double lambda, nn::Matrix weights)
      : shell_(shell), lambda_(lambda), weights_(std::move(weights)) {}

  /// Fits on consecutive pairs of the train split. Requires lambda > 0.
  static RidgeForecaster train(const Dataset& dataset, double lambda);

  std::vector<nn::Matrix> forecast(const GraphSnapshot& snap, int horizon) const;

  const ShellConfig& shell() const noexcept { return shell_; }
  double lambda() const noexcept { return lambda_; }
  const nn::Matrix& weights() const noexcept { return weights_; }

  bool operator==(const RidgeForecaster&) const = default;

 private:
  ShellConfig shell_;
  double lambda_ = 0.0;
  nn::Matrix weights_;
};

/// Flattens an N x C matrix row-major into 1 x (N*C), and back.
nn::Matrix flatten_row(const nn::Matrix& m);
nn::Matrix unflatten_row(const nn::Matrix& row, std::size_t rows, std::size_t cols);

void write_dense_ae(const DenseAeModel& model, std::ostream& os);
DenseAeModel parse_dense_ae(std::istream& is);
void save_dense_ae(const DenseAeModel& model, const std::filesystem::path& path);
DenseAeModel load_dense_ae(const std::filesystem::path& path);

void write_ridge(const RidgeForecaster& model, std::ostream& os);
RidgeForecaster parse_ridge(std::istream& is);
void save_ridge(const RidgeForecaster& model, const std::filesystem::path& path);
RidgeForecaster load_ridge(const std::filesystem::path& path);

/// "gkae", "dense_ae" or "ridge", read from a checkpoint's kind tag.
std::string checkpoint_kind(const std::filesystem::path& path);

}  // namespace shellkoop
