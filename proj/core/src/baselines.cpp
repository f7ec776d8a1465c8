#include "shellkoop/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json_io.hpp"

namespace shellkoop {

using nn::Activation;
using nn::Matrix;

void DenseAeConfig::validate() const {
  if (hidden < 1) throw ConfigError("baseline.hidden", "must be >= 1");
  if (embed_dim < 1) throw ConfigError("baseline.embed_dim", "must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("baseline.lr", "must be > 0");
  if (epochs < 0) throw ConfigError("baseline.epochs", "must be >= 0");
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) throw ConfigError("baseline.mask_rate", "must lie in [0, 1)");
  if (masked_training && mask_rate <= 0.0) throw ConfigError("baseline.mask_rate", "masked training needs a rate > 0");
}

Matrix flatten_row(const Matrix& m) { return Matrix(1, m.size(), m.data()); }

Matrix unflatten_row(const Matrix& row, std::size_t rows, std::size_t cols) {
  if (row.rows() != 1 || row.cols() != rows * cols) throw std::invalid_argument("unflatten_row: size mismatch");
  return Matrix(rows, cols, row.data());
}

void DenseAeModel::allocate() {
  const auto n = static_cast<std::size_t>(shell_.size());
  const auto h = static_cast<std::size_t>(config_.hidden);
  const auto m = static_cast<std::size_t>(config_.embed_dim);
  params_.clear();
  params_.emplace_back("enc1_w", Matrix(n * features::kCount, h));
  params_.emplace_back("enc1_b", Matrix(1, h));
  params_.emplace_back("enc2_w", Matrix(h, m));
  params_.emplace_back("enc2_b", Matrix(1, m));
  params_.emplace_back("dec1_w", Matrix(m, h));
  params_.emplace_back("dec1_b", Matrix(1, h));
  params_.emplace_back("dec2_w", Matrix(h, n * features::kDynamicCount));
  params_.emplace_back("dec2_b", Matrix(1, n * features::kDynamicCount));
}

DenseAeModel::DenseAeModel(const DenseAeConfig& config, const ShellConfig& shell, double buffer_B, double se_max)
    : config_(config), shell_(shell), buffer_B_(buffer_B), se_max_(se_max) {
  config_.validate();
  shell_.validate();
  allocate();
  Rng rng(derive_seed(config_.seed, 0xDE45));
  for (auto& p : params_) {
    if (p.name.ends_with("_w")) p.value = nn::xavier_uniform(p.value.rows(), p.value.cols(), rng);
  }
}

std::vector<nn::Parameter*> DenseAeModel::parameter_ptrs() {
  std::vector<nn::Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t DenseAeModel::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool DenseAeModel::operator==(const DenseAeModel& other) const {
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

struct DenseForward {
  Matrix in, h1, code, h2, out;
};

DenseForward dense_ae_forward(const std::vector<nn::Parameter>& p, const GraphSnapshot& snap) {
  DenseForward f;
  f.in = flatten_row(snap.features);
  f.h1 = nn::dense_forward(f.in, p[0].value, p[1].value, Activation::tanh);
  f.code = nn::dense_forward(f.h1, p[2].value, p[3].value, Activation::linear);
  f.h2 = nn::dense_forward(f.code, p[4].value, p[5].value, Activation::tanh);
  f.out = nn::dense_forward(f.h2, p[6].value, p[7].value, Activation::linear);
  return f;
}

void check_nodes(const ShellConfig& shell, const GraphSnapshot& snap) {
  if (snap.num_nodes() != shell.size()) {
    throw std::invalid_argument("dense AE: snapshot has " + std::to_string(snap.num_nodes()) +
                                " nodes, model is fixed to " + std::to_string(shell.size()));
  }
}

}  // namespace

Matrix DenseAeModel::reconstruct(const GraphSnapshot& snap) const {
  check_nodes(shell_, snap);
  return unflatten_row(dense_ae_forward(params_, snap).out, snap.features.rows(), features::kDynamicCount);
}

double DenseAeModel::loss(const GraphSnapshot& snap, const Matrix& target, bool compute_grad) {
  check_nodes(shell_, snap);
  const DenseForward f = dense_ae_forward(params_, snap);
  const std::size_t n = snap.features.rows();
  const Matrix pred = unflatten_row(f.out, n, features::kDynamicCount);
  std::vector<bool> rows;
  if (config_.masked_training && std::any_of(snap.mask.begin(), snap.mask.end(), [](bool b) { return b; })) {
    rows = snap.mask;
  }
  const double value = nn::mse(pred, target, rows).mse;
  if (compute_grad) {
    auto& p = params_;
    const Matrix g_out = flatten_row(nn::mse_backward(pred, target, rows));
    Matrix g = nn::dense_backward(f.h2, p[6].value, f.out, g_out, Activation::linear, p[6].grad, p[7].grad);
    g = nn::dense_backward(f.code, p[4].value, f.h2, g, Activation::tanh, p[4].grad, p[5].grad);
    g = nn::dense_backward(f.h1, p[2].value, f.code, g, Activation::linear, p[2].grad, p[3].grad);
    nn::dense_backward(f.in, p[0].value, f.h1, g, Activation::tanh, p[0].grad, p[1].grad);
  }
  return value;
}

DenseAeTrainResult train_dense_ae(const Dataset& dataset, const DenseAeConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto train_split = dataset.train();
  if (train_split.size() < 2) throw ConfigError("baseline", "train split needs >= 2 snapshots");

  DenseAeTrainResult result{DenseAeModel(config, dataset.shell, dataset.buffer_B, dataset.se_max), {}};
  auto& model = result.model;
  std::vector<Matrix> targets;
  for (const auto& s : train_split) targets.push_back(s.dynamic_channels());

  nn::Adam adam(config.lr);
  auto ptrs = model.parameter_ptrs();
  for (auto* p : ptrs) p->zero_grad();
  Rng mask_rng(derive_seed(config.seed, 0x3A5C));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double acc = 0.0;
    for (std::size_t t = 0; t < train_split.size(); ++t) {
      double l;
      if (config.masked_training) {
        const GraphSnapshot masked = mask_features(train_split[t], config.mask_rate, mask_rng.next_u64());
        l = model.loss(masked, targets[t], true);
      } else {
        l = model.loss(train_split[t], targets[t], true);
      }
      if (!std::isfinite(l)) throw DivergenceError(epoch, "non-finite dense AE loss");
      adam.step(ptrs);
      acc += l;
    }
    acc /= static_cast<double>(train_split.size());
    result.report.epochs.push_back({acc, acc, 0.0, 0.0});
  }
  result.report.parameter_count = model.trainable_parameter_count();
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::size_t param_count(const GkaeModel& model) { return model.trainable_parameter_count(); }
std::size_t param_count(const DenseAeModel& model) { return model.trainable_parameter_count(); }

std::vector<Matrix> persistence_forecast(const GraphSnapshot& snap, int horizon) {
  if (horizon < 1) throw std::invalid_argument("persistence_forecast: horizon must be >= 1");
  return std::vector<Matrix>(static_cast<std::size_t>(horizon), snap.dynamic_channels());
}

namespace {

using EigenMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenMat> view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

}  // namespace

Matrix ridge_fit(const Matrix& x, const Matrix& y, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("baseline.ridge_lambda", "must be > 0 (X^T X may be singular)");
  if (x.rows() != y.rows() || x.rows() == 0) throw std::invalid_argument("ridge_fit: sample counts differ");
  const auto xv = view(x);
  const auto yv = view(y);
  EigenMat gram = xv.transpose() * xv;
  gram.diagonal().array() += lambda;
  const Eigen::LLT<EigenMat> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("ridge_fit: Cholesky failed");
  const EigenMat w = llt.solve(EigenMat(xv.transpose() * yv));
  Matrix out(static_cast<std::size_t>(w.rows()), static_cast<std::size_t>(w.cols()));
  Eigen::Map<EigenMat>(out.data().data(), w.rows(), w.cols()) = w;
  return out;
}

double ridge_normal_residual(const Matrix& x, const Matrix& y, const Matrix& w, double lambda) {
  const auto xv = view(x);
  EigenMat gram = xv.transpose() * xv;
  gram.diagonal().array() += lambda;
  return (gram * view(w) - xv.transpose() * view(y)).norm();
}

RidgeForecaster RidgeForecaster::train(const Dataset& dataset, double lambda) {
  const auto split = dataset.train();
  if (split.size() < 2) throw ConfigError("baseline", "ridge needs >= 2 train snapshots");
  const std::size_t d = static_cast<std::size_t>(dataset.shell.size()) * features::kDynamicCount;
  Matrix x(split.size() - 1, d), y(split.size() - 1, d);
  for (std::size_t t = 0; t + 1 < split.size(); ++t) {
    const Matrix a = split[t].dynamic_channels();
    const Matrix b = split[t + 1].dynamic_channels();
    std::copy(a.data().begin(), a.data().end(), x.row_span(t).begin());
    std::copy(b.data().begin(), b.data().end(), y.row_span(t).begin());
  }
  return {dataset.shell, lambda, ridge_fit(x, y, lambda)};
}

std::vector<Matrix> RidgeForecaster::forecast(const GraphSnapshot& snap, int horizon) const {
  if (horizon < 1) throw std::invalid_argument("ridge forecast: horizon must be >= 1");
  if (snap.num_nodes() != shell_.size()) throw std::invalid_argument("ridge forecast: node count mismatch");
  std::vector<Matrix> out;
  Matrix x = flatten_row(snap.dynamic_channels());
  for (int k = 0; k < horizon; ++k) {
    x = nn::matmul(x, weights_);
    out.push_back(unflatten_row(x, snap.features.rows(), features::kDynamicCount));
  }
  return out;
}

namespace {

detail::Json params_json(const std::vector<nn::Parameter>& params) {
  detail::Json j = detail::Json::object();
  for (const auto& p : params) j[p.name] = detail::to_json(p.value);
  return j;
}

detail::Json dense_config_json(const DenseAeConfig& c) {
  return detail::Json{{"hidden", c.hidden},
                      {"embed_dim", c.embed_dim},
                      {"lr", c.lr},
                      {"epochs", c.epochs},
                      {"masked_training", c.masked_training},
                      {"mask_rate", c.mask_rate},
                      {"seed", c.seed}};
}

detail::Json parse_document(std::istream& is, const std::string& kind) {
  detail::Json doc;
  try {
    doc = detail::Json::parse(is);
  } catch (const detail::Json::exception& e) {
    throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (detail::get_int(doc, "schema", "checkpoint") != 1) throw FormatError("checkpoint: unsupported schema");
    if (detail::get_string(doc, "kind", "checkpoint") != kind) throw FormatError("checkpoint: kind is not " + kind);
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  return doc;
}

}  // namespace

void write_dense_ae(const DenseAeModel& model, std::ostream& os) {
  detail::Json doc{{"schema", 1},
                   {"kind", "dense_ae"},
                   {"config", dense_config_json(model.config())},
                   {"shell", detail::to_json(model.shell())},
                   {"normalization", {{"buffer_B", model.buffer_B()}, {"se_max", model.se_max()}}},
                   {"parameters", params_json(model.parameters())}};
  detail::write_json(os, doc);
  os << '\n';
}

DenseAeModel parse_dense_ae(std::istream& is) {
  const auto doc = parse_document(is, "dense_ae");
  try {
    DenseAeModel m;
    const auto& c = detail::require_field(doc, "config", "checkpoint");
    detail::reject_unknown_keys(c, {"hidden", "embed_dim", "lr", "epochs", "masked_training", "mask_rate", "seed"},
                                "checkpoint.config");
    m.config_.hidden = static_cast<int>(detail::get_int(c, "hidden", "checkpoint.config"));
    m.config_.embed_dim = static_cast<int>(detail::get_int(c, "embed_dim", "checkpoint.config"));
    m.config_.lr = detail::get_double(c, "lr", "checkpoint.config");
    m.config_.epochs = static_cast<int>(detail::get_int(c, "epochs", "checkpoint.config"));
    m.config_.masked_training = detail::get_bool(c, "masked_training", "checkpoint.config");
    m.config_.mask_rate = detail::get_double(c, "mask_rate", "checkpoint.config");
    m.config_.seed = static_cast<std::uint64_t>(detail::get_int(c, "seed", "checkpoint.config"));
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
      if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) throw FormatError(field + ": shape mismatch");
      p.value = std::move(v);
      p.grad = Matrix(p.value.rows(), p.value.cols());
    }
    return m;
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

void save_dense_ae(const DenseAeModel& model, const std::filesystem::path& path) {
  std::ostringstream os;
  write_dense_ae(model, os);
  detail::atomic_write(path, os.str());
}

DenseAeModel load_dense_ae(const std::filesystem::path& path) {
  std::istringstream is(detail::read_file(path));
  return parse_dense_ae(is);
}

void write_ridge(const RidgeForecaster& model, std::ostream& os) {
  detail::Json doc{{"schema", 1},
                   {"kind", "ridge"},
                   {"lambda", model.lambda()},
                   {"shell", detail::to_json(model.shell())},
                   {"parameters", {{"weights", detail::to_json(model.weights())}}}};
  detail::write_json(os, doc);
  os << '\n';
}

RidgeForecaster parse_ridge(std::istream& is) {
  const auto doc = parse_document(is, "ridge");
  try {
    const double lambda = detail::get_double(doc, "lambda", "checkpoint");
    const ShellConfig shell =
        detail::shell_from_json(detail::require_field(doc, "shell", "checkpoint"), "checkpoint.shell", true);
    const auto& params = detail::require_field(doc, "parameters", "checkpoint");
    Matrix w = detail::matrix_from_json(detail::require_field(params, "weights", "checkpoint.parameters"),
                                        "checkpoint.parameters.weights");
    const auto d = static_cast<std::size_t>(shell.size()) * features::kDynamicCount;
    if (w.rows() != d || w.cols() != d) throw FormatError("checkpoint.parameters.weights: shape mismatch");
    return {shell, lambda, std::move(w)};
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

void save_ridge(const RidgeForecaster& model, const std::filesystem::path& path) {
  std::ostringstream os;
  write_ridge(model, os);
  detail::atomic_write(path, os.str());
}

RidgeForecaster load_ridge(const std::filesystem::path& path) {
  std::istringstream is(detail::read_file(path));
  return parse_ridge(is);
}

std::string checkpoint_kind(const std::filesystem::path& path) {
  detail::Json doc;
  try {
    doc = detail::Json::parse(detail::read_file(path));
    return doc.at("kind").get<std::string>();
  } catch (const detail::Json::exception& e) {
    throw FormatError(path.string() + ": cannot read checkpoint kind: " + e.what());
  }
}

}  // namespace shellkoop
