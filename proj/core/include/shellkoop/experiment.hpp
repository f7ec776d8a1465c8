#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shellkoop/baselines.hpp"
#include "shellkoop/controller.hpp"
#include "shellkoop/gkae.hpp"
#include "shellkoop/orbits.hpp"
#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

namespace shellkoop {

struct BaselineSettings {
  DenseAeConfig dense;
  double ridge_lambda = 1e-2;

  bool operator==(const BaselineSettings&) const = default;
};

struct PathsConfig {
  std::string dataset = "shellkoop_out/dataset.jsonl";
  std::string model = "shellkoop_out/model.json";
  std::string reports = "shellkoop_out";

  bool operator==(const PathsConfig&) const = default;
};

/// One JSON document with sections shell, budget, traffic, gkae, baseline,
/// controller, paths and a top-level seed. Missing keys keep the defaults
/// below; unknown keys are rejected. Section-level seeds are not accepted:
/// `seed` drives traffic, GKAE and dense-AE initialization alike.
struct ExperimentConfig {
  ShellConfig shell;
  LinkBudget budget;
  TrafficConfig traffic;
  std::size_t total_steps = 600;  // traffic.total_steps
  double split_frac = 0.8;        // traffic.split_frac
  GkaeConfig gkae;
  BaselineSettings baseline;
  ControllerConfig controller;
  PathsConfig paths;
  std::uint64_t seed = 1;

  /// Propagates `seed` into every component.
  void set_seed(std::uint64_t s);
  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Full document with every field, suitable as a template.
void write_experiment_config(const ExperimentConfig& cfg, std::ostream& os);

Dataset generate_dataset(const ExperimentConfig& cfg);

using Forecaster = std::function<std::vector<nn::Matrix>(const GraphSnapshot&, int)>;
using Reconstructor = std::function<nn::Matrix(const GraphSnapshot&)>;

struct ForecastCurves {
  Metrics queue;
  Metrics se;
  std::size_t origins = 0;
};

/// Rolling-origin evaluation over the validation split: every origin t with
/// t + horizon inside it is forecast and scored against x_{t+1..t+horizon}.
ForecastCurves evaluate_forecaster(const Dataset& ds, const Forecaster& f, int horizon);

/// Mean over validation snapshots of the masked-row mse between the
/// reconstruction of the masked snapshot and the true dynamic channels.
/// Rate 0 scores every row of the unmasked snapshot. Snapshot k uses mask
/// seed derive_seed(seed, k), so every model sees the same masks.
double masked_reconstruction_error(const Dataset& ds, const Reconstructor& r, double rate, std::uint64_t seed);

/// Adapters over the model types.
Forecaster forecaster_for(const GkaeModel& m);
Forecaster forecaster_for(const RidgeForecaster& m);
Forecaster persistence_forecaster();
Reconstructor reconstructor_for(const GkaeModel& m);
Reconstructor reconstructor_for(const DenseAeModel& m);

/// "# schema=1 <kind>" line written first in every CSV.
std::string csv_schema_line(const std::string& kind);

/// Per-horizon rows for each channel group, then a "total" row per group.
void write_forecast_csv(std::ostream& os, const ForecastCurves& model, const ForecastCurves& persistence,
                        const ForecastCurves& ridge);

struct MaskedRow {
  double rate = 0.0;
  double gkae_error = 0.0;
  double dense_error = 0.0;
};
void write_masked_csv(std::ostream& os, const std::vector<MaskedRow>& rows);

/// Formats an improvement value, or "undefined".
std::string format_improvement(const std::optional<double>& pct);

}  // namespace shellkoop
