#include "shellkoop/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shellkoop {

std::vector<Hotspot> default_hotspots() {
  return {
      {40.71, -74.01, 30.0, 12.0},   // New York
      {51.51, -0.13, 30.0, 12.0},    // London
      {35.68, 139.69, 30.0, 12.0},   // Tokyo
      {-23.55, -46.63, 30.0, 12.0},  // Sao Paulo
  };
}

void TrafficConfig::validate() const {
  if (!(dt_s > 0.0)) throw ConfigError("traffic.dt_s", "must be > 0");
  if (!(base_rate >= 0.0)) throw ConfigError("traffic.base_rate", "must be >= 0");
  if (!(drain_coeff >= 0.0)) throw ConfigError("traffic.drain_coeff", "must be >= 0");
  if (!(buffer_B > 0.0)) throw ConfigError("traffic.buffer_B", "must be > 0");
  if (!(noise_std >= 0.0)) throw ConfigError("traffic.noise_std", "must be >= 0");
  for (std::size_t i = 0; i < hotspots.size(); ++i) {
    const auto& h = hotspots[i];
    const std::string field = "traffic.hotspots[" + std::to_string(i) + "]";
    if (!(h.lat_deg >= -90.0 && h.lat_deg <= 90.0)) throw ConfigError(field + ".lat_deg", "must lie in [-90, 90]");
    if (!std::isfinite(h.lon_deg)) throw ConfigError(field + ".lon_deg", "must be finite");
    if (!(h.intensity >= 0.0)) throw ConfigError(field + ".intensity", "must be >= 0");
    if (!(h.width_deg > 0.0)) throw ConfigError(field + ".width_deg", "must be > 0");
  }
}

double great_circle_deg(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kDeg = constants::kPi / 180.0;
  const double p1 = lat1 * kDeg, p2 = lat2 * kDeg;
  const double dp = p2 - p1;
  const double dl = (lon2 - lon1) * kDeg;
  // Haversine stays accurate for the small separations that dominate the kernel.
  const double h = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * std::asin(std::min(1.0, std::sqrt(h))) / kDeg;
}

double arrival_rate(double lat_deg, double lon_deg, const TrafficConfig& cfg) {
  double rate = cfg.base_rate;
  for (const auto& h : cfg.hotspots) {
    const double d = great_circle_deg(lat_deg, lon_deg, h.lat_deg, h.lon_deg);
    rate += h.intensity * std::exp(-d * d / (2.0 * h.width_deg * h.width_deg));
  }
  return rate;
}

std::vector<double> step_queues(std::span<const double> queues, const GraphSnapshot& snap,
                                const TrafficConfig& cfg, Rng& rng) {
  const auto n = static_cast<std::size_t>(snap.num_nodes());
  if (queues.size() != n) throw std::invalid_argument("step_queues: queue vector length != N");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(queues[i] >= 0.0 && queues[i] <= cfg.buffer_B)) {
      throw std::out_of_range("step_queues: queue of node " + std::to_string(i) + " outside [0, B]");
    }
  }

  std::vector<double> drain(n, 0.0);
  for (const auto& e : snap.edges) {
    if (!e.active) continue;
    drain[static_cast<std::size_t>(e.u)] += e.spectral_efficiency;
    drain[static_cast<std::size_t>(e.v)] += e.spectral_efficiency;
  }

  constexpr double kRad = 180.0 / constants::kPi;
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Sub-satellite point recovered from the feature encoding.
    const double lat = std::asin(snap.features(i, features::kSinLat)) * kRad;
    const double lon = std::atan2(snap.features(i, features::kSinLon), snap.features(i, features::kCosLon)) * kRad;
    double arrivals = arrival_rate(lat, lon, cfg);
    if (cfg.noise_std > 0.0) arrivals += cfg.noise_std * rng.normal();
    const double q = queues[i] + arrivals - cfg.drain_coeff * drain[i];
    next[i] = std::clamp(q, 0.0, cfg.buffer_B);
  }
  return next;
}

void Dataset::validate() const {
  if (snapshots.empty()) throw FormatError("dataset has no snapshots");
  if (split == 0 || split >= snapshots.size()) throw FormatError("dataset split index out of range");
  const auto n = static_cast<std::size_t>(shell.size());
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    const auto& s = snapshots[k];
    if (s.features.rows() != n || s.features.cols() != static_cast<std::size_t>(features::kCount)) {
      throw FormatError("snapshot " + std::to_string(k) + " has wrong feature shape");
    }
    if (k > 0) {
      const double gap = s.t - snapshots[k - 1].t;
      if (!(gap > 0.0) || std::abs(gap - dt_s) > 1e-9 * std::max(1.0, dt_s)) {
        throw FormatError("snapshot " + std::to_string(k) + " breaks the constant time spacing");
      }
    }
  }
}

Dataset generate_dataset(const ShellConfig& shell, const TrafficConfig& cfg, const LinkBudget& budget,
                         std::size_t total_steps, double split_frac) {
  shell.validate();
  cfg.validate();
  budget.validate();
  if (total_steps < 10) throw ConfigError("dataset.total_steps", "must be >= 10");
  if (!(split_frac > 0.0 && split_frac < 1.0)) throw ConfigError("dataset.split_frac", "must lie in (0, 1)");
  const auto split = static_cast<std::size_t>(std::llround(split_frac * static_cast<double>(total_steps)));
  if (split == 0 || split >= total_steps) throw ConfigError("dataset.split_frac", "leaves an empty split");

  Dataset ds;
  ds.shell = shell;
  ds.budget = budget;
  ds.dt_s = cfg.dt_s;
  ds.buffer_B = cfg.buffer_B;
  ds.split = split;
  ds.snapshots.reserve(total_steps);

  Rng rng(derive_seed(cfg.seed, 0x7A1F));
  std::vector<double> queues(static_cast<std::size_t>(shell.size()), cfg.buffer_B / 10.0);
  for (std::size_t k = 0; k < total_steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_s;
    ds.snapshots.push_back(snapshot(shell, t, queues, cfg.buffer_B, budget));
    queues = step_queues(queues, ds.snapshots.back(), cfg, rng);
  }
  return ds;
}

}  // namespace shellkoop
