#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shellkoop/common.hpp"
#include "shellkoop/topology.hpp"

namespace shellkoop {

struct Hotspot {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double intensity = 30.0;  // pkts/step at the center
  double width_deg = 12.0;  // Gaussian sigma

  bool operator==(const Hotspot&) const = default;
};

/// Four major-city hotspots used by the desk configuration.
std::vector<Hotspot> default_hotspots();

struct TrafficConfig {
  double dt_s = 60.0;
  std::vector<Hotspot> hotspots = default_hotspots();
  double base_rate = 2.0;     // pkts/step everywhere
  double drain_coeff = 0.1;   // pkts per (bits/s/Hz) per step
  double buffer_B = 1000.0;   // pkts
  double noise_std = 0.5;     // pkts/step
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrafficConfig&) const = default;
};

/// Great-circle angle between two points, degrees.
double great_circle_deg(double lat1, double lon1, double lat2, double lon2);

/// Mean arrivals per step at a sub-satellite point.
double arrival_rate(double lat_deg, double lon_deg, const TrafficConfig& cfg);

/// One queue update: q' = clamp(q + lambda + noise - c_d * sum(active SE), 0, B).
/// The noise draws consume `rng` in node order.
std::vector<double> step_queues(std::span<const double> queues, const GraphSnapshot& snap,
                                const TrafficConfig& cfg, Rng& rng);

struct Dataset {
  ShellConfig shell;
  LinkBudget budget;
  double dt_s = 60.0;
  double buffer_B = 1000.0;
  double se_max = features::kSeMax;
  std::vector<GraphSnapshot> snapshots;
  std::size_t split = 0;  // snapshots[0, split) train, [split, end) validation

  std::size_t size() const noexcept { return snapshots.size(); }
  std::span<const GraphSnapshot> train() const { return {snapshots.data(), split}; }
  std::span<const GraphSnapshot> validation() const {
    return {snapshots.data() + split, snapshots.size() - split};
  }
  /// Throws FormatError if spacing, ordering, or split are inconsistent.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Queues start at B/10; snapshot k stores the queue before step k.
Dataset generate_dataset(const ShellConfig& shell, const TrafficConfig& cfg, const LinkBudget& budget,
                         std::size_t total_steps, double split_frac);

}  // namespace shellkoop
