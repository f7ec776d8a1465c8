#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shellkoop/nn.hpp"
#include "shellkoop/orbits.hpp"

namespace shellkoop {

enum class LinkKind { intra, inter };

/// Fixed per-node channel order of the four +Grid ports.
enum Channel : int { kIntraSuccessor = 0, kIntraPredecessor = 1, kInterEast = 2, kInterWest = 3 };
inline constexpr int kChannelsPerNode = 4;

struct IslEdge {
  int u = 0;  // u < v
  int v = 0;
  LinkKind kind = LinkKind::intra;
  int channel_u = 0;
  int channel_v = 0;
  double distance_km = 0.0;
  double spectral_efficiency = 0.0;  // bits/s/Hz, 0 when inactive
  bool active = false;

  bool operator==(const IslEdge&) const = default;
};

struct LinkBudget {
  double carrier_freq_GHz = 23.0;
  double bandwidth_Hz = 1e9;
  double eirp_dBW = 75.0;
  double rx_gain_dBi = 40.0;
  double system_temp_K = 500.0;
  double atmosphere_margin_km = 80.0;

  void validate() const;
  bool operator==(const LinkBudget&) const = default;
};

/// Node feature layout. Every GraphSnapshot row follows it.
namespace features {
inline constexpr int kSinLat = 0;
inline constexpr int kSinLon = 1;
inline constexpr int kCosLon = 2;
inline constexpr int kAltitude = 3;
inline constexpr int kQueue = 4;
inline constexpr int kSeFirst = 5;  // 5..8, channel order
inline constexpr int kMaskFlag = 9;
inline constexpr int kCount = 10;

/// Dynamic target channels [queue, se_1..se_4] are the contiguous block 4..8.
inline constexpr int kDynamicFirst = kQueue;
inline constexpr int kDynamicCount = 5;

inline constexpr double kAltitudeScaleKm = 1000.0;
inline constexpr double kSeMax = 15.0;  // bits/s/Hz
}  // namespace features

struct GraphSnapshot {
  double t = 0.0;
  ShellConfig shell;
  nn::Matrix features;          // N x features::kCount
  std::vector<IslEdge> edges;   // canonical order
  std::vector<bool> mask;       // true = row hidden

  int num_nodes() const noexcept { return static_cast<int>(features.rows()); }
  /// N x 5 block of dynamic channels.
  nn::Matrix dynamic_channels() const;

  bool operator==(const GraphSnapshot&) const = default;
};

/// +Grid skeleton: intra-plane rings then inter-plane same-slot links, both
/// sorted by (plane, slot) of the originating satellite. Geometry fields are zero.
std::vector<IslEdge> build_plus_grid(const ShellConfig& shell);

/// Fills distance_km from the positions (indexed by flat id).
std::vector<IslEdge> edge_geometry(std::vector<IslEdge> edges,
                                   std::span<const SatelliteState> positions);

/// Longest chord that clears the sphere of radius R_E + atmosphere margin.
double max_link_distance_km(const ShellConfig& shell, const LinkBudget& budget);
bool line_of_sight(double distance_km, const ShellConfig& shell, const LinkBudget& budget);

double free_space_path_loss_db(double distance_km, const LinkBudget& budget);
double noise_power_dbw(const LinkBudget& budget);
double snr_db(double distance_km, const LinkBudget& budget);
/// log2(1 + SNR) for an active link.
double spectral_efficiency(double distance_km, const LinkBudget& budget);
double spectral_efficiency_from_snr_db(double snr_db);

/// Edges with geometry, link state, and SE evaluated at time t.
std::vector<IslEdge> evaluate_links(const ShellConfig& shell, std::span<const SatelliteState> positions,
                                    const LinkBudget& budget);

/// Builds the feature matrix and link state at time t. `queues` are raw
/// packet counts in [0, buffer_B].
GraphSnapshot snapshot(const ShellConfig& shell, double t, std::span<const double> queues,
                       double buffer_B, const LinkBudget& budget);

/// D^{-1/2} (A + I) D^{-1/2} over the active edges.
nn::Matrix normalized_adjacency(const GraphSnapshot& snap);

/// Hides round(rate * N) rows chosen uniformly without replacement: the row is
/// zeroed and its mask-indicator channel set to 1.
GraphSnapshot mask_features(const GraphSnapshot& snap, double rate, std::uint64_t seed);

}  // namespace shellkoop
