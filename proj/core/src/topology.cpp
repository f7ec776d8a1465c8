#include "shellkoop/topology.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "shellkoop/common.hpp"

namespace shellkoop {

void LinkBudget::validate() const {
  if (!(carrier_freq_GHz > 0.0)) throw ConfigError("budget.carrier_freq_GHz", "must be > 0");
  if (!(bandwidth_Hz > 0.0)) throw ConfigError("budget.bandwidth_Hz", "must be > 0");
  if (!std::isfinite(eirp_dBW)) throw ConfigError("budget.eirp_dBW", "must be finite");
  if (!std::isfinite(rx_gain_dBi)) throw ConfigError("budget.rx_gain_dBi", "must be finite");
  if (!(system_temp_K > 0.0)) throw ConfigError("budget.system_temp_K", "must be > 0");
  if (!(atmosphere_margin_km > 0.0)) throw ConfigError("budget.atmosphere_margin_km", "must be > 0");
}

nn::Matrix GraphSnapshot::dynamic_channels() const {
  nn::Matrix out(features.rows(), features::kDynamicCount);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (int c = 0; c < features::kDynamicCount; ++c) {
      out(r, c) = features(r, features::kDynamicFirst + c);
    }
  }
  return out;
}

namespace {

IslEdge make_edge(int a, int channel_a, int b, int channel_b, LinkKind kind) {
  IslEdge e;
  e.kind = kind;
  if (a < b) {
    e.u = a, e.channel_u = channel_a, e.v = b, e.channel_v = channel_b;
  } else {
    e.u = b, e.channel_u = channel_b, e.v = a, e.channel_v = channel_a;
  }
  return e;
}

}  // namespace

std::vector<IslEdge> build_plus_grid(const ShellConfig& shell) {
  if (shell.num_planes < 3) throw ConfigError("shell.num_planes", "+Grid needs >= 3 planes");
  if (shell.sats_per_plane < 3) throw ConfigError("shell.sats_per_plane", "+Grid needs >= 3 slots");
  const int planes = shell.num_planes;
  const int slots = shell.sats_per_plane;
  std::vector<IslEdge> edges;
  edges.reserve(static_cast<std::size_t>(2 * planes * slots));
  for (int p = 0; p < planes; ++p) {
    for (int s = 0; s < slots; ++s) {
      const int a = p * slots + s;
      const int b = p * slots + (s + 1) % slots;
      edges.push_back(make_edge(a, kIntraSuccessor, b, kIntraPredecessor, LinkKind::intra));
    }
  }
  for (int p = 0; p < planes; ++p) {
    if (p == planes - 1 && !shell.seam_links) break;
    for (int s = 0; s < slots; ++s) {
      const int a = p * slots + s;
      const int b = ((p + 1) % planes) * slots + s;
      edges.push_back(make_edge(a, kInterEast, b, kInterWest, LinkKind::inter));
    }
  }
  return edges;
}

std::vector<IslEdge> edge_geometry(std::vector<IslEdge> edges,
                                   std::span<const SatelliteState> positions) {
  for (auto& e : edges) {
    const auto& pu = positions[static_cast<std::size_t>(e.u)].eci;
    const auto& pv = positions[static_cast<std::size_t>(e.v)].eci;
    const double dx = pu.x - pv.x, dy = pu.y - pv.y, dz = pu.z - pv.z;
    e.distance_km = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return edges;
}

double max_link_distance_km(const ShellConfig& shell, const LinkBudget& budget) {
  const double a = shell.semi_major_axis_km();
  const double r_min = constants::kEarthRadiusKm + budget.atmosphere_margin_km;
  if (r_min >= a) return 0.0;
  return 2.0 * std::sqrt(a * a - r_min * r_min);
}

bool line_of_sight(double distance_km, const ShellConfig& shell, const LinkBudget& budget) {
  return distance_km > 0.0 && distance_km <= max_link_distance_km(shell, budget);
}

double free_space_path_loss_db(double distance_km, const LinkBudget& budget) {
  const double d_m = distance_km * 1e3;
  const double f_hz = budget.carrier_freq_GHz * 1e9;
  const double c_m = constants::kSpeedOfLightKmS * 1e3;
  return 20.0 * std::log10(4.0 * constants::kPi * d_m * f_hz / c_m);
}

double noise_power_dbw(const LinkBudget& budget) {
  return 10.0 * std::log10(constants::kBoltzmann * budget.system_temp_K * budget.bandwidth_Hz);
}

double snr_db(double distance_km, const LinkBudget& budget) {
  return budget.eirp_dBW + budget.rx_gain_dBi - free_space_path_loss_db(distance_km, budget) -
         noise_power_dbw(budget);
}

double spectral_efficiency_from_snr_db(double snr) {
  return std::log2(1.0 + std::pow(10.0, snr / 10.0));
}

double spectral_efficiency(double distance_km, const LinkBudget& budget) {
  return spectral_efficiency_from_snr_db(snr_db(distance_km, budget));
}

std::vector<IslEdge> evaluate_links(const ShellConfig& shell, std::span<const SatelliteState> positions,
                                    const LinkBudget& budget) {
  auto edges = edge_geometry(build_plus_grid(shell), positions);
  for (auto& e : edges) {
    e.active = line_of_sight(e.distance_km, shell, budget);
    e.spectral_efficiency = e.active ? spectral_efficiency(e.distance_km, budget) : 0.0;
  }
  return edges;
}

GraphSnapshot snapshot(const ShellConfig& shell, double t, std::span<const double> queues,
                       double buffer_B, const LinkBudget& budget) {
  const auto n = static_cast<std::size_t>(shell.size());
  if (queues.size() != n) throw std::invalid_argument("snapshot: queue vector length != N");
  if (!(buffer_B > 0.0)) throw ConfigError("traffic.buffer_B", "must be > 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(queues[i] >= 0.0 && queues[i] <= buffer_B)) {
      throw std::out_of_range("snapshot: queue of node " + std::to_string(i) + " outside [0, B]");
    }
  }

  const auto positions = propagate_shell(shell, t);
  GraphSnapshot snap;
  snap.t = t;
  snap.shell = shell;
  snap.edges = evaluate_links(shell, positions, budget);
  snap.mask.assign(n, false);

  constexpr double kDeg = constants::kPi / 180.0;
  nn::Matrix x(n, features::kCount);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = positions[i].geo;
    x(i, features::kSinLat) = std::sin(g.lat_deg * kDeg);
    x(i, features::kSinLon) = std::sin(g.lon_deg * kDeg);
    x(i, features::kCosLon) = std::cos(g.lon_deg * kDeg);
    x(i, features::kAltitude) = g.alt_km / features::kAltitudeScaleKm;
    x(i, features::kQueue) = queues[i] / buffer_B;
  }
  for (const auto& e : snap.edges) {
    const double se = e.active ? e.spectral_efficiency / features::kSeMax : 0.0;
    x(static_cast<std::size_t>(e.u), features::kSeFirst + e.channel_u) = se;
    x(static_cast<std::size_t>(e.v), features::kSeFirst + e.channel_v) = se;
  }
  snap.features = std::move(x);
  return snap;
}

nn::Matrix normalized_adjacency(const GraphSnapshot& snap) {
  const auto n = static_cast<std::size_t>(snap.num_nodes());
  nn::Matrix a(n, n);
  for (const auto& e : snap.edges) {
    if (!e.active) continue;
    a(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v)) = 1.0;
    a(static_cast<std::size_t>(e.v), static_cast<std::size_t>(e.u)) = 1.0;
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    const auto row = a.row_span(i);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(std::accumulate(row.begin(), row.end(), 0.0));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  }
  return a;
}

GraphSnapshot mask_features(const GraphSnapshot& snap, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("mask_features: rate must lie in [0, 1)");
  GraphSnapshot out = snap;
  const auto n = static_cast<std::size_t>(snap.num_nodes());
  const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  if (count == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` entries are the selection.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = order[i];
    for (auto& v : out.features.row_span(r)) v = 0.0;
    out.features(r, features::kMaskFlag) = 1.0;
    out.mask[r] = true;
  }
  return out;
}

}  // namespace shellkoop
