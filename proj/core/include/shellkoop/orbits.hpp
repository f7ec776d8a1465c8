#pragma once

#include <vector>

namespace shellkoop {

namespace constants {
inline constexpr double kMu = 398600.4418;              // km^3/s^2
inline constexpr double kEarthRadiusKm = 6378.137;      // spherical Earth
inline constexpr double kEarthRotationRadS = 7.2921159e-5;
inline constexpr double kSpeedOfLightKmS = 299792.458;
inline constexpr double kBoltzmann = 1.380649e-23;      // J/K
inline constexpr double kPi = 3.14159265358979323846;
}  // namespace constants

/// Static geometry of a Walker-Delta shell: P planes over 360 deg of RAAN,
/// Q satellites per plane, inter-plane phasing F.
struct ShellConfig {
  double altitude_km = 550.0;
  double inclination_deg = 53.0;
  int num_planes = 8;
  int sats_per_plane = 12;
  int phasing = 1;
  bool seam_links = true;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  int size() const noexcept { return num_planes * sats_per_plane; }
  double semi_major_axis_km() const noexcept { return constants::kEarthRadiusKm + altitude_km; }

  bool operator==(const ShellConfig&) const = default;
};

struct SatelliteIndex {
  int plane = 0;
  int slot = 0;

  int flat(const ShellConfig& shell) const noexcept { return plane * shell.sats_per_plane + slot; }
  static SatelliteIndex from_flat(const ShellConfig& shell, int id) noexcept {
    return {id / shell.sats_per_plane, id % shell.sats_per_plane};
  }

  bool operator==(const SatelliteIndex&) const = default;
};

struct EciState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const noexcept;
};

struct GeodeticPosition {
  double lat_deg = 0.0;
  double lon_deg = 0.0;  // [-180, 180)
  double alt_km = 0.0;
};

struct SatelliteState {
  SatelliteIndex index;
  EciState eci;
  GeodeticPosition geo;
};

/// n = sqrt(mu / a^3), rad/s.
double mean_motion(const ShellConfig& shell);
double orbital_period(const ShellConfig& shell);

EciState satellite_position(const ShellConfig& shell, SatelliteIndex sat, double t);

/// ECI -> ECEF rotation by -omega_e * t, then spherical lat/lon/alt.
GeodeticPosition eci_to_geodetic(const EciState& state, double t);

/// All P*Q satellites in canonical flat-id order.
std::vector<SatelliteState> propagate_shell(const ShellConfig& shell, double t);

/// Wraps an angle in degrees to [-180, 180).
double wrap_longitude_deg(double lon_deg);

}  // namespace shellkoop
