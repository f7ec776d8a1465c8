#include "shellkoop/orbits.hpp"

#include <cmath>

#include "shellkoop/common.hpp"

namespace shellkoop {

namespace {

constexpr double kDegToRad = constants::kPi / 180.0;
constexpr double kRadToDeg = 180.0 / constants::kPi;

}  // namespace

void ShellConfig::validate() const {
  if (!(altitude_km > 0.0) || !std::isfinite(altitude_km)) {
    throw ConfigError("shell.altitude_km", "must be > 0");
  }
  if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0)) {
    throw ConfigError("shell.inclination_deg", "must lie in [0, 180]");
  }
  if (num_planes < 3) throw ConfigError("shell.num_planes", "must be >= 3");
  if (sats_per_plane < 3) throw ConfigError("shell.sats_per_plane", "must be >= 3");
  if (phasing < 0 || phasing >= num_planes) {
    throw ConfigError("shell.phasing", "must lie in [0, num_planes)");
  }
}

double EciState::norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

double mean_motion(const ShellConfig& shell) {
  const double a = shell.semi_major_axis_km();
  return std::sqrt(constants::kMu / (a * a * a));
}

double orbital_period(const ShellConfig& shell) { return 2.0 * constants::kPi / mean_motion(shell); }

EciState satellite_position(const ShellConfig& shell, SatelliteIndex sat, double t) {
  const double two_pi = 2.0 * constants::kPi;
  const double planes = shell.num_planes;
  const double per_plane = shell.sats_per_plane;
  const double raan = two_pi * sat.plane / planes;
  const double u = two_pi * sat.slot / per_plane +
                   two_pi * shell.phasing * sat.plane / (planes * per_plane) + mean_motion(shell) * t;
  const double inc = shell.inclination_deg * kDegToRad;
  const double a = shell.semi_major_axis_km();

  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(raan), so = std::sin(raan);
  const double ci = std::cos(inc), si = std::sin(inc);
  return {a * (cu * co - su * so * ci), a * (cu * so + su * co * ci), a * su * si};
}

double wrap_longitude_deg(double lon_deg) {
  double w = std::fmod(lon_deg + 180.0, 360.0);
  if (w < 0.0) w += 360.0;
  w -= 180.0;
  // fmod can land exactly on +180 after the shift for inputs like 180 - tiny.
  if (w >= 180.0) w -= 360.0;
  return w;
}

GeodeticPosition eci_to_geodetic(const EciState& state, double t) {
  const double theta = constants::kEarthRotationRadS * t;
  const double c = std::cos(theta), s = std::sin(theta);
  // ECEF = R_z(-theta) * ECI
  const double xe = c * state.x + s * state.y;
  const double ye = -s * state.x + c * state.y;
  const double r = state.norm();
  GeodeticPosition g;
  g.lat_deg = std::asin(state.z / r) * kRadToDeg;
  g.lon_deg = wrap_longitude_deg(std::atan2(ye, xe) * kRadToDeg);
  g.alt_km = r - constants::kEarthRadiusKm;
  return g;
}

std::vector<SatelliteState> propagate_shell(const ShellConfig& shell, double t) {
  std::vector<SatelliteState> out;
  out.reserve(static_cast<std::size_t>(shell.size()));
  for (int p = 0; p < shell.num_planes; ++p) {
    for (int s = 0; s < shell.sats_per_plane; ++s) {
      SatelliteState st;
      st.index = {p, s};
      st.eci = satellite_position(shell, st.index, t);
      st.geo = eci_to_geodetic(st.eci, t);
      out.push_back(st);
    }
  }
  return out;
}

}  // namespace shellkoop
