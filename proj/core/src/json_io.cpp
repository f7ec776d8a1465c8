#include "json_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "shellkoop/common.hpp"

namespace shellkoop::detail {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw FormatError("refusing to serialize a non-finite value");
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string out(buf, res.ptr);
  // Keep the value a JSON float so -0.0 and integral values survive parsing.
  if (out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

namespace {

void write_value(std::ostream& os, const Json& v) {
  switch (v.type()) {
    case Json::value_t::object: {
      os << '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) os << ", ";
        first = false;
        os << Json(it.key()).dump() << ": ";
        write_value(os, it.value());
      }
      os << '}';
      break;
    }
    case Json::value_t::array: {
      os << '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) os << ", ";
        first = false;
        write_value(os, e);
      }
      os << ']';
      break;
    }
    case Json::value_t::number_float:
      os << format_double(v.get<double>());
      break;
    default:
      os << v.dump();
  }
}

}  // namespace

void write_json(std::ostream& os, const Json& value) { write_value(os, value); }

std::string to_json_string(const Json& value) {
  std::ostringstream os;
  write_value(os, value);
  return os.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Json& require_field(const Json& j, const std::string& key, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(prefix + "." + key, "missing field");
  return *it;
}

double get_double(const Json& j, const std::string& key, const std::string& prefix) {
  const auto& v = require_field(j, key, prefix);
  if (!v.is_number()) throw ConfigError(prefix + "." + key, "expected a number");
  return v.get<double>();
}

long long get_int(const Json& j, const std::string& key, const std::string& prefix) {
  const auto& v = require_field(j, key, prefix);
  if (!v.is_number_integer()) throw ConfigError(prefix + "." + key, "expected an integer");
  return v.get<long long>();
}

bool get_bool(const Json& j, const std::string& key, const std::string& prefix) {
  const auto& v = require_field(j, key, prefix);
  if (!v.is_boolean()) throw ConfigError(prefix + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& prefix) {
  const auto& v = require_field(j, key, prefix);
  if (!v.is_string()) throw ConfigError(prefix + "." + key, "expected a string");
  return v.get<std::string>();
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(prefix + "." + it.key(), "unknown key");
  }
}

namespace {

/// Reads `key` into `out` if present (or throws if required and absent).
template <typename T, typename Getter>
void read_opt(const Json& j, const char* key, const std::string& prefix, bool require_all, T& out, Getter get) {
  if (j.contains(key)) {
    out = static_cast<T>(get(j, key, prefix));
  } else if (require_all) {
    throw ConfigError(prefix + "." + key, "missing field");
  }
}

}  // namespace

Json to_json(const ShellConfig& s) {
  return Json{{"altitude_km", s.altitude_km},       {"inclination_deg", s.inclination_deg},
              {"num_planes", s.num_planes},         {"sats_per_plane", s.sats_per_plane},
              {"phasing", s.phasing},               {"seam_links", s.seam_links}};
}

ShellConfig shell_from_json(const Json& j, const std::string& prefix, bool require_all) {
  reject_unknown_keys(j, {"altitude_km", "inclination_deg", "num_planes", "sats_per_plane", "phasing", "seam_links"},
                      prefix);
  ShellConfig s;
  read_opt(j, "altitude_km", prefix, require_all, s.altitude_km, get_double);
  read_opt(j, "inclination_deg", prefix, require_all, s.inclination_deg, get_double);
  read_opt(j, "num_planes", prefix, require_all, s.num_planes, get_int);
  read_opt(j, "sats_per_plane", prefix, require_all, s.sats_per_plane, get_int);
  read_opt(j, "phasing", prefix, require_all, s.phasing, get_int);
  read_opt(j, "seam_links", prefix, require_all, s.seam_links, get_bool);
  return s;
}

Json to_json(const LinkBudget& b) {
  return Json{{"carrier_freq_GHz", b.carrier_freq_GHz}, {"bandwidth_Hz", b.bandwidth_Hz},
              {"eirp_dBW", b.eirp_dBW},                 {"rx_gain_dBi", b.rx_gain_dBi},
              {"system_temp_K", b.system_temp_K},       {"atmosphere_margin_km", b.atmosphere_margin_km}};
}

LinkBudget budget_from_json(const Json& j, const std::string& prefix, bool require_all) {
  reject_unknown_keys(j,
                      {"carrier_freq_GHz", "bandwidth_Hz", "eirp_dBW", "rx_gain_dBi", "system_temp_K",
                       "atmosphere_margin_km"},
                      prefix);
  LinkBudget b;
  read_opt(j, "carrier_freq_GHz", prefix, require_all, b.carrier_freq_GHz, get_double);
  read_opt(j, "bandwidth_Hz", prefix, require_all, b.bandwidth_Hz, get_double);
  read_opt(j, "eirp_dBW", prefix, require_all, b.eirp_dBW, get_double);
  read_opt(j, "rx_gain_dBi", prefix, require_all, b.rx_gain_dBi, get_double);
  read_opt(j, "system_temp_K", prefix, require_all, b.system_temp_K, get_double);
  read_opt(j, "atmosphere_margin_km", prefix, require_all, b.atmosphere_margin_km, get_double);
  return b;
}

Json to_json(const Hotspot& h) {
  return Json{{"lat_deg", h.lat_deg}, {"lon_deg", h.lon_deg}, {"intensity", h.intensity}, {"width_deg", h.width_deg}};
}

Json to_json(const TrafficConfig& c) {
  Json hs = Json::array();
  for (const auto& h : c.hotspots) hs.push_back(to_json(h));
  return Json{{"dt_s", c.dt_s},           {"hotspots", hs},         {"base_rate", c.base_rate},
              {"drain_coeff", c.drain_coeff}, {"buffer_B", c.buffer_B}, {"noise_std", c.noise_std},
              {"seed", c.seed}};
}

TrafficConfig traffic_from_json(const Json& j, const std::string& prefix, bool require_all) {
  reject_unknown_keys(j, {"dt_s", "hotspots", "base_rate", "drain_coeff", "buffer_B", "noise_std", "seed"}, prefix);
  TrafficConfig c;
  read_opt(j, "dt_s", prefix, require_all, c.dt_s, get_double);
  read_opt(j, "base_rate", prefix, require_all, c.base_rate, get_double);
  read_opt(j, "drain_coeff", prefix, require_all, c.drain_coeff, get_double);
  read_opt(j, "buffer_B", prefix, require_all, c.buffer_B, get_double);
  read_opt(j, "noise_std", prefix, require_all, c.noise_std, get_double);
  read_opt(j, "seed", prefix, require_all, c.seed, get_int);
  if (j.contains("hotspots")) {
    const auto& arr = j.at("hotspots");
    if (!arr.is_array()) throw ConfigError(prefix + ".hotspots", "expected an array");
    c.hotspots.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string hp = prefix + ".hotspots[" + std::to_string(i) + "]";
      reject_unknown_keys(arr[i], {"lat_deg", "lon_deg", "intensity", "width_deg"}, hp);
      Hotspot h;
      h.lat_deg = get_double(arr[i], "lat_deg", hp);
      h.lon_deg = get_double(arr[i], "lon_deg", hp);
      read_opt(arr[i], "intensity", hp, require_all, h.intensity, get_double);
      read_opt(arr[i], "width_deg", hp, require_all, h.width_deg, get_double);
      c.hotspots.push_back(h);
    }
  } else if (require_all) {
    throw ConfigError(prefix + ".hotspots", "missing field");
  }
  return c;
}

Json to_json(const GkaeConfig& c) {
  return Json{{"gcn_layers", c.gcn_layers},
              {"hidden", c.hidden},
              {"node_latent", c.node_latent},
              {"embed_dim", c.embed_dim},
              {"identity_dim", c.identity_dim},
              {"train_horizon", c.train_horizon},
              {"eval_horizon", c.eval_horizon},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"gamma", c.gamma},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"masked_training", c.masked_training},
              {"mask_rate", c.mask_rate},
              {"seed", c.seed}};
}

GkaeConfig gkae_from_json(const Json& j, const std::string& prefix, bool require_all) {
  reject_unknown_keys(j,
                      {"gcn_layers", "hidden", "node_latent", "embed_dim", "identity_dim", "train_horizon",
                       "eval_horizon", "alpha", "beta", "gamma", "lr", "epochs", "masked_training", "mask_rate",
                       "seed"},
                      prefix);
  GkaeConfig c;
  read_opt(j, "gcn_layers", prefix, require_all, c.gcn_layers, get_int);
  read_opt(j, "hidden", prefix, require_all, c.hidden, get_int);
  read_opt(j, "node_latent", prefix, require_all, c.node_latent, get_int);
  read_opt(j, "embed_dim", prefix, require_all, c.embed_dim, get_int);
  read_opt(j, "identity_dim", prefix, require_all, c.identity_dim, get_int);
  read_opt(j, "train_horizon", prefix, require_all, c.train_horizon, get_int);
  read_opt(j, "eval_horizon", prefix, require_all, c.eval_horizon, get_int);
  read_opt(j, "alpha", prefix, require_all, c.alpha, get_double);
  read_opt(j, "beta", prefix, require_all, c.beta, get_double);
  read_opt(j, "gamma", prefix, require_all, c.gamma, get_double);
  read_opt(j, "lr", prefix, require_all, c.lr, get_double);
  read_opt(j, "epochs", prefix, require_all, c.epochs, get_int);
  read_opt(j, "masked_training", prefix, require_all, c.masked_training, get_bool);
  read_opt(j, "mask_rate", prefix, require_all, c.mask_rate, get_double);
  read_opt(j, "seed", prefix, require_all, c.seed, get_int);
  return c;
}

Json to_json(const nn::Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (double v : m.row_span(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

nn::Matrix matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw FormatError(field + ": expected a non-empty nested array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw FormatError(field + ": expected a non-empty nested array");
  nn::Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw FormatError(field + ": ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw FormatError(field + ": non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace shellkoop::detail
