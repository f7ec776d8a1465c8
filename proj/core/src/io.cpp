#include "shellkoop/io.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "json_io.hpp"

namespace shellkoop {

using detail::Json;

namespace {

const char* kind_name(LinkKind k) { return k == LinkKind::intra ? "intra" : "inter"; }

LinkKind kind_from(const std::string& s, const std::string& field) {
  if (s == "intra") return LinkKind::intra;
  if (s == "inter") return LinkKind::inter;
  throw FormatError(field + ": unknown link kind '" + s + "'");
}

}  // namespace

std::string snapshot_to_line(const GraphSnapshot& snap) {
  Json edges = Json::array();
  for (const auto& e : snap.edges) {
    edges.push_back(Json::array({e.u, e.v, kind_name(e.kind), e.distance_km, e.spectral_efficiency, e.active}));
  }
  return detail::to_json_string(Json{{"t", snap.t}, {"nodes", detail::to_json(snap.features)}, {"edges", edges}});
}

GraphSnapshot snapshot_from_line(const std::string& line, const ShellConfig& shell) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("snapshot line is not valid JSON: ") + e.what());
  }
  try {
    detail::reject_unknown_keys(j, {"t", "nodes", "edges"}, "snapshot");
    GraphSnapshot s;
    s.shell = shell;
    s.t = detail::get_double(j, "t", "snapshot");
    s.features = detail::matrix_from_json(detail::require_field(j, "nodes", "snapshot"), "snapshot.nodes");
    if (s.features.rows() != static_cast<std::size_t>(shell.size()) ||
        s.features.cols() != static_cast<std::size_t>(features::kCount)) {
      throw FormatError("snapshot.nodes: expected " + std::to_string(shell.size()) + " x " +
                        std::to_string(features::kCount));
    }
    s.mask.resize(s.features.rows());
    for (std::size_t i = 0; i < s.features.rows(); ++i) s.mask[i] = s.features(i, features::kMaskFlag) != 0.0;

    const auto skeleton = build_plus_grid(shell);
    const Json& edges = detail::require_field(j, "edges", "snapshot");
    if (!edges.is_array() || edges.size() != skeleton.size()) {
      throw FormatError("snapshot.edges: expected " + std::to_string(skeleton.size()) + " edges");
    }
    s.edges = skeleton;
    for (std::size_t i = 0; i < skeleton.size(); ++i) {
      const Json& row = edges[i];
      const std::string field = "snapshot.edges[" + std::to_string(i) + "]";
      if (!row.is_array() || row.size() != 6 || !row[0].is_number_integer() || !row[1].is_number_integer() ||
          !row[2].is_string() || !row[3].is_number() || !row[4].is_number() || !row[5].is_boolean()) {
        throw FormatError(field + ": expected [u, v, kind, distance_km, se, active]");
      }
      auto& e = s.edges[i];
      if (row[0].get<int>() != e.u || row[1].get<int>() != e.v ||
          kind_from(row[2].get<std::string>(), field) != e.kind) {
        throw FormatError(field + ": does not match the +Grid skeleton");
      }
      e.distance_km = row[3].get<double>();
      e.spectral_efficiency = row[4].get<double>();
      e.active = row[5].get<bool>();
    }
    return s;
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
}

void write_dataset(const Dataset& ds, std::ostream& os) {
  const Json header{{"schema", 1},
                    {"shell", detail::to_json(ds.shell)},
                    {"budget", detail::to_json(ds.budget)},
                    {"dt_s", ds.dt_s},
                    {"buffer_B", ds.buffer_B},
                    {"se_max", ds.se_max},
                    {"split_index", ds.split}};
  detail::write_json(os, header);
  os << '\n';
  for (const auto& s : ds.snapshots) os << snapshot_to_line(s) << '\n';
}

Dataset parse_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset file is empty");
  Dataset ds;
  try {
    const Json h = Json::parse(line);
    detail::reject_unknown_keys(h, {"schema", "shell", "budget", "dt_s", "buffer_B", "se_max", "split_index"},
                                "dataset");
    if (detail::get_int(h, "schema", "dataset") != 1) throw FormatError("dataset.schema: unsupported version");
    ds.shell = detail::shell_from_json(detail::require_field(h, "shell", "dataset"), "dataset.shell", true);
    ds.budget = detail::budget_from_json(detail::require_field(h, "budget", "dataset"), "dataset.budget", true);
    ds.dt_s = detail::get_double(h, "dt_s", "dataset");
    ds.buffer_B = detail::get_double(h, "buffer_B", "dataset");
    ds.se_max = detail::get_double(h, "se_max", "dataset");
    const long long split = detail::get_int(h, "split_index", "dataset");
    if (split < 0) throw FormatError("dataset.split_index: must be >= 0");
    ds.split = static_cast<std::size_t>(split);
    ds.shell.validate();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      ds.snapshots.push_back(snapshot_from_line(line, ds.shell));
    } catch (const FormatError& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream os;
  write_dataset(ds, os);
  detail::atomic_write(path, os.str());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::istringstream is(detail::read_file(path));
  return parse_dataset(is);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  detail::atomic_write(path, contents);
}

}  // namespace shellkoop
