#pragma once

// Internal: nlohmann/json glue shared by the file formats. Not installed.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "shellkoop/gkae.hpp"
#include "shellkoop/nn.hpp"
#include "shellkoop/orbits.hpp"
#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

namespace shellkoop::detail {

using Json = nlohmann::ordered_json;

/// "%.17g"; throws FormatError on NaN/Inf.
std::string format_double(double v);

/// Compact JSON with every floating value at 17 significant digits and keys
/// in insertion order.
void write_json(std::ostream& os, const Json& value);
std::string to_json_string(const Json& value);

/// Writes to a sibling temp file then renames over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

Json to_json(const ShellConfig& shell);
Json to_json(const LinkBudget& budget);
Json to_json(const Hotspot& h);
Json to_json(const TrafficConfig& cfg);
Json to_json(const GkaeConfig& cfg);
Json to_json(const nn::Matrix& m);

// Readers start from the struct defaults. Unknown keys always raise
// ConfigError naming `prefix.key`; missing keys do too when `require_all`.
ShellConfig shell_from_json(const Json& j, const std::string& prefix, bool require_all);
LinkBudget budget_from_json(const Json& j, const std::string& prefix, bool require_all);
TrafficConfig traffic_from_json(const Json& j, const std::string& prefix, bool require_all);
GkaeConfig gkae_from_json(const Json& j, const std::string& prefix, bool require_all);
nn::Matrix matrix_from_json(const Json& j, const std::string& field);

/// Field accessor that reports the dotted path when absent or mistyped.
const Json& require_field(const Json& j, const std::string& key, const std::string& prefix);
double get_double(const Json& j, const std::string& key, const std::string& prefix);
long long get_int(const Json& j, const std::string& key, const std::string& prefix);
bool get_bool(const Json& j, const std::string& key, const std::string& prefix);
std::string get_string(const Json& j, const std::string& key, const std::string& prefix);
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known, const std::string& prefix);

}  // namespace shellkoop::detail
