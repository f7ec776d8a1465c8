#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

namespace shellkoop {

/// One snapshot as a single JSON line (no trailing newline).
std::string snapshot_to_line(const GraphSnapshot& snap);
/// Inverse of snapshot_to_line. Channel ports are restored from the +Grid
/// skeleton of `shell` and the mask from the indicator column.
GraphSnapshot snapshot_from_line(const std::string& line, const ShellConfig& shell);

/// Header line then one snapshot per line.
void write_dataset(const Dataset& ds, std::ostream& os);
Dataset parse_dataset(std::istream& is);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Write-temp-then-rename; parent directories are created.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace shellkoop
