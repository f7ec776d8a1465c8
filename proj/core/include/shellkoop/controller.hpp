#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shellkoop/gkae.hpp"
#include "shellkoop/nn.hpp"
#include "shellkoop/topology.hpp"

namespace shellkoop {

struct ControllerConfig {
  double theta = 0.8;      // congestion threshold on queue / B
  double se_floor = 0.01;  // bits/s/Hz; below it a link counts as down
  double penalty = 10.0;   // added per congested endpoint

  void validate() const;
  bool operator==(const ControllerConfig&) const = default;
};

/// Forecast of one shell: steps[k-1] is the N x 5 prediction k steps ahead,
/// in normalized units (queue / B, SE / se_max).
struct ShellForecast {
  std::string shell_id;
  ShellConfig shell;
  double se_max = features::kSeMax;
  double t0 = 0.0;  // time of the ingested snapshot
  std::vector<nn::Matrix> steps;
};

struct GlobalView {
  int horizon = 0;
  double generated_at = 0.0;  // latest ingest time over all shells
  std::vector<ShellForecast> shells;

  const ShellForecast& shell(const std::string& id) const;
  /// Throws std::invalid_argument if horizons or shapes disagree.
  void validate() const;
};

struct CongestionFlag {
  std::string shell_id;
  int satellite = 0;
  int first_step = 0;  // 1-based
  double peak = 0.0;   // max predicted queue / B over the horizon

  bool operator==(const CongestionFlag&) const = default;
};

struct RoutePlan {
  std::string shell_id;
  int source = 0;
  int destination = 0;
  int step = 0;
  std::vector<int> nodes;
  double cost = 0.0;
};

struct ShellHandle {
  std::string id;
  std::shared_ptr<const GkaeModel> model;
  std::optional<LatentState> latest;
};

/// Registry of per-shell models. Registration takes an exclusive lock;
/// ingest locks only its own handle; forecasts are shared reads.
class Controller {
 public:
  Controller() = default;
  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;

  /// Throws std::invalid_argument on a duplicate id or when the model was
  /// trained for a different shell.
  void register_shell(const std::string& id, const ShellConfig& shell, std::shared_ptr<const GkaeModel> model);
  void deregister_shell(const std::string& id);

  /// Encodes the snapshot as the shell's latest state. Throws when the
  /// snapshot is not newer than the last one ingested.
  LatentState ingest(const std::string& id, const GraphSnapshot& snap);

  /// Decode of the latest latent without advancing.
  nn::Matrix reconstruct(const std::string& id) const;

  GlobalView forecast_all(int horizon) const;

  ShellHandle handle(const std::string& id) const;
  std::vector<std::string> shell_ids() const;
  std::size_t size() const;

 private:
  struct Entry {
    ShellHandle handle;
    mutable std::shared_mutex mutex;
  };
  const Entry& entry(const std::string& id) const;

  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> entries_;
};

std::vector<CongestionFlag> detect_congestion(const GlobalView& view, double theta = 0.8);

/// Undirected weighted graph on nodes 0..n-1.
struct WeightedGraph {
  explicit WeightedGraph(int n = 0) : adjacency(static_cast<std::size_t>(n)) {}
  void add_edge(int u, int v, double w);
  int size() const noexcept { return static_cast<int>(adjacency.size()); }

  std::vector<std::vector<std::pair<int, double>>> adjacency;
};

struct Path {
  std::vector<int> nodes;
  double cost = 0.0;
};

/// Shortest path. Among equal-cost predecessors the smaller node id wins.
/// Returns nullopt when dst is unreachable.
std::optional<Path> dijkstra(const WeightedGraph& g, int src, int dst);

/// Routing weight of each +Grid edge at `step`; inactive edges map to nullopt.
std::vector<std::optional<double>> route_weights(const ShellForecast& forecast, const std::vector<IslEdge>& edges,
                                                 int step, const ControllerConfig& cfg);

/// Dijkstra on the forecast link weights at `step` (1-based). Returns nullopt
/// when every path crosses a predicted-inactive link.
std::optional<RoutePlan> plan_route(const GlobalView& view, const std::string& shell_id, int src, int dst, int step,
                                    const ControllerConfig& cfg = {});

enum class ChannelGroup { all, queue, se };

struct Metrics {
  double sse = 0.0;
  std::vector<double> per_horizon;  // index k-1
};

/// Squared error of predictions[k] against truth[k], summed per step over
/// all nodes and the channels of `group`.
Metrics metrics(std::span<const nn::Matrix> predictions, std::span<const nn::Matrix> truth,
                ChannelGroup group = ChannelGroup::all);
/// Adds one forecast origin into an accumulating Metrics.
void accumulate(Metrics& into, std::span<const nn::Matrix> predictions, std::span<const nn::Matrix> truth,
                ChannelGroup group = ChannelGroup::all);

/// 100 (base - model) / base; nullopt when base is 0 and model is not.
std::optional<double> improvement_pct(double sse_base, double sse_model);

void write_global_view(const GlobalView& view, std::ostream& os);
void write_flags(std::span<const CongestionFlag> flags, double theta, std::ostream& os);
void write_route(const std::optional<RoutePlan>& plan, const std::string& shell_id, int src, int dst, int step,
                 std::ostream& os);

}  // namespace shellkoop
