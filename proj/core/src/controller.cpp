#include "shellkoop/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <queue>
#include <stdexcept>

#include "json_io.hpp"

namespace shellkoop {

using nn::Matrix;

void ControllerConfig::validate() const {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("controller.theta", "must lie in (0, 1)");
  if (!(se_floor > 0.0)) throw ConfigError("controller.se_floor", "must be > 0");
  if (!(penalty >= 0.0)) throw ConfigError("controller.penalty", "must be >= 0");
}

const ShellForecast& GlobalView::shell(const std::string& id) const {
  for (const auto& s : shells) {
    if (s.shell_id == id) return s;
  }
  throw std::invalid_argument("global view has no shell '" + id + "'");
}

void GlobalView::validate() const {
  if (horizon < 1) throw std::invalid_argument("global view: horizon must be >= 1");
  for (const auto& s : shells) {
    if (static_cast<int>(s.steps.size()) != horizon) {
      throw std::invalid_argument("global view: shell '" + s.shell_id + "' has a different horizon");
    }
    for (const auto& m : s.steps) {
      if (static_cast<int>(m.rows()) != s.shell.size() || m.cols() != features::kDynamicCount) {
        throw std::invalid_argument("global view: shell '" + s.shell_id + "' forecast shape mismatch");
      }
    }
  }
}

void Controller::register_shell(const std::string& id, const ShellConfig& shell,
                                 std::shared_ptr<const GkaeModel> model) {
  if (!model) throw std::invalid_argument("register_shell: null model for '" + id + "'");
  if (!(model->shell() == shell)) {
    throw std::invalid_argument("register_shell: model for '" + id + "' was built for a different shell");
  }
  std::unique_lock lock(registry_mutex_);
  if (entries_.contains(id)) throw std::invalid_argument("register_shell: duplicate shell id '" + id + "'");
  auto e = std::make_unique<Entry>();
  e->handle.id = id;
  e->handle.model = std::move(model);
  entries_.emplace(id, std::move(e));
}

void Controller::deregister_shell(const std::string& id) {
  std::unique_lock lock(registry_mutex_);
  if (entries_.erase(id) == 0) throw std::invalid_argument("deregister_shell: unknown shell '" + id + "'");
}

const Controller::Entry& Controller::entry(const std::string& id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw std::invalid_argument("unknown shell '" + id + "'");
  return *it->second;
}

LatentState Controller::ingest(const std::string& id, const GraphSnapshot& snap) {
  std::shared_lock registry(registry_mutex_);
  auto& e = const_cast<Entry&>(entry(id));
  if (!(snap.shell == e.handle.model->shell())) {
    throw std::invalid_argument("ingest: snapshot shell differs from shell '" + id + "'");
  }
  std::unique_lock lock(e.mutex);
  if (e.handle.latest && !(snap.t > e.handle.latest->t)) {
    throw std::invalid_argument("ingest: stale snapshot for shell '" + id + "'");
  }
  e.handle.latest = e.handle.model->encode(snap);
  return *e.handle.latest;
}

Matrix Controller::reconstruct(const std::string& id) const {
  std::shared_lock registry(registry_mutex_);
  const auto& e = entry(id);
  std::shared_lock lock(e.mutex);
  if (!e.handle.latest) throw std::invalid_argument("shell '" + id + "' has not ingested a snapshot");
  return e.handle.model->decode(e.handle.latest->z);
}

GlobalView Controller::forecast_all(int horizon) const {
  if (horizon < 1) throw std::invalid_argument("forecast_all: horizon must be >= 1");
  std::shared_lock registry(registry_mutex_);
  GlobalView view;
  view.horizon = horizon;
  for (const auto& [id, e] : entries_) {
    std::shared_lock lock(e->mutex);
    const auto& h = e->handle;
    if (!h.latest) throw std::invalid_argument("forecast_all: shell '" + id + "' has not ingested a snapshot");
    ShellForecast f;
    f.shell_id = id;
    f.shell = h.model->shell();
    f.se_max = h.model->se_max();
    f.t0 = h.latest->t;
    Matrix z = h.latest->z;
    for (int k = 0; k < horizon; ++k) {
      z = h.model->advance(z, 1);
      f.steps.push_back(h.model->decode(z));
    }
    view.generated_at = view.shells.empty() ? f.t0 : std::max(view.generated_at, f.t0);
    view.shells.push_back(std::move(f));
  }
  return view;
}

ShellHandle Controller::handle(const std::string& id) const {
  std::shared_lock registry(registry_mutex_);
  const auto& e = entry(id);
  std::shared_lock lock(e.mutex);
  return e.handle;
}

std::vector<std::string> Controller::shell_ids() const {
  std::shared_lock registry(registry_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : entries_) ids.push_back(id);
  return ids;
}

std::size_t Controller::size() const {
  std::shared_lock registry(registry_mutex_);
  return entries_.size();
}

std::vector<CongestionFlag> detect_congestion(const GlobalView& view, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("controller.theta", "must lie in (0, 1)");
  std::vector<CongestionFlag> flags;
  for (const auto& s : view.shells) {
    const int n = s.shell.size();
    for (int i = 0; i < n; ++i) {
      int first = 0;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const double q = s.steps[k](static_cast<std::size_t>(i), 0);
        peak = std::max(peak, q);
        if (first == 0 && q > theta) first = static_cast<int>(k) + 1;
      }
      if (first != 0) flags.push_back({s.shell_id, i, first, peak});
    }
  }
  return flags;
}

void WeightedGraph::add_edge(int u, int v, double w) {
  if (u < 0 || v < 0 || u >= size() || v >= size() || u == v) throw std::invalid_argument("add_edge: bad endpoints");
  adjacency[static_cast<std::size_t>(u)].emplace_back(v, w);
  adjacency[static_cast<std::size_t>(v)].emplace_back(u, w);
}

std::optional<Path> dijkstra(const WeightedGraph& g, int src, int dst) {
  const int n = g.size();
  if (src < 0 || dst < 0 || src >= n || dst >= n) throw std::invalid_argument("dijkstra: node out of range");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(n), kInf);
  std::vector<int> prev(static_cast<std::size_t>(n), -1);
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[static_cast<std::size_t>(src)] = 0.0;
  open.emplace(0.0, src);
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    const auto uu = static_cast<std::size_t>(u);
    if (done[uu]) continue;
    done[uu] = true;
    if (u == dst) break;
    for (const auto& [v, w] : g.adjacency[uu]) {
      const auto vv = static_cast<std::size_t>(v);
      if (done[vv]) continue;
      const double nd = d + w;
      if (nd < dist[vv]) {
        dist[vv] = nd;
        prev[vv] = u;
        open.emplace(nd, v);
      } else if (nd == dist[vv] && u < prev[vv]) {
        prev[vv] = u;
      }
    }
  }
  if (!done[static_cast<std::size_t>(dst)]) return std::nullopt;
  Path p;
  p.cost = dist[static_cast<std::size_t>(dst)];
  for (int v = dst; v != -1; v = prev[static_cast<std::size_t>(v)]) p.nodes.push_back(v);
  std::reverse(p.nodes.begin(), p.nodes.end());
  return p;
}

std::vector<std::optional<double>> route_weights(const ShellForecast& forecast, const std::vector<IslEdge>& edges,
                                                 int step, const ControllerConfig& cfg) {
  cfg.validate();
  if (step < 1 || step > static_cast<int>(forecast.steps.size())) {
    throw std::invalid_argument("plan step must lie in [1, horizon]");
  }
  const Matrix& pred = forecast.steps[static_cast<std::size_t>(step - 1)];
  const auto congested = [&](int node) { return pred(static_cast<std::size_t>(node), 0) > cfg.theta ? 1.0 : 0.0; };
  std::vector<std::optional<double>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    const double se_u = pred(static_cast<std::size_t>(e.u), static_cast<std::size_t>(1 + e.channel_u));
    const double se_v = pred(static_cast<std::size_t>(e.v), static_cast<std::size_t>(1 + e.channel_v));
    const double se = 0.5 * (se_u + se_v) * forecast.se_max;
    if (!(se >= cfg.se_floor)) {
      out.emplace_back();
      continue;
    }
    out.emplace_back(1.0 / std::max(se, cfg.se_floor) + cfg.penalty * (congested(e.u) + congested(e.v)));
  }
  return out;
}

std::optional<RoutePlan> plan_route(const GlobalView& view, const std::string& shell_id, int src, int dst, int step,
                                    const ControllerConfig& cfg) {
  const ShellForecast& f = view.shell(shell_id);
  const int n = f.shell.size();
  if (src < 0 || dst < 0 || src >= n || dst >= n) throw std::invalid_argument("plan_route: node out of range");
  if (src == dst) throw std::invalid_argument("plan_route: source equals destination");
  const auto edges = build_plus_grid(f.shell);
  const auto weights = route_weights(f, edges, step, cfg);
  WeightedGraph g(n);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (weights[i]) g.add_edge(edges[i].u, edges[i].v, *weights[i]);
  }
  auto path = dijkstra(g, src, dst);
  if (!path) return std::nullopt;
  return RoutePlan{shell_id, src, dst, step, std::move(path->nodes), path->cost};
}

namespace {

std::pair<std::size_t, std::size_t> group_columns(ChannelGroup group) {
  switch (group) {
    case ChannelGroup::queue: return {0, 1};
    case ChannelGroup::se: return {1, features::kDynamicCount};
    case ChannelGroup::all: break;
  }
  return {0, features::kDynamicCount};
}

}  // namespace

void accumulate(Metrics& into, std::span<const Matrix> predictions, std::span<const Matrix> truth,
                ChannelGroup group) {
  if (predictions.size() != truth.size()) throw std::invalid_argument("metrics: horizon mismatch");
  if (into.per_horizon.size() < predictions.size()) into.per_horizon.resize(predictions.size(), 0.0);
  const auto [c0, c1] = group_columns(group);
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const Matrix& p = predictions[k];
    const Matrix& t = truth[k];
    if (p.rows() != t.rows() || p.cols() != t.cols() || p.cols() < c1) {
      throw std::invalid_argument("metrics: shape mismatch at step " + std::to_string(k + 1));
    }
    double sse = 0.0;
    for (std::size_t r = 0; r < p.rows(); ++r) {
      for (std::size_t c = c0; c < c1; ++c) {
        const double d = p(r, c) - t(r, c);
        sse += d * d;
      }
    }
    into.per_horizon[k] += sse;
    into.sse += sse;
  }
}

Metrics metrics(std::span<const Matrix> predictions, std::span<const Matrix> truth, ChannelGroup group) {
  Metrics m;
  accumulate(m, predictions, truth, group);
  return m;
}

std::optional<double> improvement_pct(double sse_base, double sse_model) {
  if (sse_base == 0.0) {
    if (sse_model == 0.0) return 0.0;
    return std::nullopt;
  }
  return 100.0 * (sse_base - sse_model) / sse_base;
}

void write_global_view(const GlobalView& view, std::ostream& os) {
  detail::Json shells = detail::Json::array();
  for (const auto& s : view.shells) {
    detail::Json steps = detail::Json::array();
    for (const auto& m : s.steps) steps.push_back(detail::to_json(m));
    shells.push_back({{"shell_id", s.shell_id},
                      {"shell", detail::to_json(s.shell)},
                      {"se_max", s.se_max},
                      {"t0", s.t0},
                      {"steps", std::move(steps)}});
  }
  detail::write_json(os, detail::Json{{"schema", 1},
                                      {"kind", "global_view"},
                                      {"horizon", view.horizon},
                                      {"generated_at", view.generated_at},
                                      {"shells", std::move(shells)}});
  os << '\n';
}

void write_flags(std::span<const CongestionFlag> flags, double theta, std::ostream& os) {
  detail::Json list = detail::Json::array();
  for (const auto& f : flags) {
    list.push_back(
        {{"shell_id", f.shell_id}, {"satellite", f.satellite}, {"first_step", f.first_step}, {"peak", f.peak}});
  }
  detail::write_json(os, detail::Json{{"schema", 1}, {"kind", "congestion_flags"}, {"theta", theta},
                                      {"flags", std::move(list)}});
  os << '\n';
}

void write_route(const std::optional<RoutePlan>& plan, const std::string& shell_id, int src, int dst, int step,
                 std::ostream& os) {
  detail::Json j{{"schema", 1}, {"kind", "route_plan"}, {"shell_id", shell_id},
                 {"source", src},  {"destination", dst},  {"step", step},
                 {"reachable", plan.has_value()}};
  if (plan) {
    j["nodes"] = plan->nodes;
    j["cost"] = plan->cost;
  }
  detail::write_json(os, j);
  os << '\n';
}

}  // namespace shellkoop
