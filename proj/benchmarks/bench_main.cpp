#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "shellkoop/controller.hpp"
#include "shellkoop/experiment.hpp"
#include "shellkoop/gkae.hpp"
#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

using namespace shellkoop;

namespace {

const Dataset& desk() {
  static const Dataset ds = [] {
    ExperimentConfig c;
    c.total_steps = 60;
    return generate_dataset(c);
  }();
  return ds;
}

}  // namespace

static void BM_Snapshot(benchmark::State& state) {
  const ShellConfig s;
  const std::vector<double> queues(96, 100.0);
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(snapshot(s, t, queues, 1000.0, LinkBudget{}));
    t += 60.0;
  }
}
BENCHMARK(BM_Snapshot);

static void BM_Encode(benchmark::State& state) {
  const GkaeModel m(GkaeConfig{}, desk().shell, desk().buffer_B);
  for (auto _ : state) benchmark::DoNotOptimize(m.encode(desk().snapshots[10]));
}
BENCHMARK(BM_Encode);

static void BM_TrainWindow(benchmark::State& state) {
  GkaeModel m(GkaeConfig{}, desk().shell, desk().buffer_B);
  const auto window = std::span(desk().snapshots).subspan(0, 6);
  std::vector<nn::Matrix> adj, targets;
  for (const auto& s : window) {
    adj.push_back(normalized_adjacency(s));
    targets.push_back(s.dynamic_channels());
  }
  for (auto _ : state) benchmark::DoNotOptimize(m.loss(window, adj, targets, true));
}
BENCHMARK(BM_TrainWindow);

static void BM_ForecastAll(benchmark::State& state) {
  Controller ctl;
  const auto model = std::make_shared<const GkaeModel>(GkaeConfig{}, desk().shell, desk().buffer_B);
  for (int i = 0; i < state.range(0); ++i) ctl.register_shell("s" + std::to_string(i), desk().shell, model);
  for (int i = 0; i < state.range(0); ++i) ctl.ingest("s" + std::to_string(i), desk().snapshots[10]);
  for (auto _ : state) benchmark::DoNotOptimize(ctl.forecast_all(20));
}
BENCHMARK(BM_ForecastAll)->Arg(1)->Arg(4);

static void BM_PlanRoute(benchmark::State& state) {
  Controller ctl;
  ctl.register_shell("s", desk().shell, std::make_shared<const GkaeModel>(GkaeConfig{}, desk().shell, 1000.0));
  ctl.ingest("s", desk().snapshots[10]);
  const GlobalView view = ctl.forecast_all(20);
  for (auto _ : state) benchmark::DoNotOptimize(plan_route(view, "s", 0, 53, 10));
}
BENCHMARK(BM_PlanRoute);
BENCHMARK_MAIN();
