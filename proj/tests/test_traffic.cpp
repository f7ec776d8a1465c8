#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "shellkoop/traffic.hpp"
#include "support.hpp"

using namespace shellkoop;
using doctest::Approx;

namespace {

GraphSnapshot flat_snapshot(const ShellConfig& s, double t, double q = 0.0) {
  return snapshot(s, t, std::vector<double>(static_cast<std::size_t>(s.size()), q), 1000.0, LinkBudget{});
}

double total_active_se(const GraphSnapshot& snap, int node) {
  double sum = 0.0;
  for (const auto& e : snap.edges) {
    if (e.active && (e.u == node || e.v == node)) sum += e.spectral_efficiency;
  }
  return sum;
}

}  // namespace

TEST_CASE("great-circle distance") {
  CHECK(great_circle_deg(0, 0, 0, 90) == Approx(90.0));
  CHECK(great_circle_deg(90, 0, -90, 0) == Approx(180.0));
  CHECK(great_circle_deg(10, 170, 10, -170) == great_circle_deg(10, -170, 10, 170));
  CHECK(great_circle_deg(45, 45, 45, 45) == 0.0);
}

TEST_CASE("arrival rate") {
  TrafficConfig cfg;
  cfg.hotspots.clear();
  CHECK(arrival_rate(12.0, 34.0, cfg) == 2.0);

  cfg.hotspots = {Hotspot{10.0, 20.0, 30.0, 12.0}};
  CHECK(arrival_rate(10.0, 20.0, cfg) == Approx(32.0));
  // A point sigma degrees away along the meridian.
  CHECK(arrival_rate(22.0, 20.0, cfg) == Approx(2.0 + 30.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(std::exp(-0.5) == Approx(0.6065).epsilon(1e-4));
}

TEST_CASE("traffic config validation") {
  TrafficConfig c;
  c.dt_s = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrafficConfig{};
  c.hotspots[1].width_deg = 0.0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "traffic.hotspots[1].width_deg");
  }
}

TEST_CASE("step_queues edge cases") {
  const ShellConfig s = testing::toy_shell();
  const GraphSnapshot snap = flat_snapshot(s, 0.0);
  TrafficConfig cfg;
  cfg.hotspots.clear();
  cfg.noise_std = 0.0;
  Rng rng(1);

  cfg.base_rate = 0.0;
  cfg.drain_coeff = 0.0;
  auto q = step_queues(std::vector<double>(12, 0.0), snap, cfg, rng);
  for (double v : q) CHECK(v == 0.0);

  cfg.base_rate = 5.0;
  q = step_queues(std::vector<double>(12, 1000.0), snap, cfg, rng);
  for (double v : q) CHECK(v == 1000.0);

  // Arrivals exactly balance the drain of node 0.
  cfg.drain_coeff = 0.1;
  cfg.base_rate = 0.1 * total_active_se(snap, 0);
  q = step_queues(std::vector<double>(12, 400.0), snap, cfg, rng);
  CHECK(q[0] == Approx(400.0).epsilon(1e-12));

  CHECK_THROWS(step_queues(std::vector<double>(12, -1.0), snap, cfg, rng));
  CHECK_THROWS(step_queues(std::vector<double>(11, 1.0), snap, cfg, rng));
}

TEST_CASE("step_queues follows the update rule") {
  const ShellConfig s = testing::toy_shell(3, 5);
  std::vector<double> q0(15);
  for (std::size_t i = 0; i < 15; ++i) q0[i] = 30.0 * static_cast<double>(i);
  const GraphSnapshot snap = snapshot(s, 500.0, q0, 1000.0, LinkBudget{});
  TrafficConfig cfg;
  cfg.noise_std = 2.0;
  Rng a(42), b(42);
  const auto q1 = step_queues(q0, snap, cfg, a);
  const auto pos = propagate_shell(s, 500.0);
  for (int i = 0; i < 15; ++i) {
    const auto& g = pos[static_cast<std::size_t>(i)].geo;
    const double expect = std::clamp(q0[static_cast<std::size_t>(i)] + arrival_rate(g.lat_deg, g.lon_deg, cfg) +
                                         b.normal(0.0, 2.0) - cfg.drain_coeff * total_active_se(snap, i),
                                     0.0, 1000.0);
    CHECK(q1[static_cast<std::size_t>(i)] == Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("generate_dataset: counts, spacing, bounds, determinism") {
  const Dataset ds = testing::toy_dataset(50);
  CHECK(ds.size() == 50);
  CHECK(ds.split == 40);
  CHECK(ds.train().size() == 40);
  CHECK(ds.validation().size() == 10);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    CHECK(ds.snapshots[k].t == Approx(60.0 * static_cast<double>(k)));
    for (std::size_t i = 0; i < 12; ++i) {
      const double q = ds.snapshots[k].features(i, features::kQueue);
      CHECK(q >= 0.0);
      CHECK(q <= 1.0);
    }
  }
  for (std::size_t i = 0; i < 12; ++i) CHECK(ds.snapshots[0].features(i, features::kQueue) == Approx(0.1));
  CHECK(testing::toy_dataset(50) == ds);
  CHECK_FALSE(testing::toy_dataset(50, 2) == ds);
  CHECK_NOTHROW(ds.validate());

  const Dataset desk = generate_dataset(ShellConfig{}, TrafficConfig{}, LinkBudget{}, 600, 0.8);
  CHECK(desk.train().size() == 480);
  CHECK(desk.validation().size() == 120);

  CHECK_THROWS_AS(generate_dataset(ShellConfig{}, TrafficConfig{}, LinkBudget{}, 9, 0.8), ConfigError);
  CHECK_THROWS_AS(generate_dataset(ShellConfig{}, TrafficConfig{}, LinkBudget{}, 100, 1.0), ConfigError);
}

TEST_CASE("pure drain decays every queue monotonically to zero") {
  TrafficConfig cfg;
  cfg.hotspots.clear();
  cfg.noise_std = 0.0;
  cfg.base_rate = 0.0;
  cfg.drain_coeff = 0.5;
  const Dataset ds = generate_dataset(ShellConfig{}, cfg, LinkBudget{}, 40, 0.5);
  for (std::size_t i = 0; i < 96; ++i) {
    for (std::size_t k = 1; k < ds.size(); ++k) {
      CHECK(ds.snapshots[k].features(i, features::kQueue) <= ds.snapshots[k - 1].features(i, features::kQueue));
    }
    CHECK(ds.snapshots.back().features(i, features::kQueue) == 0.0);
  }
}

TEST_CASE("desk calibration: mean queue utilization near half the buffer") {
  const Dataset ds = generate_dataset(ShellConfig{}, TrafficConfig{}, LinkBudget{}, 600, 0.8);
  double sum = 0.0;
  for (const auto& s : ds.snapshots) {
    for (std::size_t i = 0; i < 96; ++i) sum += s.features(i, features::kQueue);
  }
  const double mean = sum / (600.0 * 96.0);
  CHECK(mean > 0.4);
  CHECK(mean < 0.6);
}

TEST_CASE("drivers repeat with the orbital period in the inertial frame") {
  // Arrivals rotate with the Earth, so only a hotspot-free configuration (and
  // the link state) repeats exactly with T.
  const ShellConfig s;
  const double period = orbital_period(s);
  const GraphSnapshot a = flat_snapshot(s, 100.0);
  const GraphSnapshot b = flat_snapshot(s, 100.0 + period);
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    CHECK(a.edges[e].active == b.edges[e].active);
    CHECK(std::abs(a.edges[e].spectral_efficiency - b.edges[e].spectral_efficiency) < 1e-9);
  }
}

TEST_CASE("noise-free hotspot-free queues settle into an orbit-periodic cycle") {
  const ShellConfig s;
  TrafficConfig cfg;
  cfg.hotspots.clear();
  cfg.noise_std = 0.0;
  cfg.drain_coeff = 0.05;
  cfg.base_rate = 1.5;  // above the weakest drain, below every node's orbit-mean drain
  cfg.dt_s = orbital_period(s) / 96.0;
  const Dataset ds = generate_dataset(s, cfg, LinkBudget{}, 600, 0.8);
  double drift = 0.0, peak = 0.0;
  for (std::size_t k = 300; k + 96 < ds.size(); ++k) {
    for (std::size_t i = 0; i < 96; ++i) {
      peak = std::max(peak, ds.snapshots[k].features(i, features::kQueue));
      drift = std::max(drift, std::abs(ds.snapshots[k].features(i, features::kQueue) -
                                       ds.snapshots[k + 96].features(i, features::kQueue)));
    }
  }
  CHECK(peak > 0.0);
  CHECK(drift * 1000.0 < 10.0);  // below B / 100
}
