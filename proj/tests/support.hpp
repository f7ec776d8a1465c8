#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "shellkoop/common.hpp"
#include "shellkoop/nn.hpp"
#include "shellkoop/orbits.hpp"
#include "shellkoop/topology.hpp"
#include "shellkoop/traffic.hpp"

namespace testing {

inline shellkoop::ShellConfig toy_shell(int planes = 3, int slots = 4, int phasing = 0) {
  shellkoop::ShellConfig s;
  s.num_planes = planes;
  s.sats_per_plane = slots;
  s.phasing = phasing;
  return s;
}

inline shellkoop::nn::Matrix random_matrix(std::size_t r, std::size_t c, shellkoop::Rng& rng, double scale = 1.0) {
  shellkoop::nn::Matrix m(r, c);
  for (auto& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

/// perm[i] = old index placed at new position i.
inline std::vector<int> random_permutation(int n, shellkoop::Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[static_cast<std::size_t>(i)], p[rng.below(static_cast<std::uint64_t>(i + 1))]);
  return p;
}

inline shellkoop::nn::Matrix permute_rows(const shellkoop::nn::Matrix& m, const std::vector<int>& perm) {
  shellkoop::nn::Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(static_cast<std::size_t>(perm[i]), j);
  }
  return out;
}

inline shellkoop::nn::Matrix permute_both(const shellkoop::nn::Matrix& a, const std::vector<int>& perm) {
  shellkoop::nn::Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(i, j) = a(static_cast<std::size_t>(perm[i]), static_cast<std::size_t>(perm[j]));
    }
  }
  return out;
}

/// Relabels a snapshot's nodes: new node i is old node perm[i].
inline shellkoop::GraphSnapshot permute_snapshot(const shellkoop::GraphSnapshot& s, const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  shellkoop::GraphSnapshot out = s;
  out.features = permute_rows(s.features, perm);
  for (std::size_t i = 0; i < perm.size(); ++i) out.mask[i] = s.mask[static_cast<std::size_t>(perm[i])];
  for (auto& e : out.edges) {
    e.u = inv[static_cast<std::size_t>(e.u)];
    e.v = inv[static_cast<std::size_t>(e.v)];
  }
  return out;
}

inline shellkoop::Dataset toy_dataset(std::size_t steps = 30, std::uint64_t seed = 1) {
  shellkoop::TrafficConfig tc;
  tc.seed = seed;
  return shellkoop::generate_dataset(toy_shell(), tc, shellkoop::LinkBudget{}, steps, 0.8);
}

}  // namespace testing
