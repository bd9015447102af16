#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "advnet/dataset.hpp"
#include "advnet/detector.hpp"
#include "advnet/network.hpp"
#include "advnet/rng.hpp"

namespace testing {

using namespace advnet;

inline Network path_graph(int n, int features = 0, std::uint64_t seed = 1) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  Network net(n, edges);
  return features > 0 ? sample_edge_params(net, features, seed) : net;
}

inline Network star_graph(int leaves, int features = 0, std::uint64_t seed = 1) {
  std::vector<Edge> edges;
  for (int i = 1; i <= leaves; ++i) edges.push_back({0, i});
  Network net(leaves + 1, edges);
  return features > 0 ? sample_edge_params(net, features, seed) : net;
}

inline Network complete_graph(int n, int features = 0, std::uint64_t seed = 1) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  }
  Network net(n, edges);
  return features > 0 ? sample_edge_params(net, features, seed) : net;
}

/// Random connected graph: a random tree plus `extra` random chords.
inline Network random_connected(int n, int extra, int features, std::uint64_t seed) {
  Engine rng(seed);
  std::vector<Edge> edges;
  for (int v = 1; v < n; ++v) edges.push_back({static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(v))), v});
  for (int t = 0; t < extra * 10 && extra > 0; ++t) {
    const auto a = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    const auto b = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    const Edge e{std::min(a, b), std::max(a, b)};
    bool dup = false;
    for (const auto& f : edges) dup = dup || (std::min(f.u, f.v) == e.u && std::max(f.u, f.v) == e.v);
    if (dup) continue;
    edges.push_back(e);
    if (static_cast<int>(edges.size()) >= n - 1 + extra) break;
  }
  return sample_edge_params(Network(n, edges), features, derive_seed(seed, 0xF));
}

inline Vector random_unit_box(Eigen::Index n, Engine& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform01(rng);
  return v;
}

inline LogisticModel random_model(Eigen::Index n, Engine& rng, double scale = 2.0) {
  LogisticModel m;
  m.weights = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) m.weights(i) = scale * (2.0 * uniform01(rng) - 1.0);
  m.bias = 0.5 * (2.0 * uniform01(rng) - 1.0);
  return m;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({1e-12, std::abs(a), std::abs(b)}); }

}  // namespace testing
