#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "advnet/types.hpp"

namespace advnet {

/// Undirected edge, stored with u < v.
struct Edge {
  NodeId u;
  NodeId v;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct Neighbor {
  NodeId node;
  EdgeId edge;
};

/// Connected simple undirected graph with one content-interaction vector w_e
/// per edge (row e of `edge_params()`, entries in [0,1]). A network with zero
/// features carries topology only.
class Network {
 public:
  /// Edges are canonicalized (u < v) and sorted; rows of `edge_params` follow
  /// the given edge order and are permuted along with it.
  Network(int node_count, std::vector<Edge> edges, Matrix edge_params);
  Network(int node_count, std::vector<Edge> edges);

  int node_count() const noexcept { return node_count_; }
  int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
  int n_features() const noexcept { return static_cast<int>(edge_params_.cols()); }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Matrix& edge_params() const noexcept { return edge_params_; }
  auto edge_param(EdgeId e) const { return edge_params_.row(e); }

  std::span<const Neighbor> neighbors(NodeId v) const {
    return {adjacency_[static_cast<std::size_t>(v)]};
  }
  int degree(NodeId v) const { return static_cast<int>(adjacency_[static_cast<std::size_t>(v)].size()); }
  std::optional<EdgeId> find_edge(NodeId a, NodeId b) const;

  /// Same topology, new parameter matrix (edge_count x n_features).
  Network with_edge_params(Matrix params) const;

  friend bool operator==(const Network& a, const Network& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_ &&
           a.edge_params_.rows() == b.edge_params_.rows() &&
           a.edge_params_.cols() == b.edge_params_.cols() && a.edge_params_ == b.edge_params_;
  }

 private:
  int node_count_;
  std::vector<Edge> edges_;
  Matrix edge_params_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

bool is_connected(int node_count, std::span<const Edge> edges);

/// Power-law configuration model with target exponent r in [2, 3.5].
/// Degrees are drawn from P(k) ~ k^-r on [1, n-1]; degree-1 nodes are lifted
/// to 2 while the degree sum is below 2(n-1). A random spanning tree is laid
/// over the stubs first, the remaining stubs are paired uniformly, and
/// self-loops/multi-edges are rewired by double-edge swaps (dropped if no
/// valid swap exists).
Network generate_ba(int n_nodes, double exponent, std::uint64_t seed);

/// Watts-Strogatz ring of n nodes, k nearest neighbours, rewiring
/// probability p. Re-drawn (up to 100 times) until connected.
Network generate_ws(int n_nodes, int ring_degree, double rewire_p, std::uint64_t seed);

/// Scan p over [0, 0.6] and return the value whose average statistics over
/// `n_seeds` graphs are closest (summed squared relative error) to the targets.
double calibrate_ws(int n_nodes, int ring_degree, double target_path, double target_clustering,
                    int n_seeds = 10, std::uint64_t seed = 0);

/// Assign an i.i.d. Uniform[0,1] vector of length n_features to every edge.
Network sample_edge_params(const Network& network, int n_features, std::uint64_t seed);

struct GraphStats {
  double mean_shortest_path;
  double clustering_coefficient;
  double fitted_exponent;
};

GraphStats graph_stats(const Network& network);
std::vector<int> degree_sequence(const Network& network);
double mean_shortest_path(const Network& network);
double average_clustering(const Network& network);

/// Discrete power-law MLE with k_min = 1: maximizes
/// -r * sum(ln k) - n * ln zeta(r) over r in (1, 8].
double fit_power_law_exponent(std::span<const int> degrees);

void write_network(std::ostream& out, const Network& network);
Network read_network(std::istream& in);
void save_network(const Network& network, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace advnet
