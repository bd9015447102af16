#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "advnet/detector.hpp"
#include "advnet/network.hpp"
#include "advnet/rng.hpp"
#include "advnet/types.hpp"

namespace advnet {

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// Rayleigh inverse CDF with 1/gamma^2 = rate: t = sqrt(-2 ln(1-u) / rate).
template <class Scalar>
Scalar rayleigh_time(Scalar rate, Scalar u) {
  using std::log;
  using std::sqrt;
  return sqrt(Scalar(-2) * log(Scalar(1) - u) / rate);
}

/// Transmission delay for content x over an edge with parameters w; the
/// rate w.x must be positive.
double sample_edge_time(const VectorRef& w, const VectorRef& x, double u);
double sample_edge_time(const VectorRef& w, const VectorRef& x, Engine& rng);

/// Edge delays of one cascade: uniform for edge e is drawn from the
/// (master seed, sample index) stream at counter e.
inline KeyedStream cascade_stream(std::uint64_t master_seed, std::uint64_t sample_index) {
  return KeyedStream(derive_seed(master_seed, sample_index, 0xCA5CADE));
}

/// Per-content quantities reused by every cascade of that content.
struct ContentContext {
  Vector edge_rates;          // w_e . x per edge
  std::vector<char> blocked;  // detector at node flags x
};

ContentContext prepare_content(const Network& network, const DetectorBank& bank, const VectorRef& x);

struct CascadeSample {
  NodeId seed;
  std::vector<double> arrival;  // +inf when never reached
  std::vector<char> blocked;    // reached within T and flagged
  std::vector<NodeId> affected; // ascending node id
};

/// Dijkstra over freshly keyed edge delays. A node reached within T whose
/// detector flags x is blocked: not affected, does not retransmit. A flagged
/// seed yields an empty cascade. Zero-rate edges never transmit.
CascadeSample simulate_cascade(const Network& network, const DetectorBank& bank, NodeId seed_node,
                               const VectorRef& x, double horizon, const KeyedStream& stream);

/// Affected-set size only; same semantics as simulate_cascade with a cutoff at T.
int cascade_size(const Network& network, const ContentContext& content, NodeId seed_node, double horizon,
                 const KeyedStream& stream);

/// Monte Carlo mean of the affected-set size over n_samples cascades.
double estimate_influence(const Network& network, const DetectorBank& bank, NodeId seed_node, const VectorRef& x,
                          double horizon, int n_samples, std::uint64_t seed);
double estimate_influence(const Network& network, const ContentContext& content, NodeId seed_node, double horizon,
                          int n_samples, std::uint64_t seed);

/// CSV rows `sample,node,arrival,blocked` for reached nodes.
void write_cascade_trace(std::ostream& out, const CascadeSample& cascade, int sample_index, bool header = true);

/// k_l = scale * exp(-decay * (l - 1)) for layer l >= 1.
struct LayerWeights {
  double scale = 1.0;
  double decay = 1.0;
  double operator()(int layer) const { return scale * std::exp(-decay * (layer - 1)); }
};

/// BFS layering from a root. Every non-root node keeps one parent edge (the
/// lowest-index neighbour one hop closer), so row i of A[l] is the parameter
/// vector of the parent edge of layers[l][i], and layers are sorted by id.
struct PropagationTree {
  NodeId root = 0;
  std::vector<std::vector<NodeId>> layers;       // layers[0] = {root}
  std::vector<std::vector<EdgeId>> layer_edges;  // parent edge per layer node; empty at l = 0
  std::vector<std::vector<NodeId>> layer_parents;
  std::vector<Matrix> A;                         // A[l] is N_l x n; A[0] is 0 x n
  std::vector<double> k;                         // k[l] for l >= 1; k[0] = 0
  std::vector<int> depth;                        // hop distance per node, -1 if unreachable
  std::vector<EdgeId> parent_edge;               // -1 at root

  int layer_count() const noexcept { return static_cast<int>(layers.size()); }
  /// Weight k of the layer holding `node` (0 for the root).
  double node_weight(NodeId node) const { return node == root ? 0.0 : k[static_cast<std::size_t>(depth[static_cast<std::size_t>(node)])]; }
  /// a = sum_l k_l A_l^T 1, the gradient of the surrogate spread.
  Vector spread_direction() const;
};

PropagationTree build_tree(const Network& network, NodeId root, const LayerWeights& weights = {});
std::vector<PropagationTree> build_forest(const Network& network, const LayerWeights& weights = {});

/// sum_l k_l 1^T A_l z
double surrogate_spread(const PropagationTree& tree, const VectorRef& z);

}  // namespace advnet
