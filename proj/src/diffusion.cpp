#include "advnet/diffusion.hpp"

#include <algorithm>
#include <ostream>
#include <queue>

namespace advnet {

double sample_edge_time(const VectorRef& w, const VectorRef& x, double u) {
  if (w.size() != x.size()) throw ValidationError("sample_edge_time: dimension mismatch");
  const double rate = w.dot(x);
  if (!(rate > 0.0)) throw ValidationError("sample_edge_time: degenerate content (w.x <= 0)");
  return rayleigh_time(rate, u);
}

double sample_edge_time(const VectorRef& w, const VectorRef& x, Engine& rng) {
  return sample_edge_time(w, x, uniform01(rng));
}

ContentContext prepare_content(const Network& network, const DetectorBank& bank, const VectorRef& x) {
  if (x.size() != network.n_features()) {
    throw ValidationError("content has " + std::to_string(x.size()) + " features, network edges have " +
                          std::to_string(network.n_features()));
  }
  if (bank.node_count() != network.node_count()) throw ValidationError("detector bank size does not match network");
  ContentContext ctx;
  ctx.edge_rates = network.edge_params() * x;
  ctx.blocked.resize(static_cast<std::size_t>(network.node_count()));
  for (NodeId v = 0; v < network.node_count(); ++v) {
    ctx.blocked[static_cast<std::size_t>(v)] = !passes(bank, v, x);
  }
  return ctx;
}

namespace {

inline double edge_delay(const ContentContext& content, EdgeId e, const KeyedStream& stream) {
  const double rate = content.edge_rates(e);
  if (!(rate > 0.0)) return kInfiniteTime;
  return rayleigh_time(rate, stream.uniform(static_cast<std::uint64_t>(e)));
}

using QueueItem = std::pair<double, NodeId>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

}  // namespace

CascadeSample simulate_cascade(const Network& network, const DetectorBank& bank, NodeId seed_node,
                               const VectorRef& x, double horizon, const KeyedStream& stream) {
  if (seed_node < 0 || seed_node >= network.node_count()) throw ValidationError("seed node out of range");
  const ContentContext content = prepare_content(network, bank, x);
  const auto n = static_cast<std::size_t>(network.node_count());
  CascadeSample out{seed_node, std::vector<double>(n, kInfiniteTime), std::vector<char>(n, 0), {}};
  std::vector<char> settled(n, 0);
  MinQueue queue;
  out.arrival[static_cast<std::size_t>(seed_node)] = 0.0;
  queue.push({0.0, seed_node});
  while (!queue.empty()) {
    const auto [t, u] = queue.top();
    queue.pop();
    const auto ui = static_cast<std::size_t>(u);
    if (settled[ui]) continue;
    settled[ui] = 1;
    if (t > horizon) continue;
    if (content.blocked[ui]) {
      out.blocked[ui] = 1;
      continue;
    }
    out.affected.push_back(u);
    for (const auto& nb : network.neighbors(u)) {
      const auto vi = static_cast<std::size_t>(nb.node);
      if (settled[vi]) continue;
      const double candidate = t + edge_delay(content, nb.edge, stream);
      if (candidate < out.arrival[vi]) {
        out.arrival[vi] = candidate;
        queue.push({candidate, nb.node});
      }
    }
  }
  std::sort(out.affected.begin(), out.affected.end());
  return out;
}

int cascade_size(const Network& network, const ContentContext& content, NodeId seed_node, double horizon,
                 const KeyedStream& stream) {
  if (content.blocked[static_cast<std::size_t>(seed_node)]) return 0;
  const auto n = static_cast<std::size_t>(network.node_count());
  thread_local std::vector<double> arrival;
  thread_local std::vector<char> settled;
  arrival.assign(n, kInfiniteTime);
  settled.assign(n, 0);
  MinQueue queue;
  arrival[static_cast<std::size_t>(seed_node)] = 0.0;
  queue.push({0.0, seed_node});
  int affected = 0;
  while (!queue.empty()) {
    const auto [t, u] = queue.top();
    queue.pop();
    const auto ui = static_cast<std::size_t>(u);
    if (settled[ui]) continue;
    settled[ui] = 1;
    if (content.blocked[ui]) continue;
    ++affected;
    for (const auto& nb : network.neighbors(u)) {
      const auto vi = static_cast<std::size_t>(nb.node);
      if (settled[vi]) continue;
      const double candidate = t + edge_delay(content, nb.edge, stream);
      if (candidate <= horizon && candidate < arrival[vi]) {
        arrival[vi] = candidate;
        queue.push({candidate, nb.node});
      }
    }
  }
  return affected;
}

double estimate_influence(const Network& network, const ContentContext& content, NodeId seed_node, double horizon,
                          int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("estimate_influence: n_samples must be >= 1");
  if (seed_node < 0 || seed_node >= network.node_count()) throw ValidationError("seed node out of range");
  long total = 0;
  for (int s = 0; s < n_samples; ++s) {
    total += cascade_size(network, content, seed_node, horizon, cascade_stream(seed, static_cast<std::uint64_t>(s)));
  }
  return static_cast<double>(total) / n_samples;
}

double estimate_influence(const Network& network, const DetectorBank& bank, NodeId seed_node, const VectorRef& x,
                          double horizon, int n_samples, std::uint64_t seed) {
  return estimate_influence(network, prepare_content(network, bank, x), seed_node, horizon, n_samples, seed);
}

void write_cascade_trace(std::ostream& out, const CascadeSample& cascade, int sample_index, bool header) {
  if (header) out << "sample,node,arrival,blocked\n";
  for (std::size_t v = 0; v < cascade.arrival.size(); ++v) {
    if (cascade.arrival[v] == kInfiniteTime) continue;
    out << sample_index << ',' << v << ',' << cascade.arrival[v] << ',' << int(cascade.blocked[v]) << '\n';
  }
}

// ---------------------------------------------------------------------------

Vector PropagationTree::spread_direction() const {
  const Eigen::Index n = A.empty() ? 0 : A.front().cols();
  Vector a = Vector::Zero(n);
  for (std::size_t l = 1; l < A.size(); ++l) a += k[l] * A[l].colwise().sum().transpose();
  return a;
}

PropagationTree build_tree(const Network& network, NodeId root, const LayerWeights& weights) {
  if (root < 0 || root >= network.node_count()) throw ValidationError("build_tree: root out of range");
  const auto n = static_cast<std::size_t>(network.node_count());
  PropagationTree tree;
  tree.root = root;
  tree.depth.assign(n, -1);
  tree.parent_edge.assign(n, -1);
  tree.depth[static_cast<std::size_t>(root)] = 0;
  tree.layers.push_back({root});
  while (true) {
    const auto& frontier = tree.layers.back();
    const int next_depth = static_cast<int>(tree.layers.size());
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      for (const auto& nb : network.neighbors(u)) {
        if (tree.depth[static_cast<std::size_t>(nb.node)] < 0) {
          tree.depth[static_cast<std::size_t>(nb.node)] = next_depth;
          next.push_back(nb.node);
        }
      }
    }
    if (next.empty()) break;
    std::sort(next.begin(), next.end());
    tree.layers.push_back(std::move(next));
  }
  const auto n_features = network.n_features();
  tree.layer_edges.resize(tree.layers.size());
  tree.layer_parents.resize(tree.layers.size());
  tree.A.resize(tree.layers.size());
  tree.k.assign(tree.layers.size(), 0.0);
  tree.A[0].resize(0, n_features);
  for (std::size_t l = 1; l < tree.layers.size(); ++l) {
    const auto& layer = tree.layers[l];
    tree.A[l].resize(static_cast<Eigen::Index>(layer.size()), n_features);
    tree.k[l] = weights(static_cast<int>(l));
    for (std::size_t i = 0; i < layer.size(); ++i) {
      const NodeId v = layer[i];
      // neighbours are sorted by id, so the first one a hop closer is the lowest-index parent
      for (const auto& nb : network.neighbors(v)) {
        if (tree.depth[static_cast<std::size_t>(nb.node)] == static_cast<int>(l) - 1) {
          tree.parent_edge[static_cast<std::size_t>(v)] = nb.edge;
          tree.layer_edges[l].push_back(nb.edge);
          tree.layer_parents[l].push_back(nb.node);
          tree.A[l].row(static_cast<Eigen::Index>(i)) = network.edge_param(nb.edge);
          break;
        }
      }
    }
  }
  return tree;
}

std::vector<PropagationTree> build_forest(const Network& network, const LayerWeights& weights) {
  std::vector<PropagationTree> forest;
  forest.reserve(static_cast<std::size_t>(network.node_count()));
  for (NodeId v = 0; v < network.node_count(); ++v) forest.push_back(build_tree(network, v, weights));
  return forest;
}

double surrogate_spread(const PropagationTree& tree, const VectorRef& z) {
  double total = 0.0;
  for (std::size_t l = 1; l < tree.A.size(); ++l) total += tree.k[l] * (tree.A[l] * z).sum();
  return total;
}

}  // namespace advnet
