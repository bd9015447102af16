#include "advnet/network.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>

#include "advnet/rng.hpp"

namespace advnet {

namespace {

constexpr int kConnectivityRetries = 100;

std::vector<std::vector<Neighbor>> build_adjacency(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<Neighbor>> adj(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[static_cast<std::size_t>(edges[e].u)].push_back({edges[e].v, static_cast<EdgeId>(e)});
    adj[static_cast<std::size_t>(edges[e].v)].push_back({edges[e].u, static_cast<EdgeId>(e)});
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
  return adj;
}

std::vector<int> hop_distances(const Network& net, NodeId source) {
  std::vector<int> dist(static_cast<std::size_t>(net.node_count()), -1);
  std::queue<NodeId> q;
  dist[static_cast<std::size_t>(source)] = 0;
  q.push(source);
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (const auto& nb : net.neighbors(u)) {
      auto& d = dist[static_cast<std::size_t>(nb.node)];
      if (d < 0) {
        d = dist[static_cast<std::size_t>(u)] + 1;
        q.push(nb.node);
      }
    }
  }
  return dist;
}

}  // namespace

Network::Network(int node_count, std::vector<Edge> edges)
    : Network(node_count, std::move(edges), Matrix(0, 0)) {}

Network::Network(int node_count, std::vector<Edge> edges, Matrix edge_params)
    : node_count_(node_count) {
  if (node_count < 1) throw ValidationError("network needs at least one node");
  if (edge_params.cols() == 0) edge_params.resize(static_cast<Eigen::Index>(edges.size()), 0);
  if (edge_params.rows() != static_cast<Eigen::Index>(edges.size())) {
    throw ValidationError("edge parameter rows (" + std::to_string(edge_params.rows()) +
                          ") do not match edge count (" + std::to_string(edges.size()) + ")");
  }
  std::vector<std::size_t> order(edges.size());
  for (auto& e : edges) {
    if (e.u == e.v) throw ValidationError("self-loop at node " + std::to_string(e.u));
    if (e.u < 0 || e.v < 0 || e.u >= node_count || e.v >= node_count) {
      throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range");
    }
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
  edges_.reserve(edges.size());
  edge_params_.resize(edge_params.rows(), edge_params.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Edge& e = edges[order[i]];
    if (!edges_.empty() && edges_.back() == e) {
      throw ValidationError("duplicate edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
    }
    edges_.push_back(e);
    edge_params_.row(static_cast<Eigen::Index>(i)) = edge_params.row(static_cast<Eigen::Index>(order[i]));
  }
  if (edge_params_.size() > 0 &&
      (!edge_params_.allFinite() || edge_params_.minCoeff() < 0.0 || edge_params_.maxCoeff() > 1.0)) {
    throw ValidationError("edge parameters must lie in [0,1]");
  }
  if (!is_connected(node_count_, edges_)) throw ValidationError("network is not connected");
  adjacency_ = build_adjacency(node_count_, edges_);
}

std::optional<EdgeId> Network::find_edge(NodeId a, NodeId b) const {
  for (const auto& nb : neighbors(a)) {
    if (nb.node == b) return nb.edge;
  }
  return std::nullopt;
}

Network Network::with_edge_params(Matrix params) const {
  Network copy = *this;
  if (params.rows() != edge_count()) throw ValidationError("edge parameter rows do not match edge count");
  if (params.size() > 0 && (!params.allFinite() || params.minCoeff() < 0.0 || params.maxCoeff() > 1.0)) {
    throw ValidationError("edge parameters must lie in [0,1]");
  }
  copy.edge_params_ = std::move(params);
  return copy;
}

bool is_connected(int node_count, std::span<const Edge> edges) {
  // union-find
  std::vector<int> parent(static_cast<std::size_t>(node_count));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int components = node_count;
  for (const auto& e : edges) {
    const int a = find(e.u), b = find(e.v);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  return components == 1;
}

// ---------------------------------------------------------------------------
// Power-law configuration model

namespace {

std::vector<int> sample_power_law_degrees(int n, double exponent, Engine& rng) {
  const int kmax = n - 1;
  std::vector<double> cdf(static_cast<std::size_t>(kmax));
  double total = 0.0;
  for (int k = 1; k <= kmax; ++k) {
    total += std::pow(static_cast<double>(k), -exponent);
    cdf[static_cast<std::size_t>(k - 1)] = total;
  }
  std::vector<int> deg(static_cast<std::size_t>(n));
  for (auto& d : deg) {
    const double u = uniform01(rng) * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    d = 1 + static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), kmax - 1));
  }
  // Lift degree-1 nodes until a spanning tree fits in the stub budget.
  long sum = std::accumulate(deg.begin(), deg.end(), 0L);
  while (sum < 2L * (n - 1)) {
    std::vector<std::size_t> ones;
    for (std::size_t i = 0; i < deg.size(); ++i) {
      if (deg[i] == 1) ones.push_back(i);
    }
    if (ones.empty()) break;
    ++deg[ones[uniform_index(rng, ones.size())]];
    ++sum;
  }
  if (sum % 2 != 0) {
    std::vector<std::size_t> room;
    for (std::size_t i = 0; i < deg.size(); ++i) {
      if (deg[i] < kmax) room.push_back(i);
    }
    if (!room.empty()) {
      ++deg[room[uniform_index(rng, room.size())]];
    } else {
      --*std::max_element(deg.begin(), deg.end());
    }
  }
  return deg;
}

std::optional<std::vector<Edge>> realize_connected(const std::vector<int>& degrees, Engine& rng) {
  const int n = static_cast<int>(degrees.size());
  if (n == 1) return std::vector<Edge>{};
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  portable_shuffle(order.begin(), order.end(), rng);

  // Root: first node (in random order) able to branch.
  auto root_it = std::find_if(order.begin(), order.end(),
                              [&](NodeId v) { return degrees[static_cast<std::size_t>(v)] >= 2; });
  if (root_it == order.end()) root_it = order.begin();
  const NodeId root = *root_it;
  order.erase(root_it);

  std::vector<NodeId> branching, leaves;
  for (NodeId v : order) (degrees[static_cast<std::size_t>(v)] >= 2 ? branching : leaves).push_back(v);

  std::vector<NodeId> free_stubs(static_cast<std::size_t>(degrees[static_cast<std::size_t>(root)]), root);
  std::set<Edge> edge_set;
  std::vector<Edge> tree;
  std::size_t bi = 0, li = 0;
  while (bi < branching.size() || li < leaves.size()) {
    if (free_stubs.empty()) return std::nullopt;
    NodeId v;
    const std::size_t remaining_b = branching.size() - bi, remaining_l = leaves.size() - li;
    if (remaining_l == 0 || (free_stubs.size() == 1 && remaining_b > 0)) {
      v = branching[bi++];
    } else if (remaining_b == 0) {
      v = leaves[li++];
    } else {
      // Pick proportionally to how many of each class are left.
      v = uniform_index(rng, remaining_b + remaining_l) < remaining_b ? branching[bi++] : leaves[li++];
    }
    const auto s = uniform_index(rng, free_stubs.size());
    const NodeId u = free_stubs[s];
    free_stubs[s] = free_stubs.back();
    free_stubs.pop_back();
    Edge e{std::min(u, v), std::max(u, v)};
    edge_set.insert(e);
    tree.push_back(e);
    for (int k = 1; k < degrees[static_cast<std::size_t>(v)]; ++k) free_stubs.push_back(v);
  }

  // Pair leftover stubs uniformly.
  portable_shuffle(free_stubs.begin(), free_stubs.end(), rng);
  std::vector<Edge> extra, bad;
  for (std::size_t i = 0; i + 1 < free_stubs.size(); i += 2) {
    const NodeId a = free_stubs[i], b = free_stubs[i + 1];
    Edge e{std::min(a, b), std::max(a, b)};
    if (a == b || edge_set.count(e) != 0) {
      bad.push_back(e);
    } else {
      edge_set.insert(e);
      extra.push_back(e);
    }
  }

  // Rewire each bad pair (a,b) against a random extra edge (c,d) into
  // (a,c),(b,d) or (a,d),(b,c); tree edges are never touched.
  for (const Edge& e : bad) {
    bool fixed = false;
    for (int attempt = 0; attempt < 50 && !extra.empty() && !fixed; ++attempt) {
      const auto idx = uniform_index(rng, extra.size());
      const Edge other = extra[idx];
      const bool flip = uniform_index(rng, 2) == 1;
      const NodeId c = flip ? other.v : other.u, d = flip ? other.u : other.v;
      const Edge e1{std::min(e.u, c), std::max(e.u, c)}, e2{std::min(e.v, d), std::max(e.v, d)};
      if (e1.u == e1.v || e2.u == e2.v || e1 == e2 || edge_set.count(e1) || edge_set.count(e2)) continue;
      edge_set.erase(other);
      edge_set.insert(e1);
      edge_set.insert(e2);
      extra[idx] = e1;
      extra.push_back(e2);
      fixed = true;
    }
  }
  tree.insert(tree.end(), extra.begin(), extra.end());
  return tree;
}

}  // namespace

Network generate_ba(int n_nodes, double exponent, std::uint64_t seed) {
  if (n_nodes < 4) throw ValidationError("generate_ba: n_nodes must be >= 4");
  if (!(exponent >= 2.0 && exponent <= 3.5)) throw ValidationError("generate_ba: exponent must lie in [2.0, 3.5]");
  for (int attempt = 0; attempt < kConnectivityRetries; ++attempt) {
    Engine rng(derive_seed(seed, 0xBA, static_cast<std::uint64_t>(attempt)));
    const auto degrees = sample_power_law_degrees(n_nodes, exponent, rng);
    auto edges = realize_connected(degrees, rng);
    if (edges && is_connected(n_nodes, *edges)) return Network(n_nodes, std::move(*edges));
  }
  throw std::runtime_error("generate_ba: no connected graph after " + std::to_string(kConnectivityRetries) +
                           " attempts (n=" + std::to_string(n_nodes) + ", r=" + std::to_string(exponent) + ")");
}

// ---------------------------------------------------------------------------
// Watts-Strogatz

Network generate_ws(int n_nodes, int ring_degree, double rewire_p, std::uint64_t seed) {
  if (ring_degree < 2 || ring_degree % 2 != 0 || ring_degree >= n_nodes) {
    throw ValidationError("generate_ws: k must be even with 2 <= k < n_nodes");
  }
  if (!(rewire_p >= 0.0 && rewire_p <= 1.0)) throw ValidationError("generate_ws: rewire_p must lie in [0,1]");
  const int half = ring_degree / 2;
  for (int attempt = 0; attempt < kConnectivityRetries; ++attempt) {
    Engine rng(derive_seed(seed, 0x5757, static_cast<std::uint64_t>(attempt)));
    std::vector<std::set<NodeId>> adj(static_cast<std::size_t>(n_nodes));
    for (NodeId i = 0; i < n_nodes; ++i) {
      for (int j = 1; j <= half; ++j) {
        const NodeId t = (i + j) % n_nodes;
        adj[static_cast<std::size_t>(i)].insert(t);
        adj[static_cast<std::size_t>(t)].insert(i);
      }
    }
    for (int j = 1; j <= half; ++j) {
      for (NodeId i = 0; i < n_nodes; ++i) {
        if (uniform01(rng) >= rewire_p) continue;
        const NodeId old = (i + j) % n_nodes;
        auto& ai = adj[static_cast<std::size_t>(i)];
        if (!ai.count(old) || static_cast<int>(ai.size()) >= n_nodes - 1) continue;
        NodeId w;
        do {
          w = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(n_nodes)));
        } while (w == i || ai.count(w));
        ai.erase(old);
        adj[static_cast<std::size_t>(old)].erase(i);
        ai.insert(w);
        adj[static_cast<std::size_t>(w)].insert(i);
      }
    }
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n_nodes; ++i) {
      for (NodeId t : adj[static_cast<std::size_t>(i)]) {
        if (i < t) edges.push_back({i, t});
      }
    }
    if (is_connected(n_nodes, edges)) return Network(n_nodes, std::move(edges));
  }
  throw std::runtime_error("generate_ws: no connected graph after " + std::to_string(kConnectivityRetries) +
                           " attempts");
}

double calibrate_ws(int n_nodes, int ring_degree, double target_path, double target_clustering, int n_seeds,
                    std::uint64_t seed) {
  double best_p = 0.0, best_cost = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= 120; ++step) {
    const double p = 0.005 * step;
    double path = 0.0, clust = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
      const Network g = generate_ws(n_nodes, ring_degree, p, derive_seed(seed, static_cast<std::uint64_t>(s)));
      path += mean_shortest_path(g);
      clust += average_clustering(g);
    }
    path /= n_seeds;
    clust /= n_seeds;
    const double rp = (path - target_path) / target_path, rc = (clust - target_clustering) / target_clustering;
    const double cost = rp * rp + rc * rc;
    if (cost < best_cost) {
      best_cost = cost;
      best_p = p;
    }
  }
  return best_p;
}

Network sample_edge_params(const Network& network, int n_features, std::uint64_t seed) {
  if (n_features < 1) throw ValidationError("sample_edge_params: n_features must be >= 1");
  Engine rng(derive_seed(seed, 0xED6E));
  Matrix params(network.edge_count(), n_features);
  for (Eigen::Index e = 0; e < params.rows(); ++e) {
    for (Eigen::Index f = 0; f < params.cols(); ++f) params(e, f) = uniform01(rng);
  }
  return network.with_edge_params(std::move(params));
}

// ---------------------------------------------------------------------------
// Statistics

std::vector<int> degree_sequence(const Network& network) {
  std::vector<int> deg(static_cast<std::size_t>(network.node_count()));
  for (NodeId v = 0; v < network.node_count(); ++v) deg[static_cast<std::size_t>(v)] = network.degree(v);
  return deg;
}

double mean_shortest_path(const Network& network) {
  const int n = network.node_count();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (NodeId s = 0; s < n; ++s) {
    for (int d : hop_distances(network, s)) total += d;
  }
  return total / (static_cast<double>(n) * (n - 1));
}

double average_clustering(const Network& network) {
  const int n = network.node_count();
  double total = 0.0;
  for (NodeId v = 0; v < n; ++v) {
    const auto nbs = network.neighbors(v);
    const auto k = nbs.size();
    if (k < 2) continue;
    int links = 0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        if (network.find_edge(nbs[a].node, nbs[b].node)) ++links;
      }
    }
    total += 2.0 * links / (static_cast<double>(k) * (k - 1));
  }
  return total / n;
}

double fit_power_law_exponent(std::span<const int> degrees) {
  double log_sum = 0.0;
  std::size_t count = 0;
  for (int k : degrees) {
    if (k >= 1) {
      log_sum += std::log(static_cast<double>(k));
      ++count;
    }
  }
  if (count == 0) throw ValidationError("fit_power_law_exponent: no positive degrees");
  const double n = static_cast<double>(count);
  auto neg_loglik = [&](double r) { return r * log_sum + n * std::log(std::riemann_zeta(r)); };
  // Golden-section search; the log-likelihood is concave in r.
  double lo = 1.0001, hi = 8.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = neg_loglik(c), fd = neg_loglik(d);
  while (hi - lo > 1e-9) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = neg_loglik(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = neg_loglik(d);
    }
  }
  return 0.5 * (lo + hi);
}

GraphStats graph_stats(const Network& network) {
  const auto deg = degree_sequence(network);
  return {mean_shortest_path(network), average_clustering(network), fit_power_law_exponent(deg)};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(std::string_view token, std::size_t line, const char* what) {
  T value{};
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw ParseError(std::string("expected ") + what + ", got '" + std::string(token) + "'", line);
  }
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

void write_network(std::ostream& out, const Network& network) {
  out << "nodes " << network.node_count() << " features " << network.n_features() << '\n';
  for (EdgeId e = 0; e < network.edge_count(); ++e) {
    const auto& edge = network.edges()[static_cast<std::size_t>(e)];
    out << edge.u << ' ' << edge.v;
    for (Eigen::Index f = 0; f < network.edge_params().cols(); ++f) {
      out << ' ' << format_double(network.edge_params()(e, f));
    }
    out << '\n';
  }
}

Network read_network(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::pair<int, int>> header;
  std::vector<Edge> edges;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto tokens = split_ws(std::string_view(line).substr(0, hash));
    if (tokens.empty()) continue;
    if (!header) {
      if (tokens.size() != 4 || tokens[0] != "nodes" || tokens[2] != "features") {
        throw ParseError("expected header 'nodes N features n'", line_no);
      }
      const int n = parse_number<int>(tokens[1], line_no, "node count");
      const int f = parse_number<int>(tokens[3], line_no, "feature count");
      if (n < 1 || f < 0) throw ParseError("node count must be >= 1 and feature count >= 0", line_no);
      header = {n, f};
      continue;
    }
    const auto [n, f] = *header;
    if (tokens.size() != static_cast<std::size_t>(2 + f)) {
      throw ParseError("expected " + std::to_string(2 + f) + " fields, got " + std::to_string(tokens.size()), line_no);
    }
    const NodeId u = parse_number<int>(tokens[0], line_no, "node id");
    const NodeId v = parse_number<int>(tokens[1], line_no, "node id");
    if (u < 0 || v < 0 || u >= n || v >= n) throw ParseError("node id out of range", line_no);
    edges.push_back({u, v});
    for (int k = 0; k < f; ++k) {
      const double w = parse_number<double>(tokens[static_cast<std::size_t>(2 + k)], line_no, "edge parameter");
      if (!(w >= 0.0 && w <= 1.0)) {
        throw ValidationError("line " + std::to_string(line_no) + ": edge parameter " + std::string(tokens[2 + k]) +
                              " outside [0,1]");
      }
      values.push_back(w);
    }
  }
  if (!header) throw ParseError("missing header 'nodes N features n'", line_no);
  const auto [n, f] = *header;
  Matrix params(static_cast<Eigen::Index>(edges.size()), f);
  for (Eigen::Index e = 0; e < params.rows(); ++e) {
    for (Eigen::Index k = 0; k < f; ++k) params(e, k) = values[static_cast<std::size_t>(e * f + k)];
  }
  return Network(n, std::move(edges), std::move(params));
}

void save_network(const Network& network, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_network(out, network);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_network(in);
}

}  // namespace advnet
