#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

#include "advnet/diffusion.hpp"
#include "support.hpp"

using namespace advnet;

namespace {

LogisticModel zero_model(Eigen::Index n) { return {Vector::Zero(n), 0.0}; }

DetectorBank open_bank(const Network& net) {
  return DetectorBank::uniform(zero_model(net.n_features()), net.node_count(), 1.0 - kThresholdClamp);
}

Network single_edge(double w) {
  Matrix params(1, 1);
  params << w;
  return Network(2, {{0, 1}}, params);
}

std::vector<int> hop_distances(const Network& net, NodeId root) {
  std::vector<int> dist(static_cast<std::size_t>(net.node_count()), -1);
  std::queue<NodeId> q;
  dist[static_cast<std::size_t>(root)] = 0;
  q.push(root);
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (const auto& e : net.edges()) {
      NodeId v = -1;
      if (e.u == u) v = e.v;
      if (e.v == u) v = e.u;
      if (v >= 0 && dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

}  // namespace

TEST_CASE("edge delay sampler: closed forms") {
  Vector w(1), x(1);
  w << 2.0;
  x << 1.0;
  CHECK(sample_edge_time(w, x, 0.5) == doctest::Approx(std::sqrt(std::log(2.0))).epsilon(1e-12));
  CHECK(sample_edge_time(w, x, 0.5) == doctest::Approx(0.8326).epsilon(1e-4));

  w << 1.0;
  const double u_at_one = 1.0 - std::exp(-0.5);
  CHECK(u_at_one == doctest::Approx(0.39347).epsilon(1e-5));
  CHECK(sample_edge_time(w, x, u_at_one) == doctest::Approx(1.0).epsilon(1e-12));

  Engine rng(42);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += sample_edge_time(w, x, rng);
  CHECK(std::abs(sum / 100000.0 - std::sqrt(std::numbers::pi / 2.0)) <= 0.01);

  w << 0.0;
  CHECK_THROWS_AS(sample_edge_time(w, x, 0.5), ValidationError);
  Vector wrong(2);
  wrong << 1.0, 1.0;
  CHECK_THROWS_AS(sample_edge_time(wrong, x, 0.5), ValidationError);
}

TEST_CASE("cascade blocking rules") {
  const Network star = testing::star_graph(6, 2);
  Vector x(2);
  x << 0.5, 0.5;
  const auto all = simulate_cascade(star, open_bank(star), 0, x, 1e9, cascade_stream(1, 0));
  CHECK(all.affected.size() == 7);
  CHECK(all.arrival[0] == 0.0);

  LogisticModel flagging{Vector::Constant(2, 5.0), 0.0};
  Vector thresholds = Vector::Constant(7, 1.0 - kThresholdClamp);
  thresholds(0) = 0.5;
  const auto none = simulate_cascade(star, DetectorBank(flagging, thresholds), 0, x, 1e9, cascade_stream(1, 0));
  CHECK(none.affected.empty());

  const Network path = testing::path_graph(2, 2);
  Vector t2(2);
  t2 << 1.0 - kThresholdClamp, 0.5;
  const auto seed_only = simulate_cascade(path, DetectorBank(flagging, t2), 0, x, 1e9, cascade_stream(1, 0));
  CHECK(seed_only.affected == std::vector<NodeId>{0});
  CHECK(seed_only.blocked[1] == 1);

  Vector short_x(1);
  short_x << 1.0;
  CHECK_THROWS_AS(simulate_cascade(path, DetectorBank(flagging, t2), 0, short_x, 1.0, cascade_stream(1, 0)),
                  ValidationError);
}

TEST_CASE("influence: single edge closed form, isolated node, bounds") {
  const Network edge = single_edge(1.0);
  Vector x(1);
  x << 1.0;
  const double sigma = estimate_influence(edge, open_bank(edge), 0, x, 1.0, 10000, 9);
  CHECK(std::abs(sigma - (2.0 - std::exp(-0.5))) <= 0.02);

  const Network lonely(1, {}, Matrix(0, 1));
  CHECK(estimate_influence(lonely, open_bank(lonely), 0, x, 1.0, 50, 1) == 1.0);

  const Network net = testing::random_connected(12, 6, 3, 4);
  Engine rng(8);
  for (int t = 0; t < 10; ++t) {
    const Vector c = testing::random_unit_box(3, rng);
    const LogisticModel m = testing::random_model(3, rng);
    const DetectorBank bank(m, testing::random_unit_box(12, rng));
    const double s = estimate_influence(net, bank, t % 12, c, 1.5, 200, static_cast<std::uint64_t>(t));
    CHECK(s >= 0.0);
    CHECK(s <= 12.0);
  }
  CHECK_THROWS_AS(estimate_influence(edge, open_bank(edge), 0, x, 1.0, 0, 1), ValidationError);
}

TEST_CASE("influence estimator concentrates around the closed form") {
  const Network edge = single_edge(1.0);
  Vector x(1);
  x << 1.0;
  const double p = 1.0 - std::exp(-0.5);
  const double sd = std::sqrt(p * (1.0 - p));
  const int n = 1000, reps = 300;
  int inside = 0;
  for (int r = 0; r < reps; ++r) {
    const double s = estimate_influence(edge, open_bank(edge), 0, x, 1.0, n, derive_seed(77, r));
    if (std::abs(s - (1.0 + p)) <= 3.0 * sd / std::sqrt(n)) ++inside;
  }
  CHECK(inside >= 0.99 * reps);
}

TEST_CASE("zero-rate edges never transmit") {
  const Network edge = single_edge(0.0);
  Vector x(1);
  x << 1.0;
  CHECK(estimate_influence(edge, open_bank(edge), 0, x, 1e9, 100, 3) == 1.0);
}

TEST_CASE("influence is monotone in thresholds and nested in the horizon") {
  const Network net = testing::random_connected(15, 10, 4, 21);
  Engine rng(2);
  for (int t = 0; t < 10; ++t) {
    const Vector x = testing::random_unit_box(4, rng);
    const LogisticModel m = testing::random_model(4, rng);
    Vector theta = testing::random_unit_box(15, rng);
    const DetectorBank low(m, theta);
    theta(static_cast<Eigen::Index>(t % 15)) = std::min(1.0, theta(t % 15) + 0.4);
    theta(static_cast<Eigen::Index>((t + 3) % 15)) = 1.0;
    const DetectorBank high(m, theta);
    const NodeId seed = (t * 7) % 15;
    CHECK(estimate_influence(net, high, seed, x, 1.0, 300, 5) >= estimate_influence(net, low, seed, x, 1.0, 300, 5));

    for (int s = 0; s < 20; ++s) {
      const auto stream = cascade_stream(99, static_cast<std::uint64_t>(s));
      const auto a = simulate_cascade(net, high, seed, x, 0.5, stream);
      const auto b = simulate_cascade(net, high, seed, x, 1.0, stream);
      const auto c = simulate_cascade(net, high, seed, x, 2.0, stream);
      CHECK(std::includes(b.affected.begin(), b.affected.end(), a.affected.begin(), a.affected.end()));
      CHECK(std::includes(c.affected.begin(), c.affected.end(), b.affected.begin(), b.affected.end()));
      const auto content = prepare_content(net, high, x);
      CHECK(cascade_size(net, content, seed, 1.0, stream) == static_cast<int>(b.affected.size()));
    }
  }
}

TEST_CASE("cascade arrivals satisfy triangle consistency") {
  const Network net = testing::random_connected(20, 15, 3, 33);
  Engine rng(4);
  const Vector x = testing::random_unit_box(3, rng);
  const DetectorBank bank(testing::random_model(3, rng), testing::random_unit_box(20, rng));
  const double T = 1.5;
  for (int s = 0; s < 30; ++s) {
    const auto stream = cascade_stream(5, static_cast<std::uint64_t>(s));
    const auto cascade = simulate_cascade(net, bank, s % 20, x, T, stream);
    if (cascade.affected.empty()) continue;
    CHECK(cascade.arrival[static_cast<std::size_t>(s % 20)] == 0.0);
    for (NodeId u : cascade.affected) {
      for (const auto& nb : net.neighbors(u)) {
        const double rate = net.edge_param(nb.edge).dot(x);
        const double t = rayleigh_time(rate, stream.uniform(static_cast<std::uint64_t>(nb.edge)));
        CHECK(cascade.arrival[static_cast<std::size_t>(nb.node)] <= cascade.arrival[static_cast<std::size_t>(u)] + t + 1e-12);
      }
    }
    for (std::size_t v = 0; v < cascade.arrival.size(); ++v) {
      const bool affected = std::binary_search(cascade.affected.begin(), cascade.affected.end(), static_cast<NodeId>(v));
      if (affected) {
        CHECK(cascade.arrival[v] <= T);
        CHECK(passes(bank, static_cast<NodeId>(v), x));
      }
    }
  }
}

TEST_CASE("cascade trace csv") {
  const Network net = testing::path_graph(3, 1);
  Vector x(1);
  x << 1.0;
  std::ostringstream out;
  write_cascade_trace(out, simulate_cascade(net, open_bank(net), 0, x, 10.0, cascade_stream(1, 0)), 0);
  CHECK(out.str().rfind("sample,node,arrival,blocked\n0,0,0,0\n", 0) == 0);
}

TEST_CASE("propagation tree: star, fan-out and triangle") {
  const Network star = testing::star_graph(5, 3);
  const auto t = build_tree(star, 0);
  REQUIRE(t.layer_count() == 2);
  CHECK(t.layers[1] == std::vector<NodeId>{1, 2, 3, 4, 5});
  CHECK(t.A[1].rows() == 5);
  for (int i = 0; i < 5; ++i) CHECK(t.A[1].row(i) == star.edge_param(*star.find_edge(0, i + 1)));

  // root i=0 with children j..g = 1..4, and a deeper node hanging off 2
  Matrix params = Matrix::Zero(5, 2);
  for (int e = 0; e < 5; ++e) params.row(e) << 0.1 * (e + 1), 0.05 * (e + 1);
  const Network fan(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {2, 5}}, params);
  const auto f = build_tree(fan, 0);
  CHECK(f.layers[1] == std::vector<NodeId>{1, 2, 3, 4});
  for (int i = 0; i < 4; ++i) CHECK(f.A[1].row(i) == fan.edge_param(*fan.find_edge(0, i + 1)));
  CHECK(f.layers[2] == std::vector<NodeId>{5});
  CHECK(f.k[1] == doctest::Approx(1.0));
  CHECK(f.k[2] == doctest::Approx(std::exp(-1.0)));

  const Network triangle = testing::complete_graph(3, 2);
  const auto tri = build_tree(triangle, 0);
  REQUIRE(tri.layer_count() == 2);
  CHECK(tri.layers[1] == std::vector<NodeId>{1, 2});
  const EdgeId bc = *triangle.find_edge(1, 2);
  for (const auto& layer : tri.layer_edges) CHECK(std::find(layer.begin(), layer.end(), bc) == layer.end());
}

TEST_CASE("propagation tree layers agree with hop distances") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Network net = testing::random_connected(25, 20, 2, s);
    for (NodeId root = 0; root < 25; root += 6) {
      const auto tree = build_tree(net, root);
      const auto dist = hop_distances(net, root);
      for (std::size_t l = 0; l < tree.layers.size(); ++l) {
        CHECK(std::is_sorted(tree.layers[l].begin(), tree.layers[l].end()));
        for (std::size_t i = 0; i < tree.layers[l].size(); ++i) {
          const NodeId v = tree.layers[l][i];
          CHECK(dist[static_cast<std::size_t>(v)] == static_cast<int>(l));
          if (l == 0) continue;
          const NodeId parent = tree.layer_parents[l][i];
          CHECK(dist[static_cast<std::size_t>(parent)] == static_cast<int>(l) - 1);
          for (const auto& nb : net.neighbors(v)) {
            if (dist[static_cast<std::size_t>(nb.node)] == static_cast<int>(l) - 1) CHECK(parent <= nb.node);
          }
          CHECK(tree.A[l].row(static_cast<Eigen::Index>(i)) == net.edge_param(tree.layer_edges[l][i]));
        }
        if (l >= 2) CHECK(tree.k[l] < tree.k[l - 1]);
      }
      std::size_t covered = 0;
      for (const auto& layer : tree.layers) covered += layer.size();
      CHECK(covered == 25);
    }
  }
}

TEST_CASE("surrogate spread") {
  PropagationTree tree;
  tree.layers = {{0}, {1, 2}};
  tree.A = {Matrix(0, 2), Matrix::Identity(2, 2)};
  tree.k = {0.0, 1.0};
  Vector z(2);
  z << 0.3, 0.7;
  CHECK(surrogate_spread(tree, z) == doctest::Approx(1.0));
  CHECK(surrogate_spread(tree, Vector::Zero(2)) == 0.0);

  Engine rng(12);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Network net = testing::random_connected(18, 9, 4, s);
    const auto t = build_tree(net, static_cast<NodeId>(s % 18));
    const Vector y = testing::random_unit_box(4, rng);
    double naive = 0.0;
    for (std::size_t l = 1; l < t.A.size(); ++l) {
      for (Eigen::Index r = 0; r < t.A[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < t.A[l].cols(); ++c) naive += std::exp(-(static_cast<double>(l) - 1.0)) * t.A[l](r, c) * y(c);
      }
    }
    CHECK(surrogate_spread(t, y) == doctest::Approx(naive).epsilon(1e-12));
    CHECK(t.spread_direction().dot(y) == doctest::Approx(naive).epsilon(1e-12));
  }
}
