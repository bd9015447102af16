#include <doctest.h>

#include <cmath>
#include <queue>
#include <sstream>

#include "advnet/attacker.hpp"
#include "support.hpp"

using namespace advnet;

namespace {

struct Instance {
  Network network;
  DetectorBank bank;
  Vector x;
  double budget;
};

Instance random_instance(std::uint64_t seed) {
  Engine rng(seed);
  Network net = testing::random_connected(6, 2, 3, seed);
  const LogisticModel m = testing::random_model(3, rng, 1.0);
  const Vector theta = 0.4 + 0.55 * testing::random_unit_box(6, rng).array();
  const Vector x = testing::random_unit_box(3, rng);
  const double budget = 0.02 + 0.3 * uniform01(rng);
  return {std::move(net), DetectorBank(m, theta), x, budget};
}

bool inside(const EvasionSet& set, const Vector& z, double tol) {
  return (z - set.center).squaredNorm() <= set.budget + tol && set.normal.dot(z) <= set.bound + tol &&
         z.minCoeff() >= -tol;
}

// Best objective over uniformly sampled points of the budget ball that land in F.
double random_search(const Vector& a, const EvasionSet& set, int samples, std::uint64_t seed) {
  Engine rng(seed);
  std::normal_distribution<double> gauss;
  const auto n = set.center.size();
  double best = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = gauss(rng);
    const double r = std::sqrt(set.budget) * std::pow(uniform01(rng), 1.0 / static_cast<double>(n));
    const Vector z = set.center + r * d.normalized();
    if (inside(set, z, 0.0)) best = std::max(best, a.dot(z));
  }
  return best;
}

// Independent spread direction: hop distances by BFS, lowest-index parent one hop closer.
Vector naive_direction(const Network& net, NodeId root) {
  const int N = net.node_count();
  std::vector<int> dist(static_cast<std::size_t>(N), -1);
  std::queue<NodeId> q;
  dist[static_cast<std::size_t>(root)] = 0;
  q.push(root);
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (NodeId v = 0; v < N; ++v) {
      if (net.find_edge(u, v) && dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push(v);
      }
    }
  }
  Vector a = Vector::Zero(net.n_features());
  for (NodeId v = 0; v < N; ++v) {
    const int d = dist[static_cast<std::size_t>(v)];
    if (d <= 0) continue;
    for (NodeId p = 0; p < N; ++p) {
      if (dist[static_cast<std::size_t>(p)] == d - 1 && net.find_edge(p, v)) {
        a += std::exp(-(d - 1.0)) * net.edge_param(*net.find_edge(p, v)).transpose();
        break;
      }
    }
  }
  return a;
}

DetectorBank open_bank(const LogisticModel& m, int N) { return DetectorBank::uniform(m, N, 1.0 - kThresholdClamp); }

}  // namespace

TEST_CASE("unconstrained ball optimum is closed form") {
  Engine rng(1);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Network net = testing::random_connected(8, 4, 4, s);
    const DetectorBank bank = open_bank(testing::random_model(4, rng, 0.5), 8);
    const Vector x = 0.2 + 0.6 * testing::random_unit_box(4, rng).array();
    const double eps = 0.01;
    const auto tree = build_tree(net, static_cast<NodeId>(s % 8));
    const Vector a = tree.spread_direction();
    const auto r = evade_for_node(tree, bank, x, eps);
    REQUIRE(r.feasible);
    const Vector expected = x + std::sqrt(eps) * a / a.norm();
    CHECK((r.z - expected).norm() <= 1e-6);
    CHECK(r.objective == doctest::Approx(a.dot(x) + std::sqrt(eps) * a.norm()).epsilon(1e-9));
  }
}

TEST_CASE("vanishing budget leaves the payload in place") {
  const Network net = testing::star_graph(4, 3);
  Engine rng(2);
  const DetectorBank bank = open_bank(testing::random_model(3, rng, 0.5), 5);
  const Vector x = testing::random_unit_box(3, rng);
  const auto r = evade_for_node(build_tree(net, 0), bank, x, 1e-14);
  REQUIRE(r.feasible);
  CHECK((r.z - x).norm() <= 1e-6);
  CHECK_THROWS_AS(evade_for_node(build_tree(net, 0), bank, x, 0.0), ValidationError);
}

TEST_CASE("evasion optimum beats random feasible points and satisfies KKT") {
  int solved = 0;
  for (std::uint64_t s = 0; s < 12; ++s) {
    const auto inst = random_instance(100 + s);
    const auto tree = build_tree(inst.network, static_cast<NodeId>(s % 6));
    const auto set = EvasionSet::from_bank(inst.bank, inst.x, inst.budget);
    const auto r = evade_for_node(tree, inst.bank, inst.x, inst.budget);
    if (!r.feasible) {
      CHECK(r.z == inst.x);
      continue;
    }
    ++solved;
    CHECK(inside(set, r.z, 1e-9));
    for (NodeId k = 0; k < 6; ++k) CHECK(passes(inst.bank, k, r.z));
    const Vector a = tree.spread_direction();
    CHECK(r.objective >= random_search(a, set, 20000, s) - 1e-6);
    if (inside(set, inst.x, 0.0)) CHECK(r.objective >= a.dot(inst.x) - 1e-12);
    const auto kkt = kkt_state(a, set, inst.bank, r.z);
    CHECK(kkt.stationarity <= 1e-6);
    CHECK(kkt.complementarity <= 1e-6);
    CHECK(kkt.lambda >= 0.0);
    CHECK(kkt.eta.minCoeff() >= 0.0);
  }
  CHECK(solved >= 6);
}

TEST_CASE("binding detector: payload lands on the tightest halfspace") {
  const Network net = testing::path_graph(3, 2);
  Vector phi(2);
  phi << 1.0, 1.0;
  Vector theta(3);
  theta << 0.5, 0.7, 0.9;
  const DetectorBank bank(LogisticModel{phi, -1.0}, theta);
  Vector x(2);
  x << 0.4, 0.5;
  const auto r = evade_for_node(build_tree(net, 0), bank, x, 0.25);
  REQUIRE(r.feasible);
  CHECK(phi.dot(r.z) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(passes(bank, 0, r.z));
}

TEST_CASE("seed choice: star center beats path endpoint") {
  const Matrix star_params = Matrix::Constant(5, 2, 0.5);
  const Matrix path_params = Matrix::Constant(5, 2, 0.5);
  const Network star(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}, star_params);
  const Network path(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, path_params);
  const LogisticModel m{Vector::Constant(2, 0.3), 0.0};
  Vector x(2);
  x << 0.3, 0.6;
  const auto center = evade_for_node(build_tree(star, 0), open_bank(m, 6), x, 0.01);
  const auto end = evade_for_node(build_tree(path, 0), open_bank(m, 6), x, 0.01);
  CHECK(center.objective > end.objective);
  CHECK(optimal_attack(star, open_bank(m, 6), x, 0.01).seed == 0);
}

TEST_CASE("best response agrees with an independent seed oracle") {
  Engine rng(5);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Network net = testing::random_connected(9, 5, 3, 40 + s);
    const LogisticModel m = testing::random_model(3, rng, 0.5);
    const Vector x = 0.2 + 0.6 * testing::random_unit_box(3, rng).array();
    const double eps = 0.01;
    std::vector<double> oracle;
    for (NodeId i = 0; i < 9; ++i) {
      const Vector a = naive_direction(net, i);
      oracle.push_back(a.dot(x) + std::sqrt(eps) * a.norm());
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < oracle.size(); ++i) {
      if (oracle[i] > oracle[best] + 1e-9) best = i;
    }
    const auto plan = optimal_attack(net, open_bank(m, 9), x, eps);
    CHECK(plan.feasible);
    CHECK(plan.seed == static_cast<NodeId>(best));
    CHECK(plan.utility == doctest::Approx(oracle[best]).epsilon(1e-9));
  }
}

TEST_CASE("a node that flags everything makes every seed infeasible") {
  const Network net = testing::random_connected(5, 2, 3, 8);
  const LogisticModel m{Vector::Constant(3, 1.0), 0.0};
  Vector theta = Vector::Constant(5, 0.5);
  theta(3) = kThresholdClamp;
  const DetectorBank bank(m, theta);
  Vector x(3);
  x << 0.2, 0.1, 0.4;
  const auto plan = optimal_attack(net, bank, x, 0.01);
  CHECK_FALSE(plan.feasible);
  CHECK(plan.payload == x);
  std::vector<double> ax;
  for (NodeId i = 0; i < 5; ++i) ax.push_back(naive_direction(net, i).dot(x));
  std::size_t best = 0;
  for (std::size_t i = 1; i < ax.size(); ++i) {
    if (ax[i] > ax[best]) best = i;
  }
  CHECK(plan.seed == static_cast<NodeId>(best));
}

TEST_CASE("seed choice is invariant under positive scaling of layer weights") {
  Engine rng(6);
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto inst = random_instance(300 + s);
    const auto plain = build_forest(inst.network);
    const auto scaled = build_forest(inst.network, LayerWeights{3.5, 1.0});
    const auto a = optimal_attack(inst.network, plain, inst.bank, inst.x, inst.budget);
    const auto b = optimal_attack(inst.network, scaled, inst.bank, inst.x, inst.budget);
    CHECK(a.seed == b.seed);
    CHECK(a.feasible == b.feasible);
    if (a.feasible) CHECK(b.utility == doctest::Approx(3.5 * a.utility).epsilon(1e-6));
  }
}

TEST_CASE("dataset attacks: cardinality, determinism, invariants, csv") {
  const Network net = testing::random_connected(7, 3, 3, 2);
  Engine rng(9);
  const DetectorBank bank(testing::random_model(3, rng, 1.0), Vector::Constant(7, 0.6));
  LabeledDataset d;
  d.features = Matrix(6, 3);
  for (Eigen::Index r = 0; r < 6; ++r) {
    d.features.row(r) = testing::random_unit_box(3, rng).transpose();
    d.labels.push_back(Label::malicious);
  }
  const auto forest = build_forest(net);
  const auto plans = attack_dataset(net, forest, bank, d, 0.05);
  CHECK(plans.size() == 6);
  const auto again = attack_dataset(net, forest, bank, d, 0.05, {}, 3);
  for (std::size_t i = 0; i < plans.size(); ++i) {
    CHECK(plans[i].seed == again[i].seed);
    CHECK(plans[i].payload == again[i].payload);
    const Vector x = d.features.row(static_cast<Eigen::Index>(i)).transpose();
    if (plans[i].feasible) {
      CHECK((plans[i].payload - x).squaredNorm() <= 0.05 + 1e-9);
      CHECK(plans[i].payload.minCoeff() >= -1e-12);
      for (NodeId k = 0; k < 7; ++k) CHECK(bank.model().margin(plans[i].payload) <= bank.threshold_logit(k) + 1e-9);
    } else {
      CHECK(plans[i].payload == x);
    }
  }
  std::stringstream buf;
  write_payload_csv(buf, plans);
  const auto back = read_payload_csv(buf);
  REQUIRE(back.size() == plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    CHECK(back[i].seed == plans[i].seed);
    CHECK(back[i].feasible == plans[i].feasible);
    CHECK(back[i].payload == plans[i].payload);
  }
  std::ostringstream report;
  write_attack_csv(report, plans, d);
  CHECK(report.str().rfind("instance_id,seed,feasible,objective,l2sq_displacement\n", 0) == 0);
}

TEST_CASE("dykstra projection lands in the intersection") {
  Engine rng(12);
  for (int t = 0; t < 30; ++t) {
    const auto inst = random_instance(500 + static_cast<std::uint64_t>(t));
    const auto set = EvasionSet::from_bank(inst.bank, inst.x, inst.budget);
    if (residuals(set, project_dykstra(set, inst.x)).max() > 1e-8) continue;
    const Vector y = inst.x + 0.5 * (testing::random_unit_box(3, rng).array() - 0.5).matrix();
    const Vector p = project_dykstra(set, y);
    CHECK(residuals(set, p).max() <= 1e-9);
    for (int k = 0; k < 50; ++k) {
      const Vector d = (testing::random_unit_box(3, rng).array() - 0.5).matrix() * 0.05;
      const Vector q = project_dykstra(set, p + d);
      CHECK((y - p).norm() <= (y - q).norm() + 1e-7);
    }
  }
}
