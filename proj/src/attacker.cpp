#include "advnet/attacker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "advnet/parallel.hpp"

namespace advnet {

namespace {

void project_ball(Vector& v, const Vector& center, double radius) {
  const double dist = (v - center).norm();
  if (dist > radius) v = center + (radius / dist) * (v - center);
}

void project_halfspace(Vector& v, const Vector& normal, double normal_sq, double bound) {
  if (normal_sq == 0.0) return;
  const double excess = normal.dot(v) - bound;
  if (excess > 0.0) v -= (excess / normal_sq) * normal;
}

void project_orthant(Vector& v) { v = v.cwiseMax(0.0); }

// Lawson-Hanson nonnegative least squares for small dense systems.
Vector nnls(const Matrix& C, const Vector& d) {
  const Eigen::Index m = C.cols();
  Vector x = Vector::Zero(m);
  if (m == 0) return x;
  std::vector<char> passive(static_cast<std::size_t>(m), 0);
  for (int outer = 0; outer < 3 * static_cast<int>(m) + 10; ++outer) {
    const Vector w = C.transpose() * (d - C * x);
    Eigen::Index best = -1;
    double best_w = 1e-13 * (1.0 + d.norm());
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = 1;
    for (int inner = 0; inner < 3 * static_cast<int>(m) + 10; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      }
      Matrix Cp(C.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) Cp.col(static_cast<Eigen::Index>(k)) = C.col(idx[k]);
      const Vector sp = Cp.completeOrthogonalDecomposition().solve(d);
      if (sp.minCoeff() > 0.0) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = sp(static_cast<Eigen::Index>(k));
        break;
      }
      double alpha = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double s = sp(static_cast<Eigen::Index>(k));
        if (s <= 0.0) alpha = std::min(alpha, x(idx[k]) / (x(idx[k]) - s));
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double s = sp(static_cast<Eigen::Index>(k));
        x(idx[k]) += alpha * (s - x(idx[k]));
        if (x(idx[k]) <= 1e-15) {
          x(idx[k]) = 0.0;
          passive[static_cast<std::size_t>(idx[k])] = 0;
        }
      }
    }
  }
  return x;
}

struct ActiveSet {
  bool budget = false;
  bool detection = false;
  std::vector<Eigen::Index> zeros;
  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

ActiveSet active_set(const EvasionSet& set, const Vector& z) {
  ActiveSet s;
  s.budget = (z - set.center).squaredNorm() >= set.budget * (1.0 - 1e-6);
  s.detection = set.bound - set.normal.dot(z) <= 1e-6 * (1.0 + std::abs(set.bound));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) <= 1e-10) s.zeros.push_back(i);
  }
  return s;
}

// Solve the KKT system exactly on a fixed active set with the budget tight:
// z_F = x_F + r (a_F - mu normal_F) / |a_F - mu normal_F|, z_A = 0, with mu
// chosen so the detection constraint holds with equality when it is active.
// Returns nothing unless all multipliers have the right sign and z is feasible.
std::optional<Vector> solve_on_active_set(const Vector& a, const EvasionSet& set, const ActiveSet& active) {
  if (!active.budget) return std::nullopt;
  const Eigen::Index n = a.size();
  std::vector<char> at_zero(static_cast<std::size_t>(n), 0);
  for (auto i : active.zeros) at_zero[static_cast<std::size_t>(i)] = 1;
  double fixed_sq = 0.0;
  for (auto i : active.zeros) fixed_sq += set.center(i) * set.center(i);
  const double r2 = set.budget - fixed_sq;
  if (!(r2 > 0.0)) return std::nullopt;
  const double r = std::sqrt(r2);

  Vector aF = a, nF = set.normal, xF = set.center;
  for (auto i : active.zeros) {
    aF(i) = 0.0;
    nF(i) = 0.0;
    xF(i) = 0.0;
  }
  auto alignment = [&](double mu) {
    const Vector v = aF - mu * nF;
    const double nv = v.norm();
    return nv == 0.0 ? -std::numeric_limits<double>::infinity() : nF.dot(v) / nv;
  };
  double mu = 0.0;
  if (active.detection) {
    if (nF.squaredNorm() == 0.0) return std::nullopt;
    const double target = (set.bound - nF.dot(xF)) / r;
    if (alignment(0.0) > target) {
      double lo = 0.0, hi = 1.0;
      while (alignment(hi) > target) {
        hi *= 2.0;
        if (hi > 1e15) return std::nullopt;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (alignment(mid) > target ? lo : hi) = mid;
      }
      mu = 0.5 * (lo + hi);
    }
  }
  const Vector v = aF - mu * nF;
  const double nv = v.norm();
  if (nv == 0.0) return std::nullopt;
  const double lambda = nv / (2.0 * r);
  Vector z = xF + (r / nv) * v;
  for (auto i : active.zeros) {
    z(i) = 0.0;
    const double eta = -a(i) - 2.0 * lambda * set.center(i) + mu * set.normal(i);
    if (eta < -1e-10 * (1.0 + a.cwiseAbs().maxCoeff())) return std::nullopt;
  }
  if (z.minCoeff() < 0.0) {
    if (z.minCoeff() < -1e-14) return std::nullopt;
    z = z.cwiseMax(0.0);
  }
  const auto res = residuals(set, z);
  if (res.budget > 1e-12 * (1.0 + set.budget) || res.detection > 1e-10 * (1.0 + std::abs(set.bound))) {
    return std::nullopt;
  }
  return z;
}

}  // namespace

ConstraintResiduals residuals(const EvasionSet& set, const VectorRef& z) {
  ConstraintResiduals r;
  r.budget = std::max(0.0, (z - set.center).squaredNorm() - set.budget);
  r.detection = std::max(0.0, set.normal.dot(z) - set.bound);
  r.orthant = std::max(0.0, -z.minCoeff());
  return r;
}

Vector project_dykstra(const EvasionSet& set, const VectorRef& y, const DykstraOptions& options) {
  const double radius = std::sqrt(std::max(0.0, set.budget));
  const double normal_sq = set.normal.squaredNorm();
  Vector x = y;
  Vector p1 = Vector::Zero(y.size()), p2 = p1, p3 = p1;
  Vector t(y.size()), prev(y.size());
  const double scale = 1.0 + y.norm();
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    prev = x;
    t = x + p1;
    x = t;
    project_ball(x, set.center, radius);
    p1 = t - x;
    t = x + p2;
    x = t;
    project_halfspace(x, set.normal, normal_sq, set.bound);
    p2 = t - x;
    t = x + p3;
    x = t;
    project_orthant(x);
    p3 = t - x;
    if ((x - prev).norm() <= options.tolerance * scale && residuals(set, x).max() <= 1e-13 * scale) break;
  }
  return x;
}

namespace {

// Removes round-off overshoot of the detection halfspace so the payload
// passes the inclusive indicator, not just the tolerance check.
Vector settle_detection(const EvasionSet& set, Vector z) {
  const double nn = set.normal.squaredNorm();
  for (int k = 0; k < 16 && nn > 0.0 && set.normal.dot(z) > set.bound; ++k) {
    const double excess = set.normal.dot(z) - set.bound + 4e-16 * (1.0 + std::abs(set.bound)) * (k + 1);
    z = (z - (excess / nn) * set.normal).cwiseMax(0.0);
  }
  return z;
}

EvasionResult solve_evasion_unsettled(const VectorRef& direction, const EvasionSet& set,
                                      const AttackerOptions& options) {
  if (!direction.allFinite() || !set.center.allFinite() || !set.normal.allFinite() || !std::isfinite(set.bound) ||
      !std::isfinite(set.budget)) {
    throw ValidationError("evasion: non-finite input");
  }
  if (direction.size() != set.center.size() || set.normal.size() != set.center.size()) {
    throw ValidationError("evasion: dimension mismatch");
  }
  if (!(set.budget > 0.0)) throw ValidationError("evasion: budget must be positive");
  const Vector a = direction;
  EvasionResult result;
  Vector z = project_dykstra(set, set.center, options.projection);
  if (residuals(set, z).max() > options.feasibility_tolerance) {
    result.z = set.center;
    result.objective = a.dot(set.center);
    result.feasible = false;
    return result;
  }
  result.feasible = true;
  result.z = z;
  result.objective = a.dot(z);
  const double lipschitz = a.norm();
  if (lipschitz == 0.0) return result;

  std::optional<ActiveSet> previous;
  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    Vector next = project_dykstra(set, z + a / lipschitz, options.projection);
    const double moved = (next - z).norm();
    z = std::move(next);
    const double objective = a.dot(z);
    if (residuals(set, z).max() <= 1e-9 && objective > result.objective) {
      result.z = z;
      result.objective = objective;
    }
    if (options.active_set_finish) {
      ActiveSet current = active_set(set, z);
      if (previous && *previous == current) {
        if (auto exact = solve_on_active_set(a, set, current)) {
          const double exact_objective = a.dot(*exact);
          if (exact_objective >= result.objective - 1e-12 * (1.0 + std::abs(result.objective))) {
            result.z = std::move(*exact);
            result.objective = exact_objective;
            return result;
          }
        }
      }
      previous = std::move(current);
    }
    if (moved <= options.movement_tolerance) break;
  }
  return result;
}

}  // namespace

EvasionResult solve_evasion(const VectorRef& direction, const EvasionSet& set, const AttackerOptions& options) {
  EvasionResult result = solve_evasion_unsettled(direction, set, options);
  if (result.feasible) {
    result.z = settle_detection(set, std::move(result.z));
    result.objective = direction.dot(result.z);
  }
  return result;
}

EvasionResult evade_for_node(const PropagationTree& tree, const DetectorBank& bank, const VectorRef& x, double budget,
                             const AttackerOptions& options) {
  return solve_evasion(tree.spread_direction(), EvasionSet::from_bank(bank, x, budget), options);
}

KktState kkt_state(const VectorRef& direction, const EvasionSet& set, const DetectorBank& bank, const VectorRef& z,
                   const KktTolerances& tol) {
  const Eigen::Index n = z.size();
  KktState state;
  state.z = z;
  state.eta = Vector::Zero(n);
  const Vector displacement = z - set.center;
  const double g = displacement.squaredNorm() - set.budget;
  state.budget_active = std::abs(g) <= tol.budget;
  const double margin_without_bias = set.normal.dot(z);
  for (NodeId k = 0; k < bank.node_count(); ++k) {
    const double bound_k = bank.threshold_logit(k) - bank.model().bias;
    if (std::abs(margin_without_bias - bound_k) <= tol.detection) state.active_nodes.push_back(k);
  }
  std::vector<Eigen::Index> zeros;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (z(i) <= tol.orthant) zeros.push_back(i);
  }
  // Columns: [2(z-x) | normal | -e_i ...], coefficients [lambda, mu_total, eta_i ...] >= 0.
  const Eigen::Index cols = (state.budget_active ? 1 : 0) + (state.active_nodes.empty() ? 0 : 1) +
                            static_cast<Eigen::Index>(zeros.size());
  Matrix C = Matrix::Zero(n, cols);
  Eigen::Index c = 0;
  if (state.budget_active) C.col(c++) = 2.0 * displacement;
  if (!state.active_nodes.empty()) C.col(c++) = set.normal;
  for (auto i : zeros) C(i, c++) = -1.0;
  const Vector coef = nnls(C, direction);
  c = 0;
  double mu_total = 0.0;
  if (state.budget_active) state.lambda = coef(c++);
  if (!state.active_nodes.empty()) mu_total = coef(c++);
  for (auto i : zeros) state.eta(i) = coef(c++);
  state.mu = Vector::Constant(static_cast<Eigen::Index>(state.active_nodes.size()),
                              state.active_nodes.empty() ? 0.0 : mu_total / static_cast<double>(state.active_nodes.size()));

  const Vector stationarity = -direction + 2.0 * state.lambda * displacement + mu_total * set.normal - state.eta;
  state.stationarity = stationarity.cwiseAbs().maxCoeff();
  state.complementarity = std::abs(state.lambda * g);
  for (Eigen::Index i = 0; i < n; ++i) state.complementarity = std::max(state.complementarity, std::abs(state.eta(i) * z(i)));
  for (std::size_t k = 0; k < state.active_nodes.size(); ++k) {
    const double bound_k = bank.threshold_logit(state.active_nodes[k]) - bank.model().bias;
    state.complementarity = std::max(state.complementarity, std::abs(state.mu(static_cast<Eigen::Index>(k)) * (margin_without_bias - bound_k)));
  }
  state.feasibility = residuals(set, z).max();
  return state;
}

AttackPlan optimal_attack(const Network& network, const std::vector<PropagationTree>& forest, const DetectorBank& bank,
                          const VectorRef& x, double budget, const AttackerOptions& options) {
  if (static_cast<int>(forest.size()) != network.node_count()) throw ValidationError("optimal_attack: forest size mismatch");
  if (!x.allFinite()) throw ValidationError("optimal_attack: non-finite content");
  const EvasionSet set = EvasionSet::from_bank(bank, x, budget);
  AttackPlan best;
  bool have = false;
  for (NodeId i = 0; i < network.node_count(); ++i) {
    const Vector a = forest[static_cast<std::size_t>(i)].spread_direction();
    EvasionResult r = solve_evasion(a, set, options);
    if (!have || r.objective > best.utility + 1e-12 * (1.0 + std::abs(best.utility))) {
      best = {i, std::move(r.z), r.objective, r.feasible};
      have = true;
    }
    if (!r.feasible && !best.feasible && i == 0) {
      // Infeasibility does not depend on the seed; only direction.x remains to rank.
      for (NodeId j = 1; j < network.node_count(); ++j) {
        const double u = forest[static_cast<std::size_t>(j)].spread_direction().dot(x);
        if (u > best.utility + 1e-12 * (1.0 + std::abs(best.utility))) best = {j, x, u, false};
      }
      break;
    }
  }
  return best;
}

AttackPlan optimal_attack(const Network& network, const DetectorBank& bank, const VectorRef& x, double budget,
                          const AttackerOptions& options) {
  return optimal_attack(network, build_forest(network), bank, x, budget, options);
}

std::vector<AttackPlan> attack_dataset(const Network& network, const std::vector<PropagationTree>& forest,
                                       const DetectorBank& bank, const LabeledDataset& malicious, double budget,
                                       const AttackerOptions& options, unsigned threads) {
  std::vector<AttackPlan> plans(static_cast<std::size_t>(malicious.size()));
  parallel_for(plans.size(), threads, [&](std::size_t i) {
    plans[i] = optimal_attack(network, forest, bank, malicious.features.row(static_cast<Eigen::Index>(i)).transpose(),
                              budget, options);
  });
  return plans;
}

void write_attack_csv(std::ostream& out, const std::vector<AttackPlan>& plans, const LabeledDataset& originals) {
  out << "instance_id,seed,feasible,objective,l2sq_displacement\n";
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    const double disp = (p.payload - originals.features.row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm();
    out << i << ',' << p.seed << ',' << (p.feasible ? 1 : 0) << ',' << p.utility << ',' << disp << '\n';
  }
}

void write_payload_csv(std::ostream& out, const std::vector<AttackPlan>& plans) {
  out.precision(17);
  out << "seed,feasible,utility,payload...\n";
  for (const auto& p : plans) {
    out << p.seed << ',' << (p.feasible ? 1 : 0) << ',' << p.utility;
    for (Eigen::Index f = 0; f < p.payload.size(); ++f) out << ',' << p.payload(f);
    out << '\n';
  }
}

std::vector<AttackPlan> read_payload_csv(std::istream& in) {
  std::vector<AttackPlan> plans;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("bad payload cell '" + cell + "'", line_no);
      }
    }
    if (values.size() < 4) throw ParseError("payload row too short", line_no);
    AttackPlan p;
    p.seed = static_cast<NodeId>(values[0]);
    p.feasible = values[1] != 0.0;
    p.utility = values[2];
    p.payload = Eigen::Map<const Vector>(values.data() + 3, static_cast<Eigen::Index>(values.size() - 3));
    plans.push_back(std::move(p));
  }
  return plans;
}

}  // namespace advnet
