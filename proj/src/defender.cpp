#include "advnet/defender.hpp"

#include <cmath>
#include <ostream>

#include "advnet/parallel.hpp"

namespace advnet {

namespace {

struct TermParts {
  double u = 0.0;  // logit theta_root - m(y)
  double S = 0.0;  // sum_v k_v (logit theta_v - m(y)) q_v(y)
  double margin = 0.0;
};

TermParts term_parts(const PropagationTree& tree, const DetectorBank& bank, const VectorRef& y) {
  TermParts t;
  t.margin = bank.model().margin(y);
  t.u = bank.threshold_logit(tree.root) - t.margin;
  for (std::size_t l = 1; l < tree.layers.size(); ++l) {
    const Vector q = tree.A[l] * y;
    double layer = 0.0;
    for (std::size_t i = 0; i < tree.layers[l].size(); ++i) {
      layer += (bank.threshold_logit(tree.layers[l][i]) - t.margin) * q(static_cast<Eigen::Index>(i));
    }
    t.S += tree.k[l] * layer;
  }
  return t;
}

// Adds d(u S)/dTheta at fixed y to `grad`; returns d(u S)/dy when requested.
void accumulate_term_gradient(const PropagationTree& tree, const DetectorBank& bank, const VectorRef& y,
                              Vector& grad, Vector* dy) {
  const TermParts t = term_parts(tree, bank, y);
  grad(tree.root) += logit_derivative(bank.threshold(tree.root)) * t.S;
  const Vector& phi = bank.model().weights;
  Vector dS;
  if (dy) dS = Vector::Zero(y.size());
  for (std::size_t l = 1; l < tree.layers.size(); ++l) {
    const Vector q = tree.A[l] * y;
    for (std::size_t i = 0; i < tree.layers[l].size(); ++i) {
      const NodeId v = tree.layers[l][i];
      const auto row = static_cast<Eigen::Index>(i);
      grad(v) += t.u * tree.k[l] * logit_derivative(bank.threshold(v)) * q(row);
      if (dy) {
        dS += tree.k[l] * ((bank.threshold_logit(v) - t.margin) * tree.A[l].row(row).transpose() - q(row) * phi);
      }
    }
  }
  if (dy) *dy = -t.S * phi + t.u * dS;
}

bool kkt_acceptable(const KktState& s, double tol) {
  return s.stationarity <= tol && s.complementarity <= tol && s.feasibility <= tol;
}

}  // namespace

double surrogate_tree_term(const PropagationTree& tree, const DetectorBank& bank, const VectorRef& y) {
  const TermParts t = term_parts(tree, bank, y);
  return t.u * t.S;
}

double surrogate_defender_objective(const DefenseProblem& problem, const DetectorBank& bank,
                                    const std::vector<Vector>& payloads, NodeId assumed_seed) {
  const auto n_nodes = static_cast<std::size_t>(problem.network.node_count());
  if (problem.forest.size() != n_nodes || bank.node_count() != problem.network.node_count()) {
    throw ValidationError("surrogate objective: network, forest and bank sizes differ");
  }
  if (payloads.size() != static_cast<std::size_t>(problem.malicious.rows())) {
    throw ValidationError("surrogate objective: one payload per malicious instance required");
  }
  if (assumed_seed < 0 || static_cast<std::size_t>(assumed_seed) >= n_nodes) {
    throw ValidationError("surrogate objective: assumed seed out of range");
  }
  const auto n = problem.network.n_features();
  if ((problem.benign.rows() > 0 && problem.benign.cols() != n) || bank.model().weights.size() != n) {
    throw ValidationError("surrogate objective: feature width mismatch");
  }
  double malicious = 0.0;
  for (const auto& z : payloads) {
    if (z.size() != n) throw ValidationError("surrogate objective: payload width mismatch");
    malicious += surrogate_tree_term(problem.forest[static_cast<std::size_t>(assumed_seed)], bank, z);
  }
  double benign = 0.0;
  for (Eigen::Index r = 0; r < problem.benign.rows(); ++r) {
    const Vector x = problem.benign.row(r).transpose();
    for (const auto& tree : problem.forest) benign += surrogate_tree_term(tree, bank, x);
  }
  return (1.0 - problem.alpha) * malicious - problem.alpha * benign;
}

ImplicitJacobian implicit_dz_dtheta(const KktState& state, const VectorRef& x, double budget, const DetectorBank& bank,
                                    double kkt_tolerance) {
  if (!kkt_acceptable(state, kkt_tolerance)) throw ValidationError("implicit_dz_dtheta: KKT residuals too large");
  const Eigen::Index n = state.z.size();
  const auto K = static_cast<Eigen::Index>(state.active_nodes.size());
  const Eigen::Index dim = 2 * n + 1 + K;
  const Vector& phi = bank.model().weights;
  const Vector d = state.z - x;
  const double g = d.squaredNorm() - budget;
  const Eigen::Index lam = n, mu0 = n + 1, eta0 = n + 1 + K;

  Matrix J = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    J(i, i) = 2.0 * state.lambda;
    J(i, lam) = 2.0 * d(i);
    for (Eigen::Index k = 0; k < K; ++k) J(i, mu0 + k) = phi(i);
    J(i, eta0 + i) = -1.0;
  }
  J.row(lam).head(n) = 2.0 * state.lambda * d.transpose();
  J(lam, lam) = g;
  for (Eigen::Index k = 0; k < K; ++k) J.row(mu0 + k).head(n) = phi.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    J(eta0 + i, i) = -state.eta(i);
    J(eta0 + i, eta0 + i) = -state.z(i);
  }
  if (!J.allFinite()) throw ValidationError("implicit_dz_dtheta: non-finite Jacobian");

  ImplicitJacobian out;
  out.dz = Matrix::Zero(n, bank.node_count());
  if (K == 0) return out;
  // d h_k / d theta_k = -1/(theta_k - theta_k^2); move to the right-hand side.
  Matrix rhs = Matrix::Zero(dim, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    rhs(mu0 + k, k) = logit_derivative(bank.threshold(state.active_nodes[static_cast<std::size_t>(k)]));
  }
  Eigen::FullPivLU<Matrix> lu(J);
  Matrix solution;
  if (lu.rank() < dim) {
    out.regularized = true;
    const Matrix normal = J.transpose() * J + 1e-8 * Matrix::Identity(dim, dim);
    solution = normal.ldlt().solve(J.transpose() * rhs);
  } else {
    solution = lu.solve(rhs);
  }
  if (!solution.allFinite()) throw std::runtime_error("implicit_dz_dtheta: solve produced non-finite values");
  for (Eigen::Index k = 0; k < K; ++k) {
    out.dz.col(state.active_nodes[static_cast<std::size_t>(k)]) = solution.col(k).head(n);
  }
  return out;
}

std::vector<FixedSeedResponse> respond_fixed_seed(const DefenseProblem& problem, const DetectorBank& bank,
                                                  NodeId assumed_seed, const AttackerOptions& options,
                                                  unsigned threads) {
  const Vector a = problem.forest.at(static_cast<std::size_t>(assumed_seed)).spread_direction();
  std::vector<FixedSeedResponse> out(static_cast<std::size_t>(problem.malicious.rows()));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    const Vector x = problem.malicious.row(static_cast<Eigen::Index>(r)).transpose();
    const EvasionSet set = EvasionSet::from_bank(bank, x, problem.budget);
    EvasionResult res = solve_evasion(a, set, options);
    out[r].feasible = res.feasible;
    if (res.feasible) out[r].kkt = kkt_state(a, set, bank, res.z);
    out[r].z = std::move(res.z);
  });
  return out;
}

GradientParts gradient_parts(const DefenseProblem& problem, const DetectorBank& bank,
                             const std::vector<FixedSeedResponse>& responses, NodeId assumed_seed,
                             bool explicit_only) {
  if (responses.size() != static_cast<std::size_t>(problem.malicious.rows())) {
    throw ValidationError("gradient: one response per malicious instance required");
  }
  const Eigen::Index N = bank.node_count();
  GradientParts parts{Vector::Zero(N), Vector::Zero(N)};
  const auto& tree = problem.forest.at(static_cast<std::size_t>(assumed_seed));
  for (std::size_t r = 0; r < responses.size(); ++r) {
    const auto& resp = responses[r];
    Vector dy;
    const bool implicit = !explicit_only && resp.feasible;
    accumulate_term_gradient(tree, bank, resp.z, parts.malicious, implicit ? &dy : nullptr);
    if (!implicit) continue;
    if (!kkt_acceptable(resp.kkt, 1e-6)) {
      ++parts.skipped_implicit;
      continue;
    }
    const ImplicitJacobian jac =
        implicit_dz_dtheta(resp.kkt, problem.malicious.row(static_cast<Eigen::Index>(r)).transpose(), problem.budget, bank);
    if (jac.regularized) ++parts.regularized;
    parts.malicious += jac.dz.transpose() * dy;
  }
  for (Eigen::Index r = 0; r < problem.benign.rows(); ++r) {
    const Vector x = problem.benign.row(r).transpose();
    for (const auto& t : problem.forest) accumulate_term_gradient(t, bank, x, parts.benign, nullptr);
  }
  return parts;
}

Vector grad_theta(const DefenseProblem& problem, const DetectorBank& bank,
                  const std::vector<FixedSeedResponse>& responses, NodeId assumed_seed, bool explicit_only) {
  return gradient_parts(problem, bank, responses, assumed_seed, explicit_only).combine(problem.alpha);
}

DefenseResult pgd_defense(const DefenseProblem& problem, NodeId assumed_seed, const PgdOptions& options) {
  if (options.iterations < 1) throw ValidationError("pgd: iterations must be >= 1");
  if (!(options.step > 0.0)) throw ValidationError("pgd: step must be positive");
  if (assumed_seed < 0 || assumed_seed >= problem.network.node_count()) throw ValidationError("pgd: seed out of range");
  const int N = problem.network.node_count();
  double beta0 = options.step;
  DefenseResult best;
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    best = DefenseResult{};
    best.assumed_seed = assumed_seed;
    best.restarts = restart;
    DetectorBank bank(problem.model, Vector::Constant(N, options.initial_threshold));
    bool diverged = false;
    for (int t = 0; t <= options.iterations; ++t) {
      const auto responses = respond_fixed_seed(problem, bank, assumed_seed, options.attacker, options.threads);
      std::vector<Vector> payloads;
      payloads.reserve(responses.size());
      for (const auto& r : responses) payloads.push_back(r.z);
      const double value = surrogate_defender_objective(problem, bank, payloads, assumed_seed);
      const double beta = beta0 / std::sqrt(static_cast<double>(t + 1));
      best.trajectory.push_back({t, value, beta, bank.thresholds()});
      if (!std::isfinite(value) || value > options.divergence_limit) {
        diverged = true;
        break;
      }
      if (t == 0 || value < best.surrogate_value) {
        best.surrogate_value = value;
        best.thresholds = bank.thresholds();
        best.best_iter = t;
      }
      if (t == options.iterations) break;
      const Vector g = grad_theta(problem, bank, responses, assumed_seed, options.explicit_only);
      if (!g.allFinite()) {
        diverged = true;
        break;
      }
      bank.set_thresholds(bank.thresholds() - beta * g);
    }
    if (!diverged) return best;
    beta0 *= 0.5;
  }
  if (best.thresholds.size() == 0) best.thresholds = Vector::Constant(N, options.initial_threshold);
  return best;
}

void write_trajectory_csv(std::ostream& out, const DefenseResult& result) {
  out.precision(17);
  out << "iter,objective,step\n";
  for (const auto& p : result.trajectory) out << p.iter << ',' << p.objective << ',' << p.step << '\n';
}

std::size_t argmax_lowest(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

SseResult sse_defense(const DefenseProblem& problem, const SseOptions& options) {
  const int N = problem.network.node_count();
  SseResult result;
  result.candidates.resize(static_cast<std::size_t>(N));
  PgdOptions pgd = options.pgd;
  pgd.threads = 1;
  UtilityOptions evaluation = options.evaluation;
  evaluation.threads = 1;
  evaluation.alpha = problem.alpha;
  parallel_for(result.candidates.size(), options.threads, [&](std::size_t j) {
    auto& cand = result.candidates[j];
    cand.assumed_seed = static_cast<NodeId>(j);
    const DefenseResult defense = pgd_defense(problem, cand.assumed_seed, pgd);
    cand.surrogate_value = defense.surrogate_value;
    cand.thresholds = defense.thresholds;
    const DetectorBank bank(problem.model, defense.thresholds);
    std::vector<AttackPlan> plans;
    plans.reserve(static_cast<std::size_t>(problem.malicious.rows()));
    for (Eigen::Index r = 0; r < problem.malicious.rows(); ++r) {
      plans.push_back(optimal_attack(problem.network, problem.forest, bank, problem.malicious.row(r).transpose(),
                                     problem.budget, pgd.attacker));
    }
    cand.report = defender_utility(problem.network, bank, problem.benign, plans, evaluation);
    cand.utility = cand.report.utility;
  });
  std::vector<double> utilities;
  for (const auto& c : result.candidates) utilities.push_back(c.utility);
  result.selected = static_cast<NodeId>(argmax_lowest(utilities));
  result.utility = utilities[static_cast<std::size_t>(result.selected)];
  result.thresholds = result.candidates[static_cast<std::size_t>(result.selected)].thresholds;
  return result;
}

void write_sse_report_csv(std::ostream& out, const SseResult& result) {
  out.precision(17);
  out << "assumed_seed,surrogate,utility,benign,malicious,selected\n";
  for (const auto& c : result.candidates) {
    out << c.assumed_seed << ',' << c.surrogate_value << ',' << c.utility << ',' << c.report.benign << ','
        << c.report.malicious << ',' << (c.assumed_seed == result.selected ? 1 : 0) << '\n';
  }
}

}  // namespace advnet
