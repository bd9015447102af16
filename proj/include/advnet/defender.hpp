#pragma once

#include <iosfwd>
#include <vector>

#include "advnet/attacker.hpp"
#include "advnet/detector.hpp"
#include "advnet/diffusion.hpp"
#include "advnet/evaluation.hpp"
#include "advnet/network.hpp"
#include "advnet/types.hpp"

namespace advnet {

/// Data shared by every evaluation of the surrogate defender problem.
/// Rows of `benign` and `malicious` are instances.
struct DefenseProblem {
  const Network& network;
  const std::vector<PropagationTree>& forest;
  LogisticModel model;
  Matrix benign;
  Matrix malicious;
  double alpha = 0.5;
  double budget = 0.01;
};

/// u_root(y) * sum over non-root v of k_v (logit theta_v - m(y)) w_{e(v)}.y,
/// where u_root(y) = logit theta_root - m(y) and m is the scorer margin.
double surrogate_tree_term(const PropagationTree& tree, const DetectorBank& bank, const VectorRef& y);

/// (1-alpha) sum_x term(tree_s, z(x)) - alpha sum_{x benign} sum_j term(tree_j, x).
/// `payloads` holds one attacked payload per malicious row.
double surrogate_defender_objective(const DefenseProblem& problem, const DetectorBank& bank,
                                    const std::vector<Vector>& payloads, NodeId assumed_seed);

struct ImplicitJacobian {
  Matrix dz;                 // n x N
  bool regularized = false;  // rank-deficient system solved with a ridge
};

/// dz*/dTheta from the KKT system of the evasion program at `state`.
/// Unknowns (z, lambda, mu over active nodes, eta); equations stationarity,
/// lambda g, h_k for active k, eta (.) (-z).
ImplicitJacobian implicit_dz_dtheta(const KktState& state, const VectorRef& x, double budget, const DetectorBank& bank,
                                    double kkt_tolerance = 1e-6);

/// Attacker response to a fixed seed for one malicious instance.
struct FixedSeedResponse {
  Vector z;
  bool feasible = false;
  KktState kkt;
};

std::vector<FixedSeedResponse> respond_fixed_seed(const DefenseProblem& problem, const DetectorBank& bank,
                                                  NodeId assumed_seed, const AttackerOptions& options = {},
                                                  unsigned threads = 1);

/// grad = (1 - alpha) malicious - alpha benign.
struct GradientParts {
  Vector malicious;
  Vector benign;
  int regularized = 0;       // instances whose implicit system needed the ridge
  int skipped_implicit = 0;  // instances whose KKT residuals were too large
  Vector combine(double alpha) const { return (1.0 - alpha) * malicious - alpha * benign; }
};

/// Chain-rule gradient of the surrogate objective. With `explicit_only`
/// the payloads are held fixed.
GradientParts gradient_parts(const DefenseProblem& problem, const DetectorBank& bank,
                             const std::vector<FixedSeedResponse>& responses, NodeId assumed_seed,
                             bool explicit_only = false);
Vector grad_theta(const DefenseProblem& problem, const DetectorBank& bank,
                  const std::vector<FixedSeedResponse>& responses, NodeId assumed_seed, bool explicit_only = false);

struct PgdOptions {
  int iterations = 50;
  double step = 0.05;  // beta_0; beta_t = beta_0 / sqrt(t + 1)
  double initial_threshold = 0.5;
  int max_restarts = 3;
  double divergence_limit = 1e12;
  bool explicit_only = false;
  AttackerOptions attacker;
  unsigned threads = 1;
};

struct TrajectoryPoint {
  int iter = 0;
  double objective = 0.0;
  double step = 0.0;
  Vector thresholds;
};

struct DefenseResult {
  Vector thresholds;
  double surrogate_value = 0.0;
  NodeId assumed_seed = 0;
  int best_iter = 0;
  int restarts = 0;
  std::vector<TrajectoryPoint> trajectory;
};

DefenseResult pgd_defense(const DefenseProblem& problem, NodeId assumed_seed, const PgdOptions& options = {});

void write_trajectory_csv(std::ostream& out, const DefenseResult& result);

struct SseOptions {
  PgdOptions pgd;
  UtilityOptions evaluation;
  unsigned threads = 1;
};

struct SseCandidate {
  NodeId assumed_seed = 0;
  double surrogate_value = 0.0;
  double utility = 0.0;
  UtilityReport report;
  Vector thresholds;
};

struct SseResult {
  Vector thresholds;
  NodeId selected = 0;
  double utility = 0.0;
  std::vector<SseCandidate> candidates;
};

/// Run PGD for every assumed seed, let the attacker best-respond to each
/// candidate and keep the one with the highest Monte Carlo utility (ties to
/// the lowest node id).
SseResult sse_defense(const DefenseProblem& problem, const SseOptions& options = {});

/// Index of the largest value, ties to the lowest index.
std::size_t argmax_lowest(const std::vector<double>& values);

void write_sse_report_csv(std::ostream& out, const SseResult& result);

}  // namespace advnet
