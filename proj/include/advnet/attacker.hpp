#pragma once

#include <algorithm>
#include <iosfwd>
#include <vector>

#include "advnet/dataset.hpp"
#include "advnet/detector.hpp"
#include "advnet/diffusion.hpp"
#include "advnet/network.hpp"
#include "advnet/types.hpp"

namespace advnet {

/// F = {|z - x|^2 <= budget} ∩ {normal.z <= bound} ∩ {z >= 0}.
///
/// Every node shares the scorer, so the per-node evasion constraints
/// collapse to one halfspace at the smallest threshold logit.
struct EvasionSet {
  Vector center;
  double budget;
  Vector normal;
  double bound;

  static EvasionSet from_bank(const DetectorBank& bank, const VectorRef& x, double budget) {
    return {x, budget, bank.model().weights, bank.min_evasion_bound()};
  }
};

struct ConstraintResiduals {
  double budget = 0.0;     // max(0, |z-x|^2 - budget)
  double detection = 0.0;  // max(0, normal.z - bound)
  double orthant = 0.0;    // max(0, -min z)
  double max() const { return std::max({budget, detection, orthant}); }
};

ConstraintResiduals residuals(const EvasionSet& set, const VectorRef& z);

struct DykstraOptions {
  int max_cycles = 20000;
  double tolerance = 1e-15;
};

/// Euclidean projection onto F by Dykstra's alternating projections over
/// (ball, halfspace, orthant).
Vector project_dykstra(const EvasionSet& set, const VectorRef& y, const DykstraOptions& options = {});

struct AttackerOptions {
  int max_iterations = 500;
  double movement_tolerance = 1e-9;
  double feasibility_tolerance = 1e-8;
  /// Accept an exact solution of the KKT system on the iterate's active set
  /// once that active set stops changing and the multipliers check out.
  bool active_set_finish = true;
  DykstraOptions projection;
};

struct EvasionResult {
  Vector z;
  double objective = 0.0;
  bool feasible = false;
  int iterations = 0;
};

/// max direction.z over F by projected gradient ascent (step 1/|direction|).
/// Infeasible F returns (x, direction.x, false).
EvasionResult solve_evasion(const VectorRef& direction, const EvasionSet& set, const AttackerOptions& options = {});

/// Per-seed evasion program: maximize the surrogate spread of the tree.
EvasionResult evade_for_node(const PropagationTree& tree, const DetectorBank& bank, const VectorRef& x,
                             double budget, const AttackerOptions& options = {});

/// Lagrangian state of the evasion program at a solution, in minimization
/// form: -a + 2 lambda (z - x) + sum_k mu_k normal - eta = 0.
struct KktState {
  Vector z;
  double lambda = 0.0;
  std::vector<NodeId> active_nodes;  // nodes whose detection constraint is tight
  Vector mu;                         // one multiplier per active node
  Vector eta;                        // orthant multipliers, length n
  bool budget_active = false;
  double stationarity = 0.0;         // inf-norm of the stationarity residual
  double complementarity = 0.0;      // max |lambda g|, |eta_i z_i|
  double feasibility = 0.0;
};

struct KktTolerances {
  double budget = 1e-8;
  double detection = 1e-7;
  double orthant = 1e-9;
};

/// Multipliers by nonnegative least squares on the active constraints;
/// the detection multiplier is split evenly among tied nodes.
KktState kkt_state(const VectorRef& direction, const EvasionSet& set, const DetectorBank& bank, const VectorRef& z,
                   const KktTolerances& tol = {});

struct AttackPlan {
  NodeId seed = 0;
  Vector payload;
  double utility = 0.0;
  bool feasible = false;
};

/// Best response: solve the evasion program from every seed, keep the
/// highest surrogate utility (ties to the lowest node id). When F is empty
/// the original content is sent from the seed maximizing direction.x.
AttackPlan optimal_attack(const Network& network, const std::vector<PropagationTree>& forest, const DetectorBank& bank,
                          const VectorRef& x, double budget, const AttackerOptions& options = {});
AttackPlan optimal_attack(const Network& network, const DetectorBank& bank, const VectorRef& x, double budget,
                          const AttackerOptions& options = {});

/// optimal_attack for every row of `malicious`, in row order.
std::vector<AttackPlan> attack_dataset(const Network& network, const std::vector<PropagationTree>& forest,
                                       const DetectorBank& bank, const LabeledDataset& malicious, double budget,
                                       const AttackerOptions& options = {}, unsigned threads = 1);

/// `instance_id,seed,feasible,objective,l2sq_displacement`
void write_attack_csv(std::ostream& out, const std::vector<AttackPlan>& plans, const LabeledDataset& originals);
/// Payload CSV (one row per plan: seed then payload features) for re-loading.
void write_payload_csv(std::ostream& out, const std::vector<AttackPlan>& plans);
std::vector<AttackPlan> read_payload_csv(std::istream& in);

}  // namespace advnet
