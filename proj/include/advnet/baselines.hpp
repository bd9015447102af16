#pragma once

#include <vector>

#include "advnet/attacker.hpp"
#include "advnet/dataset.hpp"
#include "advnet/detector.hpp"
#include "advnet/diffusion.hpp"
#include "advnet/evaluation.hpp"
#include "advnet/network.hpp"

namespace advnet {

/// Every node deploys `model` at threshold 0.5.
DetectorBank baseline_uniform(const LogisticModel& model, int node_count);

struct RetrainOptions {
  int max_rounds = 10;
  double movement_tolerance = 1e-4;
  TrainOptions train;
  AttackerOptions attacker;
  unsigned threads = 1;
};

struct RetrainResult {
  DetectorBank bank;
  int rounds = 0;
  double last_movement = 0.0;
  std::vector<Eigen::Index> training_sizes;  // training-set size used in each round
};

/// Adversarial retraining: fit on `base`, attack `targets` against the
/// uniform 0.5 bank, append the payloads labeled malicious and refit, until
/// the payloads move less than the tolerance (max over instances, l2) or
/// max_rounds models have been trained.
RetrainResult retraining_defense(const LabeledDataset& base, const Network& network,
                                 const std::vector<PropagationTree>& forest, const Matrix& targets, double budget,
                                 const RetrainOptions& options = {});

struct SingleThresholdOptions {
  std::vector<double> grid = default_grid();
  double alpha = 0.5;
  double horizon = 1.0;
  int n_simulations = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  static std::vector<double> default_grid();  // 0.05, 0.10, ..., 0.95
};

struct SingleThresholdResult {
  DetectorBank bank;
  NodeId node = 0;
  double threshold = 0.5;
  double utility = 0.0;
  Matrix table;  // utility per (node, grid value)
};

/// Tune one node's threshold on unattacked data. U(i, theta) is the utility
/// with only theta_i changed and every influence estimated from cascades
/// started at i; streams are keyed by (i, instance) so the grid shares them.
SingleThresholdResult personalized_single_threshold(const Network& network, const LogisticModel& model,
                                                    const LabeledDataset& data,
                                                    const SingleThresholdOptions& options = {});

}  // namespace advnet
