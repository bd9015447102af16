#include "advnet/baselines.hpp"

#include <cmath>

#include "advnet/parallel.hpp"

namespace advnet {

DetectorBank baseline_uniform(const LogisticModel& model, int node_count) {
  return DetectorBank::uniform(model, node_count, 0.5);
}

RetrainResult retraining_defense(const LabeledDataset& base, const Network& network,
                                 const std::vector<PropagationTree>& forest, const Matrix& targets, double budget,
                                 const RetrainOptions& options) {
  if (options.max_rounds < 1) throw ValidationError("retraining: max_rounds must be >= 1");
  if (targets.rows() > 0 && targets.cols() != base.n_features()) throw ValidationError("retraining: feature width mismatch");
  LabeledDataset data = base;
  Matrix previous = targets;
  LogisticModel model;
  int rounds = 0;
  double movement = 0.0;
  std::vector<Eigen::Index> sizes;
  for (int round = 1; round <= options.max_rounds; ++round) {
    rounds = round;
    sizes.push_back(data.size());
    model = train_logistic(data, options.train);
    const DetectorBank bank = baseline_uniform(model, network.node_count());
    Matrix payloads(targets.rows(), targets.cols());
    parallel_for(static_cast<std::size_t>(targets.rows()), options.threads, [&](std::size_t r) {
      const auto row = static_cast<Eigen::Index>(r);
      payloads.row(row) =
          optimal_attack(network, forest, bank, targets.row(row).transpose(), budget, options.attacker).payload.transpose();
    });
    movement = targets.rows() == 0 ? 0.0 : (payloads - previous).rowwise().norm().maxCoeff();
    if (movement < options.movement_tolerance || round == options.max_rounds) break;
    const Eigen::Index old_rows = data.size();
    data.features.conservativeResize(old_rows + payloads.rows(), Eigen::NoChange);
    data.features.bottomRows(payloads.rows()) = payloads;
    data.labels.insert(data.labels.end(), static_cast<std::size_t>(payloads.rows()), Label::malicious);
    previous = std::move(payloads);
  }
  return RetrainResult{baseline_uniform(model, network.node_count()), rounds, movement, std::move(sizes)};
}

std::vector<double> SingleThresholdOptions::default_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  return grid;
}

SingleThresholdResult personalized_single_threshold(const Network& network, const LogisticModel& model,
                                                    const LabeledDataset& data, const SingleThresholdOptions& options) {
  if (options.grid.empty()) throw ValidationError("single threshold: empty grid");
  if (options.n_simulations < 1) throw ValidationError("single threshold: n_simulations must be >= 1");
  if (data.size() > 0 && data.n_features() != network.n_features()) {
    throw ValidationError("single threshold: feature width mismatch");
  }
  const int N = network.node_count();
  const auto rows = static_cast<std::size_t>(data.size());
  const DetectorBank uniform = baseline_uniform(model, N);

  // A cascade started at i is empty when i flags x and otherwise does not
  // depend on theta_i, so one estimate per (i, x) with i open covers the grid.
  std::vector<ContentContext> contents(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    contents[r] = prepare_content(network, uniform, data.features.row(static_cast<Eigen::Index>(r)).transpose());
  }
  Matrix open_influence(N, static_cast<Eigen::Index>(rows));
  parallel_for(static_cast<std::size_t>(N), options.threads, [&](std::size_t i) {
    const auto node = static_cast<NodeId>(i);
    for (std::size_t r = 0; r < rows; ++r) {
      ContentContext content = contents[r];
      content.blocked[i] = 0;
      const auto key = derive_seed(derive_seed(options.seed, 0x51, i), r);
      open_influence(node, static_cast<Eigen::Index>(r)) =
          estimate_influence(network, content, node, options.horizon, options.n_simulations, key);
    }
  });

  const auto G = static_cast<Eigen::Index>(options.grid.size());
  Matrix table = Matrix::Zero(N, G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const double bound = logit(std::clamp(options.grid[static_cast<std::size_t>(g)], kThresholdClamp, 1.0 - kThresholdClamp));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      if (model.margin(data.features.row(row).transpose()) > bound) continue;
      const double weight = data.labels[r] == Label::benign ? options.alpha : -(1.0 - options.alpha);
      table.col(g) += weight * open_influence.col(row);
    }
  }
  Eigen::Index best_node = 0, best_g = 0;
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index g = 0; g < G; ++g) {
      if (table(i, g) > table(best_node, best_g)) {
        best_node = i;
        best_g = g;
      }
    }
  }
  DetectorBank bank = uniform;
  const double theta = options.grid[static_cast<std::size_t>(best_g)];
  bank.set_threshold(static_cast<NodeId>(best_node), theta);
  return SingleThresholdResult{std::move(bank), static_cast<NodeId>(best_node), theta, table(best_node, best_g),
                               std::move(table)};
}

}  // namespace advnet
