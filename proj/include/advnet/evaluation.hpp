#pragma once

#include <cstdint>
#include <vector>

#include "advnet/attacker.hpp"
#include "advnet/detector.hpp"
#include "advnet/network.hpp"
#include "advnet/types.hpp"

namespace advnet {

struct UtilityOptions {
  double alpha = 0.5;
  double horizon = 1.0;
  int n_simulations = 1000;
  std::uint64_t seed = 0;
  /// Benign origins: the exact sum over all nodes when N <= origin_strata,
  /// otherwise one uniformly drawn node per degree-ordered stratum, scaled by
  /// the stratum size (an unbiased estimate of the node sum).
  int origin_strata = 16;
  unsigned threads = 1;
};

struct UtilityReport {
  double utility = 0.0;    // alpha * benign - (1 - alpha) * malicious
  double benign = 0.0;     // sum over benign x and origins i of sigma(i, x)
  double malicious = 0.0;  // sum over plans of sigma(s, z)
  double alpha = 0.5;
  bool benign_exact = true;
  int origins_used = 0;
  std::vector<int> seed_histogram;  // attacker seed choices, length N
  double wall_seconds = 0.0;
};

/// Origin nodes and their weights for the benign node sum.
struct OriginSample {
  std::vector<NodeId> nodes;
  std::vector<double> weights;
  bool exact = true;
};
OriginSample sample_origins(const Network& network, int strata, std::uint64_t seed);

/// Monte Carlo defender utility. Cascades for the same (instance, origin)
/// reuse the same random streams across detector banks.
UtilityReport defender_utility(const Network& network, const DetectorBank& bank, const Matrix& benign,
                               const std::vector<AttackPlan>& plans, const UtilityOptions& options);

}  // namespace advnet
