#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "advnet/dataset.hpp"
#include "advnet/types.hpp"

namespace advnet {

/// Threshold clamp: every threshold lives in [kThresholdClamp, 1 - kThresholdClamp].
inline constexpr double kThresholdClamp = 1e-4;

enum class Verdict { benign, malicious };

template <class Scalar>
Scalar logit(Scalar p) {
  using std::log;
  return log(p / (Scalar(1) - p));
}

/// Shared logistic scorer with one decision threshold per node.
class DetectorBank {
 public:
  DetectorBank(LogisticModel model, Vector thresholds);
  /// Every node at the same threshold.
  static DetectorBank uniform(LogisticModel model, int node_count, double threshold = 0.5);

  const LogisticModel& model() const noexcept { return model_; }
  const Vector& thresholds() const noexcept { return thresholds_; }
  double threshold(NodeId node) const { return thresholds_(node); }
  double threshold_logit(NodeId node) const { return logit(thresholds_(node)); }
  int node_count() const noexcept { return static_cast<int>(thresholds_.size()); }

  /// Values are clamped into the admissible box.
  void set_thresholds(Vector thresholds);
  void set_threshold(NodeId node, double value);

  /// Smallest threshold logit over all nodes, minus the model bias: the
  /// tightest evasion halfspace is weights.z <= min_evasion_bound().
  double min_evasion_bound() const;

 private:
  LogisticModel model_;
  Vector thresholds_;
};

Vector clamp_thresholds(Vector thresholds);

/// Benign iff score(x) <= threshold, i.e. margin(x) <= logit(threshold).
Verdict classify(const DetectorBank& bank, NodeId node, const VectorRef& x);
inline bool passes(const DetectorBank& bank, NodeId node, const VectorRef& x) {
  return classify(bank, node, x) == Verdict::benign;
}

/// Surrogate pass-score for each listed node: logit(theta_i) - margin(x).
/// Positive entries are classified benign.
Vector surrogate_c(const DetectorBank& bank, std::span<const NodeId> nodes, const VectorRef& x);

/// Diagonal of d c / d theta for the listed nodes: 1 / (theta - theta^2).
Vector dc_dtheta(const DetectorBank& bank, std::span<const NodeId> nodes);

/// Gradient of the surrogate indicator at `node` with respect to all
/// thresholds: zero except 1 / (theta - theta^2) at `node`.
Vector dind_dtheta(const DetectorBank& bank, NodeId node);

inline double logit_derivative(double theta) { return 1.0 / (theta - theta * theta); }

void write_thresholds(std::ostream& out, const Vector& thresholds);
Vector read_thresholds(std::istream& in);
void save_thresholds(const Vector& thresholds, const std::filesystem::path& path);
Vector load_thresholds(const std::filesystem::path& path);

}  // namespace advnet
