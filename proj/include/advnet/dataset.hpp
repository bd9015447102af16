#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "advnet/types.hpp"

namespace advnet {

enum class Label { benign = 0, malicious = 1 };
enum class SplitTag { base, train, test, full };

/// One content item: a feature vector with its label.
struct ContentInstance {
  Vector features;
  Label label;
};

/// Row-major view of a corpus: row i of `features` is instance i.
struct LabeledDataset {
  Matrix features;
  std::vector<Label> labels;
  SplitTag tag = SplitTag::full;

  Eigen::Index size() const noexcept { return features.rows(); }
  Eigen::Index n_features() const noexcept { return features.cols(); }
  ContentInstance instance(Eigen::Index i) const { return {features.row(i).transpose(), labels[static_cast<std::size_t>(i)]}; }

  /// Rows with the given label (D+ for malicious, D- for benign).
  LabeledDataset with_label(Label label) const;
  LabeledDataset subset(const std::vector<Eigen::Index>& rows) const;
  /// First `count` rows of each class, in original order.
  LabeledDataset head_per_class(Eigen::Index malicious, Eigen::Index benign) const;
  Eigen::Index count(Label label) const;
};

/// Per-feature min/max observed on the fitting split.
struct MinMaxStats {
  Vector min;
  Vector max;
};

/// Logistic scorer: score(x) = 1 / (1 + exp(-(w.x + b))).
struct LogisticModel {
  Vector weights;
  double bias = 0.0;

  double margin(const VectorRef& x) const { return weights.dot(x) + bias; }
  double score(const VectorRef& x) const;
};

constexpr int kSpambaseFeatures = 57;
constexpr int kSpambaseRows = 4601;

/// UCI Spambase CSV: 57 numeric columns then a 0/1 label (1 = malicious).
LabeledDataset read_spambase(std::istream& in);
LabeledDataset load_spambase(const std::filesystem::path& path);

/// Seeded stand-in with Spambase's shape (57 nonnegative heavy-tailed
/// features, ~39% malicious): 48 word frequencies, 6 character frequencies,
/// 3 capital-run statistics, with class-dependent rates.
LabeledDataset synthetic_spambase(Eigen::Index rows, std::uint64_t seed);

/// Affine map of each feature onto [0,1] using this dataset's min/max;
/// constant features map to 0.
std::pair<LabeledDataset, MinMaxStats> normalize_minmax(const LabeledDataset& dataset);
/// Apply saved statistics; results are clamped into [0,1].
LabeledDataset apply_minmax(const LabeledDataset& dataset, const MinMaxStats& stats);

/// Disjoint random partition into (base, train, test) of the given sizes.
std::array<LabeledDataset, 3> split(const LabeledDataset& dataset, std::array<Eigen::Index, 3> sizes,
                                    std::uint64_t seed);
std::array<std::vector<Eigen::Index>, 3> split_indices(Eigen::Index total, std::array<Eigen::Index, 3> sizes,
                                                       std::uint64_t seed);

struct TrainOptions {
  int epochs = 20000;
  double step_size = 1.0;
  double l2_reg = 1e-4;
  double gradient_tolerance = 1e-4;
};

struct LossAndGradient {
  double loss;
  Vector weight_gradient;
  double bias_gradient;
};

/// Mean log-loss plus (l2/2)|w|^2 (bias unregularized).
LossAndGradient logistic_loss(const LabeledDataset& data, const LogisticModel& model, double l2_reg);

struct TrainReport {
  LogisticModel model;
  std::vector<double> loss_history;
  double final_gradient_norm;
};

/// Full-batch gradient descent with Armijo backtracking; the step grows
/// after each accepted move so the loss is monotone nonincreasing.
TrainReport train_logistic_report(const LabeledDataset& data, const TrainOptions& options = {});
LogisticModel train_logistic(const LabeledDataset& data, const TrainOptions& options = {});

/// Fraction of rows where (score > threshold) matches the malicious label.
double accuracy(const LogisticModel& model, const LabeledDataset& data, double threshold = 0.5);

void write_dataset_csv(std::ostream& out, const LabeledDataset& data);
LabeledDataset read_dataset_csv(std::istream& in);
void save_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path);
LabeledDataset load_dataset_csv(const std::filesystem::path& path);

/// JSON with per-feature "min"/"max" and optional "weights"/"bias".
void save_stats_json(const std::filesystem::path& path, const MinMaxStats& stats, const LogisticModel* model = nullptr);
MinMaxStats load_stats_json(const std::filesystem::path& path);
LogisticModel load_model_json(const std::filesystem::path& path);
void save_model_json(const std::filesystem::path& path, const LogisticModel& model);

}  // namespace advnet
