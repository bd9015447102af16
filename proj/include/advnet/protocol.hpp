#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "advnet/config.hpp"
#include "advnet/dataset.hpp"
#include "advnet/detector.hpp"
#include "advnet/diffusion.hpp"
#include "advnet/evaluation.hpp"
#include "advnet/network.hpp"

namespace advnet {

/// Normalized splits and the logistic scorer fitted on the base split.
struct PreparedData {
  LabeledDataset base;
  LabeledDataset train;
  LabeledDataset test;
  MinMaxStats stats;
  LogisticModel model;
  bool synthetic = true;
};

PreparedData prepare_data(const ExperimentConfig& config);

/// Rewiring probability used for small-world nets (calibrated when the
/// configured value is negative).
double resolve_ws_rewire(const ExperimentConfig& config);

/// Topology `index` of a family with Uniform[0,1] edge parameters.
Network build_topology(const ExperimentConfig& config, const std::string& family, int index, double ws_rewire,
                       int n_features);

/// Inputs of one (family, topology) cell.
struct ProtocolCell {
  std::string family;
  int topology = 0;
  const Network& network;
  const PreparedData& data;
};

struct StrategyOutcome {
  DetectorBank bank;
  std::string detail;
};

/// Defense for one strategy ("sse", "baseline", "retrain", "single") fitted on
/// the reduced training split.
StrategyOutcome build_defense(const ExperimentConfig& config, const ProtocolCell& cell,
                              const std::vector<PropagationTree>& forest, const std::string& strategy, double epsilon);

struct ProtocolRow {
  std::string family;
  int topology = 0;
  std::string strategy;
  double epsilon = 0.0;
  UtilityReport report;
  int feasible_attacks = 0;
  int attacks = 0;
  std::string detail;
  std::string error;
};

/// For each (epsilon, strategy): build the defense, let the attacker
/// best-respond on the reduced test split and evaluate the utility.
/// A failing strategy yields a row with `error` set.
std::vector<ProtocolRow> run_protocol(const ExperimentConfig& config, const ProtocolCell& cell);

struct FigureRow {
  std::string family;
  double r_or_ws = 0.0;  // BA exponent or WS rewiring probability
  std::string strategy;
  double epsilon = 0.0;
  double mean_utility = 0.0;
  double std = 0.0;
  int count = 0;
};

struct ReproduceResult {
  std::vector<ProtocolRow> rows;
  std::vector<FigureRow> figure;
  double ws_rewire = 0.0;
};

/// run_protocol over topology_seeds topologies per family.
ReproduceResult reproduce_figures(const ExperimentConfig& config);

std::vector<FigureRow> summarize(const std::vector<ProtocolRow>& rows, const ExperimentConfig& config, double ws_rewire);

std::string format_double(double v);
void write_report_csv(std::ostream& out, const std::vector<ProtocolRow>& rows);
void write_figure_csv(std::ostream& out, const std::vector<FigureRow>& rows);
/// Wall times are kept out of the CSV files so those stay byte-reproducible.
void write_timing_log(std::ostream& out, const std::vector<ProtocolRow>& rows);

}  // namespace advnet
