#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace advnet {

struct ExperimentConfig {
  // topology
  std::vector<std::string> families{"ba", "ws"};
  int nodes = 32;
  double ba_exponent = 2.1;
  int ws_degree = 4;
  double ws_rewire = -1.0;  // negative: calibrate to the targets below
  double ws_target_path = 5.9;
  double ws_target_clustering = 0.144;
  int topology_seeds = 10;
  std::uint64_t seed = 1;

  // data
  std::string spambase_path;  // empty: synthetic corpus
  int synthetic_rows = 4601;
  int split_base = 3681;
  int split_train = 460;
  int split_test = 460;
  std::uint64_t split_seed = 7;
  int train_malicious = 20;
  int train_benign = 20;
  int test_malicious = 20;
  int test_benign = 20;

  // game
  double alpha = 0.5;
  double horizon = 1.0;
  std::vector<double> epsilons{0.01};
  int n_simulations = 1000;
  int sse_simulations = 1000;
  int origin_strata = 16;

  // solvers
  int pgd_iterations = 50;
  double pgd_step = 0.05;
  double initial_threshold = 0.5;
  int attacker_iterations = 500;
  int retrain_rounds = 10;
  std::vector<std::string> strategies{"sse", "baseline", "retrain", "single"};
  unsigned threads = 1;
};

/// key=value lines; '#' starts a comment; lists are comma separated.
/// Unknown keys and malformed values raise ParseError with the line number;
/// out-of-range values raise ValidationError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `key=value` assignment on top of an existing config.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
void validate(const ExperimentConfig& config);
void write_config(std::ostream& out, const ExperimentConfig& config);

}  // namespace advnet
