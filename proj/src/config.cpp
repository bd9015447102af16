#include "advnet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "advnet/types.hpp"

namespace advnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) throw std::invalid_argument("bad number '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

template <class T>
Setter number(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_number<T>(v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"families", [](ExperimentConfig& c, const std::string& v) { c.families = split_list(v); }},
      {"nodes", number(&ExperimentConfig::nodes)},
      {"ba_exponent", number(&ExperimentConfig::ba_exponent)},
      {"ws_degree", number(&ExperimentConfig::ws_degree)},
      {"ws_rewire", number(&ExperimentConfig::ws_rewire)},
      {"ws_target_path", number(&ExperimentConfig::ws_target_path)},
      {"ws_target_clustering", number(&ExperimentConfig::ws_target_clustering)},
      {"topology_seeds", number(&ExperimentConfig::topology_seeds)},
      {"seed", number(&ExperimentConfig::seed)},
      {"spambase_path", [](ExperimentConfig& c, const std::string& v) { c.spambase_path = v; }},
      {"synthetic_rows", number(&ExperimentConfig::synthetic_rows)},
      {"split_base", number(&ExperimentConfig::split_base)},
      {"split_train", number(&ExperimentConfig::split_train)},
      {"split_test", number(&ExperimentConfig::split_test)},
      {"split_seed", number(&ExperimentConfig::split_seed)},
      {"train_malicious", number(&ExperimentConfig::train_malicious)},
      {"train_benign", number(&ExperimentConfig::train_benign)},
      {"test_malicious", number(&ExperimentConfig::test_malicious)},
      {"test_benign", number(&ExperimentConfig::test_benign)},
      {"alpha", number(&ExperimentConfig::alpha)},
      {"horizon", number(&ExperimentConfig::horizon)},
      {"epsilons",
       [](ExperimentConfig& c, const std::string& v) {
         c.epsilons.clear();
         for (const auto& item : split_list(v)) c.epsilons.push_back(parse_number<double>(item));
       }},
      {"n_simulations", number(&ExperimentConfig::n_simulations)},
      {"sse_simulations", number(&ExperimentConfig::sse_simulations)},
      {"origin_strata", number(&ExperimentConfig::origin_strata)},
      {"pgd_iterations", number(&ExperimentConfig::pgd_iterations)},
      {"pgd_step", number(&ExperimentConfig::pgd_step)},
      {"initial_threshold", number(&ExperimentConfig::initial_threshold)},
      {"attacker_iterations", number(&ExperimentConfig::attacker_iterations)},
      {"retrain_rounds", number(&ExperimentConfig::retrain_rounds)},
      {"strategies", [](ExperimentConfig& c, const std::string& v) { c.strategies = split_list(v); }},
      {"threads", number(&ExperimentConfig::threads)},
  };
  return table;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "," : "") << items[i];
  return out.str();
}

}  // namespace

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown key '" + key + "'");
  try {
    it->second(config, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(key + ": " + e.what());
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    try {
      apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  return parse_config(in);
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
  };
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0,1]");
  require(c.horizon > 0.0, "horizon must be positive");
  require(!c.epsilons.empty(), "epsilons must not be empty");
  for (double e : c.epsilons) require(e > 0.0, "every epsilon must be positive");
  require(c.n_simulations >= 1 && c.sse_simulations >= 1, "simulation counts must be >= 1");
  require(c.nodes >= 2, "nodes must be >= 2");
  require(c.topology_seeds >= 1, "topology_seeds must be >= 1");
  require(c.ws_degree >= 2 && c.ws_degree % 2 == 0 && c.ws_degree < c.nodes, "ws_degree must be even and below nodes");
  require(c.ba_exponent > 1.0, "ba_exponent must exceed 1");
  require(c.ws_rewire <= 1.0, "ws_rewire must be <= 1");
  require(c.split_base > 0 && c.split_train > 0 && c.split_test > 0, "split sizes must be positive");
  require(c.train_malicious >= 0 && c.train_benign >= 0 && c.test_malicious >= 0 && c.test_benign >= 0,
          "subset sizes must be nonnegative");
  require(c.pgd_iterations >= 1 && c.pgd_step > 0.0, "pgd_iterations >= 1 and pgd_step > 0 required");
  require(c.initial_threshold > 0.0 && c.initial_threshold < 1.0, "initial_threshold must lie in (0,1)");
  require(c.attacker_iterations >= 1 && c.retrain_rounds >= 1, "solver iteration counts must be >= 1");
  require(!c.families.empty(), "families must not be empty");
  for (const auto& f : c.families) require(f == "ba" || f == "ws", "unknown family '" + f + "'");
  require(!c.strategies.empty(), "strategies must not be empty");
  for (const auto& s : c.strategies) {
    require(s == "sse" || s == "baseline" || s == "retrain" || s == "single", "unknown strategy '" + s + "'");
  }
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  out.precision(17);
  out << "families=" << join(c.families) << "\nnodes=" << c.nodes << "\nba_exponent=" << c.ba_exponent
      << "\nws_degree=" << c.ws_degree << "\nws_rewire=" << c.ws_rewire << "\nws_target_path=" << c.ws_target_path
      << "\nws_target_clustering=" << c.ws_target_clustering << "\ntopology_seeds=" << c.topology_seeds
      << "\nseed=" << c.seed << "\nspambase_path=" << c.spambase_path << "\nsynthetic_rows=" << c.synthetic_rows
      << "\nsplit_base=" << c.split_base << "\nsplit_train=" << c.split_train << "\nsplit_test=" << c.split_test
      << "\nsplit_seed=" << c.split_seed << "\ntrain_malicious=" << c.train_malicious
      << "\ntrain_benign=" << c.train_benign << "\ntest_malicious=" << c.test_malicious
      << "\ntest_benign=" << c.test_benign << "\nalpha=" << c.alpha << "\nhorizon=" << c.horizon
      << "\nepsilons=" << join(c.epsilons) << "\nn_simulations=" << c.n_simulations
      << "\nsse_simulations=" << c.sse_simulations << "\norigin_strata=" << c.origin_strata
      << "\npgd_iterations=" << c.pgd_iterations << "\npgd_step=" << c.pgd_step
      << "\ninitial_threshold=" << c.initial_threshold << "\nattacker_iterations=" << c.attacker_iterations
      << "\nretrain_rounds=" << c.retrain_rounds << "\nstrategies=" << join(c.strategies)
      << "\nthreads=" << c.threads << '\n';
}

}  // namespace advnet
