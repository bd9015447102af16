#include "advnet/protocol.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "advnet/attacker.hpp"
#include "advnet/baselines.hpp"
#include "advnet/defender.hpp"
#include "advnet/parallel.hpp"

namespace advnet {

namespace {

std::uint64_t family_tag(const std::string& family) { return family == "ba" ? 0xBA : 0x5E; }

std::uint64_t cell_seed(const ExperimentConfig& config, const std::string& family, int topology) {
  return derive_seed(config.seed, family_tag(family), static_cast<std::uint64_t>(topology));
}

AttackerOptions attacker_options(const ExperimentConfig& config) {
  AttackerOptions options;
  options.max_iterations = config.attacker_iterations;
  return options;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData out;
  LabeledDataset raw;
  if (!config.spambase_path.empty()) {
    raw = load_spambase(config.spambase_path);
    out.synthetic = false;
  } else {
    raw = synthetic_spambase(config.synthetic_rows, derive_seed(config.split_seed, 0xDA7A));
  }
  auto parts = split(raw, {config.split_base, config.split_train, config.split_test}, config.split_seed);
  auto [base, stats] = normalize_minmax(parts[0]);
  out.base = std::move(base);
  out.stats = std::move(stats);
  out.train = apply_minmax(parts[1], out.stats);
  out.test = apply_minmax(parts[2], out.stats);
  out.base.tag = SplitTag::base;
  out.train.tag = SplitTag::train;
  out.test.tag = SplitTag::test;
  out.model = train_logistic(out.base);
  return out;
}

double resolve_ws_rewire(const ExperimentConfig& config) {
  if (config.ws_rewire >= 0.0) return config.ws_rewire;
  return calibrate_ws(config.nodes, config.ws_degree, config.ws_target_path, config.ws_target_clustering, 10,
                      derive_seed(config.seed, 0xCA1));
}

Network build_topology(const ExperimentConfig& config, const std::string& family, int index, double ws_rewire,
                       int n_features) {
  const auto seed = cell_seed(config, family, index);
  Network topology = family == "ba" ? generate_ba(config.nodes, config.ba_exponent, seed)
                                    : generate_ws(config.nodes, config.ws_degree, ws_rewire, seed);
  return sample_edge_params(topology, n_features, derive_seed(seed, 0xED6E));
}

StrategyOutcome build_defense(const ExperimentConfig& config, const ProtocolCell& cell,
                              const std::vector<PropagationTree>& forest, const std::string& strategy, double epsilon) {
  const auto& data = cell.data;
  const LabeledDataset train = data.train.head_per_class(config.train_malicious, config.train_benign);
  const auto seed = cell_seed(config, cell.family, cell.topology);
  const int N = cell.network.node_count();
  if (strategy == "baseline") return {baseline_uniform(data.model, N), ""};
  if (strategy == "retrain") {
    RetrainOptions options;
    options.max_rounds = config.retrain_rounds;
    options.attacker = attacker_options(config);
    auto result = retraining_defense(data.base, cell.network, forest, train.with_label(Label::malicious).features,
                                     epsilon, options);
    return {std::move(result.bank), "rounds=" + std::to_string(result.rounds)};
  }
  if (strategy == "single") {
    SingleThresholdOptions options;
    options.alpha = config.alpha;
    options.horizon = config.horizon;
    options.n_simulations = config.n_simulations;
    options.seed = derive_seed(seed, 0x5146);
    auto result = personalized_single_threshold(cell.network, data.model, train, options);
    return {std::move(result.bank), "node=" + std::to_string(result.node) + ";theta=" + format_double(result.threshold)};
  }
  if (strategy == "sse") {
    DefenseProblem problem{cell.network, forest, data.model, train.with_label(Label::benign).features,
                           train.with_label(Label::malicious).features, config.alpha, epsilon};
    SseOptions options;
    options.pgd.iterations = config.pgd_iterations;
    options.pgd.step = config.pgd_step;
    options.pgd.initial_threshold = config.initial_threshold;
    options.pgd.attacker = attacker_options(config);
    options.evaluation.horizon = config.horizon;
    options.evaluation.n_simulations = config.sse_simulations;
    options.evaluation.origin_strata = config.origin_strata;
    options.evaluation.seed = derive_seed(seed, 0x55E);
    auto result = sse_defense(problem, options);
    return {DetectorBank(data.model, result.thresholds), "selected=" + std::to_string(result.selected)};
  }
  throw ValidationError("unknown strategy '" + strategy + "'");
}

std::vector<ProtocolRow> run_protocol(const ExperimentConfig& config, const ProtocolCell& cell) {
  validate(config);
  const auto forest = build_forest(cell.network);
  const LabeledDataset test = cell.data.test.head_per_class(config.test_malicious, config.test_benign);
  const LabeledDataset test_malicious = test.with_label(Label::malicious);
  const Matrix test_benign = test.with_label(Label::benign).features;
  UtilityOptions evaluation;
  evaluation.alpha = config.alpha;
  evaluation.horizon = config.horizon;
  evaluation.n_simulations = config.n_simulations;
  evaluation.origin_strata = config.origin_strata;
  evaluation.seed = derive_seed(cell_seed(config, cell.family, cell.topology), 0xE7A1);

  std::map<std::string, StrategyOutcome> epsilon_free;
  std::vector<ProtocolRow> rows;
  for (double epsilon : config.epsilons) {
    for (const auto& strategy : config.strategies) {
      ProtocolRow row;
      row.family = cell.family;
      row.topology = cell.topology;
      row.strategy = strategy;
      row.epsilon = epsilon;
      try {
        std::optional<StrategyOutcome> fresh;
        const StrategyOutcome* outcome = nullptr;
        if (strategy == "baseline" || strategy == "single") {
          auto it = epsilon_free.find(strategy);
          if (it == epsilon_free.end()) {
            it = epsilon_free.emplace(strategy, build_defense(config, cell, forest, strategy, epsilon)).first;
          }
          outcome = &it->second;
        } else {
          fresh.emplace(build_defense(config, cell, forest, strategy, epsilon));
          outcome = &*fresh;
        }
        row.detail = outcome->detail;
        const auto plans =
            attack_dataset(cell.network, forest, outcome->bank, test_malicious, epsilon, attacker_options(config));
        row.report = defender_utility(cell.network, outcome->bank, test_benign, plans, evaluation);
        row.attacks = static_cast<int>(plans.size());
        for (const auto& p : plans) row.feasible_attacks += p.feasible ? 1 : 0;
      } catch (const std::exception& e) {
        row.error = e.what();
        row.report.utility = std::nan("");
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<FigureRow> summarize(const std::vector<ProtocolRow>& rows, const ExperimentConfig& config,
                                 double ws_rewire) {
  std::vector<FigureRow> out;
  for (const auto& family : config.families) {
    for (const auto& strategy : config.strategies) {
      for (double epsilon : config.epsilons) {
        std::vector<double> values;
        for (const auto& r : rows) {
          if (r.family == family && r.strategy == strategy && r.epsilon == epsilon && r.error.empty()) {
            values.push_back(r.report.utility);
          }
        }
        FigureRow f{family, family == "ba" ? config.ba_exponent : ws_rewire, strategy, epsilon, 0.0, 0.0,
                    static_cast<int>(values.size())};
        if (!values.empty()) {
          double sum = 0.0;
          for (double v : values) sum += v;
          f.mean_utility = sum / static_cast<double>(values.size());
          double sq = 0.0;
          for (double v : values) sq += (v - f.mean_utility) * (v - f.mean_utility);
          f.std = values.size() > 1 ? std::sqrt(sq / static_cast<double>(values.size() - 1)) : 0.0;
        } else {
          f.mean_utility = std::nan("");
        }
        out.push_back(f);
      }
    }
  }
  return out;
}

ReproduceResult reproduce_figures(const ExperimentConfig& config) {
  validate(config);
  const PreparedData data = prepare_data(config);
  ReproduceResult result;
  const bool need_ws = std::find(config.families.begin(), config.families.end(), "ws") != config.families.end();
  result.ws_rewire = need_ws ? resolve_ws_rewire(config) : 0.0;
  struct CellKey {
    std::string family;
    int topology;
  };
  std::vector<CellKey> keys;
  for (const auto& family : config.families) {
    for (int t = 0; t < config.topology_seeds; ++t) keys.push_back({family, t});
  }
  std::vector<std::vector<ProtocolRow>> per_cell(keys.size());
  parallel_for(keys.size(), config.threads, [&](std::size_t i) {
    const Network network = build_topology(config, keys[i].family, keys[i].topology, result.ws_rewire,
                                           static_cast<int>(data.base.n_features()));
    per_cell[i] = run_protocol(config, ProtocolCell{keys[i].family, keys[i].topology, network, data});
  });
  for (auto& rows : per_cell) {
    for (auto& r : rows) result.rows.push_back(std::move(r));
  }
  result.figure = summarize(result.rows, config, result.ws_rewire);
  return result;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_report_csv(std::ostream& out, const std::vector<ProtocolRow>& rows) {
  out << "family,topology,strategy,epsilon,utility,benign,malicious,benign_exact,feasible_attacks,attacks,detail,error\n";
  for (const auto& r : rows) {
    std::string error = r.error;
    for (char& c : error) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << r.family << ',' << r.topology << ',' << r.strategy << ',' << format_double(r.epsilon) << ','
        << format_double(r.report.utility) << ',' << format_double(r.report.benign) << ','
        << format_double(r.report.malicious) << ',' << (r.report.benign_exact ? 1 : 0) << ',' << r.feasible_attacks
        << ',' << r.attacks << ',' << r.detail << ',' << error << '\n';
  }
}

void write_figure_csv(std::ostream& out, const std::vector<FigureRow>& rows) {
  out << "family,r_or_ws,strategy,epsilon,mean_utility,std\n";
  for (const auto& f : rows) {
    out << f.family << ',' << format_double(f.r_or_ws) << ',' << f.strategy << ',' << format_double(f.epsilon) << ','
        << format_double(f.mean_utility) << ',' << format_double(f.std) << '\n';
  }
}

void write_timing_log(std::ostream& out, const std::vector<ProtocolRow>& rows) {
  for (const auto& r : rows) {
    out << r.family << ' ' << r.topology << ' ' << r.strategy << ' ' << format_double(r.epsilon)
        << " evaluation_seconds=" << r.report.wall_seconds << '\n';
  }
}

}  // namespace advnet
