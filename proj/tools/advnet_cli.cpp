#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "advnet/attacker.hpp"
#include "advnet/baselines.hpp"
#include "advnet/config.hpp"
#include "advnet/dataset.hpp"
#include "advnet/defender.hpp"
#include "advnet/detector.hpp"
#include "advnet/evaluation.hpp"
#include "advnet/network.hpp"
#include "advnet/protocol.hpp"

namespace fs = std::filesystem;
using namespace advnet;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<unsigned> threads;
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig config = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) config.seed = *g.seed;
  if (g.threads) config.threads = *g.threads;
  validate(config);
  return config;
}

fs::path out_dir(const Globals& g) {
  fs::create_directories(g.out);
  return g.out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

Matrix rows_with(const LabeledDataset& data, Label label) { return data.with_label(label).features; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial classification on networks: diffusion, evasion attacks and threshold defenses"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (overrides the config)");

  // gen-net
  auto* gen = app.add_subcommand("gen-net", "generate a topology with edge parameters");
  std::string family = "ba";
  int topology_index = 0;
  int n_features = kSpambaseFeatures;
  gen->add_option("--family", family, "ba or ws")->check(CLI::IsMember({"ba", "ws"}))->capture_default_str();
  gen->add_option("--index", topology_index, "topology index within the family")->capture_default_str();
  gen->add_option("--features", n_features, "edge parameter dimension")->capture_default_str();

  // prep-data
  auto* prep = app.add_subcommand("prep-data", "load or synthesize the corpus, split and normalize");

  // train-base
  auto* train_cmd = app.add_subcommand("train-base", "fit the logistic scorer on the base split");
  std::string data_path;
  train_cmd->add_option("--data", data_path, "base split CSV")->required()->check(CLI::ExistingFile);

  // defend
  auto* defend = app.add_subcommand("defend", "compute a detector threshold profile");
  std::string strategy = "sse", network_path, model_path, train_path, base_path;
  double epsilon = 0.01;
  defend->add_option("--strategy", strategy)->check(CLI::IsMember({"sse", "baseline", "retrain", "single"}))->capture_default_str();
  defend->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  defend->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  defend->add_option("--train", train_path, "training split CSV (sse, single, retrain)")->check(CLI::ExistingFile);
  defend->add_option("--base", base_path, "base split CSV (retrain)")->check(CLI::ExistingFile);
  defend->add_option("--epsilon", epsilon, "attacker budget (squared l2)")->capture_default_str();

  // attack
  auto* attack = app.add_subcommand("attack", "best-response attack on malicious rows");
  std::string thresholds_path;
  attack->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  attack->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  attack->add_option("--thresholds", thresholds_path)->check(CLI::ExistingFile);
  attack->add_option("--data", data_path, "dataset CSV; malicious rows are attacked")->required()->check(CLI::ExistingFile);
  attack->add_option("--epsilon", epsilon)->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo defender utility");
  std::string payload_path;
  evaluate->add_option("--network", network_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--thresholds", thresholds_path)->check(CLI::ExistingFile);
  evaluate->add_option("--data", data_path, "dataset CSV; benign rows feed the benign term")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--payloads", payload_path, "payload CSV from `attack`")->required()->check(CLI::ExistingFile);

  // reproduce
  auto* reproduce = app.add_subcommand("reproduce", "full sweep: figure.csv and report.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig config = load(g);
    auto bank_for = [&](const Network& network) {
      const LogisticModel model = load_model_json(model_path);
      if (thresholds_path.empty()) return baseline_uniform(model, network.node_count());
      Vector t = load_thresholds(thresholds_path);
      if (t.size() != network.node_count()) throw ValidationError("threshold count does not match network");
      return DetectorBank(model, std::move(t));
    };

    if (gen->parsed()) {
      const double rewire = family == "ws" ? resolve_ws_rewire(config) : 0.0;
      const Network network = build_topology(config, family, topology_index, rewire, n_features);
      const auto path = out_dir(g) / "network.txt";
      save_network(network, path);
      const auto stats = graph_stats(network);
      std::cout << path.string() << ": nodes=" << network.node_count() << " edges=" << network.edge_count()
                << " mean_path=" << stats.mean_shortest_path << " clustering=" << stats.clustering_coefficient
                << " fitted_exponent=" << stats.fitted_exponent << '\n';
    } else if (prep->parsed()) {
      const PreparedData data = prepare_data(config);
      const auto dir = out_dir(g);
      save_dataset_csv(data.base, dir / "base.csv");
      save_dataset_csv(data.train, dir / "train.csv");
      save_dataset_csv(data.test, dir / "test.csv");
      save_stats_json(dir / "stats.json", data.stats);
      std::cout << (data.synthetic ? "synthetic" : "spambase") << " corpus: base=" << data.base.size()
                << " train=" << data.train.size() << " test=" << data.test.size() << '\n';
    } else if (train_cmd->parsed()) {
      const LabeledDataset data = load_dataset_csv(data_path);
      const LogisticModel model = train_logistic(data);
      save_model_json(out_dir(g) / "model.json", model);
      std::cout << "training accuracy " << accuracy(model, data) << '\n';
    } else if (defend->parsed()) {
      const Network network = load_network(network_path);
      const LogisticModel model = load_model_json(model_path);
      const auto forest = build_forest(network);
      const auto dir = out_dir(g);
      std::optional<LabeledDataset> train;
      if (!train_path.empty()) {
        train = load_dataset_csv(train_path).head_per_class(config.train_malicious, config.train_benign);
      }
      if (strategy != "baseline" && !train) throw ValidationError("--train is required for strategy " + strategy);
      Vector thresholds;
      if (strategy == "baseline") {
        thresholds = baseline_uniform(model, network.node_count()).thresholds();
      } else if (strategy == "single") {
        SingleThresholdOptions options;
        options.alpha = config.alpha;
        options.horizon = config.horizon;
        options.n_simulations = config.n_simulations;
        options.seed = config.seed;
        options.threads = config.threads;
        const auto result = personalized_single_threshold(network, model, *train, options);
        thresholds = result.bank.thresholds();
        std::cout << "node " << result.node << " theta " << result.threshold << " utility " << result.utility << '\n';
      } else if (strategy == "retrain") {
        if (base_path.empty()) throw ValidationError("--base is required for strategy retrain");
        RetrainOptions options;
        options.max_rounds = config.retrain_rounds;
        options.threads = config.threads;
        const auto result = retraining_defense(load_dataset_csv(base_path), network, forest,
                                               rows_with(*train, Label::malicious), epsilon, options);
        save_model_json(dir / "model_retrained.json", result.bank.model());
        thresholds = result.bank.thresholds();
        std::cout << "rounds " << result.rounds << " last movement " << result.last_movement << '\n';
      } else {
        DefenseProblem problem{network, forest, model, rows_with(*train, Label::benign),
                               rows_with(*train, Label::malicious), config.alpha, epsilon};
        SseOptions options;
        options.pgd.iterations = config.pgd_iterations;
        options.pgd.step = config.pgd_step;
        options.pgd.initial_threshold = config.initial_threshold;
        options.pgd.attacker.max_iterations = config.attacker_iterations;
        options.evaluation.horizon = config.horizon;
        options.evaluation.n_simulations = config.sse_simulations;
        options.evaluation.origin_strata = config.origin_strata;
        options.evaluation.seed = config.seed;
        options.threads = config.threads;
        const auto result = sse_defense(problem, options);
        auto report = open_out(dir / "sse_report.csv");
        write_sse_report_csv(report, result);
        const auto chosen = pgd_defense(problem, result.selected, options.pgd);
        auto trajectory = open_out(dir / "trajectory.csv");
        write_trajectory_csv(trajectory, chosen);
        thresholds = result.thresholds;
        std::cout << "selected assumed seed " << result.selected << " utility " << result.utility << '\n';
      }
      save_thresholds(thresholds, dir / "thresholds.txt");
    } else if (attack->parsed()) {
      const Network network = load_network(network_path);
      const DetectorBank bank = bank_for(network);
      const LabeledDataset malicious = load_dataset_csv(data_path).with_label(Label::malicious);
      AttackerOptions options;
      options.max_iterations = config.attacker_iterations;
      const auto plans = attack_dataset(network, build_forest(network), bank, malicious, epsilon, options, config.threads);
      const auto dir = out_dir(g);
      auto summary = open_out(dir / "attacks.csv");
      write_attack_csv(summary, plans, malicious);
      auto payloads = open_out(dir / "payloads.csv");
      write_payload_csv(payloads, plans);
      int feasible = 0;
      for (const auto& p : plans) feasible += p.feasible ? 1 : 0;
      std::cout << plans.size() << " attacks, " << feasible << " evade every detector\n";
    } else if (evaluate->parsed()) {
      const Network network = load_network(network_path);
      const DetectorBank bank = bank_for(network);
      const LabeledDataset data = load_dataset_csv(data_path);
      std::ifstream in(payload_path);
      const auto plans = read_payload_csv(in);
      UtilityOptions options;
      options.alpha = config.alpha;
      options.horizon = config.horizon;
      options.n_simulations = config.n_simulations;
      options.origin_strata = config.origin_strata;
      options.seed = config.seed;
      options.threads = config.threads;
      const auto report = defender_utility(network, bank, rows_with(data, Label::benign), plans, options);
      auto out = open_out(out_dir(g) / "report.csv");
      out << "utility,benign,malicious,benign_exact\n"
          << format_double(report.utility) << ',' << format_double(report.benign) << ','
          << format_double(report.malicious) << ',' << (report.benign_exact ? 1 : 0) << '\n';
      std::cout << "U_d " << report.utility << " (benign " << report.benign << ", malicious " << report.malicious
                << ")\n";
    } else if (reproduce->parsed()) {
      const auto result = reproduce_figures(config);
      const auto dir = out_dir(g);
      auto figure = open_out(dir / "figure.csv");
      write_figure_csv(figure, result.figure);
      auto report = open_out(dir / "report.csv");
      write_report_csv(report, result.rows);
      auto timing = open_out(dir / "timing.log");
      write_timing_log(timing, result.rows);
      auto used = open_out(dir / "config.txt");
      write_config(used, config);
      int failed = 0;
      for (const auto& r : result.rows) failed += r.error.empty() ? 0 : 1;
      std::cout << result.rows.size() << " protocol rows, " << failed << " failed; wrote " << (dir / "figure.csv").string()
                << '\n';
      if (failed > 0) return 2;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
