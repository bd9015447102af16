#include "advnet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "advnet/diffusion.hpp"
#include "advnet/parallel.hpp"

namespace advnet {

OriginSample sample_origins(const Network& network, int strata, std::uint64_t seed) {
  const int n = network.node_count();
  OriginSample out;
  if (strata < 1 || n <= strata) {
    out.nodes.resize(static_cast<std::size_t>(n));
    std::iota(out.nodes.begin(), out.nodes.end(), 0);
    out.weights.assign(static_cast<std::size_t>(n), 1.0);
    return out;
  }
  out.exact = false;
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return network.degree(a) > network.degree(b); });
  Engine rng(derive_seed(seed, 0x0816));
  for (int s = 0; s < strata; ++s) {
    const auto begin = static_cast<std::size_t>(static_cast<long>(s) * n / strata);
    const auto end = static_cast<std::size_t>(static_cast<long>(s + 1) * n / strata);
    const auto pick = begin + uniform_index(rng, end - begin);
    out.nodes.push_back(order[pick]);
    out.weights.push_back(static_cast<double>(end - begin));
  }
  return out;
}

UtilityReport defender_utility(const Network& network, const DetectorBank& bank, const Matrix& benign,
                               const std::vector<AttackPlan>& plans, const UtilityOptions& options) {
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) throw ValidationError("alpha must lie in [0,1]");
  if (!(options.horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (options.n_simulations < 1) throw ValidationError("n_simulations must be >= 1");
  if (bank.node_count() != network.node_count()) throw ValidationError("detector bank size does not match network");
  if (benign.rows() > 0 && benign.cols() != network.n_features()) throw ValidationError("benign feature width mismatch");
  for (const auto& p : plans) {
    if (p.payload.size() != network.n_features()) throw ValidationError("attack payload width mismatch");
    if (p.seed < 0 || p.seed >= network.node_count()) throw ValidationError("attack seed out of range");
  }
  const auto start = std::chrono::steady_clock::now();

  const OriginSample origins = sample_origins(network, options.origin_strata, options.seed);
  const auto n_origins = origins.nodes.size();
  const auto n_benign = static_cast<std::size_t>(benign.rows());

  std::vector<ContentContext> benign_content(n_benign);
  parallel_for(n_benign, options.threads, [&](std::size_t r) {
    benign_content[r] = prepare_content(network, bank, benign.row(static_cast<Eigen::Index>(r)).transpose());
  });

  const std::size_t benign_cells = n_benign * n_origins;
  std::vector<double> values(benign_cells + plans.size(), 0.0);
  parallel_for(values.size(), options.threads, [&](std::size_t cell) {
    if (cell < benign_cells) {
      const std::size_t r = cell / n_origins, o = cell % n_origins;
      const NodeId origin = origins.nodes[o];
      const auto key = derive_seed(derive_seed(options.seed, 0xBE, r), static_cast<std::uint64_t>(origin));
      values[cell] = origins.weights[o] *
                     estimate_influence(network, benign_content[r], origin, options.horizon, options.n_simulations, key);
    } else {
      const std::size_t r = cell - benign_cells;
      const auto key = derive_seed(options.seed, 0x3A, r);
      const auto content = prepare_content(network, bank, plans[r].payload);
      values[cell] = estimate_influence(network, content, plans[r].seed, options.horizon, options.n_simulations, key);
    }
  });

  UtilityReport report;
  report.alpha = options.alpha;
  report.benign_exact = origins.exact;
  report.origins_used = static_cast<int>(n_origins);
  for (std::size_t i = 0; i < benign_cells; ++i) report.benign += values[i];
  for (std::size_t i = benign_cells; i < values.size(); ++i) report.malicious += values[i];
  report.utility = options.alpha * report.benign - (1.0 - options.alpha) * report.malicious;
  report.seed_histogram.assign(static_cast<std::size_t>(network.node_count()), 0);
  for (const auto& p : plans) ++report.seed_histogram[static_cast<std::size_t>(p.seed)];
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace advnet
