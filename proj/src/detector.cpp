#include "advnet/detector.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace advnet {

Vector clamp_thresholds(Vector thresholds) {
  return thresholds.cwiseMax(kThresholdClamp).cwiseMin(1.0 - kThresholdClamp);
}

DetectorBank::DetectorBank(LogisticModel model, Vector thresholds)
    : model_(std::move(model)), thresholds_(clamp_thresholds(std::move(thresholds))) {
  if (!model_.weights.allFinite() || !std::isfinite(model_.bias)) throw ValidationError("detector: non-finite model");
  if (!thresholds_.allFinite()) throw ValidationError("detector: non-finite thresholds");
}

DetectorBank DetectorBank::uniform(LogisticModel model, int node_count, double threshold) {
  return DetectorBank(std::move(model), Vector::Constant(node_count, threshold));
}

void DetectorBank::set_thresholds(Vector thresholds) {
  if (thresholds.size() != thresholds_.size()) throw ValidationError("detector: threshold count mismatch");
  thresholds_ = clamp_thresholds(std::move(thresholds));
}

void DetectorBank::set_threshold(NodeId node, double value) {
  thresholds_(node) = std::clamp(value, kThresholdClamp, 1.0 - kThresholdClamp);
}

double DetectorBank::min_evasion_bound() const {
  return logit(thresholds_.minCoeff()) - model_.bias;
}

Verdict classify(const DetectorBank& bank, NodeId node, const VectorRef& x) {
  return bank.model().margin(x) <= bank.threshold_logit(node) ? Verdict::benign : Verdict::malicious;
}

Vector surrogate_c(const DetectorBank& bank, std::span<const NodeId> nodes, const VectorRef& x) {
  const double m = bank.model().margin(x);
  Vector c(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) c(static_cast<Eigen::Index>(i)) = bank.threshold_logit(nodes[i]) - m;
  return c;
}

Vector dc_dtheta(const DetectorBank& bank, std::span<const NodeId> nodes) {
  Vector d(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    d(static_cast<Eigen::Index>(i)) = logit_derivative(bank.threshold(nodes[i]));
  }
  return d;
}

Vector dind_dtheta(const DetectorBank& bank, NodeId node) {
  Vector g = Vector::Zero(bank.node_count());
  g(node) = logit_derivative(bank.threshold(node));
  return g;
}

void write_thresholds(std::ostream& out, const Vector& thresholds) {
  for (Eigen::Index i = 0; i < thresholds.size(); ++i) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), thresholds(i));
    out << i << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
}

Vector read_thresholds(std::istream& in) {
  std::map<long, double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::istringstream fields(line.substr(0, hash));
    long index;
    std::string value_text;
    if (!(fields >> index)) {
      if (line.substr(0, hash).find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("expected 'node threshold'", line_no);
    }
    if (!(fields >> value_text)) throw ParseError("missing threshold value", line_no);
    double v{};
    const auto res = std::from_chars(value_text.data(), value_text.data() + value_text.size(), v);
    if (res.ec != std::errc{} || res.ptr != value_text.data() + value_text.size()) {
      throw ParseError("bad threshold '" + value_text + "'", line_no);
    }
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("line " + std::to_string(line_no) + ": threshold outside [0,1]");
    if (!values.emplace(index, v).second) throw ParseError("duplicate node index", line_no);
  }
  Vector out(static_cast<Eigen::Index>(values.size()));
  long expected = 0;
  for (const auto& [index, v] : values) {
    if (index != expected) throw ParseError("node indices must be 0..N-1 without gaps", 0);
    out(expected++) = v;
  }
  return out;
}

void save_thresholds(const Vector& thresholds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_thresholds(out, thresholds);
}

Vector load_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_thresholds(in);
}

}  // namespace advnet
