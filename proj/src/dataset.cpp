#include "advnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "advnet/rng.hpp"

namespace advnet {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t row) {
  double v{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw ParseError("row " + std::to_string(row) + ": non-numeric cell '" + std::string(cell) + "'", row);
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

LabeledDataset from_rows(std::vector<double>&& values, std::vector<Label>&& labels, Eigen::Index cols) {
  LabeledDataset out;
  out.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(labels.size()), cols);
  out.labels = std::move(labels);
  return out;
}

double softplus(double m) { return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }
double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

}  // namespace

double LogisticModel::score(const VectorRef& x) const { return sigmoid(margin(x)); }

LabeledDataset LabeledDataset::with_label(Label label) const {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == label) rows.push_back(i);
  }
  return subset(rows);
}

LabeledDataset LabeledDataset::subset(const std::vector<Eigen::Index>& rows) const {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), n_features());
  out.labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(rows[k]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[k])]);
  }
  out.tag = tag;
  return out;
}

LabeledDataset LabeledDataset::head_per_class(Eigen::Index malicious, Eigen::Index benign) const {
  std::vector<Eigen::Index> rows;
  Eigen::Index m = 0, b = 0;
  for (Eigen::Index i = 0; i < size(); ++i) {
    const Label l = labels[static_cast<std::size_t>(i)];
    if (l == Label::malicious && m < malicious) {
      rows.push_back(i);
      ++m;
    } else if (l == Label::benign && b < benign) {
      rows.push_back(i);
      ++b;
    }
  }
  return subset(rows);
}

Eigen::Index LabeledDataset::count(Label label) const {
  return static_cast<Eigen::Index>(std::count(labels.begin(), labels.end(), label));
}

// ---------------------------------------------------------------------------

LabeledDataset read_spambase(std::istream& in) {
  std::vector<double> values;
  std::vector<Label> labels;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_commas(line);
    if (cells.size() != kSpambaseFeatures + 1) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(kSpambaseFeatures + 1) +
                           " columns (57 features + label), got " + std::to_string(cells.size()),
                       row);
    }
    for (int c = 0; c < kSpambaseFeatures; ++c) values.push_back(parse_cell(cells[static_cast<std::size_t>(c)], row));
    const double label = parse_cell(cells.back(), row);
    if (label != 0.0 && label != 1.0) throw ParseError("row " + std::to_string(row) + ": label must be 0 or 1", row);
    labels.push_back(label == 1.0 ? Label::malicious : Label::benign);
  }
  if (labels.empty()) throw ParseError("spambase file has no rows", 0);
  return from_rows(std::move(values), std::move(labels), kSpambaseFeatures);
}

LabeledDataset load_spambase(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_spambase(in);
}

LabeledDataset synthetic_spambase(Eigen::Index rows, std::uint64_t seed) {
  constexpr int kWords = 48, kChars = 6;
  // Feature profile is fixed per seed; rows are drawn independently.
  Engine profile_rng(derive_seed(seed, 0x5A3F));
  std::array<double, kWords + kChars> base{}, tilt{}, mean{};
  for (int f = 0; f < kWords + kChars; ++f) {
    base[static_cast<std::size_t>(f)] = 0.04 + 0.36 * uniform01(profile_rng);
    tilt[static_cast<std::size_t>(f)] = 2.0 * uniform01(profile_rng) - 1.0;
    mean[static_cast<std::size_t>(f)] = f < kWords ? 0.15 + 1.2 * uniform01(profile_rng) : 0.05 + 0.6 * uniform01(profile_rng);
  }
  Engine rng(derive_seed(seed, 0x5A3E));
  auto gauss = [&] {
    // Box-Muller keeps the stream portable across standard libraries.
    const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  LabeledDataset out;
  out.features.setZero(rows, kSpambaseFeatures);
  out.labels.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const bool spam = uniform01(rng) < 0.394;
    out.labels[static_cast<std::size_t>(i)] = spam ? Label::malicious : Label::benign;
    // Per-message "intensity" makes the classes overlap.
    const double intensity = std::exp(0.45 * gauss());
    for (int f = 0; f < kWords + kChars; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      const double ratio = std::exp(1.8 * tilt[fi]);
      double p = spam ? base[fi] * std::sqrt(ratio) : base[fi] / std::sqrt(ratio);
      p = std::min(0.9, p * intensity);
      if (uniform01(rng) < p) {
        out.features(i, f) = -mean[fi] * std::log(1.0 - uniform01(rng));
      }
    }
    const double shift = spam ? 1.0 : 0.0;
    out.features(i, 54) = 1.0 + std::exp(0.4 + 0.6 * shift + 0.7 * gauss());
    out.features(i, 55) = std::round(1.0 + std::exp(1.8 + 1.2 * shift + 1.0 * gauss()));
    out.features(i, 56) = std::round(1.0 + std::exp(3.6 + 1.3 * shift + 1.1 * gauss()));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::pair<LabeledDataset, MinMaxStats> normalize_minmax(const LabeledDataset& dataset) {
  if (dataset.size() == 0) throw ValidationError("normalize_minmax: empty dataset");
  MinMaxStats stats{dataset.features.colwise().minCoeff().transpose(), dataset.features.colwise().maxCoeff().transpose()};
  return {apply_minmax(dataset, stats), std::move(stats)};
}

LabeledDataset apply_minmax(const LabeledDataset& dataset, const MinMaxStats& stats) {
  if (stats.min.size() != dataset.n_features() || stats.max.size() != dataset.n_features()) {
    throw ValidationError("apply_minmax: statistics do not match feature count");
  }
  LabeledDataset out = dataset;
  for (Eigen::Index f = 0; f < dataset.n_features(); ++f) {
    const double range = stats.max(f) - stats.min(f);
    if (range > 0.0) {
      out.features.col(f) = ((dataset.features.col(f).array() - stats.min(f)) / range).cwiseMax(0.0).cwiseMin(1.0);
    } else {
      out.features.col(f).setZero();
    }
  }
  return out;
}

std::array<std::vector<Eigen::Index>, 3> split_indices(Eigen::Index total, std::array<Eigen::Index, 3> sizes,
                                                       std::uint64_t seed) {
  if (sizes[0] < 0 || sizes[1] < 0 || sizes[2] < 0 || sizes[0] + sizes[1] + sizes[2] != total) {
    throw ValidationError("split: sizes (" + std::to_string(sizes[0]) + "," + std::to_string(sizes[1]) + "," +
                          std::to_string(sizes[2]) + ") do not sum to dataset size " + std::to_string(total));
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Engine rng(derive_seed(seed, 0x5917));
  portable_shuffle(order.begin(), order.end(), rng);
  std::array<std::vector<Eigen::Index>, 3> parts;
  auto it = order.begin();
  for (std::size_t k = 0; k < 3; ++k) {
    parts[k].assign(it, it + sizes[k]);
    std::sort(parts[k].begin(), parts[k].end());
    it += sizes[k];
  }
  return parts;
}

std::array<LabeledDataset, 3> split(const LabeledDataset& dataset, std::array<Eigen::Index, 3> sizes,
                                    std::uint64_t seed) {
  const auto parts = split_indices(dataset.size(), sizes, seed);
  std::array<LabeledDataset, 3> out{dataset.subset(parts[0]), dataset.subset(parts[1]), dataset.subset(parts[2])};
  out[0].tag = SplitTag::base;
  out[1].tag = SplitTag::train;
  out[2].tag = SplitTag::test;
  return out;
}

// ---------------------------------------------------------------------------

LossAndGradient logistic_loss(const LabeledDataset& data, const LogisticModel& model, double l2_reg) {
  const Eigen::Index m = data.size();
  const Vector margins = (data.features * model.weights).array() + model.bias;
  Vector residual(m);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool pos = data.labels[static_cast<std::size_t>(i)] == Label::malicious;
    loss += softplus(pos ? -margins(i) : margins(i));
    residual(i) = sigmoid(margins(i)) - (pos ? 1.0 : 0.0);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  LossAndGradient out;
  out.loss = loss * inv_m + 0.5 * l2_reg * model.weights.squaredNorm();
  out.weight_gradient = data.features.transpose() * residual * inv_m + l2_reg * model.weights;
  out.bias_gradient = residual.sum() * inv_m;
  return out;
}

TrainReport train_logistic_report(const LabeledDataset& data, const TrainOptions& options) {
  if (data.size() == 0) throw ValidationError("train_logistic: empty dataset");
  const auto positives = data.count(Label::malicious);
  if (positives == 0 || positives == data.size()) {
    throw ValidationError("train_logistic: training data must contain both classes");
  }
  TrainReport report;
  LogisticModel model{Vector::Zero(data.n_features()), 0.0};
  auto current = logistic_loss(data, model, options.l2_reg);
  report.loss_history.push_back(current.loss);
  double step = options.step_size;
  Vector prev_params, prev_grad;
  auto pack = [](const Vector& w, double b) {
    Vector v(w.size() + 1);
    v << w, b;
    return v;
  };
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const Vector grad = pack(current.weight_gradient, current.bias_gradient);
    const double gnorm2 = grad.squaredNorm();
    if (std::sqrt(gnorm2) <= options.gradient_tolerance) break;
    const Vector params = pack(model.weights, model.bias);
    // Barzilai-Borwein proposal, then Armijo backtracking.
    if (prev_params.size() > 0) {
      const Vector s = params - prev_params, y = grad - prev_grad;
      const double sy = s.dot(y);
      if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, 1e-6, 1e6);
    }
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector trial = params - step * grad;
      LogisticModel candidate{trial.head(model.weights.size()), trial(trial.size() - 1)};
      auto next = logistic_loss(data, candidate, options.l2_reg);
      if (next.loss <= current.loss - 1e-4 * step * gnorm2) {
        prev_params = params;
        prev_grad = grad;
        model = std::move(candidate);
        current = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    report.loss_history.push_back(current.loss);
  }
  report.final_gradient_norm = pack(current.weight_gradient, current.bias_gradient).norm();
  report.model = std::move(model);
  return report;
}

LogisticModel train_logistic(const LabeledDataset& data, const TrainOptions& options) {
  return train_logistic_report(data, options).model;
}

double accuracy(const LogisticModel& model, const LabeledDataset& data, double threshold) {
  if (data.size() == 0) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const bool flagged = model.score(data.features.row(i).transpose()) > threshold;
    correct += flagged == (data.labels[static_cast<std::size_t>(i)] == Label::malicious);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

void write_dataset_csv(std::ostream& out, const LabeledDataset& data) {
  for (Eigen::Index f = 0; f < data.n_features(); ++f) out << 'f' << f << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index f = 0; f < data.n_features(); ++f) out << format_double(data.features(i, f)) << ',';
    out << (data.labels[static_cast<std::size_t>(i)] == Label::malicious ? 1 : 0) << '\n';
  }
}

LabeledDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
  const auto header = split_commas(line);
  if (header.size() < 2 || header.back() != "label") throw ParseError("expected header ending in 'label'", 1);
  const auto cols = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_commas(line);
    if (static_cast<Eigen::Index>(cells.size()) != cols + 1) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(cols + 1) + " columns", row);
    }
    for (Eigen::Index c = 0; c < cols; ++c) values.push_back(parse_cell(cells[static_cast<std::size_t>(c)], row));
    labels.push_back(parse_cell(cells.back(), row) == 1.0 ? Label::malicious : Label::benign);
  }
  return from_rows(std::move(values), std::move(labels), cols);
}

void save_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_dataset_csv(out, data);
}

LabeledDataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_dataset_csv(in);
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
Vector from_std(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void save_stats_json(const std::filesystem::path& path, const MinMaxStats& stats, const LogisticModel* model) {
  nlohmann::json j;
  j["min"] = to_std(stats.min);
  j["max"] = to_std(stats.max);
  if (model != nullptr) {
    j["weights"] = to_std(model->weights);
    j["bias"] = model->bias;
  }
  write_json(path, j);
}

MinMaxStats load_stats_json(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.contains("min") || !j.contains("max")) throw ParseError(path.string() + ": missing min/max", 0);
  return {from_std(j["min"].get<std::vector<double>>()), from_std(j["max"].get<std::vector<double>>())};
}

void save_model_json(const std::filesystem::path& path, const LogisticModel& model) {
  nlohmann::json j;
  j["weights"] = to_std(model.weights);
  j["bias"] = model.bias;
  write_json(path, j);
}

LogisticModel load_model_json(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.contains("weights")) throw ParseError(path.string() + ": missing weights", 0);
  return {from_std(j["weights"].get<std::vector<double>>()), j.value("bias", 0.0)};
}

}  // namespace advnet
