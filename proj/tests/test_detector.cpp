#include <doctest.h>

#include <cmath>
#include <sstream>

#include "advnet/detector.hpp"
#include "support.hpp"

using namespace advnet;

namespace {

DetectorBank bank_with(const Vector& phi, std::initializer_list<double> thresholds) {
  Vector t(static_cast<Eigen::Index>(thresholds.size()));
  Eigen::Index i = 0;
  for (double v : thresholds) t(i++) = v;
  return DetectorBank(LogisticModel{phi, 0.0}, t);
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("classify: half threshold, open threshold, inclusive boundary") {
  const auto bank = bank_with(vec({1.0, -1.0}), {0.5, 1.0 - kThresholdClamp});
  CHECK(classify(bank, 0, vec({0.2, 0.3})) == Verdict::benign);
  CHECK(classify(bank, 0, vec({0.3, 0.3})) == Verdict::benign);
  CHECK(classify(bank, 0, vec({0.4, 0.3})) == Verdict::malicious);
  CHECK(classify(bank, 1, vec({5.0, 0.0})) == Verdict::benign);
  CHECK(classify(bank, 1, vec({9.5, 0.0})) == Verdict::malicious);

  const double theta = 0.7;
  const auto edge = bank_with(vec({1.0}), {theta});
  CHECK(classify(edge, 0, vec({logit(theta)})) == Verdict::benign);
  CHECK(classify(edge, 0, vec({std::nextafter(logit(theta), 10.0)})) == Verdict::malicious);
}

TEST_CASE("thresholds are clamped") {
  const auto bank = bank_with(vec({1.0}), {0.0, 1.0, 0.3});
  CHECK(bank.threshold(0) == kThresholdClamp);
  CHECK(bank.threshold(1) == 1.0 - kThresholdClamp);
  CHECK(bank.threshold(2) == 0.3);
  CHECK(std::isfinite(bank.threshold_logit(0)));
  CHECK(std::isfinite(bank.threshold_logit(1)));
  DetectorBank b = bank;
  b.set_threshold(2, 1.7);
  CHECK(b.threshold(2) == 1.0 - kThresholdClamp);
  CHECK(b.min_evasion_bound() == doctest::Approx(logit(kThresholdClamp)));
}

TEST_CASE("surrogate pass scores") {
  const std::vector<NodeId> nodes{0, 1, 2};
  const auto half = bank_with(vec({1.0, 1.0}), {0.5, 0.5, 0.5});
  CHECK(surrogate_c(half, nodes, vec({0.5, -0.5})).isZero());

  const auto b = bank_with(vec({0.5}), {0.7311, 0.5, 0.9});
  const Vector c = surrogate_c(b, nodes, vec({1.0}));
  CHECK(c(0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(c(1) == doctest::Approx(-0.5));

  auto raised = b;
  raised.set_threshold(1, 0.6);
  CHECK(surrogate_c(raised, nodes, vec({1.0}))(1) > c(1));
}

TEST_CASE("threshold Jacobians") {
  const std::vector<NodeId> nodes{0, 1};
  const auto b = bank_with(vec({1.0}), {0.5, 0.9});
  const Vector d = dc_dtheta(b, nodes);
  CHECK(d(0) == doctest::Approx(4.0));
  CHECK(d(1) == doctest::Approx(1.0 / 0.09).epsilon(1e-12));
  const Vector ind = dind_dtheta(b, 1);
  CHECK(ind.size() == 2);
  CHECK(ind(0) == 0.0);
  CHECK(ind(1) == doctest::Approx(11.111).epsilon(1e-4));

  Engine rng(6);
  for (int t = 0; t < 20; ++t) {
    const Vector theta = 0.05 + 0.9 * testing::random_unit_box(3, rng).array();
    const DetectorBank bank(testing::random_model(2, rng), theta);
    const std::vector<NodeId> all{0, 1, 2};
    const Vector x = testing::random_unit_box(2, rng);
    const Vector jac = dc_dtheta(bank, all);
    for (NodeId k = 0; k < 3; ++k) {
      const double h = 1e-6;
      DetectorBank up = bank, down = bank;
      up.set_threshold(k, theta(k) + h);
      down.set_threshold(k, theta(k) - h);
      const Vector fd = (surrogate_c(up, all, x) - surrogate_c(down, all, x)) / (2 * h);
      CHECK(testing::relative_error(fd(k), jac(k)) <= 1e-6);
      CHECK(testing::relative_error(fd(k), dind_dtheta(bank, k)(k)) <= 1e-6);
      for (NodeId j = 0; j < 3; ++j) {
        if (j != k) CHECK(std::abs(fd(j)) <= 1e-12);
      }
      CHECK(jac(k) > 0.0);
      CHECK(std::isfinite(jac(k)));
    }
  }
  const auto edge = bank_with(vec({1.0}), {kThresholdClamp, 1.0 - kThresholdClamp});
  CHECK(std::isfinite(dc_dtheta(edge, nodes).maxCoeff()));
}

TEST_CASE("classification is monotone in the threshold and agrees with the surrogate sign") {
  Engine rng(10);
  for (int t = 0; t < 200; ++t) {
    const LogisticModel m = testing::random_model(3, rng);
    const Vector x = testing::random_unit_box(3, rng);
    const double lo = uniform01(rng), hi = lo + (1.0 - lo) * uniform01(rng);
    const DetectorBank a(m, Vector::Constant(1, lo)), b(m, Vector::Constant(1, hi));
    if (passes(a, 0, x)) CHECK(passes(b, 0, x));
    const std::vector<NodeId> nodes{0};
    const double c = surrogate_c(a, nodes, x)(0);
    if (c > 0.0) CHECK(passes(a, 0, x));
    if (c < 0.0) CHECK_FALSE(passes(a, 0, x));
  }
}

TEST_CASE("threshold files round trip") {
  const Vector t = vec({0.5, 0.123456789012345, 1.0 - kThresholdClamp});
  std::stringstream buf;
  write_thresholds(buf, t);
  CHECK(read_thresholds(buf) == t);
  std::stringstream bad("0 0.5\n1 abc\n");
  CHECK_THROWS_AS(read_thresholds(bad), ParseError);
}
