#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emi/forward.hpp"
#include "emi/inversion.hpp"
#include "emi/regularization.hpp"
#include "emi/synthdata.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace emi;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

InversionConfig small_config(std::size_t n = 12) {
  InversionConfig c;
  c.layer_tops = uniform_layer_tops(n, 3.5);
  c.rule = ParameterRule::discrepancy(1e-3 * std::sqrt(2.0));
  c.stabilizer = Stabilizer::D2;
  return c;
}

LayeredEarthModel bump(std::size_t n) {
  return discretize_profile([](double z) { return 0.2 + profile_gaussian(z); }, n, 3.5);
}

}  // namespace

TEST_CASE("active rows per mode") {
  CHECK(active_rows(DataMode::Complex, 6) == 12);
  CHECK(active_rows(DataMode::QuadratureOnly, 6) == 6);
  DataVector v(2);
  v << Complex(1, 2), Complex(3, 4);
  CHECK(active_part(v, DataMode::QuadratureOnly) == Eigen::Vector2d(2, 4));
  CHECK(active_part(v, DataMode::Complex) == Eigen::Vector4d(1, 3, 2, 4));

  const ForwardModel f(cmd_explorer());
  const auto m = LayeredEarthModel::uniform(8, 3.5, 0.3);
  const auto j = f.jacobian(m);
  CHECK(active_part(j, DataMode::Complex).rows() == 24);
  CHECK(active_part(j, DataMode::QuadratureOnly).rows() == 12);
  CHECK(active_part(j, DataMode::QuadratureOnly) == j.matrix.imag());
}

TEST_CASE("residual") {
  const ForwardModel f(cmd_explorer());
  const auto m = LayeredEarthModel::uniform(8, 3.5, 0.3);
  const DataVector b = f.response(m);
  CHECK(residual(f, m, b, DataMode::Complex).active.norm() == 0.0);
  const auto r = residual(f, m.with_sigma(std::vector<double>(8, 0.5)), b, DataMode::QuadratureOnly);
  CHECK(r.active.size() == 12);
  CHECK_THROWS_AS(residual(f, m, b.head(5), DataMode::Complex), std::invalid_argument);
}

TEST_CASE("noise reference scales with the active rows") {
  DataVector b(3);
  b << Complex(1, 1), Complex(2, -1), Complex(0, 3);
  const double norm = stack(b).norm();
  CHECK(noise_reference(b, DataMode::Complex) == doctest::Approx(norm));
  CHECK(noise_reference(b, DataMode::QuadratureOnly) == doctest::Approx(norm / std::sqrt(2.0)));
}

TEST_CASE("L-curve corner") {
  // steep drop, then a flat tail: corner at index 2
  const std::vector<double> res = {1.0, 0.1, 0.01, 0.009, 0.008, 0.0079};
  const std::vector<double> semi = {1.0, 1.1, 1.2, 10.0, 100.0, 1000.0};
  const LCurveCorner c = lcurve_corner(res, semi);
  CHECK(c.ell == 2);
  CHECK_FALSE(c.degenerate);

  // straight line in log-log: no corner
  std::vector<double> lr, ls;
  for (int i = 0; i < 8; ++i) {
    lr.push_back(std::pow(10.0, -i));
    ls.push_back(std::pow(10.0, i));
  }
  const LCurveCorner line = lcurve_corner(lr, ls);
  CHECK(line.degenerate);
  CHECK(line.ell == 1);

  // zero seminorm at ell = 0 is skipped, still finds the corner
  std::vector<double> semi0 = semi;
  semi0[0] = 0.0;
  CHECK(lcurve_corner(res, semi0).ell == 2);

  CHECK(lcurve_corner({1.0, 0.5}, {1.0, 2.0}).degenerate);
  CHECK_THROWS_AS(lcurve_corner({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("discrepancy picks the smallest admissible ell") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  MatrixXd a(20, 10);
  for (Index j = 0; j < 10; ++j)
    for (Index i = 0; i < 20; ++i) a(i, j) = g(rng) * std::pow(10.0, -0.5 * j);
  VectorXd r(20);
  for (Index i = 0; i < 20; ++i) r(i) = g(rng);
  const GsvdFactors f = gsvd(a, reg_matrix(RegKind::D1, 10));
  const TgsvdPath path = tgsvd_path(f, -r);
  const double ref = r.norm();
  for (double delta : {0.9, 0.7, 0.5}) {
    const Index ell = select_ell_discrepancy(f, r, delta, ref);
    const auto e = static_cast<std::size_t>(ell);
    if (ell < f.max_ell()) CHECK(path.residual[e] <= delta * ref);
    if (ell > 0) CHECK(path.residual[e - 1] > delta * ref);
  }
  CHECK(select_ell_discrepancy(f, r, 10.0, ref) == 0);
  CHECK(select_ell_discrepancy(f, r, 0.0, ref) == f.max_ell());
  // safety factor loosens the threshold
  CHECK(select_ell_discrepancy(f, r, 0.5, ref, 2.0) <= select_ell_discrepancy(f, r, 0.5, ref));
}

TEST_CASE("regularized step solves the linear problem at full ell") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  MatrixXd j(16, 6);
  VectorXd r(16);
  for (Index c = 0; c < 6; ++c)
    for (Index i = 0; i < 16; ++i) j(i, c) = g(rng);
  for (Index i = 0; i < 16; ++i) r(i) = g(rng);
  const StepResult s = regularized_step(j, r, reg_matrix(RegKind::D1, 6), ParameterRule::fixed(99), 1.0);
  CHECK(s.ell == 5);
  const VectorXd ls = j.colPivHouseholderQr().solve(-r);
  CHECK((s.q - ls).norm() < 1e-10 * ls.norm());
  CHECK_THROWS_AS(regularized_step(j, r.head(3), reg_matrix(RegKind::D1, 6), ParameterRule::lcurve(), 1.0),
                  std::invalid_argument);
}

TEST_CASE("effective regularizer") {
  InversionConfig c;
  c.stabilizer = Stabilizer::D2;
  CHECK(effective_regularizer(c, 6, nullptr) == reg_matrix(RegKind::D2, 6));
  c.stabilizer = Stabilizer::Identity;
  CHECK(effective_regularizer(c, 6, nullptr).isIdentity());
  c.stabilizer = Stabilizer::Mgs;
  c.tau = 0.1;
  CHECK(effective_regularizer(c, 6, nullptr) == reg_matrix(RegKind::D1, 6));
  VectorXd q(6);
  q << 1, 2, 2, 1, -1, 0.5;
  const MatrixXd d1 = reg_matrix(RegKind::D1, 6);
  const MatrixXd want = mgs_weights(q, d1, 0.1).asDiagonal() * d1;
  CHECK((effective_regularizer(c, 6, &q) - want).norm() == 0.0);
}

TEST_CASE("line search") {
  const VectorXd c = Eigen::Vector3d(1.0, 2.0, 3.0);
  auto f = [&](const VectorXd& s) { return 0.5 * (s - c).squaredNorm(); };
  const VectorXd s0 = Eigen::Vector3d(2.0, 2.0, 2.0);
  const VectorXd q = c - s0;
  const double f0 = f(s0);
  const double slope = (s0 - c).dot(q);
  CHECK(line_search(f, s0, q, f0, slope) == 1.0);

  // overshooting direction needs backtracking
  const double a = line_search(f, s0, 4.0 * q, f0, 4.0 * slope);
  CHECK(a < 1.0);
  CHECK(f(s0 + a * 4.0 * q) <= f0 + 1e-4 * a * 4.0 * slope);

  // positivity: a full step would cross zero
  const VectorXd down = Eigen::Vector3d(-4.0, 0.0, 0.0);
  auto g = [](const VectorXd& s) { return s(0); };
  const double b = line_search(g, s0, down, 2.0, -4.0);
  CHECK(b > 0.0);
  CHECK(b < 0.5);
  CHECK((s0 + b * down).minCoeff() > 0.0);

  // ascent direction: no step
  CHECK(line_search(f, s0, -q, f0, -slope) == 0.0);
}

TEST_CASE("config validation") {
  InversionConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.starts = {};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.starts = {0.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.stabilizer = Stabilizer::Mgs;
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.rule = ParameterRule::discrepancy(-1.0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.layer_tops = {0.0, 1.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // D2 needs three layers
  c = small_config();
  c.layer_tops = {0.0, 2.0, 1.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.backtrack = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("exact data started at the truth converges immediately") {
  const ForwardModel f(cmd_explorer());
  InversionConfig c = small_config(10);
  c.starts = {0.4};
  const DataVector b = f.response(LayeredEarthModel::uniform(10, 3.5, 0.4));
  for (auto rule : {ParameterRule::discrepancy(0.0), ParameterRule::lcurve(), ParameterRule::fixed(3)}) {
    c.rule = rule;
    const InversionResult res = invert_sounding(f, b, c);
    CHECK(res.iterations.size() <= 2);
    CHECK(res.relative_misfit < 1e-8);
    CHECK(res.converged);
  }
}

TEST_CASE("inversion properties on noisy data") {
  const ForwardModel f(cmd_explorer());
  const std::size_t n = 15;
  const DataVector b = add_noise(f.response(bump(n)), 1e-3, 42);
  for (auto stab : {Stabilizer::D1, Stabilizer::D2, Stabilizer::Mgs}) {
    for (auto mode : {DataMode::Complex, DataMode::QuadratureOnly}) {
      InversionConfig c = small_config(n);
      c.stabilizer = stab;
      c.mode = mode;
      const InversionResult res = invert_sounding(f, b, c);
      CAPTURE(static_cast<int>(stab));
      CAPTURE(static_cast<int>(mode));
      CHECK(res.active_rows == active_rows(mode, 12));
      CHECK(res.sigma.size() == static_cast<Index>(n));
      CHECK(res.sigma.minCoeff() > 0.0);
      CHECK(res.sensitivity.size() == static_cast<Index>(n));
      CHECK(res.residual < res.initial_residual);
      double prev = res.initial_residual;
      for (const auto& it : res.iterations) {
        // a fresh sweep run may restart at the same residual only if it takes no step
        CHECK(it.residual < prev);
        CHECK(it.alpha > 0.0);
        prev = it.residual;
      }
      CHECK(res.ell >= 1);
      CHECK_FALSE(res.sweep.empty());
      CHECK(res.sweep.back().ell == res.ell);
    }
  }
}

TEST_CASE("discrepancy sweep stops at the noise level") {
  const ForwardModel f(cmd_explorer());
  const std::size_t n = 20;
  const DataVector clean = f.response(bump(n));
  const DataVector b = add_noise(clean, 1e-2, 5);
  InversionConfig c = small_config(n);
  c.rule = ParameterRule::discrepancy(1e-2 * std::sqrt(2.0));
  const InversionResult res = invert_sounding(f, b, c);
  const double threshold = 1e-2 * std::sqrt(2.0) * noise_reference(b, DataMode::Complex);
  CHECK(res.residual <= threshold);
  for (std::size_t i = 0; i + 1 < res.sweep.size(); ++i) CHECK(res.sweep[i].residual > threshold);
}

TEST_CASE("fixed and per-iteration rules") {
  const ForwardModel f(cmd_explorer());
  const std::size_t n = 12;
  const DataVector b = add_noise(f.response(bump(n)), 1e-3, 9);
  InversionConfig c = small_config(n);
  c.rule = ParameterRule::fixed(500);
  const InversionResult fixed = invert_sounding(f, b, c);
  CHECK(fixed.ell == 10);  // clamped to p = n - 2
  CHECK(fixed.sweep.empty());
  c.rule = ParameterRule::lcurve().each_iteration();
  const InversionResult per = invert_sounding(f, b, c);
  CHECK(per.ell == -1);
  CHECK(per.sweep.empty());
  CHECK_FALSE(per.iterations.empty());
}

TEST_CASE("multi-start keeps the smallest residual") {
  const ForwardModel f(cmd_explorer());
  const std::size_t n = 12;
  const DataVector b = add_noise(f.response(bump(n)), 1e-3, 2);
  InversionConfig c = small_config(n);
  c.starts = {0.05, 0.5, 2.0};
  const InversionResult res = invert_sounding(f, b, c);
  REQUIRE(res.starts.size() == 3);
  for (const auto& s : res.starts) {
    REQUIRE(s.ok);
    CHECK(res.residual <= s.residual);
  }
  CHECK(res.start_sigma == c.starts[res.start_index]);
  CHECK(res.starts[res.start_index].residual == res.residual);
}

TEST_CASE("determinism") {
  const ForwardModel f(cmd_explorer());
  const DataVector b = add_noise(f.response(bump(12)), 1e-3, 77);
  InversionConfig c = small_config(12);
  c.stabilizer = Stabilizer::Mgs;
  c.rule = ParameterRule::lcurve();
  const InversionResult a = invert_sounding(f, b, c);
  const InversionResult d = invert_sounding(f, b, c);
  CHECK(a.sigma == d.sigma);
  CHECK(a.residual == d.residual);
  CHECK(a.iterations.size() == d.iterations.size());
  CHECK(a.sensitivity == d.sensitivity);
}

TEST_CASE("sections are independent soundings") {
  const ForwardModel f(cmd_explorer());
  const auto p2 = make_pseudo2d_model(4, 12, 3.5, 10.0);
  std::vector<DataVector> data;
  for (std::size_t i = 0; i < p2.columns.size(); ++i)
    data.push_back(add_noise(f.response(p2.columns[i]), 1e-3, i + 1));
  InversionConfig c = small_config(12);
  c.stabilizer = Stabilizer::D1;

  const auto one = invert_section(f, {data[0]}, c);
  REQUIRE(one.size() == 1);
  REQUIRE(one[0].result);
  CHECK(one[0].result->sigma == invert_sounding(f, data[0], c).sigma);

  const auto seq = invert_section(f, data, c, 1);
  const auto par = invert_section(f, data, c, 3);
  std::vector<DataVector> reversed(data.rbegin(), data.rend());
  const auto rev = invert_section(f, reversed, c, 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    REQUIRE(seq[i].result);
    CHECK(seq[i].result->sigma == par[i].result->sigma);
    CHECK(seq[i].result->sigma == rev[data.size() - 1 - i].result->sigma);
  }

  // a bad sounding is recorded, the others still run
  std::vector<DataVector> bad = data;
  bad[1] = DataVector::Zero(5);
  const auto mixed = invert_section(f, bad, c);
  CHECK_FALSE(mixed[1].result);
  CHECK_FALSE(mixed[1].error.empty());
  CHECK(mixed[0].result);
  CHECK(mixed[2].result);
}

TEST_CASE("invalid data is rejected") {
  const ForwardModel f(cmd_explorer());
  InversionConfig c = small_config(12);
  DataVector b = f.response(bump(12));
  b(3) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(invert_sounding(f, b, c), std::invalid_argument);
  CHECK_THROWS_AS(invert_sounding(f, b.head(4), c), std::invalid_argument);
}
