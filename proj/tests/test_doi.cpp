#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emi/doi.hpp"
#include "emi/forward.hpp"
#include "emi/inversion.hpp"

#include <cmath>
#include <limits>

using namespace emi;

TEST_CASE("integrated sensitivity is the squared column norm") {
  Eigen::MatrixXd j(3, 2);
  j << 1, 0, 2, 1, -2, 3;
  const Eigen::VectorXd s = integrated_sensitivity(j);
  CHECK(s(0) == 9.0);
  CHECK(s(1) == 10.0);
}

TEST_CASE("doi is the first depth strictly below the threshold") {
  const std::vector<double> z = {0.0, 1.0, 2.0, 3.0, 4.0};
  Eigen::VectorXd s(5);
  s << 100.0, 20.0, 1.0, 0.5, 0.1;
  CHECK(doi_depth(s, z, 1e-2) == 3.0);  // 1.0 equals the threshold, not below
  CHECK(doi_depth(s, z, 0.5) == 1.0);
  CHECK_FALSE(doi_depth(s, z, 1e-4).has_value());
  CHECK(doi_depth(s, z) == doi_depth(s, z, kDefaultEta));
}

TEST_CASE("doi is monotone in eta") {
  const ForwardModel f(cmd_explorer());
  const auto m = LayeredEarthModel::uniform(100, 10.0, 0.3);
  const Eigen::VectorXd s = integrated_sensitivity(f.jacobian(m).stacked());
  double prev = 0.0;
  for (double eta : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
    const auto d = doi_depth(s, m.depths(), eta);
    REQUIRE(d.has_value());
    CHECK(*d >= prev);
    prev = *d;
  }
}

TEST_CASE("doi errors") {
  const std::vector<double> z = {0.0, 1.0};
  CHECK_THROWS_AS(doi_depth(Eigen::Vector2d(0.0, 0.0), z), UndefinedSensitivityError);
  CHECK_THROWS_AS(doi_depth(Eigen::Vector3d(1.0, 0.0, 0.0), z), std::invalid_argument);
  CHECK_THROWS_AS(doi_depth(Eigen::Vector2d(1.0, 0.5), z, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(doi_depth(Eigen::Vector2d(1.0, 0.5), z, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(doi_depth(Eigen::Vector2d(1.0, -0.5), z), std::invalid_argument);
  CHECK_THROWS_AS(doi_depth(Eigen::Vector2d(1.0, std::numeric_limits<double>::infinity()), z),
                  std::invalid_argument);
}
