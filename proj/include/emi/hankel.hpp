#pragma once

#include "emi/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace emi {

/// J0 or J1 of the first kind. Any other order throws std::invalid_argument.
double bessel_j(int order, double x);

struct QuadratureOptions {
  int points_per_panel = 16;
  /// Geometric refinement levels of the first panel towards lambda = 0.
  int grading_levels = 24;
  /// Integration stops where exp(-decay * lambda) * (1 + lambda)^3 < exp(-truncation_exponent).
  double truncation_exponent = 40.0;
};

/// Fixed lambda grid for Hankel-type integrals of kernels decaying at least
/// like exp(-decay * lambda). Composite Gauss-Legendre on panels no wider than
/// half a period of J(max_spacing * lambda), geometrically graded at the origin.
class LambdaGrid {
 public:
  LambdaGrid(double max_spacing, double decay, const QuadratureOptions& options = {});

  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double upper_limit() const noexcept { return upper_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
  double upper_ = 0.0;
};

enum class HankelMethod {
  Panel,     ///< fixed LambdaGrid, the production path
  Adaptive,  ///< Gauss-Kronrod between Bessel zeros + Wynn extrapolation, the oracle path
};

using Kernel = std::function<Complex(double)>;

/// Integral of g(lambda) * J_order(rho * lambda) over (0, inf). `decay` is a
/// rate a > 0 with |g(lambda)| = O(exp(-a lambda)); a <= 0 throws QuadratureError.
Complex hankel_integrate(const Kernel& g, int order, double rho, double decay,
                         HankelMethod method = HankelMethod::Panel);

}  // namespace emi
