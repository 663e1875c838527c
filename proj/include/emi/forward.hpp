#pragma once

#include "emi/hankel.hpp"
#include "emi/model.hpp"

#include <Eigen/Core>

#include <span>

namespace emi {

/// u_k = sqrt(lambda^2 + i sigma mu omega), principal branch (Re u >= 0).
Complex propagation_constant(double lambda, double sigma, double mu, double omega);

/// Y_1 at the surface, from the bottom-up admittance recursion started with
/// Y_n = N_n. tanh(d_k u_k) is replaced by 1 once Re(d_k u_k) > 30.
Complex surface_admittance(double lambda, const LayeredEarthModel& model, double omega);

/// R = (N_0 - Y_1) / (N_0 + Y_1) with N_0 = lambda / (i mu0 omega). At
/// lambda = 0 the limit -1 is returned for a conducting top layer (0 if the
/// whole model is non-conducting).
Complex reflection_factor(double lambda, const LayeredEarthModel& model, double omega);

/// As reflection_factor(), also writing dR/dsigma_k for every layer into
/// `gradient` (size == model.size()). Requires lambda > 0.
Complex reflection_factor_gradient(double lambda, const LayeredEarthModel& model, double omega,
                                   std::span<Complex> gradient);

/// J_ij = d r_i / d sigma_j for r = b - M(sigma), i.e. minus the derivative of
/// the readings.
struct ComplexJacobian {
  Eigen::MatrixXcd matrix;

  /// [Re J; Im J], 2m x n.
  Eigen::MatrixXd stacked() const { return stack_rows(matrix); }
};

/// Forward map of one device configuration. The lambda grid and the
/// geometry-dependent quadrature weights are built once and shared by all
/// readings, so the kernel R(lambda) is evaluated once per node and frequency.
class ForwardModel {
 public:
  explicit ForwardModel(DeviceConfig config, const QuadratureOptions& options = {});

  const DeviceConfig& config() const noexcept { return config_; }
  const LambdaGrid& grid() const noexcept { return grid_; }

  /// Complex readings H_S/H_P in layout order.
  DataVector response(const LayeredEarthModel& model) const;

  struct Linearization {
    DataVector response;
    ComplexJacobian jacobian;
  };
  /// Readings and residual Jacobian in one pass.
  Linearization linearize(const LayeredEarthModel& model) const;

  ComplexJacobian jacobian(const LayeredEarthModel& model) const {
    return linearize(model).jacobian;
  }

 private:
  DeviceConfig config_;
  LambdaGrid grid_;
  // row g: -rho^(3-nu) * w_i * lambda_i^(2-nu) * exp(-2 h lambda_i) * J_nu(rho lambda_i)
  // for geometry g = (orientation, height, spacing)
  Eigen::MatrixXd weights_;
};

DataVector forward_response(const LayeredEarthModel& model, const DeviceConfig& config);

/// Validation path: every reading integrated independently with
/// HankelMethod::Adaptive. Slow.
DataVector forward_response_adaptive(const LayeredEarthModel& model, const DeviceConfig& config);

ComplexJacobian jacobian(const LayeredEarthModel& model, const DeviceConfig& config);

}  // namespace emi
