#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <stdexcept>

namespace emi {

/// Sigma_r = ||J e_r||^2, the squared column norms.
Eigen::VectorXd integrated_sensitivity(const Eigen::MatrixXd& jacobian);

/// Sigma_1 is zero, so no relative threshold exists.
class UndefinedSensitivityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kDefaultEta = 1e-2;

/// Shallowest depth z_r with Sigma_r < eta * Sigma_1 (strict), or nullopt
/// when the threshold is never crossed inside the model.
std::optional<double> doi_depth(const Eigen::VectorXd& sensitivity, std::span<const double> depths,
                                double eta = kDefaultEta);

}  // namespace emi
