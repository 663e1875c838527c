#include "emi/doi.hpp"

#include <cmath>

namespace emi {

Eigen::VectorXd integrated_sensitivity(const Eigen::MatrixXd& jacobian) {
  return jacobian.colwise().squaredNorm().transpose();
}

std::optional<double> doi_depth(const Eigen::VectorXd& sensitivity, std::span<const double> depths,
                                double eta) {
  if (sensitivity.size() == 0) throw std::invalid_argument("empty sensitivity profile");
  if (static_cast<std::size_t>(sensitivity.size()) != depths.size())
    throw std::invalid_argument("sensitivity and depth lists differ in length");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
  if (!sensitivity.allFinite() || (sensitivity.array() < 0.0).any())
    throw std::invalid_argument("sensitivity must be finite and non-negative");
  if (sensitivity(0) == 0.0)
    throw UndefinedSensitivityError("top-layer sensitivity is zero; DOI undefined");
  const double threshold = eta * sensitivity(0);
  for (Eigen::Index r = 0; r < sensitivity.size(); ++r)
    if (sensitivity(r) < threshold) return depths[static_cast<std::size_t>(r)];
  return std::nullopt;
}

}  // namespace emi
