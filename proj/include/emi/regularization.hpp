#pragma once

#include <Eigen/Core>

#include <vector>

namespace emi {

enum class RegKind { Identity, D1, D2 };

/// Identity (n x n), first difference D1 ((n-1) x n, rows [-1 1]) or second
/// difference D2 ((n-2) x n, rows [1 -2 1]). Too few columns for the stencil
/// throws std::invalid_argument.
Eigen::MatrixXd reg_matrix(RegKind kind, Eigen::Index n);

/// Generalized SVD of a pair (A, L), A rows x n, L p x n, p <= n:
///
///   A = U [diag(gamma) 0; 0 I_{n-p}] Z^{-1},   L = V [diag(xi) 0] Z^{-1},
///
/// gamma_i^2 + xi_i^2 = 1, gamma ascending. When rows < n the first n - rows
/// gamma vanish and the matching columns of U are zero.
struct GsvdFactors {
  Eigen::MatrixXd U;     // rows x n
  Eigen::MatrixXd V;     // p x p
  Eigen::MatrixXd Z;     // n x n
  Eigen::MatrixXd Zinv;  // n x n
  Eigen::VectorXd gamma;
  Eigen::VectorXd xi;

  Eigen::Index n() const noexcept { return Z.cols(); }
  Eigen::Index p() const noexcept { return gamma.size(); }
  Eigen::Index rows() const noexcept { return U.rows(); }
  /// Largest truncation parameter whose retained gamma are all nonzero.
  Eigen::Index max_ell() const;
};

/// Throws NumericalRankError when [A; L] has numerical rank below n and
/// std::invalid_argument on inconsistent shapes.
GsvdFactors gsvd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& l);

/// Truncated GSVD solution of min ||A q - rhs|| keeping the `ell` largest
/// gamma plus the null space of L:
///
///   q = sum_{i=p-ell}^{p-1} (u_i' rhs / gamma_i) z_i + sum_{i>=p} (u_i' rhs) z_i.
///
/// ell outside [0, p] throws std::invalid_argument; a zero gamma inside the
/// retained band throws SingularComponentError.
Eigen::VectorXd tgsvd_solve(const GsvdFactors& f, const Eigen::VectorXd& rhs, Eigen::Index ell);

/// Residual ||A q_ell - rhs|| and seminorm ||L q_ell|| for ell = 0..max_ell().
struct TgsvdPath {
  std::vector<double> residual;
  std::vector<double> seminorm;
};
TgsvdPath tgsvd_path(const GsvdFactors& f, const Eigen::VectorXd& rhs);

/// Floor applied to |q_i| inside the MGS terms: 1e-8 * max(1, ||q||_inf).
double mgs_floor(const Eigen::VectorXd& q);

/// Minimum-gradient-support functional with epsilon = 1:
///   S(q) = sum_r x_r^2 / (x_r^2 + 1),  x_r = (L q)_r / (tau q_r).
double mgs_functional(const Eigen::VectorXd& q, const Eigen::MatrixXd& l, double tau);

/// Diagonal of D with D_ii = 1/(tau |q_i|) * (x_i^2 + 1)^(-1/2), so that
/// ||D L q||^2 == mgs_functional(q, L, tau).
Eigen::VectorXd mgs_weights(const Eigen::VectorXd& q_prev, const Eigen::MatrixXd& l, double tau);

}  // namespace emi
