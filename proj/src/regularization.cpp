#include "emi/regularization.hpp"

#include "emi/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace emi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd reg_matrix(RegKind kind, Index n) {
  switch (kind) {
    case RegKind::Identity:
      if (n < 1) throw std::invalid_argument("identity regularizer needs n >= 1");
      return MatrixXd::Identity(n, n);
    case RegKind::D1: {
      if (n < 2) throw std::invalid_argument("first-difference regularizer needs n >= 2");
      MatrixXd l = MatrixXd::Zero(n - 1, n);
      for (Index i = 0; i < n - 1; ++i) {
        l(i, i) = -1.0;
        l(i, i + 1) = 1.0;
      }
      return l;
    }
    case RegKind::D2: {
      if (n < 3) throw std::invalid_argument("second-difference regularizer needs n >= 3");
      MatrixXd l = MatrixXd::Zero(n - 2, n);
      for (Index i = 0; i < n - 2; ++i) {
        l(i, i) = 1.0;
        l(i, i + 1) = -2.0;
        l(i, i + 2) = 1.0;
      }
      return l;
    }
  }
  throw std::invalid_argument("unknown regularizer kind");
}

namespace {

double zero_gamma_tolerance(Index n) {
  return static_cast<double>(n) * std::numeric_limits<double>::epsilon();
}

}  // namespace

Index GsvdFactors::max_ell() const {
  const double tol = zero_gamma_tolerance(n());
  Index zeros = 0;
  while (zeros < p() && !(gamma(zeros) > tol)) ++zeros;
  return p() - zeros;
}

GsvdFactors gsvd(const MatrixXd& a, const MatrixXd& l) {
  const Index n = a.cols();
  const Index rows = a.rows();
  const Index p = l.rows();
  if (l.cols() != n) throw std::invalid_argument("A and L must have the same column count");
  if (n < 1 || rows < 1) throw std::invalid_argument("empty matrix pair");
  if (p > n) throw std::invalid_argument("L must have at most as many rows as columns");
  if (rows + p < n) throw NumericalRankError("[A; L] has fewer rows than columns");

  MatrixXd stacked(rows + p, n);
  stacked << a, l;
  if (!stacked.allFinite()) throw std::invalid_argument("matrix pair contains non-finite entries");
  {
    Eigen::ColPivHouseholderQR<MatrixXd> rank_check(stacked);
    if (rank_check.rank() < n)
      throw NumericalRankError("null spaces of A and L intersect: rank " +
                               std::to_string(rank_check.rank()) + " < " + std::to_string(n));
  }

  // [A; L] = [Q1; Q2] R, then a CS-type split of (Q1, Q2): small singular
  // values of Q1 are taken from its SVD, those near one from the SVD of Q2,
  // so both gamma and xi are accurate where they are small.
  Eigen::HouseholderQR<MatrixXd> qr(stacked);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(rows + p, n);
  const MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  const MatrixXd q1 = q.topRows(rows);
  const MatrixXd q2 = q.bottomRows(p);

  Eigen::JacobiSVD<MatrixXd> svd1(q1, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Index k = std::min(rows, n);
  VectorXd s = VectorXd::Zero(n);
  s.head(k) = svd1.singularValues();
  MatrixXd w = svd1.matrixV();
  MatrixXd u = MatrixXd::Zero(rows, n);
  u.leftCols(k) = svd1.matrixU();
  VectorXd c(n);

  Index big = 0;
  while (big < n && s(big) > std::sqrt(0.5)) ++big;
  if (big > 0) {
    Eigen::JacobiSVD<MatrixXd> svd2(q2 * w.leftCols(big), Eigen::ComputeFullV);
    w.leftCols(big) = (w.leftCols(big) * svd2.matrixV()).eval();
    const Index kc = std::min(p, big);
    c.head(big).setZero();
    c.head(kc) = svd2.singularValues();
    for (Index j = 0; j < big; ++j) {
      const VectorXd col = q1 * w.col(j);
      s(j) = col.norm();
      u.col(j) = col / s(j);
    }
  }
  for (Index j = big; j < n; ++j) c(j) = (q2 * w.col(j)).norm();

  // the n - p columns with the smallest c span null(L)
  std::vector<Index> by_c(static_cast<std::size_t>(n));
  std::iota(by_c.begin(), by_c.end(), Index{0});
  std::stable_sort(by_c.begin(), by_c.end(), [&](Index x, Index y) { return c(x) < c(y); });
  std::vector<Index> null_block(by_c.begin(), by_c.begin() + (n - p));
  std::vector<Index> p_block(by_c.begin() + (n - p), by_c.end());
  auto gamma_of = [&](Index j) { return s(j) / std::hypot(s(j), c(j)); };
  std::stable_sort(p_block.begin(), p_block.end(),
                   [&](Index x, Index y) { return gamma_of(x) < gamma_of(y); });

  GsvdFactors f;
  f.U.resize(rows, n);
  f.V = MatrixXd::Zero(p, p);
  f.gamma.resize(p);
  f.xi.resize(p);
  MatrixXd w_ordered(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index j = i < p ? p_block[static_cast<std::size_t>(i)]
                          : null_block[static_cast<std::size_t>(i - p)];
    w_ordered.col(i) = w.col(j);
    f.U.col(i) = u.col(j);
    if (i < p) {
      const double norm = std::hypot(s(j), c(j));
      f.gamma(i) = s(j) / norm;
      f.xi(i) = c(j) / norm;
      if (c(j) > 0.0) f.V.col(i) = q2 * w.col(j) / c(j);
    }
  }
  f.Zinv = w_ordered.transpose() * r;
  f.Z = r.triangularView<Eigen::Upper>().solve(w_ordered);
  return f;
}

VectorXd tgsvd_solve(const GsvdFactors& f, const VectorXd& rhs, Index ell) {
  const Index p = f.p();
  const Index n = f.n();
  if (rhs.size() != f.rows()) throw std::invalid_argument("right-hand side has wrong length");
  if (ell < 0 || ell > p) throw std::invalid_argument("truncation parameter outside [0, p]");
  if (ell > f.max_ell())
    throw SingularComponentError("zero generalized singular value inside the retained band");

  VectorXd q = VectorXd::Zero(n);
  for (Index i = p - ell; i < p; ++i) q += (f.U.col(i).dot(rhs) / f.gamma(i)) * f.Z.col(i);
  for (Index i = p; i < n; ++i) q += f.U.col(i).dot(rhs) * f.Z.col(i);
  return q;
}

TgsvdPath tgsvd_path(const GsvdFactors& f, const VectorXd& rhs) {
  const Index p = f.p();
  const Index n = f.n();
  if (rhs.size() != f.rows()) throw std::invalid_argument("right-hand side has wrong length");
  const VectorXd coeff = f.U.transpose() * rhs;

  TgsvdPath path;
  VectorXd residual = rhs;
  for (Index i = p; i < n; ++i) residual -= coeff(i) * f.U.col(i);
  double seminorm2 = 0.0;
  path.residual.push_back(residual.norm());
  path.seminorm.push_back(0.0);
  const Index top = f.max_ell();
  for (Index ell = 1; ell <= top; ++ell) {
    const Index i = p - ell;
    residual -= coeff(i) * f.U.col(i);
    const double term = f.xi(i) * coeff(i) / f.gamma(i);
    seminorm2 += term * term;
    path.residual.push_back(residual.norm());
    path.seminorm.push_back(std::sqrt(seminorm2));
  }
  return path;
}

double mgs_floor(const VectorXd& q) {
  const double inf_norm = q.size() > 0 ? q.cwiseAbs().maxCoeff() : 0.0;
  return 1e-8 * std::max(1.0, inf_norm);
}

namespace {

void check_mgs_args(const VectorXd& q, const MatrixXd& l, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("focusing parameter tau must be positive");
  if (l.cols() != q.size() || l.rows() > q.size())
    throw std::invalid_argument("regularizer and update sizes do not match");
}

}  // namespace

double mgs_functional(const VectorXd& q, const MatrixXd& l, double tau) {
  check_mgs_args(q, l, tau);
  const double floor = mgs_floor(q);
  const VectorXd lq = l * q;
  double sum = 0.0;
  for (Index r = 0; r < lq.size(); ++r) {
    const double x = lq(r) / (tau * std::max(std::abs(q(r)), floor));
    const double x2 = x * x;
    sum += x2 / (x2 + 1.0);
  }
  return sum;
}

VectorXd mgs_weights(const VectorXd& q_prev, const MatrixXd& l, double tau) {
  check_mgs_args(q_prev, l, tau);
  const double floor = mgs_floor(q_prev);
  const VectorXd lq = l * q_prev;
  VectorXd d(lq.size());
  for (Index i = 0; i < lq.size(); ++i) {
    const double scale = tau * std::max(std::abs(q_prev(i)), floor);
    const double x = lq(i) / scale;
    d(i) = 1.0 / (scale * std::sqrt(x * x + 1.0));
  }
  return d;
}

}  // namespace emi
