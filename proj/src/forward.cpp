#include "emi/forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace emi {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kTanhCutoff = 30.0;

struct TanhTerms {
  Complex tanh;
  Complex sech2;  // 1 - tanh^2
};

// Re(x) >= 0 here, so exp(-2x) never overflows.
TanhTerms tanh_terms(Complex x) {
  if (x.real() > kTanhCutoff) return {1.0, 0.0};
  const Complex e = std::exp(-2.0 * x);
  const Complex denom = 1.0 + e;
  return {(1.0 - e) / denom, 4.0 * e / (denom * denom)};
}

Complex characteristic_admittance(Complex u, double mu, double omega) {
  return u / (kI * mu * omega);
}

Complex free_space_admittance(double lambda, double omega) {
  return lambda / (kI * kMu0 * omega);
}

// real weights times complex samples, without promoting the weights
template <typename Derived>
Eigen::MatrixXcd apply_weights(const Eigen::MatrixXd& w, const Eigen::MatrixBase<Derived>& x) {
  Eigen::MatrixXcd out(w.rows(), x.cols());
  out.real() = w * x.real();
  out.imag() = w * x.imag();
  return out;
}

}  // namespace

Complex propagation_constant(double lambda, double sigma, double mu, double omega) {
  return std::sqrt(Complex(lambda * lambda, sigma * mu * omega));
}

Complex surface_admittance(double lambda, const LayeredEarthModel& model, double omega) {
  const std::size_t n = model.size();
  Complex y = characteristic_admittance(
      propagation_constant(lambda, model.sigma(n - 1), model.mu(n - 1), omega), model.mu(n - 1),
      omega);
  for (std::size_t k = n - 1; k-- > 0;) {
    const Complex u = propagation_constant(lambda, model.sigma(k), model.mu(k), omega);
    const Complex nk = characteristic_admittance(u, model.mu(k), omega);
    const Complex t = tanh_terms(model.thickness(k) * u).tanh;
    y = nk * (y + nk * t) / (nk + y * t);
  }
  return y;
}

Complex reflection_factor(double lambda, const LayeredEarthModel& model, double omega) {
  if (lambda == 0.0) {
    // N_0 vanishes, so R -> -1 over a conducting top layer
    if (model.sigma(0) > 0.0) return -1.0;
    const auto s = model.sigma();
    if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) return 0.0;
    return reflection_factor(1e-9, model, omega);
  }
  const Complex n0 = free_space_admittance(lambda, omega);
  const Complex y1 = surface_admittance(lambda, model, omega);
  return (n0 - y1) / (n0 + y1);
}

Complex reflection_factor_gradient(double lambda, const LayeredEarthModel& model, double omega,
                                   std::span<Complex> gradient) {
  const std::size_t n = model.size();
  if (gradient.size() != n) throw std::invalid_argument("gradient size must equal layer count");
  if (!(lambda > 0.0)) throw std::invalid_argument("gradient requires lambda > 0");

  // local[k] = dY_k/dsigma_k with Y_{k+1} held fixed, chain[k] = dY_k/dY_{k+1}
  thread_local std::vector<Complex> local, chain;
  local.resize(n);
  chain.resize(n);

  const double mu_n = model.mu(n - 1);
  const Complex u_n = propagation_constant(lambda, model.sigma(n - 1), mu_n, omega);
  Complex y = characteristic_admittance(u_n, mu_n, omega);
  local[n - 1] = 1.0 / (2.0 * u_n);
  for (std::size_t k = n - 1; k-- > 0;) {
    const double mu = model.mu(k);
    const Complex u = propagation_constant(lambda, model.sigma(k), mu, omega);
    const Complex nk = characteristic_admittance(u, mu, omega);
    const double d = model.thickness(k);
    const auto [t, sech2] = tanh_terms(d * u);
    const Complex a = y + nk * t;
    const Complex b = nk + y * t;
    const Complex b2 = b * b;
    const Complex dy_dn = a / b + nk * t / b - nk * a / b2;
    const Complex dy_dt = nk * (nk * nk - y * y) / b2;
    const Complex du_dsigma = kI * mu * omega / (2.0 * u);
    const Complex dn_dsigma = 1.0 / (2.0 * u);
    const Complex dt_dsigma = sech2 * d * du_dsigma;
    local[k] = dy_dn * dn_dsigma + dy_dt * dt_dsigma;
    chain[k] = nk * nk * sech2 / b2;
    y = nk * a / b;
  }

  const Complex n0 = free_space_admittance(lambda, omega);
  const Complex denom = n0 + y;
  const Complex dr_dy = -2.0 * n0 / (denom * denom);
  Complex carry = dr_dy;
  for (std::size_t k = 0; k < n; ++k) {
    gradient[k] = carry * local[k];
    if (k + 1 < n) carry *= chain[k];
  }
  return (n0 - y) / denom;
}

ForwardModel::ForwardModel(DeviceConfig config, const QuadratureOptions& options)
    : config_(std::move(config)),
      grid_(*std::max_element(config_.spacings().begin(), config_.spacings().end()),
            2.0 * *std::min_element(config_.heights().begin(), config_.heights().end()),
            options) {
  const auto& c = config_;
  const std::size_t geometries = c.orientations().size() * c.heights().size() * c.spacings().size();
  const auto nodes = grid_.nodes();
  const auto w = grid_.weights();
  weights_.resize(static_cast<Eigen::Index>(geometries), static_cast<Eigen::Index>(grid_.size()));
  std::size_t g = 0;
  for (Orientation o : c.orientations()) {
    const int nu = bessel_order(o);
    for (double h : c.heights()) {
      for (double rho : c.spacings()) {
        const double scale = -std::pow(rho, 3 - nu);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          const double lambda = nodes[i];
          weights_(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i)) =
              scale * w[i] * std::pow(lambda, 2 - nu) * std::exp(-2.0 * h * lambda) *
              bessel_j(nu, rho * lambda);
        }
        ++g;
      }
    }
  }
}

DataVector ForwardModel::response(const LayeredEarthModel& model) const {
  const auto freqs = config_.frequencies();
  const auto nodes = grid_.nodes();
  const auto m_omega = static_cast<Eigen::Index>(freqs.size());
  DataVector out(static_cast<Eigen::Index>(config_.size()));
  Eigen::VectorXcd r(static_cast<Eigen::Index>(nodes.size()));
  for (Eigen::Index j = 0; j < m_omega; ++j) {
    const double omega = 2.0 * std::numbers::pi * freqs[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < nodes.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = reflection_factor(nodes[i], model, omega);
    const Eigen::VectorXcd readings = apply_weights(weights_, r);
    for (Eigen::Index g = 0; g < weights_.rows(); ++g) out(g * m_omega + j) = readings(g);
  }
  return out;
}

ForwardModel::Linearization ForwardModel::linearize(const LayeredEarthModel& model) const {
  const auto freqs = config_.frequencies();
  const auto nodes = grid_.nodes();
  const auto n = static_cast<Eigen::Index>(model.size());
  const auto nodes_count = static_cast<Eigen::Index>(nodes.size());
  const auto m_omega = static_cast<Eigen::Index>(freqs.size());
  const auto m = static_cast<Eigen::Index>(config_.size());

  Linearization lin{DataVector(m), ComplexJacobian{Eigen::MatrixXcd(m, n)}};
  Eigen::VectorXcd r(nodes_count);
  // row-major so each node's gradient is contiguous
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dr(nodes_count, n);
  for (Eigen::Index j = 0; j < m_omega; ++j) {
    const double omega = 2.0 * std::numbers::pi * freqs[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < nodes_count; ++i) {
      r(i) = reflection_factor_gradient(nodes[static_cast<std::size_t>(i)], model, omega,
                                        std::span<Complex>(dr.row(i).data(),
                                                           static_cast<std::size_t>(n)));
    }
    const Eigen::VectorXcd readings = apply_weights(weights_, r);
    const Eigen::MatrixXcd dm = apply_weights(weights_, dr);
    for (Eigen::Index g = 0; g < weights_.rows(); ++g) {
      lin.response(g * m_omega + j) = readings(g);
      lin.jacobian.matrix.row(g * m_omega + j) = -dm.row(g);
    }
  }
  return lin;
}

DataVector forward_response(const LayeredEarthModel& model, const DeviceConfig& config) {
  return ForwardModel(config).response(model);
}

DataVector forward_response_adaptive(const LayeredEarthModel& model, const DeviceConfig& config) {
  DataVector out(static_cast<Eigen::Index>(config.size()));
  for (std::size_t idx = 0; idx < config.size(); ++idx) {
    const Reading rd = config.reading(idx);
    const int nu = bessel_order(rd.orientation);
    const double omega = rd.omega();
    const double h = rd.height;
    const Kernel g = [&](double lambda) {
      return std::pow(lambda, 2 - nu) * std::exp(-2.0 * h * lambda) *
             reflection_factor(lambda, model, omega);
    };
    out(static_cast<Eigen::Index>(idx)) =
        -std::pow(rd.spacing, 3 - nu) *
        hankel_integrate(g, nu, rd.spacing, 2.0 * h, HankelMethod::Adaptive);
  }
  return out;
}

ComplexJacobian jacobian(const LayeredEarthModel& model, const DeviceConfig& config) {
  return ForwardModel(config).jacobian(model);
}

}  // namespace emi
