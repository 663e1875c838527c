#include "emi/hankel.hpp"

#include "emi/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace emi {

namespace {

struct Rule {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

template <unsigned N>
Rule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& wt = G::weights();
  Rule r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(wt[i]);
    } else {
      r.x.push_back(-a[i]);
      r.w.push_back(wt[i]);
      r.x.push_back(a[i]);
      r.w.push_back(wt[i]);
    }
  }
  return r;
}

const Rule& gauss_rule(int points) {
  static const Rule r8 = make_rule<8>();
  static const Rule r12 = make_rule<12>();
  static const Rule r16 = make_rule<16>();
  static const Rule r20 = make_rule<20>();
  static const Rule r30 = make_rule<30>();
  switch (points) {
    case 8: return r8;
    case 12: return r12;
    case 16: return r16;
    case 20: return r20;
    case 30: return r30;
    default: throw std::invalid_argument("points_per_panel must be one of 8, 12, 16, 20, 30");
  }
}

// Wynn epsilon acceleration of a sequence of partial sums; returns the
// estimate from the deepest even column that is available.
class WynnEpsilon {
 public:
  Complex push(Complex s) {
    std::vector<Complex> next(1, s);
    // row_ holds eps_{k}^{(n-k)} for the previous diagonal
    for (std::size_t k = 0; k < row_.size(); ++k) {
      const Complex prev_lower = (k == 0) ? Complex(0.0) : row_[k - 1];
      const Complex diff = next[k] - row_[k];
      if (std::abs(diff) == 0.0) {
        next.resize(k + 1);
        break;
      }
      next.push_back(prev_lower + 1.0 / diff);
    }
    if (next.size() > kMaxColumns) next.resize(kMaxColumns);
    row_ = std::move(next);
    // even columns are estimates; fall back to shallower ones past a blow-up
    for (std::size_t k = (row_.size() - 1) / 2 * 2;; k -= 2) {
      if (std::isfinite(row_[k].real()) && std::isfinite(row_[k].imag())) return row_[k];
      if (k < 2) return s;
    }
  }

 private:
  static constexpr std::size_t kMaxColumns = 41;
  std::vector<Complex> row_;
};

Complex integrate_adaptive(const Kernel& g, int order, double rho, double decay) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto f = [&](double lambda) { return g(lambda) * bessel_j(order, rho * lambda); };
  // Relative accuracy is wasted on a part far below the piece's magnitude or
  // the running sum, where roundoff in the kernel would keep the bisection
  // going. The absolute target is 1e-15 of those, at most 1e-13 relative.
  Complex sum = 0.0;
  auto piece = [&](double a, double b) {
    auto re = [&](double x) { return f(x).real(); };
    auto im = [&](double x) { return f(x).imag(); };
    double err = 0.0, l1_re = 0.0, l1_im = 0.0;
    const double coarse_re = GK::integrate(re, a, b, 0, 0.0, &err, &l1_re);
    const double coarse_im = GK::integrate(im, a, b, 0, 0.0, &err, &l1_im);
    const double target = 1e-15 * (std::abs(sum) + l1_re + l1_im);
    auto refine = [&](auto&& h, double coarse, double l1) {
      if (!(l1 > 0.0)) return coarse;
      return GK::integrate(h, a, b, 15, std::max(1e-13, target / l1));
    };
    return Complex(refine(re, coarse_re, l1_re), refine(im, coarse_im, l1_im));
  };

  constexpr int kMaxIntervals = 200000;
  WynnEpsilon wynn;
  Complex estimate = 0.0;
  Complex last_estimate = std::numeric_limits<double>::quiet_NaN();
  int stable = 0;
  double left = 0.0;
  for (int k = 1; k <= kMaxIntervals; ++k) {
    const double right = boost::math::cyl_bessel_j_zero(static_cast<double>(order), k) / rho;
    const Complex term = piece(left, right);
    sum += term;
    estimate = wynn.push(sum);
    left = right;
    const double scale = std::max(std::abs(sum), std::abs(estimate));
    const bool tiny_term = std::abs(term) <= 1e-17 * scale || term == Complex(0.0);
    const bool settled = std::abs(estimate - last_estimate) <= 1e-15 * scale;
    // exp(-decay * lambda) has to be under way before extrapolation is trusted
    if (decay * left > 5.0 && (tiny_term || settled)) {
      if (++stable >= 3) return tiny_term ? sum : estimate;
    } else {
      stable = 0;
    }
    last_estimate = estimate;
  }
  throw QuadratureError("adaptive Hankel integration did not converge");
}

}  // namespace

double bessel_j(int order, double x) {
  if (order != 0 && order != 1) throw std::invalid_argument("only J0 and J1 are supported");
  return boost::math::cyl_bessel_j(order, x);
}

LambdaGrid::LambdaGrid(double max_spacing, double decay, const QuadratureOptions& options) {
  if (!(max_spacing > 0.0)) throw std::invalid_argument("spacing must be positive");
  if (!(decay > 0.0) || !std::isfinite(decay))
    throw QuadratureError("kernel decay rate must be positive (device height h > 0)");
  const Rule& rule = gauss_rule(options.points_per_panel);

  // upper limit: exp(-decay * L) (1 + L)^3 = exp(-truncation_exponent)
  double upper = options.truncation_exponent / decay;
  for (int it = 0; it < 50; ++it)
    upper = (options.truncation_exponent + 3.0 * std::log1p(upper)) / decay;
  upper_ = upper;

  const double width = std::numbers::pi / max_spacing;
  const auto panels = static_cast<std::size_t>(std::ceil(upper / width));
  const double h = upper / static_cast<double>(panels);

  std::vector<std::pair<double, double>> intervals;
  double lo = h * std::ldexp(1.0, -options.grading_levels);
  intervals.emplace_back(0.0, lo);
  for (int level = options.grading_levels - 1; level >= 0; --level) {
    const double hi = h * std::ldexp(1.0, -level);
    intervals.emplace_back(lo, hi);
    lo = hi;
  }
  for (std::size_t p = 1; p < panels; ++p)
    intervals.emplace_back(h * static_cast<double>(p), h * static_cast<double>(p + 1));

  nodes_.reserve(intervals.size() * rule.x.size());
  weights_.reserve(intervals.size() * rule.x.size());
  for (auto [a, b] : intervals) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
      nodes_.push_back(mid + half * rule.x[i]);
      weights_.push_back(half * rule.w[i]);
    }
  }
}

Complex hankel_integrate(const Kernel& g, int order, double rho, double decay,
                         HankelMethod method) {
  if (order != 0 && order != 1) throw std::invalid_argument("Bessel order must be 0 or 1");
  if (!(rho > 0.0)) throw std::invalid_argument("spacing must be positive");
  if (!(decay > 0.0) || !std::isfinite(decay))
    throw QuadratureError("kernel does not decay; Hankel integral not convergent");
  if (method == HankelMethod::Adaptive) return integrate_adaptive(g, order, rho, decay);

  const LambdaGrid grid(rho, decay);
  Complex sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lambda = grid.nodes()[i];
    sum += grid.weights()[i] * g(lambda) * bessel_j(order, rho * lambda);
  }
  return sum;
}

}  // namespace emi
