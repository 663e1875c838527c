#include "emi/synthdata.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace emi {

double profile_gaussian(double z) {
  const double t = z - 1.2;
  return std::exp(-t * t);
}

double profile_step(double z) { return (z >= 1.0 && z <= 2.0) ? 1.0 : 0.2; }

LayeredEarthModel discretize_profile(const Profile& profile, std::size_t n, double depth) {
  if (n < 1) throw std::invalid_argument("need at least one layer");
  if (!(depth > 0.0)) throw std::invalid_argument("depth must be positive");
  const double dz = depth / static_cast<double>(n);
  std::vector<double> sigma(n);
  for (std::size_t k = 0; k < n; ++k) sigma[k] = profile((static_cast<double>(k) + 0.5) * dz);
  return LayeredEarthModel::uniform(n, depth, std::move(sigma));
}

Pseudo2dModel make_pseudo2d_model(std::size_t columns, std::size_t n, double depth,
                                  double line_length) {
  if (columns < 2) throw std::invalid_argument("need at least two columns");
  if (n < 1) throw std::invalid_argument("need at least one layer");
  constexpr double top = 0.5, bottom = 3.0, upper_sigma = 0.5, lower_sigma = 2.0;
  if (!(depth > bottom)) throw std::invalid_argument("model must extend below 3 m");
  Pseudo2dModel out;
  const double dz = depth / static_cast<double>(n);
  const double last = static_cast<double>(columns - 1);
  for (std::size_t c = 0; c < columns; ++c) {
    const double frac = static_cast<double>(c) / last;
    const double zc = top + (bottom - top) * frac;
    std::vector<double> sigma(n);
    for (std::size_t k = 0; k < n; ++k)
      sigma[k] = (static_cast<double>(k) + 0.5) * dz < zc ? upper_sigma : lower_sigma;
    out.positions.push_back(line_length * frac);
    out.interfaces.push_back(zc);
    out.columns.push_back(LayeredEarthModel::uniform(n, depth, std::move(sigma)));
  }
  return out;
}

double noise_norm_factor(NoiseScaling scaling) {
  return scaling == NoiseScaling::Printed ? std::sqrt(2.0) : 1.0;
}

StackedVector add_noise(const StackedVector& stacked, double delta, std::uint64_t seed,
                        NoiseScaling scaling) {
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("noise level must be finite and non-negative");
  if (stacked.size() % 2 != 0) throw std::invalid_argument("stacked vector has odd length");
  if (delta == 0.0 || stacked.size() == 0) return stacked;
  const double entries = scaling == NoiseScaling::Printed ? static_cast<double>(stacked.size() / 2)
                                                          : static_cast<double>(stacked.size());
  const double scale = delta * stacked.norm() / std::sqrt(entries);
  std::mt19937_64 engine(seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  StackedVector out = stacked;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += scale * normal(engine);
  return out;
}

DataVector add_noise(const DataVector& b, double delta, std::uint64_t seed, NoiseScaling scaling) {
  return unstack(add_noise(stack(b), delta, seed, scaling));
}

double snr_db(const StackedVector& clean, const StackedVector& noisy) {
  if (clean.size() != noisy.size()) throw std::invalid_argument("vector lengths differ");
  const double err = (clean - noisy).squaredNorm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(clean.squaredNorm() / err);
}

double nominal_snr_db(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("noise level must be positive");
  return -20.0 * std::log10(delta);
}

}  // namespace emi
