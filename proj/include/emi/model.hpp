#pragma once

#include <Eigen/Core>

#include <array>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace emi {

using Complex = std::complex<double>;
using DataVector = Eigen::VectorXcd;    // complex readings, layout order
using StackedVector = Eigen::VectorXd;  // [Re; Im]

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;

/// n-layered half-space below z = 0. Layer k spans [z_k, z_{k+1}); the bottom
/// layer is semi-infinite. Permeability is fixed to mu0 everywhere.
class LayeredEarthModel {
 public:
  /// Throws std::invalid_argument unless depths[0] == 0, depths strictly
  /// increase, sizes match, and every conductivity is finite and >= 0.
  LayeredEarthModel(std::vector<double> depths, std::vector<double> sigma);

  /// `n` layers of equal thickness `depth / n` starting at the surface.
  static LayeredEarthModel uniform(std::size_t n, double depth, std::vector<double> sigma);
  static LayeredEarthModel uniform(std::size_t n, double depth, double sigma);

  std::size_t size() const noexcept { return sigma_.size(); }
  std::span<const double> depths() const noexcept { return depths_; }
  std::span<const double> sigma() const noexcept { return sigma_; }
  double sigma(std::size_t k) const { return sigma_.at(k); }
  double mu(std::size_t) const noexcept { return kMu0; }

  /// d_k = z_{k+1} - z_k; infinity for the bottom layer.
  double thickness(std::size_t k) const;

  /// Same layer grid, new conductivities (validated like the constructor).
  LayeredEarthModel with_sigma(std::vector<double> sigma) const;
  LayeredEarthModel with_sigma(const Eigen::VectorXd& sigma) const;

  Eigen::VectorXd sigma_vector() const;

 private:
  std::vector<double> depths_;
  std::vector<double> sigma_;
};

/// Top depths of `n` equal layers down to `depth`: z_k = k * depth / n.
std::vector<double> uniform_layer_tops(std::size_t n, double depth);

enum class Orientation { Vertical = 0, Horizontal = 1 };

inline int bessel_order(Orientation o) noexcept { return static_cast<int>(o); }

/// Physical settings of one reading.
struct Reading {
  Orientation orientation;
  double height;
  double spacing;
  double frequency;
  double omega() const noexcept { return 2.0 * std::numbers::pi * frequency; }
};

/// Multi-configuration device. Readings are laid out orientation-major, then
/// height, spacing and frequency (fastest); vertical precedes horizontal.
class DeviceConfig {
 public:
  DeviceConfig(std::vector<double> spacings, std::vector<double> heights,
               std::vector<double> frequencies, std::vector<Orientation> orientations);

  std::span<const double> spacings() const noexcept { return spacings_; }
  std::span<const double> heights() const noexcept { return heights_; }
  std::span<const double> frequencies() const noexcept { return frequencies_; }
  std::span<const Orientation> orientations() const noexcept { return orientations_; }

  /// Number of complex readings m.
  std::size_t size() const noexcept {
    return orientations_.size() * heights_.size() * spacings_.size() * frequencies_.size();
  }

  /// ((orientation_pos * m_h + height) * m_rho + spacing) * m_omega + frequency.
  std::size_t index(std::size_t orientation_pos, std::size_t height, std::size_t spacing,
                    std::size_t frequency) const;

  /// Inverse of index().
  Reading reading(std::size_t flat) const;

  bool operator==(const DeviceConfig&) const = default;

 private:
  std::vector<double> spacings_;
  std::vector<double> heights_;
  std::vector<double> frequencies_;
  std::vector<Orientation> orientations_;
};

/// CMD Explorer: spacings 1.48/2.82/4.49 m at 10 kHz, heights 0.9 and 1.8 m.
DeviceConfig cmd_explorer(std::vector<Orientation> orientations = {Orientation::Vertical,
                                                                   Orientation::Horizontal},
                          std::vector<double> heights = {0.9, 1.8});

StackedVector stack(const DataVector& v);
DataVector unstack(const StackedVector& s);

/// [Re(J); Im(J)] for a complex matrix.
Eigen::MatrixXd stack_rows(const Eigen::MatrixXcd& j);

}  // namespace emi
