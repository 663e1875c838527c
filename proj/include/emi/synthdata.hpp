#pragma once

#include "emi/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace emi {

/// exp(-(z - 1.2)^2)
double profile_gaussian(double z);

/// 0.2 outside [1, 2], 1 on the closed interval.
double profile_step(double z);

using Profile = std::function<double(double)>;

/// `n` equal layers down to `depth`, each sampled at its midpoint. The bottom
/// layer is sampled at the midpoint of its nominal cell [z_n, depth].
LayeredEarthModel discretize_profile(const Profile& profile, std::size_t n = 60,
                                     double depth = 3.5);

struct Pseudo2dModel {
  std::vector<double> positions;   // m along the line
  std::vector<double> interfaces;  // interface depth per column, m
  std::vector<LayeredEarthModel> columns;
};

/// 0.5 S/m over 2 S/m, interface ramping linearly from 0.5 m (first column)
/// to 3.0 m (last column); columns evenly spaced over `line_length`.
Pseudo2dModel make_pseudo2d_model(std::size_t columns = 50, std::size_t n = 60, double depth = 3.5,
                                  double line_length = 10.0);

/// How the noise vector is scaled.
///   Printed: delta ||b|| / sqrt(m) with m complex readings, w of length 2m.
///            The expected noise norm is then about sqrt(2) delta ||b||.
///   PerEntry: delta ||b|| / sqrt(2m), so the noise norm is about delta ||b||.
enum class NoiseScaling { Printed, PerEntry };

/// b + scale * w, w standard normal drawn from mt19937_64(seed) through
/// boost's normal_distribution (identical streams on every platform).
/// `stacked` has length 2m.
StackedVector add_noise(const StackedVector& stacked, double delta, std::uint64_t seed,
                        NoiseScaling scaling = NoiseScaling::Printed);

/// Complex convenience wrapper around the stacked version.
DataVector add_noise(const DataVector& b, double delta, std::uint64_t seed,
                     NoiseScaling scaling = NoiseScaling::Printed);

/// Expected ||noise|| / (delta ||b||) for the given scaling: sqrt(2) or 1.
double noise_norm_factor(NoiseScaling scaling);

/// 10 log10(||b||^2 / ||b - b_delta||^2). Identical vectors give +infinity.
double snr_db(const StackedVector& clean, const StackedVector& noisy);

/// SNR when ||b - b_delta|| = delta ||b|| exactly: -20 log10(delta).
double nominal_snr_db(double delta);

}  // namespace emi
