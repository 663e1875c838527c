#include "emi/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace emi {

namespace {

void check_sigma(std::span<const double> sigma) {
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!std::isfinite(sigma[k]) || sigma[k] < 0.0)
      throw std::invalid_argument("conductivity of layer " + std::to_string(k) +
                                  " must be finite and non-negative");
  }
}

void check_positive(std::span<const double> values, const char* what) {
  if (values.empty()) throw std::invalid_argument(std::string(what) + " list is empty");
  for (double v : values) {
    if (!std::isfinite(v) || v <= 0.0)
      throw std::invalid_argument(std::string(what) + " entries must be positive");
  }
}

}  // namespace

LayeredEarthModel::LayeredEarthModel(std::vector<double> depths, std::vector<double> sigma)
    : depths_(std::move(depths)), sigma_(std::move(sigma)) {
  if (sigma_.empty()) throw std::invalid_argument("model needs at least one layer");
  if (depths_.size() != sigma_.size())
    throw std::invalid_argument("depth and conductivity lists differ in length");
  if (depths_.front() != 0.0) throw std::invalid_argument("first layer must start at z = 0");
  for (std::size_t k = 1; k < depths_.size(); ++k) {
    if (!std::isfinite(depths_[k]) || !(depths_[k] > depths_[k - 1]))
      throw std::invalid_argument("layer depths must be strictly increasing");
  }
  check_sigma(sigma_);
}

LayeredEarthModel LayeredEarthModel::uniform(std::size_t n, double depth,
                                             std::vector<double> sigma) {
  return LayeredEarthModel(uniform_layer_tops(n, depth), std::move(sigma));
}

LayeredEarthModel LayeredEarthModel::uniform(std::size_t n, double depth, double sigma) {
  return uniform(n, depth, std::vector<double>(n, sigma));
}

double LayeredEarthModel::thickness(std::size_t k) const {
  if (k >= size()) throw std::out_of_range("layer index out of range");
  if (k + 1 == size()) return std::numeric_limits<double>::infinity();
  return depths_[k + 1] - depths_[k];
}

LayeredEarthModel LayeredEarthModel::with_sigma(std::vector<double> sigma) const {
  return LayeredEarthModel(depths_, std::move(sigma));
}

LayeredEarthModel LayeredEarthModel::with_sigma(const Eigen::VectorXd& sigma) const {
  return with_sigma(std::vector<double>(sigma.data(), sigma.data() + sigma.size()));
}

Eigen::VectorXd LayeredEarthModel::sigma_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(sigma_.data(), static_cast<Eigen::Index>(size()));
}

std::vector<double> uniform_layer_tops(std::size_t n, double depth) {
  if (n == 0) throw std::invalid_argument("layer count must be positive");
  if (!(depth > 0.0)) throw std::invalid_argument("model depth must be positive");
  std::vector<double> tops(n);
  for (std::size_t k = 0; k < n; ++k) tops[k] = depth * static_cast<double>(k) / static_cast<double>(n);
  return tops;
}

DeviceConfig::DeviceConfig(std::vector<double> spacings, std::vector<double> heights,
                           std::vector<double> frequencies,
                           std::vector<Orientation> orientations)
    : spacings_(std::move(spacings)),
      heights_(std::move(heights)),
      frequencies_(std::move(frequencies)),
      orientations_(std::move(orientations)) {
  check_positive(spacings_, "spacing");
  check_positive(heights_, "height");
  check_positive(frequencies_, "frequency");
  if (orientations_.empty()) throw std::invalid_argument("orientation set is empty");
  if (orientations_.size() > 2 ||
      (orientations_.size() == 2 && orientations_[0] == orientations_[1]))
    throw std::invalid_argument("orientations must be distinct");
  std::sort(orientations_.begin(), orientations_.end());
}

std::size_t DeviceConfig::index(std::size_t orientation_pos, std::size_t height,
                                std::size_t spacing, std::size_t frequency) const {
  if (orientation_pos >= orientations_.size() || height >= heights_.size() ||
      spacing >= spacings_.size() || frequency >= frequencies_.size())
    throw std::invalid_argument("reading index out of range");
  return ((orientation_pos * heights_.size() + height) * spacings_.size() + spacing) *
             frequencies_.size() +
         frequency;
}

Reading DeviceConfig::reading(std::size_t flat) const {
  if (flat >= size()) throw std::invalid_argument("reading index out of range");
  const std::size_t j = flat % frequencies_.size();
  flat /= frequencies_.size();
  const std::size_t t = flat % spacings_.size();
  flat /= spacings_.size();
  const std::size_t i = flat % heights_.size();
  const std::size_t o = flat / heights_.size();
  return {orientations_[o], heights_[i], spacings_[t], frequencies_[j]};
}

DeviceConfig cmd_explorer(std::vector<Orientation> orientations, std::vector<double> heights) {
  return DeviceConfig({1.48, 2.82, 4.49}, std::move(heights), {1.0e4}, std::move(orientations));
}

StackedVector stack(const DataVector& v) {
  StackedVector s(2 * v.size());
  s.head(v.size()) = v.real();
  s.tail(v.size()) = v.imag();
  return s;
}

DataVector unstack(const StackedVector& s) {
  if (s.size() % 2 != 0) throw std::invalid_argument("stacked vector must have even length");
  const Eigen::Index m = s.size() / 2;
  DataVector v(m);
  v.real() = s.head(m);
  v.imag() = s.tail(m);
  return v;
}

Eigen::MatrixXd stack_rows(const Eigen::MatrixXcd& j) {
  Eigen::MatrixXd out(2 * j.rows(), j.cols());
  out.topRows(j.rows()) = j.real();
  out.bottomRows(j.rows()) = j.imag();
  return out;
}

}  // namespace emi
