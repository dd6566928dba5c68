#include "osp/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "osp/errors.hpp"

namespace osp {

namespace {

// Cell index and fractional offset of x on an n-point grid of spacing h from 0.
std::pair<std::size_t, double> locate(double x, double h, std::size_t n) {
  if (std::isnan(x)) throw ContractViolation("grid function queried at NaN");
  const double s = x / h;
  auto i = static_cast<std::size_t>(std::floor(s));
  if (i >= n - 1) return {n - 2, 1.0};
  return {i, s - static_cast<double>(i)};
}

}  // namespace

GridFunction1D::GridFunction1D(std::vector<double> weights, double u_max)
    : weights_(std::move(weights)), u_max_(u_max) {
  if (weights_.size() < 2) throw ContractViolation("GridFunction1D needs at least 2 grid points");
  if (!(u_max_ > 0.0)) throw ContractViolation("GridFunction1D: u_max must be positive");
  for (double w : weights_) {
    if (!(w >= -1.0 && w <= 1.0)) throw ContractViolation("GridFunction1D: weight outside [-1, 1]");
  }
}

GridFunction1D GridFunction1D::zeros(std::size_t n, double u_max) {
  return GridFunction1D(std::vector<double>(n, 0.0), u_max);
}

Basis1D GridFunction1D::basis(double lat) const {
  const double x = std::clamp(std::abs(lat), 0.0, u_max_);
  const auto [i, frac] = locate(x, spacing(), weights_.size());
  return Basis1D{{i, i + 1}, {1.0 - frac, frac}};
}

double GridFunction1D::operator()(double lat) const {
  const Basis1D b = basis(lat);
  return b.coef[0] * weights_[b.node[0]] + b.coef[1] * weights_[b.node[1]];
}

GridFunction2D::GridFunction2D(std::vector<double> weights, double bias, double lo, double hi,
                               std::size_t n_b)
    : weights_(std::move(weights)), bias_(bias), lo_(lo), hi_(hi), n_b_(n_b) {
  if (n_b_ < 2) throw ContractViolation("GridFunction2D needs n_b >= 2");
  if (!(lo_ < hi_)) throw ContractViolation("GridFunction2D needs lo < hi");
  if (weights_.size() != n_b_ * n_b_) throw ContractViolation("GridFunction2D: expected n_b^2 weights");
  if (!std::isfinite(bias_)) throw ContractViolation("GridFunction2D: non-finite bias");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw ContractViolation("GridFunction2D: non-finite weight");
  }
}

GridFunction2D GridFunction2D::zeros(std::size_t n_b, double lo, double hi) {
  return GridFunction2D(std::vector<double>(n_b * n_b, 0.0), 0.0, lo, hi, n_b);
}

Basis2D GridFunction2D::basis(double a, double b) const {
  const double h = spacing();
  const auto [i, fa] = locate(std::clamp(a, lo_, hi_) - lo_, h, n_b_);
  const auto [j, fb] = locate(std::clamp(b, lo_, hi_) - lo_, h, n_b_);
  Basis2D out;
  out.node = {index(i, j), index(i + 1, j), index(i, j + 1), index(i + 1, j + 1)};
  out.coef = {(1.0 - fa) * (1.0 - fb), fa * (1.0 - fb), (1.0 - fa) * fb, fa * fb};
  return out;
}

double GridFunction2D::operator()(double a, double b) const {
  const Basis2D bs = basis(a, b);
  double s = bias_;
  for (std::size_t k = 0; k < 4; ++k) s += bs.coef[k] * weights_[bs.node[k]];
  return s;
}

}  // namespace osp
