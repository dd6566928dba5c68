#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace osp {

/// Interpolation weights of one query on a 1-D grid. Entries with a zero
/// coefficient are padding.
struct Basis1D {
  std::array<std::size_t, 2> node{};
  std::array<double, 2> coef{};
};

/// Bilinear interpolation weights on a 2-D grid; the bias coefficient is
/// always 1 and is not stored.
struct Basis2D {
  std::array<std::size_t, 4> node{};
  std::array<double, 4> coef{};
};

/// Even, piecewise-linear function of lateral distance with grid points
/// evenly spaced on [0, u_max]. Weights live in [-1, 1].
class GridFunction1D {
 public:
  GridFunction1D(std::vector<double> weights, double u_max);
  static GridFunction1D zeros(std::size_t n = 7, double u_max = 6.0);

  const std::vector<double>& weights() const { return weights_; }
  double u_max() const { return u_max_; }
  std::size_t size() const { return weights_.size(); }
  double spacing() const { return u_max_ / static_cast<double>(weights_.size() - 1); }
  double node(std::size_t i) const { return spacing() * static_cast<double>(i); }

  /// |lat| is clamped to [0, u_max].
  Basis1D basis(double lat) const;
  double operator()(double lat) const;

  friend bool operator==(const GridFunction1D&, const GridFunction1D&) = default;

 private:
  std::vector<double> weights_;
  double u_max_;
};

/// Bilinear surface on a regular n_b x n_b grid over [lo, hi]^2 plus a bias
/// term. Inputs are clipped to the grid. Weight (i, j) sits at
/// (lo + i*h, lo + j*h) and is stored at index i*n_b + j.
class GridFunction2D {
 public:
  GridFunction2D(std::vector<double> weights, double bias, double lo, double hi, std::size_t n_b);
  static GridFunction2D zeros(std::size_t n_b = 5, double lo = 0.0, double hi = 1.6);

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t n_b() const { return n_b_; }
  /// n_b^2 grid weights followed by the bias.
  std::size_t param_count() const { return weights_.size() + 1; }
  double spacing() const { return (hi_ - lo_) / static_cast<double>(n_b_ - 1); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_b_ + j; }

  Basis2D basis(double a, double b) const;
  double operator()(double a, double b) const;

  friend bool operator==(const GridFunction2D&, const GridFunction2D&) = default;

 private:
  std::vector<double> weights_;
  double bias_;
  double lo_;
  double hi_;
  std::size_t n_b_;
};

}  // namespace osp
