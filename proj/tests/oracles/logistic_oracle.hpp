#pragma once

// Accelerated gradient descent on an L2-penalized logistic loss with dense
// features. Shares no code with the library solver.

#include <Eigen/Dense>

#include <cmath>

namespace oracle {

struct DenseLogistic {
  Eigen::MatrixXd x;  // one row per sample
  Eigen::VectorXd y;  // labels in {0, 1}
  double alpha = 0.0;

  double value(const Eigen::VectorXd& b) const {
    double s = alpha * b.squaredNorm();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double z = x.row(i).dot(b);
      const double lse = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      s += lse - y[i] * z;
    }
    return s;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& b) const {
    Eigen::VectorXd g = 2.0 * alpha * b;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double z = x.row(i).dot(b);
      const double p = 1.0 / (1.0 + std::exp(-z));
      g += (p - y[i]) * x.row(i).transpose();
    }
    return g;
  }
};

/// Nesterov's method with step 1/L, L = ||X||_2^2 / 4 + 2 alpha.
inline Eigen::VectorXd solve_nesterov(const DenseLogistic& prob, double grad_tol = 1e-11, int max_iters = 2000000) {
  const Eigen::Index d = prob.x.cols();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(prob.x);
  const double smax = svd.singularValues()(0);
  const double lipschitz = smax * smax / 4.0 + 2.0 * prob.alpha;
  const double mu = 2.0 * prob.alpha;
  const double q = std::sqrt(mu / lipschitz);
  const double momentum = (1.0 - q) / (1.0 + q);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd y = b;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd g = prob.gradient(y);
    const Eigen::VectorXd next = y - g / lipschitz;
    y = next + momentum * (next - b);
    b = next;
    if (prob.gradient(b).norm() < grad_tol) break;
  }
  return b;
}

}  // namespace oracle
