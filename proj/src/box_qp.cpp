#include "osp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "osp/errors.hpp"

namespace osp {

namespace {

enum class Bound : char { kFree, kLower, kUpper };

double projected_gradient_norm(const Eigen::VectorXd& grad, const std::vector<Bound>& state) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    double gi = grad[i];
    if (state[static_cast<std::size_t>(i)] == Bound::kLower) gi = std::min(gi, 0.0);
    if (state[static_cast<std::size_t>(i)] == Bound::kUpper) gi = std::max(gi, 0.0);
    s += gi * gi;
  }
  return std::sqrt(s);
}

}  // namespace

BoxQpResult solve_box_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear, double lo,
                         double hi, const Eigen::VectorXd& x0) {
  const Eigen::Index n = linear.size();
  if (hessian.rows() != n || hessian.cols() != n || x0.size() != n || !(lo < hi)) {
    throw ContractViolation("solve_box_qp: inconsistent problem dimensions or bounds");
  }

  BoxQpResult res;
  res.x = x0.cwiseMax(lo).cwiseMin(hi);
  std::vector<Bound> state(static_cast<std::size_t>(n), Bound::kFree);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (res.x[i] == lo) state[static_cast<std::size_t>(i)] = Bound::kLower;
    if (res.x[i] == hi) state[static_cast<std::size_t>(i)] = Bound::kUpper;
  }

  const double scale = std::max({1.0, hessian.cwiseAbs().maxCoeff(), linear.cwiseAbs().maxCoeff()});
  const int max_iters = 20 * static_cast<int>(n) + 50;
  bool at_subspace_min = false;
  for (res.iterations = 1; res.iterations <= max_iters; ++res.iterations) {
    if (at_subspace_min) {
      // Release the bound with the most negative multiplier, or stop.
      const Eigen::VectorXd grad = hessian * res.x - linear;
      Eigen::Index release = -1;
      double worst = -1e-13 * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Bound b = state[static_cast<std::size_t>(i)];
        const double lambda = b == Bound::kLower ? grad[i] : (b == Bound::kUpper ? -grad[i] : 0.0);
        if (lambda < worst) {
          worst = lambda;
          release = i;
        }
      }
      if (release < 0) {
        res.converged = true;
        res.projected_grad_norm = projected_gradient_norm(grad, state);
        return res;
      }
      state[static_cast<std::size_t>(release)] = Bound::kFree;
      at_subspace_min = false;
      continue;
    }

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == Bound::kFree) free.push_back(i);
    }
    if (free.empty()) {
      at_subspace_min = true;
      continue;
    }
    // Newton step to the minimizer over the free variables.
    const Eigen::VectorXd grad = hessian * res.x - linear;
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd h_ff(m, m);
    Eigen::VectorXd g_f(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      g_f[a] = -grad[free[a]];
      for (Eigen::Index b = 0; b < m; ++b) h_ff(a, b) = hessian(free[a], free[b]);
    }
    const Eigen::VectorXd p = h_ff.ldlt().solve(g_f);

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    Bound blocking_bound = Bound::kFree;
    for (Eigen::Index a = 0; a < m; ++a) {
      if (p[a] == 0.0) continue;
      const Eigen::Index i = free[a];
      const Bound bound = p[a] < 0.0 ? Bound::kLower : Bound::kUpper;
      const double t = ((bound == Bound::kLower ? lo : hi) - res.x[i]) / p[a];
      if (t < alpha) {
        alpha = t;
        blocking = i;
        blocking_bound = bound;
      }
    }
    alpha = std::max(alpha, 0.0);
    for (Eigen::Index a = 0; a < m; ++a) res.x[free[a]] += alpha * p[a];
    res.x = res.x.cwiseMax(lo).cwiseMin(hi);
    if (blocking >= 0) {
      res.x[blocking] = blocking_bound == Bound::kLower ? lo : hi;
      state[static_cast<std::size_t>(blocking)] = blocking_bound;
    } else {
      at_subspace_min = true;
    }
  }
  res.iterations = max_iters;
  res.projected_grad_norm = projected_gradient_norm(hessian * res.x - linear, state);
  return res;
}

}  // namespace osp
