#include "osp/solvers.hpp"

#include <cmath>

#include "osp/errors.hpp"
#include "osp/interaction.hpp"

namespace osp {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic_objective(const LogisticProblem& problem, const Eigen::VectorXd& beta) {
  double f = problem.alpha * beta.squaredNorm();
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    const double eta = problem.rows[i].dot(beta);
    f += softplus(eta) - problem.labels[i] * eta;
  }
  return f;
}

Eigen::VectorXd logistic_gradient(const LogisticProblem& problem, const Eigen::VectorXd& beta) {
  Eigen::VectorXd g = 2.0 * problem.alpha * beta;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    const auto& row = problem.rows[i];
    const double r = sigmoid(row.dot(beta)) - problem.labels[i];
    for (std::size_t k = 0; k < row.nnz; ++k) g[static_cast<Eigen::Index>(row.idx[k])] += r * row.val[k];
  }
  return g;
}

LogisticResult solve_logistic(const LogisticProblem& problem, const Eigen::VectorXd& beta0,
                              double grad_tol, int max_iters) {
  const auto dim = static_cast<Eigen::Index>(problem.dim);
  if (beta0.size() != dim || problem.labels.size() != problem.rows.size()) {
    throw ContractViolation("solve_logistic: inconsistent problem dimensions");
  }
  if (!(problem.alpha > 0.0)) throw ContractViolation("solve_logistic: penalty must be positive");

  LogisticResult res;
  res.beta = beta0;
  res.objective = logistic_objective(problem, res.beta);
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    Eigen::VectorXd grad = 2.0 * problem.alpha * res.beta;
    Eigen::MatrixXd hess = 2.0 * problem.alpha * Eigen::MatrixXd::Identity(dim, dim);
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
      const auto& row = problem.rows[i];
      const double p = sigmoid(row.dot(res.beta));
      const double r = p - problem.labels[i];
      const double w = p * (1.0 - p);
      for (std::size_t a = 0; a < row.nnz; ++a) {
        const auto ia = static_cast<Eigen::Index>(row.idx[a]);
        grad[ia] += r * row.val[a];
        for (std::size_t b = 0; b < row.nnz; ++b) {
          hess(ia, static_cast<Eigen::Index>(row.idx[b])) += w * row.val[a] * row.val[b];
        }
      }
    }
    res.grad_norm = grad.norm();
    if (res.grad_norm < grad_tol) {
      res.converged = true;
      return res;
    }
    const Eigen::VectorXd dir = -hess.ldlt().solve(grad);
    const double slope = grad.dot(dir);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const Eigen::VectorXd cand = res.beta + t * dir;
      const double f = logistic_objective(problem, cand);
      if (f <= res.objective + 1e-4 * t * slope) {
        moved = f < res.objective || t == 1.0;
        res.beta = cand;
        res.objective = f;
        break;
      }
    }
    if (!moved) break;  // no representable decrease left
  }
  res.grad_norm = logistic_gradient(problem, res.beta).norm();
  res.converged = res.grad_norm < grad_tol;
  return res;
}

}  // namespace osp
