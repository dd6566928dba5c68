#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <vector>

namespace osp {

struct BoxQpResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double projected_grad_norm = 0.0;
  bool converged = false;
};

/// Minimizes 0.5 x'Hx - g'x over lo <= x_i <= hi with a primal active-set
/// method. H must be symmetric positive definite; `x0` is projected onto the
/// box and used as the starting point.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear, double lo,
                         double hi, const Eigen::VectorXd& x0);

/// Feature vector with at most 5 nonzeros (a bilinear stencil plus bias).
struct SparseRow {
  std::array<std::size_t, 5> idx{};
  std::array<double, 5> val{};
  std::size_t nnz = 0;

  double dot(const Eigen::VectorXd& beta) const {
    double s = 0.0;
    for (std::size_t k = 0; k < nnz; ++k) s += val[k] * beta[static_cast<Eigen::Index>(idx[k])];
    return s;
  }
};

struct LogisticProblem {
  std::size_t dim = 0;
  std::vector<SparseRow> rows;
  std::vector<double> labels;  // 1 = positive class
  double alpha = 0.0;          // penalty alpha * |beta|^2
};

struct LogisticResult {
  Eigen::VectorXd beta;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// Negative log likelihood plus penalty.
double logistic_objective(const LogisticProblem& problem, const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_gradient(const LogisticProblem& problem, const Eigen::VectorXd& beta);

/// Damped Newton (IRLS with backtracking) on the strictly convex objective.
LogisticResult solve_logistic(const LogisticProblem& problem, const Eigen::VectorXd& beta0,
                              double grad_tol = 1e-8, int max_iters = 100);

}  // namespace osp
