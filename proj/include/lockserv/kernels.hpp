#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version in
// `lockserv::kernels` and a plain serial version in
// `lockserv::kernels::reference` that the tests use as ground truth.
//
// Reductions are split into fixed-size blocks whose partial sums are added
// in block order, so results do not depend on the thread count.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace lockserv::kernels {

inline constexpr Eigen::Index kReductionBlock = 256;

/// Sample covariance (n - 1 denominator) of the columns of `x`.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& x);

/// Normalized information entropy of each column over the rows:
/// E_j = -(1/ln n) * sum_k p_kj ln p_kj with p_kj = x_kj / sum_k x_kj.
/// Columns must be nonnegative with a positive sum.
Eigen::VectorXd column_entropy(const Eigen::MatrixXd& x);

/// Weighted group means of each row. `groups[g]` lists the columns of group g
/// and `weights[g]` their weights (same length).
Eigen::MatrixXd grouped_weighted_means(const Eigen::MatrixXd& x,
                                       const std::vector<std::vector<Eigen::Index>>& groups,
                                       const std::vector<std::vector<double>>& weights);

/// Row-wise weighted mean with one weight per column.
Eigen::VectorXd weighted_row_means(const Eigen::MatrixXd& x, std::span<const double> weights);

struct ProbitTerms {
  double loglik = 0.0;
  Eigen::VectorXd gradient;  // over (beta, kappa)
  Eigen::MatrixXd hessian;   // over (beta, kappa); only filled when requested
};

/// Ordered-probit log-likelihood with analytic derivatives in the natural
/// parameters (beta, kappa). `y` holds categories 1..C with C = kappa.size()+1.
ProbitTerms probit_terms(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& kappa, bool with_hessian);

namespace reference {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x);
Eigen::VectorXd column_entropy(const Eigen::MatrixXd& x);
Eigen::MatrixXd grouped_weighted_means(const Eigen::MatrixXd& x,
                                       const std::vector<std::vector<Eigen::Index>>& groups,
                                       const std::vector<std::vector<double>>& weights);
Eigen::VectorXd weighted_row_means(const Eigen::MatrixXd& x, std::span<const double> weights);
ProbitTerms probit_terms(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& kappa, bool with_hessian);

}  // namespace reference

}  // namespace lockserv::kernels
