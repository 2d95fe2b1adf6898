#include "lockserv/kernels.hpp"

#include "lockserv/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lockserv::kernels {

namespace {

using Eigen::Index;

void check_groups(const Eigen::MatrixXd& x, const std::vector<std::vector<Index>>& groups,
                  const std::vector<std::vector<double>>& weights) {
  if (groups.size() != weights.size()) throw std::invalid_argument("group/weight count mismatch");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].size() != weights[g].size()) throw std::invalid_argument("group/weight length mismatch");
    for (Index c : groups[g]) {
      if (c < 0 || c >= x.cols()) throw std::out_of_range("group column out of range");
    }
  }
}

double entropy_of(const Eigen::Ref<const Eigen::VectorXd>& col) {
  const Index n = col.size();
  if (n < 2) throw std::invalid_argument("entropy needs at least two rows");
  const double total = col.sum();
  if (!(total > 0.0)) throw std::invalid_argument("entropy needs a positive column sum");
  double h = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double p = col(k) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(n));
}

double group_mean(const Eigen::MatrixXd& x, Index row, const std::vector<Index>& cols,
                  const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    num += x(row, cols[j]) * w[j];
    den += w[j];
  }
  return num / den;
}

// Per-observation contribution of the ordered-probit likelihood, accumulated
// into (ll, grad, hess).
void probit_observation(const Eigen::Ref<const Eigen::RowVectorXd>& xi, int category, const Eigen::VectorXd& beta,
                        const Eigen::VectorXd& kappa, bool with_hessian, double& ll, Eigen::VectorXd& grad,
                        Eigen::MatrixXd& hess) {
  const Index k = beta.size();
  const Index cuts = kappa.size();
  const double eta = xi.dot(beta);
  const int c = category;  // 1..C
  constexpr double inf = std::numeric_limits<double>::infinity();
  const bool has_upper = c <= cuts;
  const bool has_lower = c >= 2;
  const double u = has_upper ? kappa(c - 1) - eta : inf;
  const double l = has_lower ? kappa(c - 2) - eta : -inf;
  double prob = dist::normal_interval(l, u);
  if (prob < 1e-300) prob = 1e-300;
  ll += std::log(prob);

  const double fu = has_upper ? dist::normal_pdf(u) : 0.0;
  const double fl = has_lower ? dist::normal_pdf(l) : 0.0;
  const double du = fu / prob;   // d lnP / du
  const double dl = -fl / prob;  // d lnP / dl

  // u = kappa_c - eta, l = kappa_{c-1} - eta, d eta / d beta = x.
  grad.head(k).noalias() -= (du + dl) * xi.transpose();
  if (has_upper) grad(k + c - 1) += du;
  if (has_lower) grad(k + c - 2) += dl;

  if (!with_hessian) return;
  const double uu = (has_upper ? -u * fu / prob : 0.0) - du * du;
  const double ll2 = (has_lower ? l * fl / prob : 0.0) - dl * dl;
  const double ul = -du * dl;
  // Second derivatives w.r.t. (u, l); map through du/dtheta and dl/dtheta.
  const double bb = uu + 2.0 * ul + ll2;
  hess.topLeftCorner(k, k).noalias() += bb * xi.transpose() * xi;
  if (has_upper) {
    const Index iu = k + c - 1;
    hess(iu, iu) += uu;
    const Eigen::VectorXd cross = -(uu + ul) * xi.transpose();
    hess.block(0, iu, k, 1) += cross;
    hess.block(iu, 0, 1, k) += cross.transpose();
  }
  if (has_lower) {
    const Index il = k + c - 2;
    hess(il, il) += ll2;
    const Eigen::VectorXd cross = -(ll2 + ul) * xi.transpose();
    hess.block(0, il, k, 1) += cross;
    hess.block(il, 0, 1, k) += cross.transpose();
  }
  if (has_upper && has_lower) {
    const Index iu = k + c - 1, il = k + c - 2;
    hess(iu, il) += ul;
    hess(il, iu) += ul;
  }
}

void check_probit(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta,
                  const Eigen::VectorXd& kappa) {
  if (static_cast<Index>(y.size()) != x.rows()) throw std::invalid_argument("probit: X/y row mismatch");
  if (beta.size() != x.cols()) throw std::invalid_argument("probit: beta length mismatch");
  const int categories = static_cast<int>(kappa.size()) + 1;
  for (int v : y) {
    if (v < 1 || v > categories) throw std::out_of_range("probit: category out of range");
  }
}

}  // namespace

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Index n = x.rows(), p = x.cols();
  if (n < 2) throw std::invalid_argument("covariance needs at least two rows");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd out(p, p);
  // One output entry per iteration; each dot product runs in fixed order.
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = centered.col(i).dot(centered.col(j)) / static_cast<double>(n - 1);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Eigen::VectorXd column_entropy(const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.cols());
  // Validate up front: exceptions must not escape an OpenMP region.
  for (Index j = 0; j < x.cols(); ++j) {
    if (x.rows() < 2 || !(x.col(j).sum() > 0.0)) return reference::column_entropy(x);
  }
#pragma omp parallel for
  for (Index j = 0; j < x.cols(); ++j) out(j) = entropy_of(x.col(j));
  return out;
}

Eigen::MatrixXd grouped_weighted_means(const Eigen::MatrixXd& x, const std::vector<std::vector<Index>>& groups,
                                       const std::vector<std::vector<double>>& weights) {
  check_groups(x, groups, weights);
  const Index g = static_cast<Index>(groups.size());
  Eigen::MatrixXd out(x.rows(), g);
#pragma omp parallel for
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index k = 0; k < g; ++k) out(r, k) = group_mean(x, r, groups[k], weights[k]);
  }
  return out;
}

Eigen::VectorXd weighted_row_means(const Eigen::MatrixXd& x, std::span<const double> weights) {
  if (static_cast<Index>(weights.size()) != x.cols()) throw std::invalid_argument("weight length mismatch");
  double den = 0.0;
  for (double w : weights) den += w;
  Eigen::VectorXd out(x.rows());
#pragma omp parallel for
  for (Index r = 0; r < x.rows(); ++r) {
    double num = 0.0;
    for (Index c = 0; c < x.cols(); ++c) num += x(r, c) * weights[c];
    out(r) = num / den;
  }
  return out;
}

ProbitTerms probit_terms(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& kappa, bool with_hessian) {
  check_probit(x, y, beta, kappa);
  const Index n = x.rows();
  const Index dim = beta.size() + kappa.size();
  const Index blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> ll(blocks, 0.0);
  std::vector<Eigen::VectorXd> grad(blocks, Eigen::VectorXd::Zero(dim));
  std::vector<Eigen::MatrixXd> hess(blocks, with_hessian ? Eigen::MatrixXd::Zero(dim, dim) : Eigen::MatrixXd());
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index end = std::min(n, (b + 1) * kReductionBlock);
    for (Index i = b * kReductionBlock; i < end; ++i) {
      probit_observation(x.row(i), y[i], beta, kappa, with_hessian, ll[b], grad[b], hess[b]);
    }
  }
  ProbitTerms out{0.0, Eigen::VectorXd::Zero(dim), with_hessian ? Eigen::MatrixXd::Zero(dim, dim) : Eigen::MatrixXd()};
  for (Index b = 0; b < blocks; ++b) {
    out.loglik += ll[b];
    out.gradient += grad[b];
    if (with_hessian) out.hessian += hess[b];
  }
  return out;
}

namespace reference {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Index n = x.rows(), p = x.cols();
  if (n < 2) throw std::invalid_argument("covariance needs at least two rows");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < p; ++c) mean(c) += x(r, c);
  mean /= static_cast<double>(n);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      double s = 0.0;
      for (Index r = 0; r < n; ++r) s += (x(r, i) - mean(i)) * (x(r, j) - mean(j));
      out(i, j) = s / static_cast<double>(n - 1);
    }
  }
  return out;
}

Eigen::VectorXd column_entropy(const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.cols());
  for (Index j = 0; j < x.cols(); ++j) out(j) = entropy_of(x.col(j));
  return out;
}

Eigen::MatrixXd grouped_weighted_means(const Eigen::MatrixXd& x, const std::vector<std::vector<Index>>& groups,
                                       const std::vector<std::vector<double>>& weights) {
  check_groups(x, groups, weights);
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(groups.size()));
  for (Index r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < groups.size(); ++k) out(r, static_cast<Index>(k)) = group_mean(x, r, groups[k], weights[k]);
  return out;
}

Eigen::VectorXd weighted_row_means(const Eigen::MatrixXd& x, std::span<const double> weights) {
  if (static_cast<Index>(weights.size()) != x.cols()) throw std::invalid_argument("weight length mismatch");
  Eigen::VectorXd out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    double num = 0.0, den = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      num += x(r, c) * weights[c];
      den += weights[c];
    }
    out(r) = num / den;
  }
  return out;
}

ProbitTerms probit_terms(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& kappa, bool with_hessian) {
  check_probit(x, y, beta, kappa);
  const Index dim = beta.size() + kappa.size();
  ProbitTerms out{0.0, Eigen::VectorXd::Zero(dim), with_hessian ? Eigen::MatrixXd::Zero(dim, dim) : Eigen::MatrixXd()};
  for (Index i = 0; i < x.rows(); ++i) {
    probit_observation(x.row(i), y[i], beta, kappa, with_hessian, out.loglik, out.gradient, out.hessian);
  }
  return out;
}

}  // namespace reference

}  // namespace lockserv::kernels
