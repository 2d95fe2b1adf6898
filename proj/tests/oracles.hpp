#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library: plain loops, Jacobi rotations and Gauss-Jordan elimination.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd gauss_jordan_inverse(MatrixXd a) {
  const Index n = a.rows();
  MatrixXd inv = MatrixXd::Identity(n, n);
  for (Index c = 0; c < n; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::fabs(a(r, c)) > std::fabs(a(piv, c))) piv = r;
    a.row(c).swap(a.row(piv));
    inv.row(c).swap(inv.row(piv));
    const double d = a(c, c);
    for (Index k = 0; k < n; ++k) {
      a(c, k) /= d;
      inv(c, k) /= d;
    }
    for (Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      for (Index k = 0; k < n; ++k) {
        a(r, k) -= f * a(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

inline MatrixXd product(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd c = MatrixXd::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline MatrixXd transpose(const MatrixXd& a) {
  MatrixXd t(a.cols(), a.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Lambda (I-B)^-1 Psi (I-B)^-T Lambda' + diag(theta), by explicit loops.
inline MatrixXd implied_sigma(const MatrixXd& lambda, const MatrixXd& beta, const MatrixXd& psi, const VectorXd& theta) {
  MatrixXd ib = -beta;
  for (Index i = 0; i < ib.rows(); ++i) ib(i, i) += 1.0;
  const MatrixXd a = gauss_jordan_inverse(ib);
  const MatrixXd la = product(lambda, a);
  MatrixXd s = product(product(la, psi), transpose(la));
  for (Index i = 0; i < s.rows(); ++i) s(i, i) += theta(i);
  return s;
}

/// Cyclic Jacobi eigen-decomposition; eigenvalues descending, vectors in columns.
inline std::pair<VectorXd, MatrixXd> jacobi_eigen(MatrixXd a, double tol = 1e-14) {
  const Index n = a.rows();
  MatrixXd v = MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < tol * tol) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  VectorXd vals(n);
  MatrixXd vecs(n, n);
  for (Index k = 0; k < n; ++k) {
    vals(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    vecs.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return {vals, vecs};
}

inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h = 1e-6) {
  VectorXd g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double probit_loglik(const MatrixXd& x, std::span<const int> y, const VectorXd& beta, const VectorXd& kappa) {
  double ll = 0.0;
  const int c = static_cast<int>(kappa.size()) + 1;
  for (Index i = 0; i < x.rows(); ++i) {
    double eta = 0.0;
    for (Index j = 0; j < x.cols(); ++j) eta += x(i, j) * beta(j);
    const int k = y[static_cast<std::size_t>(i)];
    const double hi = k == c ? 1.0 : phi_cdf(kappa(k - 1) - eta);
    const double lo = k == 1 ? 0.0 : phi_cdf(kappa(k - 2) - eta);
    ll += std::log(hi - lo);
  }
  return ll;
}

/// Lattice search over (beta, kappa_1, kappa_2) for one predictor and three
/// categories. The log-likelihood is concave, so a coarse lattice followed by
/// progressively finer lattices around the incumbent ends on the best point
/// of the final step-size lattice.
struct GridResult {
  double beta = 0.0, k1 = 0.0, k2 = 0.0, loglik = -std::numeric_limits<double>::infinity();
};

inline GridResult probit_grid(const MatrixXd& x, std::span<const int> y, double final_step = 1e-3) {
  GridResult best;
  auto eval = [&](double b, double k1, double k2) {
    if (!(k2 > k1)) return;
    VectorXd beta(1), kappa(2);
    beta << b;
    kappa << k1, k2;
    const double ll = probit_loglik(x, y, beta, kappa);
    if (ll > best.loglik) best = {b, k1, k2, ll};
  };
  const double coarse = 0.05;
  for (double b = -3.0; b <= 3.0 + 1e-12; b += coarse)
    for (double k1 = -3.0; k1 <= 3.0 + 1e-12; k1 += coarse)
      for (double k2 = k1 + coarse; k2 <= 3.0 + 1e-12; k2 += coarse) eval(b, k1, k2);
  for (double step : {0.01, final_step}) {
    const GridResult centre = best;
    const int span = step == final_step ? 12 : 8;
    for (int i = -span; i <= span; ++i)
      for (int j = -span; j <= span; ++j)
        for (int k = -span; k <= span; ++k) eval(centre.beta + i * step, centre.k1 + j * step, centre.k2 + k * step);
  }
  return best;
}

inline double entropy(std::span<const double> ratings) {
  double total = 0.0;
  for (double r : ratings) total += r;
  double h = 0.0;
  for (double r : ratings) {
    const double p = r / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(ratings.size()));
}

inline double kmo(const MatrixXd& r) {
  const MatrixXd inv = gauss_jordan_inverse(r);
  double rr = 0.0, qq = 0.0;
  for (Index i = 0; i < r.rows(); ++i) {
    for (Index j = 0; j < r.cols(); ++j) {
      if (i == j) continue;
      const double q = -inv(i, j) / std::sqrt(inv(i, i) * inv(j, j));
      rr += r(i, j) * r(i, j);
      qq += q * q;
    }
  }
  return rr / (rr + qq);
}

inline double cronbach_alpha(const MatrixXd& x) {
  const double n = static_cast<double>(x.rows()), k = static_cast<double>(x.cols());
  auto var = [&](const VectorXd& v) {
    const double m = v.sum() / n;
    double s = 0.0;
    for (Index i = 0; i < v.size(); ++i) s += (v(i) - m) * (v(i) - m);
    return s / (n - 1.0);
  };
  double item_var = 0.0;
  for (Index j = 0; j < x.cols(); ++j) item_var += var(x.col(j));
  const VectorXd total = x.rowwise().sum();
  return k / (k - 1.0) * (1.0 - item_var / var(total));
}

}  // namespace oracle
