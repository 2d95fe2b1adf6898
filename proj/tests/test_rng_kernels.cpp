#include "doctest.h"

#include "lockserv/kernels.hpp"
#include "lockserv/rng.hpp"

#include "oracles.hpp"

#include <omp.h>

#include <set>

using namespace lockserv;

TEST_CASE("engine matches the standard mt19937_64 sequence") {
  PortableRng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("rng determinism and ranges") {
  PortableRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto k = a.below(7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("normal draws have unit moments") {
  PortableRng rng(3);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.015);
}

namespace {

Eigen::MatrixXd random_ratings(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  PortableRng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = 1.0 + static_cast<double>(rng.below(5));
  return x;
}

template <typename F>
auto with_threads(int threads, F f) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  auto r = f();
  omp_set_num_threads(saved);
  return r;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial versions") {
  const Eigen::MatrixXd x = random_ratings(1500, 9, 11);
  CHECK((kernels::covariance(x) - kernels::reference::covariance(x)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((kernels::column_entropy(x) - kernels::reference::column_entropy(x)).cwiseAbs().maxCoeff() < 1e-13);

  const std::vector<std::vector<Eigen::Index>> groups{{0, 1, 2}, {3, 4}, {5, 6, 7, 8}};
  const std::vector<std::vector<double>> weights{{0.7, 0.8, 0.6}, {0.9, 0.5}, {0.6, 0.6, 0.7, 0.8}};
  CHECK((kernels::grouped_weighted_means(x, groups, weights) - kernels::reference::grouped_weighted_means(x, groups, weights))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK((kernels::weighted_row_means(x, w) - kernels::reference::weighted_row_means(x, w)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("parallel reductions do not depend on the thread count") {
  const Eigen::MatrixXd x = random_ratings(3001, 6, 5);
  const auto one = with_threads(1, [&] { return kernels::covariance(x); });
  const auto many = with_threads(4, [&] { return kernels::covariance(x); });
  CHECK((one.array() == many.array()).all());
  const auto e1 = with_threads(1, [&] { return kernels::column_entropy(x); });
  const auto e4 = with_threads(3, [&] { return kernels::column_entropy(x); });
  CHECK((e1.array() == e4.array()).all());
}

TEST_CASE("covariance and entropy match direct formulas") {
  const Eigen::MatrixXd x = random_ratings(40, 3, 8);
  const Eigen::MatrixXd c = kernels::covariance(x);
  for (Eigen::Index a = 0; a < 3; ++a) {
    for (Eigen::Index b = 0; b < 3; ++b) {
      const double ma = x.col(a).mean(), mb = x.col(b).mean();
      double s = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x(i, a) - ma) * (x(i, b) - mb);
      CHECK(c(a, b) == doctest::Approx(s / 39.0).epsilon(1e-12));
    }
  }
  const Eigen::VectorXd e = kernels::column_entropy(x);
  for (Eigen::Index j = 0; j < 3; ++j) {
    std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
    CHECK(e(j) == doctest::Approx(oracle::entropy(col)).epsilon(1e-12));
  }
}

TEST_CASE("probit terms: value, gradient and Hessian") {
  PortableRng rng(21);
  const Eigen::Index n = 700, k = 3;
  Eigen::MatrixXd x(n, k);
  std::vector<int> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) x(i, j) = rng.normal();
    y[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.below(4));
  }
  Eigen::VectorXd beta(3), kappa(3);
  beta << 0.3, -0.2, 0.1;
  kappa << -0.7, 0.1, 0.9;
  const auto t = kernels::probit_terms(x, y, beta, kappa, true);
  const auto r = kernels::reference::probit_terms(x, y, beta, kappa, true);
  CHECK(t.loglik == doctest::Approx(oracle::probit_loglik(x, y, beta, kappa)).epsilon(1e-12));
  CHECK(t.loglik == doctest::Approx(r.loglik).epsilon(1e-13));
  CHECK((t.gradient - r.gradient).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((t.hessian - r.hessian).cwiseAbs().maxCoeff() < 1e-10);

  auto ll = [&](const Eigen::VectorXd& th) { return oracle::probit_loglik(x, y, th.head(k), th.tail(3)); };
  Eigen::VectorXd theta(6);
  theta << beta, kappa;
  const Eigen::VectorXd fd = oracle::central_difference(ll, theta);
  CHECK((fd - t.gradient).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, t.gradient.cwiseAbs().maxCoeff()));

  Eigen::MatrixXd h_fd(6, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    Eigen::VectorXd a = theta, b = theta;
    a(j) += 1e-5;
    b(j) -= 1e-5;
    const auto ga = kernels::probit_terms(x, y, a.head(k), a.tail(3), false).gradient;
    const auto gb = kernels::probit_terms(x, y, b.head(k), b.tail(3), false).gradient;
    h_fd.col(j) = (ga - gb) / 2e-5;
  }
  CHECK((h_fd - t.hessian).cwiseAbs().maxCoeff() < 1e-4 * t.hessian.cwiseAbs().maxCoeff());
  CHECK((t.hessian - t.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-9);
}
