#include "doctest.h"

#include "lockserv/distributions.hpp"

#include <cmath>
#include <initializer_list>

using namespace lockserv::dist;

TEST_CASE("normal cdf and quantile") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.2) == doctest::Approx(-0.8416212335729143).epsilon(1e-14));
  for (double x : {-8.0, -3.3, -1.0, -0.1, 0.4, 2.2, 4.0}) {
    CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  }
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK(std::isinf(normal_quantile(1.0)));
}

TEST_CASE("normal interval keeps precision in the upper tail") {
  const double p = normal_interval(9.0, 10.0);
  const double expected = 0.5 * (std::erfc(9.0 / std::sqrt(2.0)) - std::erfc(10.0 / std::sqrt(2.0)));
  CHECK(p == doctest::Approx(expected).epsilon(1e-12));
  CHECK(p > 0.0);
  CHECK(normal_interval(-INFINITY, INFINITY) == doctest::Approx(1.0));
  CHECK(normal_interval(-1.0, 1.0) == doctest::Approx(0.6826894921370859).epsilon(1e-14));
}

TEST_CASE("two-sided p") {
  CHECK(two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(two_sided_p(-1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(two_sided_p(0.0) == doctest::Approx(1.0));
}

TEST_CASE("incomplete gamma and chi-square tail") {
  for (double x : {0.1, 1.0, 4.0, 25.0}) {
    CHECK(gamma_q(1.0, x) == doctest::Approx(std::exp(-x)).epsilon(1e-12));
    CHECK(chi2_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
  }
  // Q(1/2, x) = erfc(sqrt(x))
  for (double x : {0.01, 0.5, 3.0, 40.0}) CHECK(gamma_q(0.5, x) == doctest::Approx(std::erfc(std::sqrt(x))).epsilon(1e-10));
  CHECK(chi2_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi2_sf(0.0, 5.0) == 1.0);
  // df = 4: Q = exp(-x/2)(1 + x/2)
  CHECK(chi2_sf(7.0, 4.0) == doctest::Approx(std::exp(-3.5) * 4.5).epsilon(1e-12));
}
