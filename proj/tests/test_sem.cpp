#include "doctest.h"

#include "lockserv/rng.hpp"
#include "lockserv/sem.hpp"
#include "lockserv/synth.hpp"

#include "oracles.hpp"

#include <cmath>

using namespace lockserv;
using namespace lockserv::sem;

namespace {

// F1 (1,2,3), F2 (4,5,6) -> Q (7,8)
MeasurementModel small_model() {
  return MeasurementModel({{"F1", {1, 2, 3}}, {"F2", {4, 5, 6}}, {"Q", {7, 8}}}, {{"F1", "Q"}, {"F2", "Q"}},
                          {{"F1", "F2"}});
}

ModelMatrices small_truth() {
  ModelMatrices m;
  m.lambda = Eigen::MatrixXd::Zero(8, 3);
  m.lambda.col(0).segment(0, 3) << 1.0, 0.9, 1.1;
  m.lambda.col(1).segment(3, 3) << 1.0, 0.8, 1.2;
  m.lambda.col(2).segment(6, 2) << 1.0, 0.95;
  m.beta = Eigen::MatrixXd::Zero(3, 3);
  m.beta(2, 0) = 0.4;
  m.beta(2, 1) = 0.3;
  m.psi = Eigen::MatrixXd::Zero(3, 3);
  m.psi(0, 0) = 0.6;
  m.psi(1, 1) = 0.5;
  m.psi(0, 1) = m.psi(1, 0) = 0.2;
  m.psi(2, 2) = 0.3;
  m.theta = Eigen::VectorXd::Constant(8, 0.4);
  m.theta(5) = 0.3;
  return m;
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& sigma, std::size_t n, std::uint64_t seed) {
  const Eigen::MatrixXd l = sigma.llt().matrixL();
  PortableRng rng(seed);
  const auto p = sigma.rows();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    x.row(i) = (l * z).transpose();
  }
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(n - 1);
}

}  // namespace

TEST_CASE("implied sigma, single factor") {
  ModelMatrices m;
  m.lambda = Eigen::MatrixXd::Ones(2, 1);
  m.beta = Eigen::MatrixXd::Zero(1, 1);
  m.psi = Eigen::MatrixXd::Ones(1, 1);
  m.theta = Eigen::VectorXd::Constant(2, 0.5);
  const Eigen::MatrixXd s = implied_sigma(m);
  Eigen::Matrix2d expected;
  expected << 1.5, 1.0, 1.0, 1.5;
  CHECK((s - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("implied sigma matches brute-force assembly on the fixture") {
  const auto truth = synth::fixture::truth();
  const auto& m = truth.matrices;
  const Eigen::MatrixXd a = implied_sigma(m);
  const Eigen::MatrixXd b = oracle::implied_sigma(m.lambda, m.beta, m.psi, m.theta);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  ModelMatrices cyc = small_truth();
  cyc.beta(0, 2) = 2.5;  // F1 <- Q closes a loop with det(I-B) = 0
  cyc.beta(2, 0) = 0.4;
  cyc.beta(2, 1) = 0.0;
  CHECK_THROWS_AS(implied_sigma(cyc), ModelError);
}

TEST_CASE("pack and unpack round-trip") {
  const auto model = small_model();
  const ParameterTable table(model);
  const auto truth = small_truth();
  const Eigen::VectorXd theta = table.pack(truth);
  CHECK(theta.size() == table.size());
  // 5 free loadings + 2 paths + 3 latent variances + 1 covariance + 8 residuals
  CHECK(table.size() == 19);
  CHECK(table.degrees_of_freedom() == 36 - 19);
  const auto back = table.unpack(theta);
  CHECK((back.lambda - truth.lambda).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.psi - truth.psi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((implied_sigma(model, theta) - implied_sigma(truth)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("perfect fit recovers the generating parameters") {
  const auto model = small_model();
  const ParameterTable table(model);
  const Eigen::VectorXd truth = table.pack(small_truth());
  const Eigen::MatrixXd s = implied_sigma(small_truth());
  const auto e = fit_ml(model, s, 500);
  CHECK(e.converged);
  CHECK(e.f_min < 1e-8);
  CHECK(e.chi2 < 1e-5);
  CHECK((e.theta - truth).cwiseAbs().maxCoeff() < 1e-4);
  for (std::size_t i = 1; i < e.history.size(); ++i) CHECK(e.history[i] <= e.history[i - 1] + 1e-12);

  const auto fit = fit_indices(e, s, 500);
  CHECK(*fit.rmsea == doctest::Approx(0.0));
  CHECK(fit.cfi == doctest::Approx(1.0));
  CHECK(fit.nfi == doctest::Approx(1.0).epsilon(1e-6));

  // standardized values equal those computed directly from the truth
  const auto st = standardize(e);
  REQUIRE(st.standardized.has_value());
  const auto m = small_truth();
  const Eigen::MatrixXd lc = latent_covariance(m);
  const Eigen::MatrixXd sig = implied_sigma(m);
  for (int r = 0; r < 8; ++r) {
    const int l = model.latent_of_observed(r);
    const double want = m.lambda(r, l) * std::sqrt(lc(l, l)) / std::sqrt(sig(r, r));
    CHECK(st.standardized->lambda(r, l) == doctest::Approx(want).epsilon(1e-6));
    CHECK(st.standardized->smc(r) == doctest::Approx(want * want).epsilon(1e-6));
  }
  const double w = m.beta(2, 0) * std::sqrt(lc(0, 0)) / std::sqrt(lc(2, 2));
  CHECK(st.standardized->beta(2, 0) == doctest::Approx(w).epsilon(1e-6));
}

TEST_CASE("standardized loading definition") {
  // marker loading 1, latent variance 0.64, residual 0.36 -> std 0.8
  const MeasurementModel model({{"F", {1, 2, 3}}}, {}, {});
  ModelMatrices m;
  m.lambda = Eigen::MatrixXd::Ones(3, 1);
  m.beta = Eigen::MatrixXd::Zero(1, 1);
  m.psi = Eigen::MatrixXd::Constant(1, 1, 0.64);
  m.theta = Eigen::VectorXd::Constant(3, 0.36);
  const auto e = standardize(fit_ml(model, implied_sigma(m), 300));
  for (int r = 0; r < 3; ++r) CHECK(e.standardized->lambda(r, 0) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("analytic gradient matches central differences") {
  const auto model = small_model();
  const ParameterTable table(model);
  const Eigen::MatrixXd s = sample_cov(implied_sigma(small_truth()), 400, 5);
  PortableRng rng(6);
  const Eigen::VectorXd base = table.pack(small_truth());
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd theta = base;
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) *= 0.8 + 0.4 * rng.uniform();
    auto f = [&](const Eigen::VectorXd& t) { return *discrepancy(implied_sigma(model, t), s); };
    const Eigen::VectorXd fd = oracle::central_difference(f, theta, 1e-6);
    const Eigen::VectorXd g = discrepancy_gradient(table, theta, s);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((fd - g).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("discrepancy is nonnegative and zero only at S") {
  const Eigen::MatrixXd s = implied_sigma(small_truth());
  CHECK(std::fabs(*discrepancy(s, s)) < 1e-12);
  Eigen::MatrixXd other = s;
  other(0, 1) = other(1, 0) = other(0, 1) * 0.9;
  CHECK(*discrepancy(other, s) > 0.0);
  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(8, 8);
  CHECK_FALSE(discrepancy(bad, s).has_value());
}

TEST_CASE("chi-square is invariant to rescaling the indicators") {
  const auto model = small_model();
  const Eigen::MatrixXd s = sample_cov(implied_sigma(small_truth()), 300, 8);
  Eigen::VectorXd d(8);
  d << 2.0, 0.5, 1.0, 3.0, 1.5, 0.7, 1.2, 4.0;
  const Eigen::MatrixXd scaled = d.asDiagonal() * s * d.asDiagonal();
  const auto a = fit_ml(model, s, 300);
  const auto b = fit_ml(model, scaled, 300);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(b.chi2 == doctest::Approx(a.chi2).epsilon(1e-6));
}

TEST_CASE("monte carlo recovery of standardized loadings at N=2000") {
  const auto model = small_model();
  const auto m = small_truth();
  const Eigen::MatrixXd lc = latent_covariance(m);
  const Eigen::MatrixXd sig = implied_sigma(m);
  const auto e = standardize(fit_ml(model, sample_cov(sig, 2000, 10), 2000));
  CHECK(e.converged);
  for (int r = 0; r < 8; ++r) {
    const int l = model.latent_of_observed(r);
    const double want = m.lambda(r, l) * std::sqrt(lc(l, l) / sig(r, r));
    CHECK(std::fabs(e.standardized->lambda(r, l) - want) < 0.05);
  }
  // standard errors are positive and z = est/se
  for (const auto& p : e.params) {
    CHECK(p.se > 0.0);
    CHECK(p.z == doctest::Approx(p.estimate / p.se));
  }
}

TEST_CASE("fit index formulas") {
  // hand arithmetic for chi2=100, df=50, N=451, baseline 1000 on 60 df
  const double rmsea = std::sqrt((100.0 - 50.0) / (50.0 * 450.0));
  const double cfi = 1.0 - 50.0 / 940.0;
  CHECK(rmsea == doctest::Approx(0.0471).epsilon(1e-3));
  CHECK(cfi == doctest::Approx(0.9468).epsilon(1e-4));

  // the library's indices follow the same formulas on an actual fit
  const auto model = small_model();
  const std::size_t n = 451;
  const Eigen::MatrixXd s = sample_cov(implied_sigma(small_truth()), n, 12);
  const auto e = fit_ml(model, s, n);
  const auto f = fit_indices(e, s, n);
  const Eigen::VectorXd sd = s.diagonal().cwiseSqrt();
  const Eigen::MatrixXd r = sd.cwiseInverse().asDiagonal() * s * sd.cwiseInverse().asDiagonal();
  const double chib = -static_cast<double>(n - 1) * std::log(r.determinant());
  CHECK(f.baseline_chi2 == doctest::Approx(chib).epsilon(1e-10));
  CHECK(f.baseline_df == 28);
  CHECK(f.df == 17);
  const double c = f.chi2, d = f.df, cb = f.baseline_chi2, db = f.baseline_df;
  CHECK(*f.cmin_df == doctest::Approx(c / d));
  CHECK(*f.rmsea == doctest::Approx(std::sqrt(std::max(c - d, 0.0) / (d * (n - 1)))));
  CHECK(f.nfi == doctest::Approx((cb - c) / cb));
  CHECK(f.cfi == doctest::Approx(1.0 - std::max(c - d, 0.0) / std::max({cb - db, c - d, 0.0})));
  CHECK(*f.tli == doctest::Approx((cb / db - c / d) / (cb / db - 1.0)));
  CHECK(f.ifi == doctest::Approx((cb - c) / (cb - d)));
  const Eigen::MatrixXd a = e.sigma.inverse() * s;
  const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(8, 8);
  const double gfi = 1.0 - ((a - i) * (a - i)).trace() / (a * a).trace();
  CHECK(f.gfi == doctest::Approx(gfi).epsilon(1e-10));
  CHECK(*f.agfi == doctest::Approx(1.0 - 36.0 / d * (1.0 - gfi)).epsilon(1e-10));
  CHECK(*f.rmsea >= 0.0);
  CHECK(f.cfi <= 1.0);

  const auto gates = fit_gates(f);
  CHECK(gates.size() == 8);
}

TEST_CASE("just-identified model leaves df-based indices undefined") {
  const MeasurementModel model({{"F", {1, 2, 3}}}, {}, {});
  const Eigen::MatrixXd s = sample_cov(implied_sigma(ModelMatrices{Eigen::MatrixXd::Ones(3, 1), Eigen::MatrixXd::Zero(1, 1),
                                                                   Eigen::MatrixXd::Constant(1, 1, 0.5),
                                                                   Eigen::VectorXd::Constant(3, 0.5)}),
                                       200, 3);
  const auto e = fit_ml(model, s, 200);
  CHECK(e.df == 0);
  const auto f = fit_indices(e, s, 200);
  CHECK_FALSE(f.cmin_df.has_value());
  CHECK_FALSE(f.rmsea.has_value());
  CHECK_FALSE(f.tli.has_value());
}

TEST_CASE("composite reliability and AVE") {
  CHECK(composite_reliability({0.8, 0.8, 0.8}) == doctest::Approx(5.76 / 6.84).epsilon(1e-12));
  CHECK(composite_reliability({0.8, 0.8, 0.8}) == doctest::Approx(0.8421).epsilon(1e-4));
  CHECK(average_variance_extracted({0.8, 0.8, 0.8}) == doctest::Approx(0.64));
  CHECK(composite_reliability({1.0}) == doctest::Approx(1.0));
  CHECK(average_variance_extracted({1.0}) == doctest::Approx(1.0));
}

TEST_CASE("construct validity and Fornell-Larcker") {
  const auto model = small_model();
  const auto e = standardize(fit_ml(model, implied_sigma(small_truth()), 500));
  const auto v = construct_validity(e);
  REQUIRE(v.factors.size() == 3);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(v.fornell_larcker(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)) ==
          doctest::Approx(std::sqrt(v.factors[f].ave)));
    bool ok = true;
    for (Eigen::Index g = 0; g < 3; ++g) {
      if (g == static_cast<Eigen::Index>(f)) continue;
      const double d = v.fornell_larcker(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f));
      ok = ok && d > std::fabs(v.fornell_larcker(static_cast<Eigen::Index>(f), g)) &&
           d > std::fabs(v.fornell_larcker(g, static_cast<Eigen::Index>(f)));
    }
    CHECK(v.factors[f].discriminant == ok);
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(MeasurementModel({{"A", {1, 2}}, {"B", {2, 3}}}, {}, {}), ModelError);
  CHECK_THROWS_AS(MeasurementModel({{"A", {1, 2}}, {"B", {3, 4}}}, {{"A", "B"}, {"B", "A"}}, {}), ModelError);
  CHECK_THROWS_AS(MeasurementModel({{"A", {1, 2}}}, {}, {{"A", "Z"}}), ModelError);
  const auto m = small_model();
  const auto back = MeasurementModel::from_json_text(m.to_json_text());
  CHECK(back.observed() == m.observed());
  CHECK(back.latent_count() == 3);
  CHECK(back.is_endogenous(2));
}

TEST_CASE("under-identified model is rejected") {
  const MeasurementModel model({{"A", {1, 2}}}, {}, {});
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2, 2) + Eigen::MatrixXd::Constant(2, 2, 0.3);
  CHECK_THROWS_AS(fit_ml(model, s, 100), ModelError);
}

TEST_CASE("single-indicator latent is identified through its path") {
  const MeasurementModel model({{"F", {1, 2, 3}}, {"Q", {9}}}, {{"F", "Q"}}, {});
  const ParameterTable table(model);
  // 2 loadings + 1 path + 2 latent variances + 3 residuals; the lone indicator has none
  CHECK(table.size() == 8);
  ModelMatrices m;
  m.lambda = Eigen::MatrixXd::Zero(4, 2);
  m.lambda.col(0).head(3) << 1.0, 0.8, 1.2;
  m.lambda(3, 1) = 1.0;
  m.beta = Eigen::MatrixXd::Zero(2, 2);
  m.beta(1, 0) = 0.6;
  m.psi = Eigen::MatrixXd::Zero(2, 2);
  m.psi(0, 0) = 0.7;
  m.psi(1, 1) = 0.4;
  m.theta = Eigen::VectorXd::Constant(4, 0.35);
  m.theta(3) = 0.0;
  const auto e = standardize(fit_ml(model, implied_sigma(m), 300));
  CHECK(e.converged);
  CHECK(e.f_min < 1e-8);
  CHECK((e.theta - table.pack(m)).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(e.standardized->smc(3) == doctest::Approx(1.0));
}
