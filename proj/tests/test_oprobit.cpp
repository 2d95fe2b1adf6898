#include "doctest.h"

#include "lockserv/kernels.hpp"
#include "lockserv/oprobit.hpp"
#include "lockserv/rng.hpp"
#include "lockserv/synth.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace lockserv;
using namespace lockserv::oprobit;

namespace {

std::vector<int> with_counts(std::initializer_list<int> counts) {
  std::vector<int> y;
  int c = 1;
  for (int n : counts) {
    y.insert(y.end(), static_cast<std::size_t>(n), c);
    ++c;
  }
  return y;
}

}  // namespace

TEST_CASE("null fit") {
  const auto y = with_counts({20, 30, 50});
  const auto n = null_fit(y);
  CHECK(n.kappa(0) == doctest::Approx(-0.8416212335729143).epsilon(1e-12));
  CHECK(std::fabs(n.kappa(1)) < 1e-14);
  CHECK(n.counts == std::vector<std::size_t>{20, 30, 50});

  const auto a = null_fit(with_counts({10, 20, 70}));
  CHECK(a.loglik == doctest::Approx(10 * std::log(0.1) + 20 * std::log(0.2) + 70 * std::log(0.7)).epsilon(1e-12));
  // hand value of the sum: -23.0259 - 32.1888 - 24.9672
  CHECK(a.loglik == doctest::Approx(-80.1819).epsilon(1e-6));

  const auto u = null_fit(with_counts({20, 20, 20, 20, 20}));
  CHECK(u.loglik == doctest::Approx(100 * std::log(0.2)).epsilon(1e-12));
  CHECK(u.loglik == doctest::Approx(-160.944).epsilon(1e-5));
}

TEST_CASE("category preconditions") {
  const std::vector<int> two{1, 1, 2, 2};
  CHECK_THROWS_AS(null_fit(two), FitError);
  CHECK_THROWS_AS(category_count(two), FitError);
  const std::vector<int> gap{1, 1, 3, 4, 4};
  CHECK_THROWS_AS(category_count(gap), FitError);
  const std::vector<int> ok{1, 2, 3, 3};
  CHECK(category_count(ok) == 3);
}

TEST_CASE("cutpoint transform round-trip") {
  Eigen::VectorXd k(4);
  k << -1.3, -0.2, 0.05, 2.0;
  const Eigen::VectorXd back = cutpoints_from_free(cutpoints_to_free(k));
  CHECK((back - k).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::VectorXd f(3);
  f << 0.4, -30.0, 5.0;
  const Eigen::VectorXd c = cutpoints_from_free(f);
  CHECK(c(1) > c(0));
  CHECK(c(2) > c(1));
}

TEST_CASE("one predictor agrees with the grid-search oracle") {
  // 20 observations with overlapping categories
  const std::vector<double> xs{-1.6, -1.2, -1.1, -0.9, -0.7, -0.5, -0.4, -0.2, -0.1, 0.0,
                               0.1,  0.3,  0.4,  0.6,  0.7,  0.9,  1.1,  1.3,  1.5,  1.8};
  const std::vector<int> y{1, 1, 2, 1, 1, 2, 3, 1, 2, 2, 1, 3, 2, 2, 3, 2, 3, 3, 2, 3};
  Eigen::MatrixXd x(20, 1);
  for (int i = 0; i < 20; ++i) x(i, 0) = xs[static_cast<std::size_t>(i)];
  const auto m = fit(x, y);
  CHECK(m.converged);
  const auto g = oracle::probit_grid(x, y, 1e-3);
  CHECK(std::fabs(m.beta(0) - g.beta) <= 1e-3 + 1e-9);
  CHECK(std::fabs(m.kappa(0) - g.k1) <= 1e-3 + 1e-9);
  CHECK(std::fabs(m.kappa(1) - g.k2) <= 1e-3 + 1e-9);
  CHECK(m.loglik >= g.loglik - 1e-12);
  CHECK(m.loglik == doctest::Approx(oracle::probit_loglik(x, y, m.beta, m.kappa)).epsilon(1e-12));
}

TEST_CASE("fit invariants on synthetic data") {
  Eigen::VectorXd beta(3), kappa(3);
  beta << 0.6, -0.4, 0.0;
  kappa << -1.0, 0.0, 1.2;
  const auto s = synth::gen_probit(beta, kappa, 1500, 31);
  const auto m = fit(s.x, s.y, {7, 8, 9});
  CHECK(m.converged);
  CHECK(m.gradient_max_norm < 1e-8);
  CHECK(m.predictors == std::vector<int>{7, 8, 9});
  CHECK(m.categories == 4);
  for (Eigen::Index k = 1; k < m.kappa.size(); ++k) CHECK(m.kappa(k) > m.kappa(k - 1));
  CHECK(m.loglik >= m.loglik_null);
  CHECK(m.lr_chi2 == doctest::Approx(2.0 * (m.loglik - m.loglik_null)));
  CHECK(m.lr_df == 3);
  CHECK(m.pseudo_r2 == doctest::Approx(1.0 - m.loglik / m.loglik_null));
  CHECK(m.pseudo_r2 >= 0.0);
  CHECK(m.pseudo_r2 < 1.0);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::fabs(m.beta(j) - beta(j)) < 4.0 * m.beta_se(j));
    CHECK(m.beta_z(j) == doctest::Approx(m.beta(j) / m.beta_se(j)));
  }

  // gradient near the optimum against finite differences of the oracle
  Eigen::VectorXd theta(6);
  theta << m.beta, m.kappa;
  theta.array() += 0.01;
  auto ll = [&](const Eigen::VectorXd& t) { return oracle::probit_loglik(s.x, s.y, t.head(3), t.tail(3)); };
  const Eigen::VectorXd fd = oracle::central_difference(ll, theta);
  const auto terms = kernels::probit_terms(s.x, s.y, theta.head(3), theta.tail(3), false);
  CHECK((fd - terms.gradient).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()) < 1e-5);

  // standard errors from the inverse observed information
  const auto h = kernels::probit_terms(s.x, s.y, m.beta, m.kappa, true).hessian;
  const Eigen::MatrixXd cov = (-h).inverse();
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(m.beta_se(j) == doctest::Approx(std::sqrt(cov(j, j))).epsilon(1e-6));
}

TEST_CASE("location invariance") {
  Eigen::VectorXd beta(2), kappa(2);
  beta << 0.7, 0.3;
  kappa << -0.5, 0.6;
  const auto s = synth::gen_probit(beta, kappa, 800, 4);
  const auto a = fit(s.x, s.y);
  Eigen::MatrixXd shifted = s.x;
  shifted.col(0).array() += 3.0;
  shifted.col(1).array() -= 1.5;
  const auto b = fit(shifted, s.y);
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-6);
  const double shift = 3.0 * a.beta(0) - 1.5 * a.beta(1);
  CHECK((b.kappa.array() - a.kappa.array() - shift).abs().maxCoeff() < 1e-6);
  CHECK(b.loglik == doctest::Approx(a.loglik).epsilon(1e-10));
}

TEST_CASE("category probabilities sum to one") {
  PortableRng rng(2);
  Eigen::VectorXd beta(3), kappa(4);
  beta << 0.5, -1.0, 2.0;
  kappa << -2.0, -0.5, 0.3, 1.9;
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::RowVectorXd x(3);
    for (int j = 0; j < 3; ++j) x(j) = 4.0 * rng.normal();
    const auto p = category_probabilities(x, beta, kappa);
    CHECK(p.size() == 5);
    CHECK(std::fabs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("degenerate designs are rejected") {
  Eigen::VectorXd beta(1), kappa(2);
  beta << 0.5;
  kappa << -0.5, 0.5;
  const auto s = synth::gen_probit(beta, kappa, 300, 8);
  Eigen::MatrixXd x(300, 2);
  x.col(0) = s.x.col(0);
  x.col(1) = 2.0 * s.x.col(0);
  CHECK_THROWS_AS(fit(x, s.y), FitError);
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(300, 1, 3.0);
  CHECK_THROWS_AS(fit(c, s.y), FitError);

  // complete separation
  Eigen::MatrixXd sx(30, 1);
  std::vector<int> sy(30);
  for (int i = 0; i < 30; ++i) {
    sx(i, 0) = i;
    sy[static_cast<std::size_t>(i)] = 1 + i / 10;
  }
  CHECK_THROWS_AS(fit(sx, sy), FitError);
}

TEST_CASE("backward elimination on pure noise") {
  const int k = 29;
  const auto s = synth::gen_probit(Eigen::VectorXd::Zero(k), (Eigen::VectorXd(4) << -1.5, -0.5, 0.5, 1.5).finished(), 750, 91);
  std::vector<int> labels;
  for (int j = 1; j <= k; ++j) labels.push_back(j);
  const auto r = backward_eliminate(s.x, s.y, labels, 0.01);
  CHECK(r.survivors.size() <= 3);
  CHECK(r.steps.size() == static_cast<std::size_t>(k) - r.survivors.size());
  for (Eigen::Index j = 0; j < r.final_model.beta_p.size(); ++j) CHECK(r.final_model.beta_p(j) < 0.01);
  for (const auto& st : r.steps) CHECK(st.p_value >= 0.01);
}

TEST_CASE("planted signal survives") {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
  beta(3) = 0.8;
  const auto s = synth::gen_probit(beta, (Eigen::VectorXd(3) << -1.0, 0.0, 1.0).finished(), 600, 12);
  std::vector<int> labels{2, 4, 6, 7, 9, 13, 14, 15, 19, 22};
  for (auto mode : {EliminationMode::stepwise, EliminationMode::single_shot}) {
    const auto r = backward_eliminate(s.x, s.y, labels, 0.01, mode);
    CHECK(std::find(r.survivors.begin(), r.survivors.end(), 7) != r.survivors.end());
    CHECK(r.survivors.size() <= 3);
  }
}

TEST_CASE("elimination down to nothing warns") {
  const auto s = synth::gen_probit(Eigen::VectorXd::Zero(2), (Eigen::VectorXd(2) << -0.4, 0.4).finished(), 200, 3);
  const auto r = backward_eliminate(s.x, s.y, {1, 2}, 1e-12);
  CHECK(r.survivors.empty());
  CHECK_FALSE(r.warnings.empty());
  CHECK(r.final_model.beta.size() == 0);
  CHECK(r.final_model.loglik == doctest::Approx(null_fit(s.y).loglik).epsilon(1e-9));
}

TEST_CASE("simplified questionnaire") {
  const auto catalog = VariableCatalog::standard();
  const std::map<int, std::string> construct{{2, "Safe & security"}, {7, "Time & convenience"}, {6, "Time & convenience"}};
  const auto q = build_questionnaire({7, 2, 6, 30}, catalog, construct, {"Safe & security", "Time & convenience"});
  REQUIRE(q.questions.size() == 4);
  CHECK(q.questions[0].item == 2);
  CHECK(q.questions[1].item == 6);
  CHECK(q.questions[2].item == 7);
  CHECK(q.questions[3].construct == "Other");
  for (std::size_t i = 0; i < 4; ++i) CHECK(q.questions[i].number == static_cast<int>(i + 1));
  CHECK(q.questions[0].abbreviation == catalog.item(2).abbreviation);
  const auto csv = format_questionnaire_csv(q);
  CHECK(csv.rfind("construct,", 0) == 0);
}
