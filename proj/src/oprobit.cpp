#include "lockserv/oprobit.hpp"

#include "lockserv/distributions.hpp"
#include "lockserv/kernels.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lockserv::oprobit {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
double inverse_softplus(double d) { return d > 30.0 ? d : std::log(std::expm1(d)); }
double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// d kappa / d free, lower triangular.
MatrixXd cutpoint_jacobian(const VectorXd& free) {
  const Index c = free.size();
  MatrixXd j = MatrixXd::Zero(c, c);
  for (Index r = 0; r < c; ++r) {
    j(r, 0) = 1.0;
    for (Index i = 1; i <= r; ++i) j(r, i) = logistic(free(i));
  }
  return j;
}

void check_predictors(const MatrixXd& x, double limit) {
  if (x.cols() == 0) return;
  const MatrixXd centered = x.rowwise() - x.colwise().mean();
  const VectorXd sd = (centered.colwise().squaredNorm() / static_cast<double>(x.rows() - 1)).cwiseSqrt().transpose();
  for (Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 0.0)) throw FitError("predictor " + std::to_string(j) + " is constant (collinear with the cutpoints)");
  }
  const MatrixXd scaled = centered * sd.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<MatrixXd> svd(scaled);
  const VectorXd sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? (sv(0) / smin) * (sv(0) / smin) : std::numeric_limits<double>::infinity();
  if (cond > limit) throw FitError("predictors are collinear (condition number " + std::to_string(cond) + ")");
}

}  // namespace

int category_count(std::span<const int> y) {
  if (y.empty()) throw FitError("no observations");
  const int c = *std::max_element(y.begin(), y.end());
  if (*std::min_element(y.begin(), y.end()) < 1) throw FitError("categories must be coded 1..C");
  if (c < 3) throw FitError("ordered probit needs at least three categories");
  std::vector<std::size_t> counts(static_cast<std::size_t>(c), 0);
  for (int v : y) ++counts[static_cast<std::size_t>(v - 1)];
  for (int k = 0; k < c; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) throw FitError("category " + std::to_string(k + 1) + " is never observed");
  }
  return c;
}

NullFit null_fit(std::span<const int> y) {
  const int c = category_count(y);
  NullFit out;
  out.counts.assign(static_cast<std::size_t>(c), 0);
  for (int v : y) ++out.counts[static_cast<std::size_t>(v - 1)];
  const double n = static_cast<double>(y.size());
  out.kappa.resize(c - 1);
  double cum = 0.0;
  for (int k = 0; k < c; ++k) {
    const double nk = static_cast<double>(out.counts[static_cast<std::size_t>(k)]);
    out.loglik += nk * std::log(nk / n);
    cum += nk;
    if (k < c - 1) out.kappa(k) = dist::normal_quantile(cum / n);
  }
  return out;
}

VectorXd cutpoints_to_free(const VectorXd& kappa) {
  VectorXd f(kappa.size());
  if (kappa.size() == 0) return f;
  f(0) = kappa(0);
  for (Index i = 1; i < kappa.size(); ++i) {
    const double gap = kappa(i) - kappa(i - 1);
    if (!(gap > 0.0)) throw std::invalid_argument("cutpoints must be strictly ascending");
    f(i) = inverse_softplus(gap);
  }
  return f;
}

VectorXd cutpoints_from_free(const VectorXd& free) {
  VectorXd k(free.size());
  if (free.size() == 0) return k;
  k(0) = free(0);
  for (Index i = 1; i < free.size(); ++i) k(i) = k(i - 1) + softplus(free(i));
  return k;
}

double loglik(const MatrixXd& x, std::span<const int> y, const VectorXd& beta, const VectorXd& kappa) {
  return kernels::probit_terms(x, y, beta, kappa, false).loglik;
}

VectorXd category_probabilities(const Eigen::Ref<const Eigen::RowVectorXd>& x, const VectorXd& beta, const VectorXd& kappa) {
  const double eta = x.dot(beta);
  const Index c = kappa.size() + 1;
  VectorXd p(c);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < c; ++k) {
    const double lo = k == 0 ? -inf : kappa(k - 1) - eta;
    const double hi = k == c - 1 ? inf : kappa(k) - eta;
    p(k) = dist::normal_interval(lo, hi);
  }
  return p;
}

ProbitModel fit(const MatrixXd& x, std::span<const int> y, std::vector<int> labels, const FitOptions& options) {
  if (static_cast<Index>(y.size()) != x.rows()) throw std::invalid_argument("X and y have different row counts");
  const int categories = category_count(y);
  const Index k = x.cols();
  if (labels.empty()) {
    labels.resize(static_cast<std::size_t>(k));
    std::iota(labels.begin(), labels.end(), 1);
  }
  if (static_cast<Index>(labels.size()) != k) throw std::invalid_argument("predictor label count mismatch");
  if (x.rows() <= k + categories - 1) throw FitError("too few observations for the number of parameters");
  check_predictors(x, options.condition_limit);

  const NullFit null = null_fit(y);
  VectorXd beta = VectorXd::Zero(k);
  VectorXd free = cutpoints_to_free(null.kappa);
  const Index cuts = free.size();
  const Index dim = k + cuts;

  auto terms_at = [&](const VectorXd& b, const VectorXd& f, bool hess) {
    return kernels::probit_terms(x, y, b, cutpoints_from_free(f), hess);
  };

  ProbitModel out;
  out.predictors = labels;
  out.categories = categories;
  out.n_obs = y.size();

  auto t = terms_at(beta, free, true);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.gradient_max_norm = t.gradient.lpNorm<Eigen::Infinity>();
    if (out.gradient_max_norm < options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    // Newton step in (beta, free cutpoint) coordinates; the transform's
    // second-order term vanishes at the optimum and is dropped.
    MatrixXd jac = MatrixXd::Identity(dim, dim);
    jac.bottomRightCorner(cuts, cuts) = cutpoint_jacobian(free);
    const VectorXd g = jac.transpose() * t.gradient;
    const MatrixXd h = -(jac.transpose() * t.hessian * jac);
    Eigen::LDLT<MatrixXd> ldlt(h);
    VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
      step = ldlt.solve(g);
    } else {
      step = g / std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    }
    // near the optimum the predicted gain drops below the rounding of LL
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::fabs(t.loglik);
    double scale = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const VectorXd nb = beta + scale * step.head(k);
      const VectorXd nf = free + scale * step.tail(cuts);
      const double ll = loglik(x, y, nb, cutpoints_from_free(nf));
      if (std::isfinite(ll) && ll >= t.loglik + 1e-4 * scale * g.dot(step) - slack) {
        beta = nb;
        free = nf;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    out.iterations = iter + 1;
    t = terms_at(beta, free, true);
    if (!moved) {
      out.gradient_max_norm = t.gradient.lpNorm<Eigen::Infinity>();
      out.converged = out.gradient_max_norm < options.gradient_tolerance;
      break;
    }
    if (beta.lpNorm<Eigen::Infinity>() > 1e6) throw FitError("coefficients diverge (separation)");
  }
  if (!out.converged) {
    throw FitError("Newton search did not converge (gradient max-norm " + std::to_string(out.gradient_max_norm) + ")");
  }

  // Separation stalls the search at a large finite beta once LL rounds to
  // zero; a coefficient moving the latent index by 10 sd per predictor sd
  // (or a near-perfect fit) is treated the same as divergence.
  for (Index j = 0; j < k; ++j) {
    const double mean = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / static_cast<double>(x.rows() - 1));
    if (std::fabs(beta(j)) * sd > 10.0) throw FitError("coefficients diverge (separation)");
  }
  if (k > 0 && t.loglik > -1e-6 * static_cast<double>(x.rows())) throw FitError("outcome is perfectly predicted (separation)");

  out.beta = beta;
  out.kappa = cutpoints_from_free(free);
  out.loglik = t.loglik;
  out.loglik_null = null.loglik;

  // Observed information in the natural (beta, kappa) parameters.
  const MatrixXd info = -t.hessian;
  Eigen::LDLT<MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw FitError("observed information is not positive definite");
  const MatrixXd cov = ldlt.solve(MatrixXd::Identity(dim, dim));
  out.beta_se = cov.diagonal().head(k).cwiseMax(0.0).cwiseSqrt();
  out.kappa_se = cov.diagonal().tail(cuts).cwiseMax(0.0).cwiseSqrt();
  out.beta_z = out.beta.cwiseQuotient(out.beta_se);
  out.beta_p.resize(k);
  for (Index j = 0; j < k; ++j) out.beta_p(j) = dist::two_sided_p(out.beta_z(j));

  out.lr_chi2 = std::max(0.0, 2.0 * (out.loglik - out.loglik_null));
  out.lr_df = static_cast<int>(k);
  out.lr_p = k > 0 ? dist::chi2_sf(out.lr_chi2, static_cast<double>(k)) : 1.0;
  out.pseudo_r2 = out.loglik_null < 0.0 ? 1.0 - out.loglik / out.loglik_null : 0.0;
  return out;
}

EliminationResult backward_eliminate(const MatrixXd& x, std::span<const int> y, std::vector<int> labels, double alpha,
                                     EliminationMode mode, const FitOptions& options) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (labels.empty()) {
    labels.resize(static_cast<std::size_t>(x.cols()));
    std::iota(labels.begin(), labels.end(), 1);
  }
  EliminationResult out;
  out.initial = fit(x, y, labels, options);

  std::vector<Index> active(static_cast<std::size_t>(x.cols()));
  std::iota(active.begin(), active.end(), Index{0});
  ProbitModel current = out.initial;

  auto refit = [&]() {
    MatrixXd sub(x.rows(), static_cast<Index>(active.size()));
    std::vector<int> sub_labels;
    for (std::size_t j = 0; j < active.size(); ++j) {
      sub.col(static_cast<Index>(j)) = x.col(active[j]);
      sub_labels.push_back(labels[static_cast<std::size_t>(active[j])]);
    }
    current = fit(sub, y, sub_labels, options);
  };

  if (mode == EliminationMode::single_shot) {
    std::vector<Index> keep;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (current.beta_p(static_cast<Index>(j)) < alpha) {
        keep.push_back(active[j]);
      } else {
        out.steps.push_back({labels[static_cast<std::size_t>(active[j])], current.beta_p(static_cast<Index>(j))});
      }
    }
    active = std::move(keep);
    refit();
  } else {
    while (!active.empty()) {
      Index worst = 0;
      current.beta_p.maxCoeff(&worst);
      const double p = current.beta_p(worst);
      if (p < alpha) break;
      out.steps.push_back({labels[static_cast<std::size_t>(active[static_cast<std::size_t>(worst)])], p});
      active.erase(active.begin() + worst);
      refit();
    }
  }
  if (active.empty()) out.warnings.push_back("every predictor was eliminated; the final model has cutpoints only");
  out.final_model = current;
  for (Index j : active) out.survivors.push_back(labels[static_cast<std::size_t>(j)]);
  return out;
}

SimplifiedQuestionnaire build_questionnaire(const std::vector<int>& survivors, const VariableCatalog& catalog,
                                            const std::map<int, std::string>& construct_of,
                                            const std::vector<std::string>& construct_order) {
  auto construct = [&](int item) {
    auto it = construct_of.find(item);
    return it == construct_of.end() ? std::string("Other") : it->second;
  };
  auto order_of = [&](const std::string& c) {
    auto it = std::find(construct_order.begin(), construct_order.end(), c);
    return it == construct_order.end() ? construct_order.size() : static_cast<std::size_t>(it - construct_order.begin());
  };
  std::vector<int> items = survivors;
  std::stable_sort(items.begin(), items.end(), [&](int a, int b) {
    const auto oa = order_of(construct(a)), ob = order_of(construct(b));
    if (oa != ob) return oa < ob;
    if (construct(a) != construct(b)) return construct(a) < construct(b);
    return a < b;
  });
  SimplifiedQuestionnaire q;
  int number = 0;
  for (int item : items) {
    q.questions.push_back({construct(item), ++number, item, catalog.contains(item) ? catalog.item(item).abbreviation : catalog.label(item)});
  }
  return q;
}

std::string format_questionnaire_csv(const SimplifiedQuestionnaire& q) {
  std::string out = "construct,question,item,abbreviation\n";
  for (const auto& e : q.questions) {
    out += csv::quote(e.construct) + ',' + std::to_string(e.number) + ',' + std::to_string(e.item) + ',' + csv::quote(e.abbreviation) + '\n';
  }
  return out;
}

}  // namespace lockserv::oprobit
