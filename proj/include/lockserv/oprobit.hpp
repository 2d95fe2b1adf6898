#pragma once

#include "lockserv/dataset.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lockserv::oprobit {

/// Estimation failures: unobserved categories, collinear predictors,
/// separation or a Newton search that does not converge.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbitModel {
  std::vector<int> predictors;  // column labels (questionnaire items)
  int categories = 0;
  Eigen::VectorXd beta;
  Eigen::VectorXd kappa;  // strictly ascending, categories - 1 entries
  Eigen::VectorXd beta_se, beta_z, beta_p;
  Eigen::VectorXd kappa_se;
  double loglik = 0.0;
  double loglik_null = 0.0;
  double pseudo_r2 = 0.0;  // McFadden
  double lr_chi2 = 0.0;
  int lr_df = 0;
  double lr_p = 1.0;
  std::size_t n_obs = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_max_norm = 0.0;
};

struct NullFit {
  double loglik = 0.0;
  Eigen::VectorXd kappa;
  std::vector<std::size_t> counts;
};

/// Closed-form intercept-only fit: cutpoints are normal quantiles of the
/// cumulative category shares.
NullFit null_fit(std::span<const int> y);

/// Number of categories implied by y (its maximum), after checking that
/// every category 1..C occurs and C >= 3.
int category_count(std::span<const int> y);

struct FitOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 200;
  double condition_limit = 1e12;  // on the predictor correlation matrix
};

/// Ordered-probit maximum likelihood with cutpoints absorbing the intercept.
ProbitModel fit(const Eigen::MatrixXd& x, std::span<const int> y, std::vector<int> labels = {},
                const FitOptions& options = {});

double loglik(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta, const Eigen::VectorXd& kappa);

/// P(y = c | x) for c = 1..C.
Eigen::VectorXd category_probabilities(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::VectorXd& beta,
                                       const Eigen::VectorXd& kappa);

/// Unconstrained coordinates for ascending cutpoints: the first cutpoint and
/// inverse-softplus of each successive gap.
Eigen::VectorXd cutpoints_to_free(const Eigen::VectorXd& kappa);
Eigen::VectorXd cutpoints_from_free(const Eigen::VectorXd& free);

enum class EliminationMode { stepwise, single_shot };

struct EliminationStep {
  int dropped = 0;
  double p_value = 1.0;
};

struct QuestionEntry {
  std::string construct;
  int number = 0;  // position in the simplified questionnaire
  int item = 0;    // original questionnaire item
  std::string abbreviation;
};

struct SimplifiedQuestionnaire {
  std::vector<QuestionEntry> questions;
};

struct EliminationResult {
  ProbitModel initial;
  ProbitModel final_model;
  std::vector<EliminationStep> steps;
  std::vector<int> survivors;
  std::vector<std::string> warnings;
};

EliminationResult backward_eliminate(const Eigen::MatrixXd& x, std::span<const int> y, std::vector<int> labels, double alpha,
                                     EliminationMode mode = EliminationMode::stepwise, const FitOptions& options = {});

/// Lists surviving items in construct order. `construct_of` maps items to a
/// construct label; unmapped items fall under "Other".
SimplifiedQuestionnaire build_questionnaire(const std::vector<int>& survivors, const VariableCatalog& catalog,
                                            const std::map<int, std::string>& construct_of,
                                            const std::vector<std::string>& construct_order = {});

std::string format_questionnaire_csv(const SimplifiedQuestionnaire& q);

}  // namespace lockserv::oprobit
