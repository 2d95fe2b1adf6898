#pragma once

// Synthetic data with known structure: Likert surveys from a covariance
// model, AHP judgment sets and ordered-probit samples.

#include "lockserv/ahp.hpp"
#include "lockserv/dataset.hpp"
#include "lockserv/rng.hpp"
#include "lockserv/sem.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lockserv::synth {

enum class Kind { sem, ahp, probit };
std::string to_string(Kind kind);
Kind kind_from_string(const std::string& s);

using Thresholds = std::array<double, 4>;
inline constexpr Thresholds kDefaultThresholds{-1.5, -0.5, 0.5, 1.5};

struct GeneratorSpec {
  Kind kind = Kind::sem;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  Thresholds likert_thresholds = kDefaultThresholds;
};

/// Throws std::invalid_argument unless the thresholds ascend strictly.
void validate(const Thresholds& t);

/// 1 + number of thresholds strictly below z.
int discretize(double z, const Thresholds& t);

/// Population covariance structure. Row r of matrices.lambda belongs to
/// questionnaire index items[r]; rows may load on several latents.
struct SemTruth {
  std::vector<int> items;
  std::vector<std::string> latents;
  sem::ModelMatrices matrices;

  Eigen::MatrixXd sigma() const;
  Eigen::MatrixXd latent_covariance() const;
};

SemTruth truth_from_model(const sem::MeasurementModel& model, const Eigen::VectorXd& theta,
                          sem::Identification id = sem::Identification::marker);

struct SemSurveySpec {
  SemTruth truth;
  VariableCatalog catalog;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  Thresholds likert_thresholds = kDefaultThresholds;
  std::optional<std::string> delay_factor;
  double delay_correlation = -0.4;  // with the standardized delay_factor score
  double delay_median = 4.0;         // hours
  double delay_spread = 0.8;         // log-scale sd
};

struct SemSurvey {
  SurveyDataset dataset;
  /// Pre-discretization responses, one column per truth.items entry.
  Eigen::MatrixXd continuous;
  std::vector<int> items;
};

/// Items of the catalog that the truth does not cover are left missing.
SemSurvey gen_sem_survey(const SemSurveySpec& spec);

/// Nearest 1/9..9 odd-scale value in log space.
double round_to_scale(double ratio);

/// Reciprocal judgment matrix with a_ij = round(w_i / w_j) for i < j; with
/// probability `noise` each cell moves one scale step up or down.
ahp::JudgmentMatrix gen_judgment_matrix(std::span<const double> w, double noise, PortableRng& rng);

struct AhpTruth {
  ahp::Hierarchy hierarchy;
  std::vector<double> criteria;
  std::vector<std::vector<double>> leaves;  // per criterion
};

std::vector<ahp::JudgmentRow> gen_ahp_judgments(const AhpTruth& truth, double noise, int respondents, std::uint64_t seed);

struct ProbitSample {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

/// X has independent standard-normal columns; y = 1 + #{k : x'beta + e > kappa_k}.
ProbitSample gen_probit(const Eigen::VectorXd& beta, const Eigen::VectorXd& kappa, std::size_t n, std::uint64_t seed);

// Built-in fixture resembling the waterway-lock survey: six service
// factors driving an overall quality latent, three weak items, and a
// supplier panel whose weights disagree with the customer ranking.
namespace fixture {

inline constexpr std::uint64_t kSeed = 20240607;
inline constexpr std::size_t kRespondents = 750;
inline constexpr std::size_t kTrain = 450;
inline constexpr int kSuppliers = 43;
inline constexpr double kSupplierNoise = 0.15;

/// Six factors and the quality latent, in structural order.
const std::vector<std::string>& factor_names();
inline constexpr const char* kQuality = "Service quality";

/// Standardized loadings of the fixture, item -> (factor, loading).
SemTruth truth();
sem::MeasurementModel model();
SemSurveySpec survey_spec(std::size_t n = kRespondents, std::uint64_t seed = kSeed);
AhpTruth supplier_truth();

}  // namespace fixture

}  // namespace lockserv::synth
