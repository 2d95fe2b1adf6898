#pragma once

// Covariance-structure modeling: confirmatory factor analysis and the
// all-latent structural model Sigma = L (I-B)^-1 Psi (I-B)^-T L' + Theta,
// estimated by maximum likelihood.

#include "lockserv/dataset.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lockserv::sem {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LatentSpec {
  std::string name;
  std::vector<int> indicators;  // questionnaire item indices; the first is the marker
};

struct Path {
  std::string from;
  std::string to;
};

class MeasurementModel {
 public:
  MeasurementModel() = default;
  MeasurementModel(std::vector<LatentSpec> latents, std::vector<Path> paths,
                   std::vector<std::pair<std::string, std::string>> covariances);

  static MeasurementModel load(const std::filesystem::path& path);
  static MeasurementModel from_json_text(const std::string& text);
  std::string to_json_text() const;

  const std::vector<LatentSpec>& latents() const { return latents_; }
  const std::vector<Path>& paths() const { return paths_; }
  const std::vector<std::pair<int, int>>& covariance_pairs() const { return covariances_; }

  int latent_count() const { return static_cast<int>(latents_.size()); }
  int observed_count() const { return static_cast<int>(observed_.size()); }
  /// Observed variables in covariance-matrix order (latent by latent).
  const std::vector<int>& observed() const { return observed_; }
  int latent_index(const std::string& name) const;
  bool is_endogenous(int latent) const;
  /// Position of a questionnaire item among observed(), or -1.
  int observed_position(int item) const;
  /// Latent each observed row loads on.
  int latent_of_observed(int row) const { return latent_of_row_[static_cast<std::size_t>(row)]; }
  /// Paths as (to, from) latent indices.
  const std::vector<std::pair<int, int>>& path_indices() const { return path_idx_; }

 private:
  std::vector<LatentSpec> latents_;
  std::vector<Path> paths_;
  std::vector<std::pair<int, int>> covariances_;
  std::vector<int> observed_;
  std::vector<int> latent_of_row_;
  std::vector<std::pair<int, int>> path_idx_;
};

enum class Identification { marker, unit_variance };

enum class ParamKind { loading, path, latent_variance, latent_covariance, residual_variance };
std::string to_string(ParamKind kind);

/// One free parameter. For loadings (row, col) = (observed row, latent);
/// for paths (to, from); for latent (co)variances (latent, latent); for
/// residuals (observed row, observed row).
struct Parameter {
  ParamKind kind;
  int row = 0;
  int col = 0;
  std::string label;
  bool is_variance() const { return kind == ParamKind::latent_variance || kind == ParamKind::residual_variance; }
};

struct ModelMatrices {
  Eigen::MatrixXd lambda;  // p x m
  Eigen::MatrixXd beta;    // m x m, beta(to, from)
  Eigen::MatrixXd psi;     // m x m
  Eigen::VectorXd theta;   // p residual variances
};

class ParameterTable {
 public:
  ParameterTable(const MeasurementModel& model, Identification id = Identification::marker);

  const std::vector<Parameter>& parameters() const { return params_; }
  int size() const { return static_cast<int>(params_.size()); }
  Identification identification() const { return id_; }

  ModelMatrices unpack(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd pack(const ModelMatrices& m) const;
  /// Degrees of freedom p(p+1)/2 - q.
  int degrees_of_freedom() const;

 private:
  Identification id_;
  std::vector<Parameter> params_;
  ModelMatrices fixed_;
};

/// Sigma(theta). Throws ModelError when I - B is singular.
Eigen::MatrixXd implied_sigma(const ModelMatrices& m);
Eigen::MatrixXd implied_sigma(const MeasurementModel& model, const Eigen::VectorXd& theta,
                              Identification id = Identification::marker);
/// Model-implied covariance of the latent variables, (I-B)^-1 Psi (I-B)^-T.
Eigen::MatrixXd latent_covariance(const ModelMatrices& m);

/// d Sigma / d theta_k for every free parameter.
std::vector<Eigen::MatrixXd> sigma_derivatives(const ParameterTable& table, const ModelMatrices& m);

/// F_ML = ln det Sigma + tr(S Sigma^-1) - ln det S - p; nullopt if Sigma is not PD.
std::optional<double> discrepancy(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& s);
/// Analytic gradient of F_ML with respect to the natural parameters.
Eigen::VectorXd discrepancy_gradient(const ParameterTable& table, const Eigen::VectorXd& theta, const Eigen::MatrixXd& s);

struct ParameterEstimate {
  Parameter param;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct StandardizedSolution {
  Eigen::MatrixXd lambda;       // p x m
  Eigen::MatrixXd beta;         // m x m
  Eigen::MatrixXd latent_corr;  // m x m
  Eigen::VectorXd smc;          // per observed row
  Eigen::VectorXd latent_sd;
  Eigen::VectorXd observed_sd;
};

struct FitOptions {
  Identification identification = Identification::marker;
  double gradient_tolerance = 1e-6;
  int max_iterations = 500;
  /// Optional start vector; defaults to the built-in start values.
  std::optional<Eigen::VectorXd> start;
};

struct SemEstimate {
  MeasurementModel model;
  Identification identification = Identification::marker;
  Eigen::VectorXd theta;
  std::vector<ParameterEstimate> params;
  ModelMatrices matrices;
  Eigen::MatrixXd sigma;
  double f_min = 0.0;
  double chi2 = 0.0;
  int df = 0;
  std::size_t n = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_max_norm = 0.0;
  std::vector<double> history;
  bool heywood = false;
  std::vector<std::string> warnings;
  std::optional<StandardizedSolution> standardized;
};

/// Start values: free loadings 1, latent variances half the marker's sample
/// variance, residual variances half each indicator's variance, paths 0.
Eigen::VectorXd start_values(const ParameterTable& table, const MeasurementModel& model, const Eigen::MatrixXd& s);

/// Maximum-likelihood fit. `s` is ordered as model.observed().
SemEstimate fit_ml(const MeasurementModel& model, const Eigen::MatrixXd& s, std::size_t n,
                   const FitOptions& options = {});

SemEstimate standardize(SemEstimate estimate);

struct FitIndices {
  double chi2 = 0.0;
  int df = 0;
  double baseline_chi2 = 0.0;
  int baseline_df = 0;
  std::optional<double> cmin_df;
  std::optional<double> rmsea;
  double cfi = 1.0;
  double gfi = 1.0;
  std::optional<double> agfi;
  double nfi = 1.0;
  std::optional<double> tli;
  double ifi = 1.0;
};

FitIndices fit_indices(const SemEstimate& e, const Eigen::MatrixXd& s, std::size_t n);

struct FitGate {
  std::string index;
  std::optional<double> value;
  std::string rule;  // "< 3", "< 0.08" or "> 0.8"
  bool pass = false;
};

struct FitGateThresholds {
  double cmin_df_max = 3.0;
  double rmsea_max = 0.08;
  double incremental_min = 0.8;
};

std::vector<FitGate> fit_gates(const FitIndices& fit, const FitGateThresholds& thresholds = {});

struct FactorValidity {
  std::string name;
  std::vector<double> loadings;
  double cr = 0.0;
  double ave = 0.0;
  bool convergent = false;    // CR >= 0.7 and AVE >= 0.5
  bool discriminant = false;  // Fornell-Larcker
};

struct ValidityReport {
  std::vector<FactorValidity> factors;
  Eigen::MatrixXd fornell_larcker;  // sqrt(AVE) diagonal, latent correlations off-diagonal
  bool discriminant = false;
};

/// Composite reliability (sum l)^2 / ((sum l)^2 + sum(1 - l^2)).
double composite_reliability(const std::vector<double>& std_loadings);
double average_variance_extracted(const std::vector<double>& std_loadings);

ValidityReport construct_validity(const SemEstimate& e);

struct CovarianceInput {
  Eigen::MatrixXd s;
  std::size_t n = 0;
  std::vector<int> items;
};

/// Sample covariance of the model's observed items over complete cases.
CovarianceInput sample_covariance(const SurveyDataset& data, const MeasurementModel& model);

}  // namespace lockserv::sem
