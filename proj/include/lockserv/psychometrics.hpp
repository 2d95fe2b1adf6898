#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>

namespace lockserv {

/// Raised when a correlation matrix cannot support the requested diagnostic.
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BartlettResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
};

struct AdequacyReport {
  std::optional<double> cronbach_alpha;
  std::optional<double> kmo;
  std::optional<BartlettResult> bartlett;
  std::size_t n = 0;
  int items = 0;
};

/// Cronbach's alpha of the columns of an n x k rating matrix.
double cronbach_alpha(const Eigen::MatrixXd& items);

/// Correlation matrix from a covariance matrix. Zero-variance columns are an error.
Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& cov);
Eigen::MatrixXd correlation(const Eigen::MatrixXd& data);

/// Kaiser-Meyer-Olkin sampling adequacy, with partial correlations taken
/// from the anti-image of R.
double kmo(const Eigen::MatrixXd& r);

/// Bartlett's test of sphericity.
BartlettResult bartlett(const Eigen::MatrixXd& r, std::size_t n);

/// All three diagnostics on a complete-case rating matrix. Diagnostics that
/// are undefined for the data are left empty instead of throwing.
AdequacyReport adequacy(const Eigen::MatrixXd& data);

}  // namespace lockserv
