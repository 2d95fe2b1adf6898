#include "lockserv/psychometrics.hpp"

#include "lockserv/distributions.hpp"
#include "lockserv/kernels.hpp"

#include <cmath>

namespace lockserv {

namespace {

void require_square_symmetric(const Eigen::MatrixXd& r, const char* what) {
  if (r.rows() != r.cols() || r.rows() == 0) throw std::invalid_argument(std::string(what) + ": matrix must be square");
  if (!r.isApprox(r.transpose(), 1e-10)) throw std::invalid_argument(std::string(what) + ": matrix must be symmetric");
}

}  // namespace

double cronbach_alpha(const Eigen::MatrixXd& items) {
  const auto k = items.cols();
  if (k < 2) throw std::invalid_argument("cronbach_alpha: need at least two items");
  if (items.rows() < 2) throw std::invalid_argument("cronbach_alpha: need at least two respondents");
  const Eigen::MatrixXd cov = kernels::covariance(items);
  const double item_var = cov.diagonal().sum();
  const double total_var = cov.sum();
  if (!(total_var > 0.0)) throw std::domain_error("cronbach_alpha: total score has zero variance");
  const double kd = static_cast<double>(k);
  return kd / (kd - 1.0) * (1.0 - item_var / total_var);
}

Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i) {
    if (!(sd(i) > 0.0)) throw StructureError("variable " + std::to_string(i) + " has zero variance");
  }
  const Eigen::VectorXd inv = sd.cwiseInverse();
  Eigen::MatrixXd r = inv.asDiagonal() * cov * inv.asDiagonal();
  r.diagonal().setOnes();
  return r;
}

Eigen::MatrixXd correlation(const Eigen::MatrixXd& data) {
  return correlation_from_covariance(kernels::covariance(data));
}

double kmo(const Eigen::MatrixXd& r) {
  require_square_symmetric(r, "kmo");
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) throw StructureError("insufficient correlation structure: R is not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(r.rows(), r.cols()));
  double r2 = 0.0, q2 = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      if (i == j) continue;
      const double partial = -inv(i, j) / std::sqrt(inv(i, i) * inv(j, j));
      r2 += r(i, j) * r(i, j);
      q2 += partial * partial;
    }
  }
  if (r2 + q2 <= 1e-300 || r2 == 0.0) throw StructureError("insufficient correlation structure: no off-diagonal correlation");
  return r2 / (r2 + q2);
}

BartlettResult bartlett(const Eigen::MatrixXd& r, std::size_t n) {
  require_square_symmetric(r, "bartlett");
  const auto p = static_cast<double>(r.rows());
  if (static_cast<double>(n) <= p) throw std::invalid_argument("bartlett: need N > p");
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) throw StructureError("bartlett: R is not positive definite");
  const Eigen::VectorXd d = llt.matrixLLT().diagonal();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) log_det += 2.0 * std::log(d(i));
  BartlettResult out;
  out.chi2 = std::max(0.0, -(static_cast<double>(n) - 1.0 - (2.0 * p + 5.0) / 6.0) * log_det);
  out.df = static_cast<int>(r.rows() * (r.rows() - 1) / 2);
  out.p_value = out.df > 0 ? dist::chi2_sf(out.chi2, out.df) : 1.0;
  return out;
}

AdequacyReport adequacy(const Eigen::MatrixXd& data) {
  AdequacyReport rep;
  rep.n = static_cast<std::size_t>(data.rows());
  rep.items = static_cast<int>(data.cols());
  try {
    rep.cronbach_alpha = cronbach_alpha(data);
  } catch (const std::exception&) {
  }
  try {
    const Eigen::MatrixXd r = correlation(data);
    rep.kmo = kmo(r);
    rep.bartlett = bartlett(r, rep.n);
  } catch (const std::exception&) {
  }
  return rep;
}

}  // namespace lockserv
