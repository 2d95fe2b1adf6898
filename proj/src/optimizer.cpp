#include "lockserv/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace lockserv::optim {

BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options,
                         std::optional<Eigen::MatrixXd> initial_inverse_hessian) {
  const Eigen::Index n = x0.size();
  const Eigen::MatrixXd h0 = initial_inverse_hessian ? *initial_inverse_hessian : Eigen::MatrixXd::Identity(n, n);
  if (h0.rows() != n || h0.cols() != n) throw std::invalid_argument("minimize_bfgs: inverse Hessian has wrong shape");

  BfgsResult out;
  out.x = std::move(x0);
  out.gradient.resize(n);
  auto f0 = objective(out.x, out.gradient);
  if (!f0) throw std::invalid_argument("minimize_bfgs: starting point is infeasible");
  out.value = *f0;
  out.history.push_back(out.value);

  Eigen::MatrixXd h = h0;
  Eigen::VectorXd trial_grad(n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (out.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      out.converged = true;
      out.message = "gradient tolerance reached";
      return out;
    }
    Eigen::VectorXd dir = -h * out.gradient;
    double slope = out.gradient.dot(dir);
    if (!(slope < 0.0)) {
      h = h0;
      dir = -h * out.gradient;
      slope = out.gradient.dot(dir);
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_value = 0.0;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      trial = out.x + step * dir;
      auto fv = objective(trial, trial_grad);
      if (fv && std::isfinite(*fv) && *fv <= out.value + options.armijo * step * slope) {
        trial_value = *fv;
        accepted = true;
        break;
      }
      step *= options.backtrack;
    }
    if (!accepted) {
      if (h != h0) {
        h = h0;  // retry once from the seed curvature
        continue;
      }
      out.message = "line search failed";
      return out;
    }

    const Eigen::VectorXd s = trial - out.x;
    const Eigen::VectorXd yv = trial_grad - out.gradient;
    out.x = std::move(trial);
    out.value = trial_value;
    out.gradient = trial_grad;
    out.iterations = iter + 1;
    out.history.push_back(out.value);

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * yv;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
      h += (rho * rho * yv.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  out.converged = out.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
  out.message = out.converged ? "gradient tolerance reached" : "iteration limit reached";
  return out;
}

}  // namespace lockserv::optim
