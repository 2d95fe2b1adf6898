#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lockserv::optim {

/// Objective value and gradient at x. Returning nullopt marks x as outside the
/// feasible region; the line search then shortens the step.
using Objective = std::function<std::optional<double>(const Eigen::VectorXd& x, Eigen::VectorXd& gradient)>;

struct BfgsOptions {
  double gradient_tolerance = 1e-6;  // max-norm
  int max_iterations = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step, starting at x0
  std::string message;
};

/// Quasi-Newton minimization (BFGS inverse-Hessian update) with Armijo
/// backtracking. `initial_inverse_hessian` seeds the curvature model and is
/// also used when the update loses positive definiteness.
BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options = {},
                         std::optional<Eigen::MatrixXd> initial_inverse_hessian = std::nullopt);

}  // namespace lockserv::optim
