#include "lockserv/sem.hpp"

#include "lockserv/distributions.hpp"
#include "lockserv/kernels.hpp"
#include "lockserv/optimizer.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace lockserv::sem {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

bool has_cycle(int m, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(m));
  for (const auto& [to, from] : edges) out[static_cast<std::size_t>(from)].push_back(to);
  std::vector<int> state(static_cast<std::size_t>(m), 0);  // 0 new, 1 on stack, 2 done
  std::function<bool(int)> visit = [&](int v) {
    state[static_cast<std::size_t>(v)] = 1;
    for (int w : out[static_cast<std::size_t>(v)]) {
      if (state[static_cast<std::size_t>(w)] == 1) return true;
      if (state[static_cast<std::size_t>(w)] == 0 && visit(w)) return true;
    }
    state[static_cast<std::size_t>(v)] = 2;
    return false;
  };
  for (int v = 0; v < m; ++v) {
    if (state[static_cast<std::size_t>(v)] == 0 && visit(v)) return true;
  }
  return false;
}

std::optional<Eigen::LLT<MatrixXd>> cholesky(const MatrixXd& a) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const VectorXd d = llt.matrixLLT().diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) return std::nullopt;
  return llt;
}

double log_det(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

std::string item_label(int item) { return "q" + std::to_string(item); }

}  // namespace

std::string to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::loading: return "loading";
    case ParamKind::path: return "path";
    case ParamKind::latent_variance: return "latent_variance";
    case ParamKind::latent_covariance: return "latent_covariance";
    case ParamKind::residual_variance: return "residual_variance";
  }
  return "loading";
}

// --- MeasurementModel ------------------------------------------------------

MeasurementModel::MeasurementModel(std::vector<LatentSpec> latents, std::vector<Path> paths,
                                   std::vector<std::pair<std::string, std::string>> covariances)
    : latents_(std::move(latents)), paths_(std::move(paths)) {
  if (latents_.empty()) throw ModelError("model has no latent variables");
  std::set<std::string> names;
  std::set<int> items;
  for (std::size_t l = 0; l < latents_.size(); ++l) {
    const auto& lat = latents_[l];
    if (lat.name.empty()) throw ModelError("latent with empty name");
    if (!names.insert(lat.name).second) throw ModelError("duplicate latent '" + lat.name + "'");
    if (lat.indicators.empty()) throw ModelError("latent '" + lat.name + "' has no indicators");
    for (int item : lat.indicators) {
      if (!items.insert(item).second) {
        throw ModelError("item " + std::to_string(item) + " loads on more than one latent");
      }
      observed_.push_back(item);
      latent_of_row_.push_back(static_cast<int>(l));
    }
  }
  std::set<std::pair<int, int>> seen_paths;
  for (const auto& p : paths_) {
    const int to = latent_index(p.to), from = latent_index(p.from);
    if (to == from) throw ModelError("path from '" + p.from + "' to itself");
    if (!seen_paths.insert({to, from}).second) throw ModelError("duplicate path " + p.from + " -> " + p.to);
    path_idx_.push_back({to, from});
  }
  if (has_cycle(latent_count(), path_idx_)) throw ModelError("structural paths contain a cycle");
  for (int l = 0; l < latent_count(); ++l) {
    const bool in_path = std::any_of(path_idx_.begin(), path_idx_.end(),
                                     [&](const auto& e) { return e.first == l || e.second == l; });
    if (latents_[static_cast<std::size_t>(l)].indicators.size() < 2 && !in_path) {
      throw ModelError("latent '" + latents_[static_cast<std::size_t>(l)].name +
                       "' needs two indicators or a structural path");
    }
  }
  std::set<std::pair<int, int>> seen_cov;
  for (const auto& [a, b] : covariances) {
    int ia = latent_index(a), ib = latent_index(b);
    if (ia == ib) throw ModelError("covariance of '" + a + "' with itself");
    if (is_endogenous(ia) || is_endogenous(ib)) {
      throw ModelError("covariance " + a + " ~~ " + b + " involves an endogenous latent");
    }
    if (ia > ib) std::swap(ia, ib);
    if (!seen_cov.insert({ia, ib}).second) throw ModelError("duplicate covariance " + a + " ~~ " + b);
    covariances_.push_back({ia, ib});
  }
}

int MeasurementModel::latent_index(const std::string& name) const {
  for (std::size_t l = 0; l < latents_.size(); ++l) {
    if (latents_[l].name == name) return static_cast<int>(l);
  }
  throw ModelError("unknown latent '" + name + "'");
}

bool MeasurementModel::is_endogenous(int latent) const {
  return std::any_of(path_idx_.begin(), path_idx_.end(), [&](const auto& e) { return e.first == latent; });
}

int MeasurementModel::observed_position(int item) const {
  auto it = std::find(observed_.begin(), observed_.end(), item);
  return it == observed_.end() ? -1 : static_cast<int>(it - observed_.begin());
}

MeasurementModel MeasurementModel::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("model spec: ") + e.what());
  }
  try {
    std::vector<LatentSpec> latents;
    for (const auto& l : doc.at("latents")) {
      LatentSpec spec{l.at("name").get<std::string>(), l.at("indicators").get<std::vector<int>>()};
      if (l.contains("marker") && !l["marker"].is_null()) {
        const int marker = l["marker"].get<int>();
        auto it = std::find(spec.indicators.begin(), spec.indicators.end(), marker);
        if (it == spec.indicators.end()) throw ModelError("marker of '" + spec.name + "' is not one of its indicators");
        std::rotate(spec.indicators.begin(), it, it + 1);
      }
      latents.push_back(std::move(spec));
    }
    std::vector<Path> paths;
    if (doc.contains("paths")) {
      for (const auto& p : doc["paths"]) paths.push_back({p.at("from").get<std::string>(), p.at("to").get<std::string>()});
    }
    std::vector<std::pair<std::string, std::string>> covs;
    if (doc.contains("covariances")) {
      for (const auto& c : doc["covariances"]) {
        if (!c.is_array() || c.size() != 2) throw ModelError("covariance entries must be [a, b] pairs");
        covs.emplace_back(c[0].get<std::string>(), c[1].get<std::string>());
      }
    }
    return MeasurementModel(std::move(latents), std::move(paths), std::move(covs));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("model spec: ") + e.what());
  }
}

MeasurementModel MeasurementModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model spec " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string MeasurementModel::to_json_text() const {
  nlohmann::json doc;
  doc["latents"] = nlohmann::json::array();
  for (const auto& l : latents_) {
    doc["latents"].push_back({{"name", l.name}, {"indicators", l.indicators}, {"marker", l.indicators.front()}});
  }
  doc["paths"] = nlohmann::json::array();
  for (const auto& p : paths_) doc["paths"].push_back({{"from", p.from}, {"to", p.to}});
  doc["covariances"] = nlohmann::json::array();
  for (const auto& [a, b] : covariances_) {
    doc["covariances"].push_back({latents_[static_cast<std::size_t>(a)].name, latents_[static_cast<std::size_t>(b)].name});
  }
  return doc.dump(2);
}

// --- ParameterTable --------------------------------------------------------

ParameterTable::ParameterTable(const MeasurementModel& model, Identification id) : id_(id) {
  const int p = model.observed_count();
  const int m = model.latent_count();
  fixed_.lambda = MatrixXd::Zero(p, m);
  fixed_.beta = MatrixXd::Zero(m, m);
  fixed_.psi = MatrixXd::Zero(m, m);
  fixed_.theta = VectorXd::Zero(p);

  auto scaled_by_variance = [&](int l) { return id == Identification::unit_variance && !model.is_endogenous(l); };

  int row = 0;
  for (int l = 0; l < m; ++l) {
    const auto& lat = model.latents()[static_cast<std::size_t>(l)];
    for (std::size_t k = 0; k < lat.indicators.size(); ++k, ++row) {
      if (k == 0 && !scaled_by_variance(l)) {
        fixed_.lambda(row, l) = 1.0;
      } else {
        params_.push_back({ParamKind::loading, row, l, lat.name + " -> " + item_label(lat.indicators[k])});
      }
    }
  }
  for (const auto& [to, from] : model.path_indices()) {
    params_.push_back({ParamKind::path, to, from,
                       model.latents()[static_cast<std::size_t>(from)].name + " -> " +
                           model.latents()[static_cast<std::size_t>(to)].name});
  }
  for (int l = 0; l < m; ++l) {
    if (scaled_by_variance(l)) {
      fixed_.psi(l, l) = 1.0;
    } else {
      params_.push_back({ParamKind::latent_variance, l, l, "var(" + model.latents()[static_cast<std::size_t>(l)].name + ")"});
    }
  }
  for (const auto& [a, b] : model.covariance_pairs()) {
    params_.push_back({ParamKind::latent_covariance, a, b,
                       "cov(" + model.latents()[static_cast<std::size_t>(a)].name + ", " +
                           model.latents()[static_cast<std::size_t>(b)].name + ")"});
  }
  // A latent with a single indicator is that indicator: residual fixed at 0.
  for (int v = 0; v < p; ++v) {
    const int l = model.latent_of_observed(v);
    if (model.latents()[static_cast<std::size_t>(l)].indicators.size() < 2) continue;
    params_.push_back({ParamKind::residual_variance, v, v, "var(e_" + item_label(model.observed()[static_cast<std::size_t>(v)]) + ")"});
  }
}

ModelMatrices ParameterTable::unpack(const VectorXd& theta) const {
  if (theta.size() != size()) throw std::invalid_argument("parameter vector has wrong length");
  ModelMatrices m = fixed_;
  for (int k = 0; k < size(); ++k) {
    const auto& prm = params_[static_cast<std::size_t>(k)];
    const double v = theta(k);
    switch (prm.kind) {
      case ParamKind::loading: m.lambda(prm.row, prm.col) = v; break;
      case ParamKind::path: m.beta(prm.row, prm.col) = v; break;
      case ParamKind::latent_variance: m.psi(prm.row, prm.row) = v; break;
      case ParamKind::latent_covariance:
        m.psi(prm.row, prm.col) = v;
        m.psi(prm.col, prm.row) = v;
        break;
      case ParamKind::residual_variance: m.theta(prm.row) = v; break;
    }
  }
  return m;
}

VectorXd ParameterTable::pack(const ModelMatrices& m) const {
  VectorXd theta(size());
  for (int k = 0; k < size(); ++k) {
    const auto& prm = params_[static_cast<std::size_t>(k)];
    switch (prm.kind) {
      case ParamKind::loading: theta(k) = m.lambda(prm.row, prm.col); break;
      case ParamKind::path: theta(k) = m.beta(prm.row, prm.col); break;
      case ParamKind::latent_variance: theta(k) = m.psi(prm.row, prm.row); break;
      case ParamKind::latent_covariance: theta(k) = m.psi(prm.row, prm.col); break;
      case ParamKind::residual_variance: theta(k) = m.theta(prm.row); break;
    }
  }
  return theta;
}

int ParameterTable::degrees_of_freedom() const {
  const int p = static_cast<int>(fixed_.theta.size());
  return p * (p + 1) / 2 - size();
}

// --- Model algebra ---------------------------------------------------------

namespace {

MatrixXd inverse_i_minus_b(const MatrixXd& beta) {
  const Index m = beta.rows();
  const MatrixXd a = MatrixXd::Identity(m, m) - beta;
  Eigen::FullPivLU<MatrixXd> lu(a);
  if (!lu.isInvertible()) throw ModelError("I - B is singular");
  return lu.inverse();
}

}  // namespace

MatrixXd latent_covariance(const ModelMatrices& m) {
  const MatrixXd a = inverse_i_minus_b(m.beta);
  return a * m.psi * a.transpose();
}

MatrixXd implied_sigma(const ModelMatrices& m) {
  MatrixXd sigma = m.lambda * latent_covariance(m) * m.lambda.transpose();
  sigma.diagonal() += m.theta;
  return 0.5 * (sigma + sigma.transpose());
}

MatrixXd implied_sigma(const MeasurementModel& model, const VectorXd& theta, Identification id) {
  return implied_sigma(ParameterTable(model, id).unpack(theta));
}

std::vector<MatrixXd> sigma_derivatives(const ParameterTable& table, const ModelMatrices& m) {
  const MatrixXd a = inverse_i_minus_b(m.beta);
  const MatrixXd sigma_eta = a * m.psi * a.transpose();
  const MatrixXd q = m.lambda * sigma_eta;  // p x m
  const MatrixXd c = m.lambda * a;          // p x m
  const Index p = m.lambda.rows();

  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(table.size()));
  for (const auto& prm : table.parameters()) {
    MatrixXd d = MatrixXd::Zero(p, p);
    switch (prm.kind) {
      case ParamKind::loading:
        d.row(prm.row) += q.col(prm.col).transpose();
        d.col(prm.row) += q.col(prm.col);
        break;
      case ParamKind::path: {
        // dA = A E_tf A, so d Sigma_eta = A E_tf Sigma_eta + (.)'.
        const MatrixXd g = a.col(prm.row) * sigma_eta.row(prm.col);
        const MatrixXd ds = g + g.transpose();
        d = m.lambda * ds * m.lambda.transpose();
        break;
      }
      case ParamKind::latent_variance:
        d = c.col(prm.row) * c.col(prm.row).transpose();
        break;
      case ParamKind::latent_covariance: {
        const MatrixXd g = c.col(prm.row) * c.col(prm.col).transpose();
        d = g + g.transpose();
        break;
      }
      case ParamKind::residual_variance:
        d(prm.row, prm.row) = 1.0;
        break;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::optional<double> discrepancy(const MatrixXd& sigma, const MatrixXd& s) {
  auto ls = cholesky(sigma);
  auto ss = cholesky(s);
  if (!ss) throw std::invalid_argument("sample covariance is not positive definite");
  if (!ls) return std::nullopt;
  const double tr = ls->solve(s).trace();
  return log_det(*ls) + tr - log_det(*ss) - static_cast<double>(s.rows());
}

VectorXd discrepancy_gradient(const ParameterTable& table, const VectorXd& theta, const MatrixXd& s) {
  const ModelMatrices m = table.unpack(theta);
  const MatrixXd sigma = implied_sigma(m);
  auto llt = cholesky(sigma);
  if (!llt) throw ModelError("implied covariance is not positive definite");
  const MatrixXd inv = llt->solve(MatrixXd::Identity(sigma.rows(), sigma.cols()));
  const MatrixXd w = inv * (sigma - s) * inv;
  const auto derivs = sigma_derivatives(table, m);
  VectorXd g(table.size());
  for (int k = 0; k < table.size(); ++k) g(k) = w.cwiseProduct(derivs[static_cast<std::size_t>(k)]).sum();
  return g;
}

// --- Estimation ------------------------------------------------------------

VectorXd start_values(const ParameterTable& table, const MeasurementModel& model, const MatrixXd& s) {
  VectorXd theta(table.size());
  std::vector<int> marker_row(static_cast<std::size_t>(model.latent_count()), 0);
  int row = 0;
  for (int l = 0; l < model.latent_count(); ++l) {
    marker_row[static_cast<std::size_t>(l)] = row;
    row += static_cast<int>(model.latents()[static_cast<std::size_t>(l)].indicators.size());
  }
  for (int k = 0; k < table.size(); ++k) {
    const auto& prm = table.parameters()[static_cast<std::size_t>(k)];
    switch (prm.kind) {
      case ParamKind::loading:
        theta(k) = table.identification() == Identification::unit_variance && !model.is_endogenous(prm.col)
                       ? std::sqrt(0.5 * s(prm.row, prm.row))
                       : 1.0;
        break;
      case ParamKind::path: theta(k) = 0.0; break;
      case ParamKind::latent_variance: {
        const int mr = marker_row[static_cast<std::size_t>(prm.row)];
        theta(k) = 0.5 * s(mr, mr);
        break;
      }
      case ParamKind::latent_covariance: theta(k) = 0.0; break;
      case ParamKind::residual_variance: theta(k) = 0.5 * s(prm.row, prm.row); break;
    }
  }
  return theta;
}

namespace {

// Variances are optimized on the log scale.
VectorXd to_free(const ParameterTable& table, const VectorXd& theta) {
  VectorXd phi = theta;
  for (int k = 0; k < table.size(); ++k) {
    if (table.parameters()[static_cast<std::size_t>(k)].is_variance()) phi(k) = std::log(theta(k));
  }
  return phi;
}

VectorXd from_free(const ParameterTable& table, const VectorXd& phi) {
  VectorXd theta = phi;
  for (int k = 0; k < table.size(); ++k) {
    if (table.parameters()[static_cast<std::size_t>(k)].is_variance()) theta(k) = std::exp(phi(k));
  }
  return theta;
}

VectorXd free_jacobian(const ParameterTable& table, const VectorXd& theta) {
  VectorXd j = VectorXd::Ones(table.size());
  for (int k = 0; k < table.size(); ++k) {
    if (table.parameters()[static_cast<std::size_t>(k)].is_variance()) j(k) = theta(k);
  }
  return j;
}

// tr(Sigma^-1 D_i Sigma^-1 D_j): the expected Hessian of F_ML.
MatrixXd expected_hessian(const ParameterTable& table, const ModelMatrices& m, const MatrixXd& sigma_inv) {
  const auto derivs = sigma_derivatives(table, m);
  const int q = table.size();
  std::vector<MatrixXd> g(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) g[static_cast<std::size_t>(k)] = sigma_inv * derivs[static_cast<std::size_t>(k)];
  MatrixXd h(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = g[static_cast<std::size_t>(i)].cwiseProduct(g[static_cast<std::size_t>(j)].transpose()).sum();
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

std::optional<MatrixXd> inverse_spd(const MatrixXd& h) {
  auto llt = cholesky(h);
  if (!llt) return std::nullopt;
  return llt->solve(MatrixXd::Identity(h.rows(), h.cols()));
}

}  // namespace

SemEstimate fit_ml(const MeasurementModel& model, const MatrixXd& s, std::size_t n, const FitOptions& options) {
  const int p = model.observed_count();
  if (s.rows() != p || s.cols() != p) throw std::invalid_argument("sample covariance does not match the model's observed variables");
  if (!s.isApprox(s.transpose(), 1e-10)) throw std::invalid_argument("sample covariance is not symmetric");
  if (!cholesky(s)) throw std::invalid_argument("sample covariance is not positive definite");
  if (n < 2) throw std::invalid_argument("need at least two observations");

  const ParameterTable table(model, options.identification);
  const int df = table.degrees_of_freedom();
  if (df < 0) throw ModelError("model is not identified: " + std::to_string(-df) + " more parameters than moments");

  VectorXd theta0 = options.start ? *options.start : start_values(table, model, s);
  if (theta0.size() != table.size()) throw std::invalid_argument("start vector has wrong length");

  optim::Objective objective = [&](const VectorXd& phi, VectorXd& grad) -> std::optional<double> {
    const VectorXd theta = from_free(table, phi);
    if (!theta.allFinite()) return std::nullopt;
    ModelMatrices m;
    MatrixXd sigma;
    try {
      m = table.unpack(theta);
      sigma = implied_sigma(m);
    } catch (const ModelError&) {
      return std::nullopt;
    }
    auto llt = cholesky(sigma);
    if (!llt) return std::nullopt;
    auto f = discrepancy(sigma, s);
    if (!f) return std::nullopt;
    const MatrixXd inv = llt->solve(MatrixXd::Identity(p, p));
    const MatrixXd w = inv * (sigma - s) * inv;
    const auto derivs = sigma_derivatives(table, m);
    const VectorXd jac = free_jacobian(table, theta);
    grad.resize(table.size());
    for (int k = 0; k < table.size(); ++k) grad(k) = w.cwiseProduct(derivs[static_cast<std::size_t>(k)]).sum() * jac(k);
    return *f;
  };

  // Seed the curvature model with the inverse expected Hessian at the start.
  std::optional<MatrixXd> h0;
  {
    const ModelMatrices m0 = table.unpack(theta0);
    const MatrixXd sigma0 = implied_sigma(m0);
    if (auto llt = cholesky(sigma0)) {
      const MatrixXd inv = llt->solve(MatrixXd::Identity(p, p));
      const VectorXd jac = free_jacobian(table, theta0);
      MatrixXd h = jac.asDiagonal() * expected_hessian(table, m0, inv) * jac.asDiagonal();
      h.diagonal().array() += 1e-8 * std::max(1.0, h.diagonal().maxCoeff());
      h0 = inverse_spd(h);
    }
  }

  optim::BfgsOptions bopts;
  bopts.gradient_tolerance = options.gradient_tolerance;
  bopts.max_iterations = options.max_iterations;
  const optim::BfgsResult res = optim::minimize_bfgs(objective, to_free(table, theta0), bopts, h0);

  SemEstimate e;
  e.model = model;
  e.identification = options.identification;
  e.theta = from_free(table, res.x);
  e.matrices = table.unpack(e.theta);
  e.sigma = implied_sigma(e.matrices);
  e.f_min = std::max(0.0, res.value);
  e.chi2 = static_cast<double>(n - 1) * e.f_min;
  e.df = df;
  e.n = n;
  e.converged = res.converged;
  e.iterations = res.iterations;
  e.gradient_max_norm = res.gradient.lpNorm<Eigen::Infinity>();
  e.history = res.history;
  if (!res.converged) e.warnings.push_back("optimizer did not converge: " + res.message);

  // Standard errors from the inverse expected information, natural scale.
  const MatrixXd sigma_inv = cholesky(e.sigma)->solve(MatrixXd::Identity(p, p));
  const MatrixXd info = expected_hessian(table, e.matrices, sigma_inv) * (0.5 * static_cast<double>(n - 1));
  const auto acov = inverse_spd(info);
  if (!acov) e.warnings.push_back("information matrix is singular; standard errors unavailable");
  for (int k = 0; k < table.size(); ++k) {
    ParameterEstimate pe;
    pe.param = table.parameters()[static_cast<std::size_t>(k)];
    pe.estimate = e.theta(k);
    pe.se = acov ? std::sqrt(std::max(0.0, (*acov)(k, k))) : std::numeric_limits<double>::quiet_NaN();
    pe.z = pe.se > 0.0 ? pe.estimate / pe.se : std::numeric_limits<double>::quiet_NaN();
    pe.p_value = std::isfinite(pe.z) ? dist::two_sided_p(pe.z) : std::numeric_limits<double>::quiet_NaN();
    e.params.push_back(std::move(pe));
  }

  for (const auto& pe : e.params) {
    if (!pe.param.is_variance()) continue;
    const double scale = pe.param.kind == ParamKind::residual_variance ? s(pe.param.row, pe.param.row) : 1.0;
    if (pe.estimate < 1e-6 * scale) {
      e.heywood = true;
      e.warnings.push_back("Heywood case: " + pe.param.label + " is at the zero boundary (" + std::to_string(pe.estimate) + ")");
    }
  }
  if (!cholesky(e.matrices.psi)) e.warnings.push_back("latent covariance matrix Psi is not positive definite");
  return e;
}

SemEstimate standardize(SemEstimate e) {
  const MatrixXd sigma_eta = latent_covariance(e.matrices);
  StandardizedSolution st;
  st.latent_sd = sigma_eta.diagonal().cwiseSqrt();
  st.observed_sd = e.sigma.diagonal().cwiseSqrt();
  for (Index i = 0; i < st.observed_sd.size(); ++i) {
    if (!(st.observed_sd(i) > 0.0)) throw ModelError("zero implied variance for an indicator");
  }
  for (Index i = 0; i < st.latent_sd.size(); ++i) {
    if (!(st.latent_sd(i) > 0.0)) throw ModelError("zero implied variance for a latent variable");
  }
  st.lambda = st.observed_sd.cwiseInverse().asDiagonal() * e.matrices.lambda * st.latent_sd.asDiagonal();
  st.beta = st.latent_sd.cwiseInverse().asDiagonal() * e.matrices.beta * st.latent_sd.asDiagonal();
  st.latent_corr = st.latent_sd.cwiseInverse().asDiagonal() * sigma_eta * st.latent_sd.cwiseInverse().asDiagonal();
  st.smc.resize(st.observed_sd.size());
  for (Index v = 0; v < st.smc.size(); ++v) {
    const double l = st.lambda(v, e.model.latent_of_observed(static_cast<int>(v)));
    st.smc(v) = l * l;
  }
  e.standardized = std::move(st);
  return e;
}

// --- Fit indices -----------------------------------------------------------

FitIndices fit_indices(const SemEstimate& e, const MatrixXd& s, std::size_t n) {
  const Index p = s.rows();
  const double nm1 = static_cast<double>(n) - 1.0;
  FitIndices out;
  out.chi2 = nm1 * (*discrepancy(e.sigma, s));
  out.chi2 = std::max(0.0, out.chi2);
  out.df = e.df;

  // Independence model: Sigma_b = diag(S).
  MatrixXd sb = MatrixXd::Zero(p, p);
  sb.diagonal() = s.diagonal();
  out.baseline_chi2 = std::max(0.0, nm1 * (*discrepancy(sb, s)));
  out.baseline_df = static_cast<int>(p * (p - 1) / 2);

  const double chi2 = out.chi2, df = out.df, chib = out.baseline_chi2, dfb = out.baseline_df;
  if (out.df > 0) {
    out.cmin_df = chi2 / df;
    out.rmsea = std::sqrt(std::max(chi2 - df, 0.0) / (df * nm1));
    out.tli = (chib / dfb - chi2 / df) / (chib / dfb - 1.0);
  }
  out.nfi = chib > 0.0 ? (chib - chi2) / chib : 1.0;
  const double denom = std::max({chib - dfb, chi2 - df, 0.0});
  out.cfi = denom > 0.0 ? 1.0 - std::max(chi2 - df, 0.0) / denom : 1.0;
  out.ifi = (chib - df) != 0.0 ? (chib - chi2) / (chib - df) : 1.0;

  const MatrixXd a = cholesky(e.sigma)->solve(s);  // Sigma^-1 S
  const MatrixXd dev = a - MatrixXd::Identity(p, p);
  out.gfi = 1.0 - (dev * dev).trace() / (a * a).trace();
  if (out.df > 0) {
    out.agfi = 1.0 - (static_cast<double>(p * (p + 1)) / (2.0 * df)) * (1.0 - out.gfi);
  }
  return out;
}

std::vector<FitGate> fit_gates(const FitIndices& fit, const FitGateThresholds& t) {
  std::vector<FitGate> gates;
  auto below = [&](const std::string& name, std::optional<double> v, double bound) {
    std::ostringstream rule;
    rule << "< " << bound;
    gates.push_back({name, v, rule.str(), v.has_value() && *v < bound});
  };
  auto above = [&](const std::string& name, std::optional<double> v) {
    std::ostringstream rule;
    rule << "> " << t.incremental_min;
    gates.push_back({name, v, rule.str(), v.has_value() && *v > t.incremental_min});
  };
  below("CMIN/DF", fit.cmin_df, t.cmin_df_max);
  below("RMSEA", fit.rmsea, t.rmsea_max);
  above("CFI", fit.cfi);
  above("GFI", fit.gfi);
  above("AGFI", fit.agfi);
  above("NFI", fit.nfi);
  above("TLI", fit.tli);
  above("IFI", fit.ifi);
  return gates;
}

// --- Construct validity ----------------------------------------------------

double composite_reliability(const std::vector<double>& l) {
  double sum = 0.0, resid = 0.0;
  for (double v : l) {
    sum += v;
    resid += 1.0 - v * v;
  }
  return sum * sum / (sum * sum + resid);
}

double average_variance_extracted(const std::vector<double>& l) {
  if (l.empty()) return 0.0;
  double s = 0.0;
  for (double v : l) s += v * v;
  return s / static_cast<double>(l.size());
}

ValidityReport construct_validity(const SemEstimate& estimate) {
  const SemEstimate e = estimate.standardized ? estimate : standardize(estimate);
  const auto& st = *e.standardized;
  ValidityReport rep;
  std::vector<int> factors;
  int row = 0;
  for (int l = 0; l < e.model.latent_count(); ++l) {
    const auto& lat = e.model.latents()[static_cast<std::size_t>(l)];
    FactorValidity fv;
    fv.name = lat.name;
    for (std::size_t k = 0; k < lat.indicators.size(); ++k, ++row) fv.loadings.push_back(st.lambda(row, l));
    if (lat.indicators.size() < 2) continue;
    fv.cr = composite_reliability(fv.loadings);
    fv.ave = average_variance_extracted(fv.loadings);
    fv.convergent = fv.cr >= 0.7 && fv.ave >= 0.5;
    factors.push_back(l);
    rep.factors.push_back(std::move(fv));
  }
  const Index k = static_cast<Index>(factors.size());
  rep.fornell_larcker = MatrixXd::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      rep.fornell_larcker(i, j) = i == j ? std::sqrt(rep.factors[static_cast<std::size_t>(i)].ave)
                                         : st.latent_corr(factors[static_cast<std::size_t>(i)], factors[static_cast<std::size_t>(j)]);
    }
  }
  rep.discriminant = true;
  for (Index i = 0; i < k; ++i) {
    bool ok = true;
    for (Index j = 0; j < k; ++j) {
      if (i != j && !(rep.fornell_larcker(i, i) > std::fabs(rep.fornell_larcker(i, j)))) ok = false;
    }
    rep.factors[static_cast<std::size_t>(i)].discriminant = ok;
    rep.discriminant = rep.discriminant && ok;
  }
  return rep;
}

CovarianceInput sample_covariance(const SurveyDataset& data, const MeasurementModel& model) {
  const ItemMatrix mat = data.matrix(model.observed());
  if (mat.values.rows() < 2) throw InputError("fewer than two complete cases for the model's items");
  return {kernels::covariance(mat.values), static_cast<std::size_t>(mat.values.rows()), model.observed()};
}

}  // namespace lockserv::sem
