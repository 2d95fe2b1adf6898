#include "lockserv/efa.hpp"

#include "lockserv/psychometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace lockserv::efa {

namespace {

using Eigen::Index;

// Flip each column so its largest-|loading| entry is positive.
void fix_signs(Eigen::MatrixXd& l) {
  for (Index j = 0; j < l.cols(); ++j) {
    Index arg = 0;
    l.col(j).cwiseAbs().maxCoeff(&arg);
    if (l(arg, j) < 0.0) l.col(j) *= -1.0;
  }
}

void fill_variance(LoadingMatrix& m, Index p) {
  m.variance_explained = m.eigenvalues / static_cast<double>(p) * 100.0;
  m.cumulative.resize(m.variance_explained.size());
  double acc = 0.0;
  for (Index j = 0; j < m.variance_explained.size(); ++j) {
    acc += m.variance_explained(j);
    m.cumulative(j) = std::min(acc, 100.0);
  }
}

}  // namespace

std::string to_string(DropReason reason) {
  return reason == DropReason::low_loading ? "low loading" : "cross-loading";
}

LoadingMatrix extract_pca(const Eigen::MatrixXd& r, std::vector<int> items) {
  if (r.rows() != r.cols() || r.rows() == 0) throw std::invalid_argument("extract_pca: R must be square");
  if (!r.isApprox(r.transpose(), 1e-10)) throw std::invalid_argument("extract_pca: R must be symmetric");
  const Index p = r.rows();
  if (items.empty()) {
    items.resize(static_cast<std::size_t>(p));
    std::iota(items.begin(), items.end(), 1);
  }
  if (static_cast<Index>(items.size()) != p) throw std::invalid_argument("extract_pca: item label count mismatch");

  // Householder tridiagonalization followed by implicit-shift QL/QR.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r);
  if (solver.info() != Eigen::Success) throw std::runtime_error("extract_pca: eigendecomposition failed");
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  Index kept = 0;
  while (kept < p && values(kept) > 1.0 + kKaiserTolerance) ++kept;
  if (kept == 0) throw StructureError("no factors extracted: no eigenvalue exceeds 1");

  LoadingMatrix out;
  out.items = std::move(items);
  out.spectrum = values;
  out.eigenvalues = values.head(kept);
  out.loadings = vectors.leftCols(kept) * out.eigenvalues.cwiseSqrt().asDiagonal();
  fix_signs(out.loadings);
  fill_variance(out, p);
  return out;
}

double varimax_criterion(const Eigen::MatrixXd& l) {
  const double p = static_cast<double>(l.rows());
  const Eigen::MatrixXd sq = l.array().square().matrix();
  double v = 0.0;
  for (Index j = 0; j < l.cols(); ++j) {
    const double s2 = sq.col(j).sum();
    v += (p * sq.col(j).squaredNorm() - s2 * s2) / (p * p);
  }
  return v;
}

RotationResult rotate_varimax(const LoadingMatrix& unrotated, const VarimaxOptions& options) {
  RotationResult out;
  const Index p = unrotated.loadings.rows();
  const Index m = unrotated.loadings.cols();
  out.rotation = Eigen::MatrixXd::Identity(m, m);
  out.rotated = unrotated;

  Eigen::VectorXd h = unrotated.communalities().cwiseSqrt();
  if (!options.kaiser_normalize) h.setOnes();
  for (Index i = 0; i < p; ++i)
    if (!(h(i) > 0.0)) h(i) = 1.0;
  Eigen::MatrixXd l = h.cwiseInverse().asDiagonal() * unrotated.loadings;
  out.criterion.push_back(varimax_criterion(l));
  if (m < 2) return out;

  const double pd = static_cast<double>(p);
  out.converged = false;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (Index j = 0; j < m - 1; ++j) {
      for (Index k = j + 1; k < m; ++k) {
        double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
        for (Index i = 0; i < p; ++i) {
          const double x = l(i, j), y = l(i, k);
          const double u = x * x - y * y;
          const double v = 2.0 * x * y;
          a += u;
          b += v;
          c += u * u - v * v;
          d += 2.0 * u * v;
        }
        const double num = d - 2.0 * a * b / pd;
        const double den = c - (a * a - b * b) / pd;
        const double phi = 0.25 * std::atan2(num, den);
        if (std::fabs(phi) < 1e-15) continue;
        const double cs = std::cos(phi), sn = std::sin(phi);
        const Eigen::VectorXd xj = l.col(j), xk = l.col(k);
        l.col(j) = cs * xj + sn * xk;
        l.col(k) = -sn * xj + cs * xk;
        const Eigen::VectorXd rj = out.rotation.col(j), rk = out.rotation.col(k);
        out.rotation.col(j) = cs * rj + sn * rk;
        out.rotation.col(k) = -sn * rj + cs * rk;
      }
    }
    out.sweeps = sweep + 1;
    const double value = varimax_criterion(l);
    const double gain = value - out.criterion.back();
    out.criterion.push_back(value);
    if (gain < options.tolerance) {
      out.converged = true;
      break;
    }
  }

  Eigen::MatrixXd rotated = h.asDiagonal() * l;
  fix_signs(rotated);

  // Order factors by the variance they carry after rotation.
  const Eigen::VectorXd ss = rotated.colwise().squaredNorm().transpose();
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ss(a) > ss(b); });
  LoadingMatrix& res = out.rotated;
  res.loadings.resize(p, m);
  res.eigenvalues.resize(m);
  for (Index j = 0; j < m; ++j) {
    res.loadings.col(j) = rotated.col(order[static_cast<std::size_t>(j)]);
    res.eigenvalues(j) = ss(order[static_cast<std::size_t>(j)]);
  }
  fill_variance(res, p);
  return out;
}

FactorAssignment prune(const LoadingMatrix& rotated, const PruneOptions& options, const ItemMatrix* data) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) throw std::invalid_argument("prune: threshold must lie in (0,1)");
  if (options.cross_margin < 0.0) throw std::invalid_argument("prune: cross_margin must be nonnegative");
  const Index p = rotated.loadings.rows();
  const Index m = rotated.loadings.cols();
  FactorAssignment out;
  out.factor_items.resize(static_cast<std::size_t>(m));

  std::vector<std::vector<std::pair<double, int>>> members(static_cast<std::size_t>(m));
  for (Index i = 0; i < p; ++i) {
    const int item = rotated.items[static_cast<std::size_t>(i)];
    Index best = 0;
    double top = -1.0, second = -1.0;
    for (Index j = 0; j < m; ++j) {
      const double a = std::fabs(rotated.loadings(i, j));
      if (a > top) {
        second = top;
        top = a;
        best = j;
      } else if (a > second) {
        second = a;
      }
    }
    if (top < options.threshold) {
      out.dropped.push_back({item, DropReason::low_loading, top});
    } else if (m > 1 && top - second < options.cross_margin) {
      out.dropped.push_back({item, DropReason::cross_loading, top});
    } else {
      out.retained_items.push_back(item);
      out.factor_of[item] = static_cast<int>(best);
      members[static_cast<std::size_t>(best)].push_back({top, item});
    }
  }
  for (Index j = 0; j < m; ++j) {
    auto& list = members[static_cast<std::size_t>(j)];
    std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [loading, item] : list) out.factor_items[static_cast<std::size_t>(j)].push_back(item);
    if (list.size() < 2) {
      out.warnings.push_back("factor " + std::to_string(j + 1) + " retains " + std::to_string(list.size()) +
                             " item(s)");
    }
  }

  out.factor_alpha.assign(static_cast<std::size_t>(m), std::nullopt);
  if (data) {
    for (Index j = 0; j < m; ++j) {
      const auto& list = out.factor_items[static_cast<std::size_t>(j)];
      if (list.size() < 2) continue;
      Eigen::MatrixXd cols(data->values.rows(), static_cast<Index>(list.size()));
      for (std::size_t c = 0; c < list.size(); ++c) {
        auto it = std::find(data->items.begin(), data->items.end(), list[c]);
        if (it == data->items.end()) throw std::invalid_argument("prune: data lacks item " + std::to_string(list[c]));
        cols.col(static_cast<Index>(c)) = data->values.col(it - data->items.begin());
      }
      try {
        out.factor_alpha[static_cast<std::size_t>(j)] = cronbach_alpha(cols);
      } catch (const std::exception&) {
      }
    }
  }
  return out;
}

std::vector<std::string> hint_mismatches(const FactorAssignment& assignment, const VariableCatalog& catalog) {
  std::vector<std::string> out;
  std::map<std::string, std::set<int>> hint_factors;
  for (std::size_t f = 0; f < assignment.factor_items.size(); ++f) {
    std::set<std::string> hints;
    for (int item : assignment.factor_items[f]) {
      if (!catalog.contains(item)) continue;
      const auto& hint = catalog.item(item).latent_hint;
      if (!hint) continue;
      hints.insert(*hint);
      hint_factors[*hint].insert(static_cast<int>(f));
    }
    if (hints.size() > 1) {
      std::string msg = "factor " + std::to_string(f + 1) + " merges groups:";
      for (const auto& h : hints) msg += " [" + h + "]";
      out.push_back(std::move(msg));
    }
  }
  for (const auto& [hint, factors] : hint_factors) {
    if (factors.size() > 1) {
      out.push_back("group [" + hint + "] is split across " + std::to_string(factors.size()) + " factors");
    }
  }
  return out;
}

EfaResult run(const ItemMatrix& data, const PruneOptions& prune_options, const VariableCatalog* catalog) {
  EfaResult out;
  const Eigen::MatrixXd r = correlation(data.values);
  out.unrotated = extract_pca(r, data.items);
  out.rotation = rotate_varimax(out.unrotated);
  out.assignment = prune(out.rotation.rotated, prune_options, &data);
  if (catalog) out.hint_mismatches = hint_mismatches(out.assignment, *catalog);
  return out;
}

}  // namespace lockserv::efa
