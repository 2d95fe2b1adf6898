#pragma once

#include "lockserv/dataset.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lockserv::efa {

/// Loadings of items (rows) on factors (columns). For an unrotated solution
/// `eigenvalues` are the retained eigenvalues of R; after rotation they hold
/// each factor's sum of squared loadings.
struct LoadingMatrix {
  std::vector<int> items;
  Eigen::MatrixXd loadings;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd variance_explained;  // percent
  Eigen::VectorXd cumulative;          // percent
  Eigen::VectorXd spectrum;            // all eigenvalues of R, descending

  int factors() const { return static_cast<int>(loadings.cols()); }
  Eigen::VectorXd communalities() const { return loadings.rowwise().squaredNorm(); }
};

inline constexpr double kKaiserTolerance = 1e-12;

/// Principal-component extraction keeping eigenvalues strictly above 1.
/// `items` labels the rows; defaults to 1..p.
LoadingMatrix extract_pca(const Eigen::MatrixXd& r, std::vector<int> items = {});

struct VarimaxOptions {
  double tolerance = 1e-8;
  int max_sweeps = 500;
  bool kaiser_normalize = true;
};

struct RotationResult {
  LoadingMatrix rotated;
  Eigen::MatrixXd rotation;  // orthogonal; rotated = unrotated * rotation (before column reordering)
  std::vector<double> criterion;  // varimax criterion after each sweep, starting with the input
  int sweeps = 0;
  bool converged = true;
};

double varimax_criterion(const Eigen::MatrixXd& loadings);
RotationResult rotate_varimax(const LoadingMatrix& unrotated, const VarimaxOptions& options = {});

enum class DropReason { low_loading, cross_loading };
std::string to_string(DropReason reason);

struct DroppedItem {
  int item = 0;
  DropReason reason = DropReason::low_loading;
  double max_abs_loading = 0.0;
};

struct PruneOptions {
  double threshold = 0.5;
  double cross_margin = 0.2;
};

struct FactorAssignment {
  std::vector<int> retained_items;
  std::vector<DroppedItem> dropped;
  std::map<int, int> factor_of;                  // item -> factor (0-based)
  std::vector<std::vector<int>> factor_items;    // per factor, in descending |loading|
  std::vector<std::optional<double>> factor_alpha;
  std::vector<std::string> warnings;
};

/// Drops weak and cross-loading items and assigns survivors to their
/// strongest factor. Ties on the largest |loading| go to the lower factor
/// index. When `data` is given (columns aligned with `rotated.items`), the
/// Cronbach alpha of each factor's items is filled in.
FactorAssignment prune(const LoadingMatrix& rotated, const PruneOptions& options = {},
                       const ItemMatrix* data = nullptr);

struct EfaResult {
  LoadingMatrix unrotated;
  RotationResult rotation;
  FactorAssignment assignment;
  std::vector<std::string> hint_mismatches;
};

/// Full extraction → rotation → pruning on a complete-case item matrix.
EfaResult run(const ItemMatrix& data, const PruneOptions& prune_options = {},
              const VariableCatalog* catalog = nullptr);

/// Describes where the factor solution disagrees with the catalog's a-priori
/// latent groups (a factor mixing groups or a group split across factors).
std::vector<std::string> hint_mismatches(const FactorAssignment& assignment, const VariableCatalog& catalog);

}  // namespace lockserv::efa
