#pragma once

#include <Eigen/Dense>

#include <array>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lockserv::ahp {

/// Square positive reciprocal matrix of pairwise judgments.
class JudgmentMatrix {
 public:
  JudgmentMatrix() = default;
  explicit JudgmentMatrix(Eigen::MatrixXd a, double tolerance = 1e-9);
  static JudgmentMatrix ones(int n);
  /// a_ij = w_i / w_j.
  static JudgmentMatrix from_weights(std::span<const double> w);

  const Eigen::MatrixXd& values() const { return a_; }
  int size() const { return static_cast<int>(a_.rows()); }
  double operator()(int i, int j) const { return a_(i, j); }

 private:
  Eigen::MatrixXd a_;
};

struct Criterion {
  std::string name;
  std::vector<std::string> leaves;
};

struct Hierarchy {
  std::vector<Criterion> criteria;

  /// WLOE, WLFP and WLMS with two service factors each.
  static Hierarchy standard();
  std::vector<std::string> criterion_names() const;
  std::vector<std::string> leaves() const;
  std::optional<std::size_t> criterion_of(const std::string& leaf) const;
};

/// Weights that sum to one with 1-based ranks (descending weight, ties by name).
struct WeightVector {
  std::vector<std::string> names;
  std::vector<double> weights;
  std::vector<int> ranks;

  static WeightVector make(std::vector<std::string> names, std::vector<double> weights);
  double weight(const std::string& name) const;
  int rank(const std::string& name) const;
};

/// Scale cell chosen on one comparison line of the questionnaire.
/// L9..L3 favour the left factor, R3..R9 the right one, E is equal.
double selection_value(const std::string& selection);
std::string selection_code(double value);

inline constexpr std::array<double, 9> kSaatyScale{1.0 / 9, 1.0 / 7, 1.0 / 5, 1.0 / 3, 1.0, 3.0, 5.0, 7.0, 9.0};

struct JudgmentRow {
  std::string respondent_id;
  std::string level;  // "NA" for the criteria layer, else the parent criterion
  std::string left;
  std::string right;
  std::string selection;
};

std::vector<JudgmentRow> parse_judgment_csv(const std::string& text);
std::vector<JudgmentRow> load_judgments(const std::filesystem::path& path);
std::string format_judgment_csv(std::span<const JudgmentRow> rows);

struct RespondentJudgments {
  std::string id;
  JudgmentMatrix criteria;
  std::vector<JudgmentMatrix> leaves;  // one per criterion
};

/// Assembles one matrix set per respondent. Every comparison of the
/// hierarchy must appear exactly once per respondent.
std::vector<RespondentJudgments> parse_judgments(std::span<const JudgmentRow> rows, const Hierarchy& h);

JudgmentMatrix aggregate_geomean(std::span<const JudgmentMatrix> ms);

struct EigenWeights {
  std::vector<double> weights;
  double lambda_max = 0.0;
  int iterations = 0;
};

/// Principal right eigenvector by power iteration, normalized to sum 1.
EigenWeights weights_eigen(const JudgmentMatrix& m, double tolerance = 1e-12, int max_iterations = 10000);

/// Saaty random index for n = 1..10.
double random_index(int n);

struct Consistency {
  double ci = 0.0;
  double cr = 0.0;
  bool pass = true;
};

Consistency consistency(const JudgmentMatrix& m, double lambda_max, double threshold = 0.1);

WeightVector global_weights(const Hierarchy& h, const WeightVector& criteria, std::span<const WeightVector> leaves);

struct CriterionDominance {
  std::string criterion;
  std::string ow_dominant;
  std::string sw_dominant;
  bool agree = true;
};

struct BiasReport {
  WeightVector ow;
  WeightVector sw;
  double spearman = 1.0;
  std::vector<CriterionDominance> dominance;
  std::vector<std::string> bias_flags;
};

/// Spearman rank correlation of two rankings without ties.
double spearman(std::span<const int> a, std::span<const int> b);

/// Compares normalized standardized structural weights (customer view) with
/// the supplier's AHP weights.
BiasReport bias_report(const std::map<std::string, double>& ow_source, const WeightVector& sw, const Hierarchy& h);

struct SupplierOptions {
  double cr_threshold = 0.1;
  bool exclude_inconsistent = false;
};

struct RespondentConsistency {
  std::string id;
  Consistency criteria;
  std::vector<Consistency> leaves;
  bool consistent = true;
};

struct SupplierAnalysis {
  std::vector<RespondentConsistency> respondents;
  std::size_t used = 0;
  JudgmentMatrix criteria_matrix;
  std::vector<JudgmentMatrix> leaf_matrices;
  WeightVector criteria_weights;
  Consistency criteria_consistency;
  std::vector<WeightVector> leaf_weights;
  std::vector<Consistency> leaf_consistency;
  WeightVector global;
  std::vector<std::string> warnings;
};

SupplierAnalysis analyze(std::span<const JudgmentRow> rows, const Hierarchy& h, const SupplierOptions& options = {});

}  // namespace lockserv::ahp
