#include "lockserv/ahp.hpp"

#include "lockserv/dataset.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lockserv::ahp {

namespace {

constexpr const char* kJudgmentHeader = "respondent_id,level,left_factor,right_factor,selection";
constexpr const char* kCriteriaLevel = "NA";

int index_of(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

// --- JudgmentMatrix --------------------------------------------------------

JudgmentMatrix::JudgmentMatrix(Eigen::MatrixXd a, double tolerance) : a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() == 0) throw std::invalid_argument("judgment matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    if (std::fabs(a_(i, i) - 1.0) > tolerance) throw std::invalid_argument("judgment matrix diagonal must be 1");
    for (Eigen::Index j = 0; j < a_.cols(); ++j) {
      if (!(a_(i, j) > 0.0) || !std::isfinite(a_(i, j))) throw std::invalid_argument("judgment entries must be positive");
      if (std::fabs(a_(i, j) * a_(j, i) - 1.0) > tolerance) throw std::invalid_argument("judgment matrix is not reciprocal");
    }
  }
}

JudgmentMatrix JudgmentMatrix::ones(int n) { return JudgmentMatrix(Eigen::MatrixXd::Ones(n, n)); }

JudgmentMatrix JudgmentMatrix::from_weights(std::span<const double> w) {
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = i == j ? 1.0 : w[static_cast<std::size_t>(i)] / w[static_cast<std::size_t>(j)];
  return JudgmentMatrix(std::move(a));
}

// --- Hierarchy / WeightVector ----------------------------------------------

Hierarchy Hierarchy::standard() {
  return Hierarchy{{
      {"WLOE", {"Safe & security", "Time & convenience"}},
      {"WLFP", {"Lockage regulation", "Supporting facilities"}},
      {"WLMS", {"Comfortable conditions", "Staff skills"}},
  }};
}

std::vector<std::string> Hierarchy::criterion_names() const {
  std::vector<std::string> out;
  for (const auto& c : criteria) out.push_back(c.name);
  return out;
}

std::vector<std::string> Hierarchy::leaves() const {
  std::vector<std::string> out;
  for (const auto& c : criteria) out.insert(out.end(), c.leaves.begin(), c.leaves.end());
  return out;
}

std::optional<std::size_t> Hierarchy::criterion_of(const std::string& leaf) const {
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (index_of(criteria[c].leaves, leaf) >= 0) return c;
  }
  return std::nullopt;
}

WeightVector WeightVector::make(std::vector<std::string> names, std::vector<double> weights) {
  if (names.size() != weights.size()) throw std::invalid_argument("weight/name count mismatch");
  WeightVector w{std::move(names), std::move(weights), {}};
  std::vector<std::size_t> order(w.names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (w.weights[a] != w.weights[b]) return w.weights[a] > w.weights[b];
    return w.names[a] < w.names[b];
  });
  w.ranks.assign(w.names.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) w.ranks[order[r]] = static_cast<int>(r) + 1;
  return w;
}

double WeightVector::weight(const std::string& name) const {
  const int i = index_of(names, name);
  if (i < 0) throw std::out_of_range("no weight for '" + name + "'");
  return weights[static_cast<std::size_t>(i)];
}

int WeightVector::rank(const std::string& name) const {
  const int i = index_of(names, name);
  if (i < 0) throw std::out_of_range("no rank for '" + name + "'");
  return ranks[static_cast<std::size_t>(i)];
}

// --- Judgment ingestion ----------------------------------------------------

double selection_value(const std::string& selection) {
  if (selection == "E") return 1.0;
  if (selection.size() == 2 && (selection[0] == 'L' || selection[0] == 'R')) {
    const int v = selection[1] - '0';
    if (v == 3 || v == 5 || v == 7 || v == 9) return selection[0] == 'L' ? v : 1.0 / v;
  }
  throw InputError("unknown scale selection '" + selection + "'");
}

std::string selection_code(double value) {
  if (std::fabs(value - 1.0) < 1e-9) return "E";
  for (int v : {3, 5, 7, 9}) {
    if (std::fabs(value - v) < 1e-9) return "L" + std::to_string(v);
    if (std::fabs(value - 1.0 / v) < 1e-9) return "R" + std::to_string(v);
  }
  throw std::invalid_argument("value is not on the 1/9..9 odd scale");
}

std::vector<JudgmentRow> parse_judgment_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("judgment file is empty");
  line = csv::strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kJudgmentHeader) throw InputError(std::string("malformed judgment header: expected '") + kJudgmentHeader + "'");
  std::vector<JudgmentRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = csv::strip_cr(line);
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != 5) throw InputError("judgment line " + std::to_string(line_no) + ": expected 5 fields");
    selection_value(f[4]);
    rows.push_back({f[0], f[1], f[2], f[3], f[4]});
  }
  return rows;
}

std::vector<JudgmentRow> load_judgments(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open judgments " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_judgment_csv(buf.str());
}

std::string format_judgment_csv(std::span<const JudgmentRow> rows) {
  std::string out = std::string(kJudgmentHeader) + "\n";
  for (const auto& r : rows) {
    out += csv::quote(r.respondent_id) + ',' + csv::quote(r.level) + ',' + csv::quote(r.left) + ',' + csv::quote(r.right) +
           ',' + r.selection + '\n';
  }
  return out;
}

std::vector<RespondentJudgments> parse_judgments(std::span<const JudgmentRow> rows, const Hierarchy& h) {
  const auto criteria = h.criterion_names();
  struct Pending {
    std::string id;
    Eigen::MatrixXd criteria;
    std::vector<Eigen::MatrixXd> leaves;
    std::set<std::tuple<int, int, int>> seen;  // (level, i, j) with i < j
  };
  std::vector<Pending> pending;
  auto find_or_add = [&](const std::string& id) -> Pending& {
    for (auto& p : pending)
      if (p.id == id) return p;
    Pending p{id, Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(criteria.size()), static_cast<Eigen::Index>(criteria.size())), {}, {}};
    for (const auto& c : h.criteria) {
      const auto n = static_cast<Eigen::Index>(c.leaves.size());
      p.leaves.push_back(Eigen::MatrixXd::Ones(n, n));
    }
    pending.push_back(std::move(p));
    return pending.back();
  };

  for (const auto& row : rows) {
    Pending& p = find_or_add(row.respondent_id);
    int level = -1;
    const std::vector<std::string>* names = &criteria;
    Eigen::MatrixXd* target = &p.criteria;
    if (row.level != kCriteriaLevel && row.level != "criteria") {
      level = index_of(criteria, row.level);
      if (level < 0) throw InputError("respondent " + row.respondent_id + ": unknown level '" + row.level + "'");
      names = &h.criteria[static_cast<std::size_t>(level)].leaves;
      target = &p.leaves[static_cast<std::size_t>(level)];
    }
    int i = index_of(*names, row.left), j = index_of(*names, row.right);
    if (i < 0 || j < 0 || i == j) {
      throw InputError("respondent " + row.respondent_id + ": invalid comparison '" + row.left + "' vs '" + row.right + "'");
    }
    double v = selection_value(row.selection);
    if (!p.seen.insert({level, std::min(i, j), std::max(i, j)}).second) {
      throw InputError("respondent " + row.respondent_id + ": multiple cells selected for '" + row.left + "' vs '" + row.right + "'");
    }
    (*target)(i, j) = v;
    (*target)(j, i) = 1.0 / v;
  }

  std::vector<RespondentJudgments> out;
  for (auto& p : pending) {
    std::size_t expected = criteria.size() * (criteria.size() - 1) / 2;
    for (const auto& c : h.criteria) expected += c.leaves.size() * (c.leaves.size() - 1) / 2;
    if (p.seen.size() != expected) throw InputError("respondent " + p.id + ": missing comparison");
    RespondentJudgments r;
    r.id = p.id;
    r.criteria = JudgmentMatrix(std::move(p.criteria));
    for (auto& m : p.leaves) r.leaves.emplace_back(std::move(m));
    out.push_back(std::move(r));
  }
  return out;
}

// --- Weights and consistency -----------------------------------------------

JudgmentMatrix aggregate_geomean(std::span<const JudgmentMatrix> ms) {
  if (ms.empty()) throw std::invalid_argument("aggregate_geomean: no matrices");
  const int n = ms.front().size();
  Eigen::MatrixXd logsum = Eigen::MatrixXd::Zero(n, n);
  for (const auto& m : ms) {
    if (m.size() != n) throw std::invalid_argument("aggregate_geomean: dimension mismatch");
    logsum += m.values().array().log().matrix();
  }
  Eigen::MatrixXd out = (logsum / static_cast<double>(ms.size())).array().exp().matrix();
  // exp(-x) and 1/exp(x) can differ in the last bit; pin the lower triangle.
  for (int i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (int j = 0; j < i; ++j) out(i, j) = 1.0 / out(j, i);
  }
  return JudgmentMatrix(std::move(out));
}

EigenWeights weights_eigen(const JudgmentMatrix& m, double tolerance, int max_iterations) {
  const int n = m.size();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  EigenWeights out;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd next = m.values() * w;
    next /= next.sum();
    const double change = (next - w).lpNorm<Eigen::Infinity>();
    w = std::move(next);
    out.iterations = it;
    if (change < tolerance) break;
    if (it == max_iterations) throw std::runtime_error("weights_eigen: power iteration did not converge");
  }
  out.weights.assign(w.data(), w.data() + n);
  out.lambda_max = (m.values() * w).sum();
  return out;
}

double random_index(int n) {
  static constexpr double ri[] = {0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49};
  if (n < 1 || n > 10) throw std::out_of_range("random index is tabulated for n = 1..10");
  return ri[n - 1];
}

Consistency consistency(const JudgmentMatrix& m, double lambda_max, double threshold) {
  const int n = m.size();
  Consistency c;
  if (n <= 2) return c;
  c.ci = (lambda_max - n) / (n - 1);
  c.cr = c.ci / random_index(n);
  c.pass = c.cr < threshold;
  return c;
}

WeightVector global_weights(const Hierarchy& h, const WeightVector& criteria, std::span<const WeightVector> leaves) {
  if (leaves.size() != h.criteria.size()) throw std::invalid_argument("global_weights: one leaf vector per criterion required");
  std::vector<std::string> names;
  std::vector<double> weights;
  for (std::size_t c = 0; c < h.criteria.size(); ++c) {
    const double parent = criteria.weight(h.criteria[c].name);
    for (const auto& leaf : h.criteria[c].leaves) {
      names.push_back(leaf);
      weights.push_back(parent * leaves[c].weight(leaf));
    }
  }
  return WeightVector::make(std::move(names), std::move(weights));
}

double spearman(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two equal-length rankings");
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += static_cast<double>((a[i] - b[i]) * (a[i] - b[i]));
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

BiasReport bias_report(const std::map<std::string, double>& ow_source, const WeightVector& sw, const Hierarchy& h) {
  const auto leaves = h.leaves();
  if (ow_source.size() != leaves.size() || sw.names.size() != leaves.size()) {
    throw std::invalid_argument("bias_report: both sides need exactly the hierarchy's factors");
  }
  double total = 0.0;
  std::vector<double> ow, swv;
  for (const auto& leaf : leaves) {
    auto it = ow_source.find(leaf);
    if (it == ow_source.end()) throw std::invalid_argument("bias_report: factor-name mismatch, OW lacks '" + leaf + "'");
    if (index_of(sw.names, leaf) < 0) throw std::invalid_argument("bias_report: factor-name mismatch, SW lacks '" + leaf + "'");
    ow.push_back(it->second);
    swv.push_back(sw.weight(leaf));
    total += it->second;
  }
  if (!(total > 0.0)) throw std::domain_error("bias_report: objective weights sum to zero");
  for (double& v : ow) v /= total;

  BiasReport rep;
  rep.ow = WeightVector::make(leaves, std::move(ow));
  rep.sw = WeightVector::make(leaves, std::move(swv));
  rep.spearman = spearman(rep.ow.ranks, rep.sw.ranks);
  for (const auto& c : h.criteria) {
    CriterionDominance d;
    d.criterion = c.name;
    auto top = [&](const WeightVector& w) {
      std::string best = c.leaves.front();
      for (const auto& leaf : c.leaves) {
        if (w.rank(leaf) < w.rank(best)) best = leaf;
      }
      return best;
    };
    d.ow_dominant = top(rep.ow);
    d.sw_dominant = top(rep.sw);
    d.agree = d.ow_dominant == d.sw_dominant;
    if (!d.agree) {
      rep.bias_flags.push_back(c.name + ": customers favour " + d.ow_dominant + ", suppliers favour " + d.sw_dominant);
    }
    rep.dominance.push_back(std::move(d));
  }
  return rep;
}

SupplierAnalysis analyze(std::span<const JudgmentRow> rows, const Hierarchy& h, const SupplierOptions& options) {
  const auto respondents = parse_judgments(rows, h);
  if (respondents.empty()) throw InputError("no supplier judgments");
  SupplierAnalysis out;
  std::vector<JudgmentMatrix> crit;
  std::vector<std::vector<JudgmentMatrix>> leaf(h.criteria.size());
  std::vector<std::string> inconsistent;
  for (const auto& r : respondents) {
    RespondentConsistency rc;
    rc.id = r.id;
    rc.criteria = consistency(r.criteria, weights_eigen(r.criteria).lambda_max, options.cr_threshold);
    rc.consistent = rc.criteria.pass;
    for (const auto& m : r.leaves) {
      rc.leaves.push_back(consistency(m, weights_eigen(m).lambda_max, options.cr_threshold));
      rc.consistent = rc.consistent && rc.leaves.back().pass;
    }
    if (!rc.consistent) inconsistent.push_back(r.id);
    const bool use = rc.consistent || !options.exclude_inconsistent;
    if (use) {
      crit.push_back(r.criteria);
      for (std::size_t c = 0; c < r.leaves.size(); ++c) leaf[c].push_back(r.leaves[c]);
      ++out.used;
    }
    out.respondents.push_back(std::move(rc));
  }
  if (!inconsistent.empty()) {
    std::string ids;
    for (const auto& id : inconsistent) ids += (ids.empty() ? "" : ", ") + id;
    out.warnings.push_back(std::to_string(inconsistent.size()) + " of " + std::to_string(respondents.size()) +
                           " respondents fail the consistency check" + (options.exclude_inconsistent ? " and were excluded" : "") +
                           ": " + ids);
  }
  if (out.used == 0) throw InputError("every supplier respondent was excluded as inconsistent");

  out.criteria_matrix = aggregate_geomean(crit);
  const auto cw = weights_eigen(out.criteria_matrix);
  out.criteria_weights = WeightVector::make(h.criterion_names(), cw.weights);
  out.criteria_consistency = consistency(out.criteria_matrix, cw.lambda_max, options.cr_threshold);
  for (std::size_t c = 0; c < h.criteria.size(); ++c) {
    out.leaf_matrices.push_back(aggregate_geomean(leaf[c]));
    const auto lw = weights_eigen(out.leaf_matrices.back());
    out.leaf_weights.push_back(WeightVector::make(h.criteria[c].leaves, lw.weights));
    out.leaf_consistency.push_back(consistency(out.leaf_matrices.back(), lw.lambda_max, options.cr_threshold));
  }
  out.global = global_weights(h, out.criteria_weights, out.leaf_weights);
  return out;
}

}  // namespace lockserv::ahp
