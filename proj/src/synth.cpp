#include "lockserv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lockserv::synth {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int scale_position(double v) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(ahp::kSaatyScale.size()); ++i) {
    const double d = std::fabs(std::log(v) - std::log(ahp::kSaatyScale[static_cast<std::size_t>(i)]));
    if (d < best_d - 1e-12) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::string padded_id(char prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

std::string pick(PortableRng& rng, std::initializer_list<const char*> options) {
  return *(options.begin() + rng.below(options.size()));
}

}  // namespace

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::sem: return "sem";
    case Kind::ahp: return "ahp";
    case Kind::probit: return "probit";
  }
  return "sem";
}

Kind kind_from_string(const std::string& s) {
  if (s == "sem") return Kind::sem;
  if (s == "ahp") return Kind::ahp;
  if (s == "probit") return Kind::probit;
  throw std::invalid_argument("unknown generator kind '" + s + "'");
}

void validate(const Thresholds& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw std::invalid_argument("likert thresholds must ascend strictly");
  }
}

int discretize(double z, const Thresholds& t) {
  int c = 1;
  for (double cut : t) c += z > cut ? 1 : 0;
  return c;
}

MatrixXd SemTruth::sigma() const { return sem::implied_sigma(matrices); }
MatrixXd SemTruth::latent_covariance() const { return sem::latent_covariance(matrices); }

SemTruth truth_from_model(const sem::MeasurementModel& model, const VectorXd& theta, sem::Identification id) {
  sem::ParameterTable table(model, id);
  SemTruth t;
  t.items = model.observed();
  for (const auto& l : model.latents()) t.latents.push_back(l.name);
  t.matrices = table.unpack(theta);
  return t;
}

SemSurvey gen_sem_survey(const SemSurveySpec& spec) {
  validate(spec.likert_thresholds);
  const auto& t = spec.truth;
  const Index p = static_cast<Index>(t.items.size());
  if (t.matrices.lambda.rows() != p) throw std::invalid_argument("truth items and loading rows differ");
  const MatrixXd sigma = t.sigma();

  // Joint covariance of the indicators and, optionally, one latent score.
  std::optional<Index> delay_latent;
  if (spec.delay_factor) {
    auto it = std::find(t.latents.begin(), t.latents.end(), *spec.delay_factor);
    if (it == t.latents.end()) throw std::invalid_argument("unknown delay factor '" + *spec.delay_factor + "'");
    delay_latent = it - t.latents.begin();
  }
  const Index q = p + (delay_latent ? 1 : 0);
  MatrixXd joint(q, q);
  joint.topLeftCorner(p, p) = sigma;
  if (delay_latent) {
    const MatrixXd phi = t.latent_covariance();
    const VectorXd cross = t.matrices.lambda * phi.col(*delay_latent);
    joint.topRightCorner(p, 1) = cross;
    joint.bottomLeftCorner(1, p) = cross.transpose();
    joint(p, p) = phi(*delay_latent, *delay_latent);
  }
  Eigen::LLT<MatrixXd> llt(joint);
  if (llt.info() != Eigen::Success) throw sem::ModelError("true implied covariance is not positive definite");
  const MatrixXd chol = llt.matrixL();
  const VectorXd sd = sigma.diagonal().cwiseSqrt();
  const double latent_sd = delay_latent ? std::sqrt(joint(p, p)) : 1.0;

  const int k = spec.catalog.size();
  PortableRng rng(spec.seed);
  SemSurvey out;
  out.items = t.items;
  out.continuous.resize(static_cast<Index>(spec.n), p);
  std::vector<RespondentRecord> records;
  records.reserve(spec.n);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.n).size()));
  VectorXd z(q);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < q; ++j) z(j) = rng.normal();
    const VectorXd v = chol * z;
    RespondentRecord r;
    r.id = padded_id('R', i + 1, width);
    r.ratings.assign(static_cast<std::size_t>(k), std::nullopt);
    for (Index j = 0; j < p; ++j) {
      out.continuous(static_cast<Index>(i), j) = v(j);
      const int cat = discretize(v(j) / sd(j), spec.likert_thresholds);
      const int item = t.items[static_cast<std::size_t>(j)];
      if (item == 0) {
        r.sati_before = cat;
      } else if (item == k + 1) {
        r.sati_after = cat;
      } else if (spec.catalog.contains(item)) {
        r.ratings[static_cast<std::size_t>(item - 1)] = cat;
      }
    }
    const double noise = rng.normal();
    double score = noise;
    if (delay_latent) {
      const double rho = spec.delay_correlation;
      score = rho * v(p) / latent_sd + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * noise;
    }
    r.delay_hours = std::round(spec.delay_median * std::exp(spec.delay_spread * score) * 10.0) / 10.0;
    r.age_band = pick(rng, {"18-30", "31-40", "41-50", "51-60", "60+"});
    r.gender = pick(rng, {"male", "male", "male", "female"});
    r.experience_band = pick(rng, {"<5", "5-10", "11-20", ">20"});
    r.vessel_type = pick(rng, {"bulk", "container", "tanker", "general"});
    r.dwt_band = pick(rng, {"<1000", "1000-2000", "2000-3000", ">3000"});
    records.push_back(std::move(r));
  }
  out.dataset = SurveyDataset(spec.catalog, std::move(records));
  return out;
}

double round_to_scale(double ratio) {
  if (!(ratio > 0.0)) throw std::invalid_argument("ratio must be positive");
  return ahp::kSaatyScale[static_cast<std::size_t>(scale_position(ratio))];
}

ahp::JudgmentMatrix gen_judgment_matrix(std::span<const double> w, double noise, PortableRng& rng) {
  const Index n = static_cast<Index>(w.size());
  MatrixXd a = MatrixXd::Ones(n, n);
  const int top = static_cast<int>(ahp::kSaatyScale.size()) - 1;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      int pos = scale_position(w[static_cast<std::size_t>(i)] / w[static_cast<std::size_t>(j)]);
      if (noise > 0.0 && rng.uniform() < noise) {
        int moved = pos + (rng.below(2) == 0 ? -1 : 1);
        if (moved < 0 || moved > top) moved = pos + (moved < 0 ? 1 : -1);
        pos = moved;
      }
      a(i, j) = ahp::kSaatyScale[static_cast<std::size_t>(pos)];
      a(j, i) = 1.0 / a(i, j);
    }
  }
  return ahp::JudgmentMatrix(a);
}

std::vector<ahp::JudgmentRow> gen_ahp_judgments(const AhpTruth& truth, double noise, int respondents, std::uint64_t seed) {
  if (truth.leaves.size() != truth.hierarchy.criteria.size() || truth.criteria.size() != truth.hierarchy.criteria.size()) {
    throw std::invalid_argument("weights do not match the hierarchy");
  }
  PortableRng rng(seed);
  std::vector<ahp::JudgmentRow> rows;
  const auto criteria = truth.hierarchy.criterion_names();
  const int width = std::max<int>(2, static_cast<int>(std::to_string(respondents).size()));
  auto emit = [&](const std::string& id, const std::string& level, const std::vector<std::string>& names,
                  const ahp::JudgmentMatrix& m) {
    for (int i = 0; i < m.size(); ++i) {
      for (int j = i + 1; j < m.size(); ++j) {
        rows.push_back({id, level, names[static_cast<std::size_t>(i)], names[static_cast<std::size_t>(j)], ahp::selection_code(m(i, j))});
      }
    }
  };
  for (int r = 0; r < respondents; ++r) {
    const std::string id = padded_id('S', static_cast<std::size_t>(r) + 1, width);
    emit(id, "NA", criteria, gen_judgment_matrix(truth.criteria, noise, rng));
    for (std::size_t c = 0; c < criteria.size(); ++c) {
      emit(id, criteria[c], truth.hierarchy.criteria[c].leaves, gen_judgment_matrix(truth.leaves[c], noise, rng));
    }
  }
  return rows;
}

ProbitSample gen_probit(const VectorXd& beta, const VectorXd& kappa, std::size_t n, std::uint64_t seed) {
  for (Index i = 1; i < kappa.size(); ++i) {
    if (!(kappa(i) > kappa(i - 1))) throw std::invalid_argument("cutpoints must ascend strictly");
  }
  PortableRng rng(seed);
  ProbitSample s;
  s.x.resize(static_cast<Index>(n), beta.size());
  s.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (Index j = 0; j < beta.size(); ++j) s.x(static_cast<Index>(i), j) = rng.normal();
    const double latent = s.x.row(static_cast<Index>(i)).dot(beta) + rng.normal();
    int y = 1;
    for (Index k = 0; k < kappa.size(); ++k) y += latent > kappa(k) ? 1 : 0;
    s.y[i] = y;
  }
  return s;
}

namespace fixture {

namespace {

struct Loading {
  int item;
  int factor;
  double std_loading;
};

// Main loadings follow the published first-order model; items 4, 27 and 28
// are weak or split between two factors.
const std::vector<Loading>& loadings() {
  static const std::vector<Loading> l{
      {1, 0, 0.759},  {2, 0, 0.827},  {3, 0, 0.665},
      {5, 1, 0.876},  {6, 1, 0.731},  {7, 1, 0.667},  {8, 1, 0.763},  {9, 1, 0.808},  {10, 1, 0.740},
      {11, 2, 0.728}, {12, 2, 0.760}, {13, 2, 0.846}, {14, 2, 0.573},
      {15, 3, 0.700}, {16, 3, 0.722}, {17, 3, 0.608}, {18, 3, 0.654}, {19, 3, 0.597}, {20, 3, 0.765}, {21, 3, 0.636},
      {22, 4, 0.743}, {23, 4, 0.767}, {24, 4, 0.846},
      {25, 5, 0.757}, {26, 5, 0.573}, {29, 5, 0.624}, {30, 5, 0.617}, {31, 5, 0.667}, {32, 5, 0.756},
  };
  return l;
}

struct Split {
  int item;
  int factor_a;
  double a;
  int factor_b;
  double b;
};

const std::vector<Split>& weak_items() {
  static const std::vector<Split> w{{4, 0, 0.25, 1, 0.15}, {27, 5, 0.45, 4, 0.40}, {28, 5, 0.45, 3, 0.40}};
  return w;
}

// Factor correlations in order Safe, Time, Lockage, Supporting, Comfort, Staff.
Eigen::MatrixXd factor_correlation() {
  Eigen::MatrixXd r(6, 6);
  r << 1.000, 0.276, 0.298, 0.231, 0.146, 0.272,
       0.276, 1.000, 0.308, 0.199, 0.213, 0.262,
       0.298, 0.308, 1.000, 0.424, 0.465, 0.562,
       0.231, 0.199, 0.424, 1.000, 0.321, 0.463,
       0.146, 0.213, 0.465, 0.321, 1.000, 0.588,
       0.272, 0.262, 0.562, 0.463, 0.588, 1.000;
  return r;
}

constexpr double kGammaShrink = 0.8;
const double kGamma[6] = {0.235, 0.417, 0.151, 0.300, 0.179, 0.247};
constexpr double kQualityBefore = 0.735;
constexpr double kQualityAfter = 0.822;

double item_sd(int item) { return 0.7 + 0.05 * static_cast<double>(item % 5); }

}  // namespace

const std::vector<std::string>& factor_names() {
  static const std::vector<std::string> n{"Safe & security",        "Time & convenience",     "Lockage regulation",
                                          "Supporting facilities", "Comfortable conditions", "Staff skills"};
  return n;
}

SemTruth truth() {
  SemTruth t;
  t.latents = factor_names();
  t.latents.push_back(kQuality);
  const Index m = 7;
  std::vector<std::pair<int, Eigen::RowVectorXd>> rows;
  auto add = [&](int item, Eigen::RowVectorXd std_row) { rows.emplace_back(item, std::move(std_row)); };
  for (const auto& l : loadings()) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(m);
    r(l.factor) = l.std_loading;
    add(l.item, r);
  }
  for (const auto& w : weak_items()) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(m);
    r(w.factor_a) = w.a;
    r(w.factor_b) = w.b;
    add(w.item, r);
  }
  Eigen::RowVectorXd before = Eigen::RowVectorXd::Zero(m), after = Eigen::RowVectorXd::Zero(m);
  before(6) = kQualityBefore;
  after(6) = kQualityAfter;
  add(0, before);
  add(33, after);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  t.matrices.beta = Eigen::MatrixXd::Zero(m, m);
  for (Index f = 0; f < 6; ++f) t.matrices.beta(6, f) = kGammaShrink * kGamma[f];
  t.matrices.psi = Eigen::MatrixXd::Zero(m, m);
  const Eigen::MatrixXd phi = factor_correlation();
  t.matrices.psi.topLeftCorner(6, 6) = phi;
  const Eigen::VectorXd g = t.matrices.beta.row(6).head(6).transpose();
  t.matrices.psi(6, 6) = 1.0 - g.dot(phi * g);

  const Index p = static_cast<Index>(rows.size());
  t.matrices.lambda = Eigen::MatrixXd::Zero(p, m);
  t.matrices.theta.resize(p);
  const Eigen::MatrixXd latent = sem::latent_covariance(t.matrices);
  for (Index r = 0; r < p; ++r) {
    const auto& [item, std_row] = rows[static_cast<std::size_t>(r)];
    const double sd = item_sd(item);
    t.items.push_back(item);
    t.matrices.lambda.row(r) = sd * std_row;
    const double common = std_row * latent * std_row.transpose();
    t.matrices.theta(r) = sd * sd * (1.0 - common);
  }
  return t;
}

sem::MeasurementModel model() {
  std::vector<sem::LatentSpec> latents;
  const auto& names = factor_names();
  for (std::size_t f = 0; f < names.size(); ++f) {
    sem::LatentSpec spec{names[f], {}};
    for (const auto& l : loadings())
      if (l.factor == static_cast<int>(f)) spec.indicators.push_back(l.item);
    latents.push_back(std::move(spec));
  }
  latents.push_back({kQuality, {0, 33}});
  std::vector<sem::Path> paths;
  for (const auto& n : names) paths.push_back({n, kQuality});
  std::vector<std::pair<std::string, std::string>> cov;
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = a + 1; b < names.size(); ++b) cov.emplace_back(names[a], names[b]);
  return sem::MeasurementModel(std::move(latents), std::move(paths), std::move(cov));
}

SemSurveySpec survey_spec(std::size_t n, std::uint64_t seed) {
  SemSurveySpec s;
  s.truth = truth();
  s.catalog = VariableCatalog::standard();
  s.n = n;
  s.seed = seed;
  s.delay_factor = "Time & convenience";
  return s;
}

AhpTruth supplier_truth() {
  AhpTruth t;
  t.hierarchy = ahp::Hierarchy::standard();
  // Suppliers favour regulation and staff over waiting time.
  t.criteria = {0.2, 0.6, 0.2};
  t.leaves.assign(t.hierarchy.criteria.size(), {});
  for (std::size_t c = 0; c < t.hierarchy.criteria.size(); ++c) {
    const auto& leaves = t.hierarchy.criteria[c].leaves;
    std::vector<double> w(leaves.size(), 1.0);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (leaves[i] == "Safe & security") w[i] = 0.75;
      else if (leaves[i] == "Time & convenience") w[i] = 0.25;
      else if (leaves[i] == "Lockage regulation") w[i] = 0.8;
      else if (leaves[i] == "Supporting facilities") w[i] = 0.2;
      else if (leaves[i] == "Comfortable conditions") w[i] = 0.3;
      else if (leaves[i] == "Staff skills") w[i] = 0.7;
    }
    double s = 0.0;
    for (double v : w) s += v;
    for (double& v : w) v /= s;
    t.leaves[c] = std::move(w);
  }
  return t;
}

}  // namespace fixture

}  // namespace lockserv::synth
