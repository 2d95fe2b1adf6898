#include "lockserv/scoring.hpp"

#include "lockserv/kernels.hpp"
#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace lockserv::scoring {

namespace {

double weighted_mean(std::span<const double> values, std::span<const double> weights, const char* what) {
  if (values.size() != weights.size()) throw std::invalid_argument(std::string(what) + ": rating/weight count mismatch");
  if (values.empty()) throw std::invalid_argument(std::string(what) + ": nothing to average");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += values[i] * weights[i];
    den += weights[i];
  }
  if (den == 0.0) throw std::domain_error(std::string(what) + ": weights sum to zero");
  return num / den;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ScoreWeights weights_from_estimate(const sem::SemEstimate& estimate, const std::string& quality) {
  const sem::SemEstimate e = estimate.standardized ? estimate : sem::standardize(estimate);
  const auto& st = *e.standardized;
  const auto& model = e.model;
  const int q = model.latent_index(quality);
  ScoreWeights out;

  std::vector<int> row_start;
  int row = 0;
  for (const auto& lat : model.latents()) {
    row_start.push_back(row);
    row += static_cast<int>(lat.indicators.size());
  }
  for (int l = 0; l < model.latent_count(); ++l) {
    if (l == q) continue;
    std::optional<double> w;
    for (const auto& [to, from] : model.path_indices()) {
      if (to == q && from == l) w = st.beta(to, from);
      if (to == l && from == q) w = st.beta(to, from);
    }
    if (!w) continue;
    const auto& lat = model.latents()[static_cast<std::size_t>(l)];
    LatentWeights lw;
    lw.name = lat.name;
    lw.items = lat.indicators;
    lw.weight = *w;
    for (std::size_t k = 0; k < lat.indicators.size(); ++k) {
      lw.item_weights.push_back(st.lambda(row_start[static_cast<std::size_t>(l)] + static_cast<int>(k), l));
      if (!(lw.item_weights.back() > 0.0)) {
        out.warnings.push_back("non-positive indicator weight for item " + std::to_string(lat.indicators[k]) + " of " + lat.name);
      }
    }
    if (!(lw.weight > 0.0)) out.warnings.push_back("non-positive structural weight for " + lat.name);
    out.latents.push_back(std::move(lw));
  }
  if (out.latents.empty()) throw sem::ModelError("no latent is linked to '" + quality + "' by a structural path");
  return out;
}

double lvr(std::span<const double> ratings, std::span<const double> weights) {
  return weighted_mean(ratings, weights, "lvr");
}

double lvr(const RespondentRecord& respondent, const ScoreWeights& w, std::size_t latent) {
  const auto& lw = w.latents.at(latent);
  std::vector<double> ratings;
  for (int item : lw.items) {
    auto v = respondent.rating(item);
    if (!v) throw std::invalid_argument("respondent " + respondent.id + " is missing item " + std::to_string(item));
    ratings.push_back(*v);
  }
  return lvr(ratings, lw.item_weights);
}

double sqr(std::span<const double> lvrs, std::span<const double> weights) {
  return weighted_mean(lvrs, weights, "sqr");
}

double relative_error(double sati_after, double sqr_value) {
  if (!(sati_after > 0.0)) throw std::domain_error("sati_after must be positive");
  return std::fabs(sati_after - sqr_value) / sati_after;
}

RespondentScore score(const RespondentRecord& respondent, const ScoreWeights& w) {
  RespondentScore s;
  s.id = respondent.id;
  std::vector<double> weights;
  for (std::size_t l = 0; l < w.latents.size(); ++l) {
    s.lvr.push_back(lvr(respondent, w, l));
    weights.push_back(w.latents[l].weight);
  }
  s.sqr = sqr(s.lvr, weights);
  if (respondent.sati_after) {
    const double after = *respondent.sati_after;
    s.error = relative_error(after, s.sqr);
    s.signed_error = (after - s.sqr) / after;
  }
  return s;
}

ValidationReport validation_error(const SurveyDataset& holdout, const ScoreWeights& w, double band) {
  ValidationReport rep;
  rep.band = band;
  std::vector<int> items;
  std::vector<std::vector<Eigen::Index>> groups;
  std::vector<std::vector<double>> item_weights;
  std::vector<double> latent_weights;
  for (const auto& lw : w.latents) {
    std::vector<Eigen::Index> cols;
    for (int item : lw.items) {
      cols.push_back(static_cast<Eigen::Index>(items.size()));
      items.push_back(item);
    }
    groups.push_back(std::move(cols));
    item_weights.push_back(lw.item_weights);
    latent_weights.push_back(lw.weight);
  }
  items.push_back(holdout.catalog().after_index());
  const ItemMatrix mat = holdout.matrix(items);
  rep.excluded = holdout.size() - mat.rows.size();
  if (mat.rows.empty()) throw std::invalid_argument("validation_error: no holdout respondent has complete ratings and sati_after");

  const Eigen::MatrixXd lvrs = kernels::grouped_weighted_means(mat.values, groups, item_weights);
  const Eigen::VectorXd sqrs = kernels::weighted_row_means(lvrs, latent_weights);
  const Eigen::Index after_col = static_cast<Eigen::Index>(items.size()) - 1;

  std::map<int, std::vector<double>> by_level;
  std::size_t within = 0;
  for (std::size_t i = 0; i < mat.rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    RespondentScore s;
    s.id = holdout.respondents()[mat.rows[i]].id;
    for (Eigen::Index c = 0; c < lvrs.cols(); ++c) s.lvr.push_back(lvrs(r, c));
    s.sqr = sqrs(r);
    const double after = mat.values(r, after_col);
    s.error = relative_error(after, s.sqr);
    s.signed_error = (after - s.sqr) / after;
    rep.mean_error += *s.error;
    rep.mean_signed_error += *s.signed_error;
    if (std::fabs(*s.signed_error) <= band) ++within;
    by_level[static_cast<int>(after)].push_back(*s.signed_error);
    rep.scores.push_back(std::move(s));
  }
  const double n = static_cast<double>(rep.scores.size());
  rep.mean_error /= n;
  rep.mean_signed_error /= n;
  rep.share_within = static_cast<double>(within) / n;
  for (auto& [level, errs] : by_level) rep.levels.push_back({level, errs.size(), median(errs)});
  return rep;
}

namespace {
std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
}  // namespace

std::string format_scores_csv(std::span<const RespondentScore> scores, std::size_t latents) {
  std::string out = "id";
  for (std::size_t l = 1; l <= latents; ++l) out += ",lvr_" + std::to_string(l);
  out += ",sqr,error\n";
  for (const auto& s : scores) {
    if (s.lvr.size() != latents) throw std::invalid_argument("score row " + s.id + " has the wrong number of latent ratings");
    out += csv::quote(s.id);
    for (double v : s.lvr) out += ',' + shortest(v);
    out += ',' + shortest(s.sqr) + ',';
    if (s.error) out += shortest(*s.error);
    out += '\n';
  }
  return out;
}

double entropy(const SurveyDataset& data, int item) {
  const std::array<int, 1> items{item};
  const ItemMatrix mat = data.matrix(items);
  if (mat.values.rows() < 2) throw std::invalid_argument("entropy: need at least two ratings for item " + std::to_string(item));
  return kernels::column_entropy(mat.values)(0);
}

namespace {

EntropyReport entropy_over(const SurveyDataset& data, const ItemGroups& groups) {
  EntropyReport rep;
  rep.respondents = data.size();
  std::vector<int> items;
  for (const auto& [name, members] : groups) {
    for (int item : members) {
      if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(item);
    }
  }
  std::sort(items.begin(), items.end());
  // Each item uses every respondent who answered it.
  std::map<int, ItemEntropy> by_item;
  for (int item : items) {
    const double e = entropy(data, item);
    by_item[item] = {item, e, std::max(0.0, 1.0 - e)};
    rep.items.push_back(by_item[item]);
  }
  for (const auto& [name, members] : groups) {
    GroupEntropy g;
    g.name = name;
    g.items = members;
    if (members.empty()) continue;
    double e = 0.0, v = 0.0;
    for (int item : members) {
      e += by_item[item].e;
      v += by_item[item].variability;
    }
    g.mean_e = e / static_cast<double>(members.size());
    g.variability = v / static_cast<double>(members.size());
    rep.groups.push_back(std::move(g));
  }
  return rep;
}

}  // namespace

EntropyReport entropy_report(const SurveyDataset& data, const ItemGroups& groups) {
  return entropy_over(data, groups);
}

std::size_t delay_bin(double hours) {
  if (hours < 0.0) throw std::invalid_argument("negative delay");
  for (std::size_t b = 0; b < kDelayEdges.size(); ++b) {
    if (hours <= kDelayEdges[b]) return b;
  }
  return kDelayEdges.size();
}

std::string delay_bin_label(std::size_t bin) {
  static const char* labels[] = {"[0,2]", "(2,4]", "(4,8]", "(8,16]", "(16,inf)"};
  return labels[bin];
}

DelayStrata delay_strata(const SurveyDataset& data, const ItemGroups& groups, const std::vector<int>& excluded_items) {
  DelayStrata out;
  out.respondents = data.size();
  out.excluded_items = excluded_items;
  std::sort(out.excluded_items.begin(), out.excluded_items.end());
  const std::set<int> excluded(excluded_items.begin(), excluded_items.end());

  ItemGroups kept_groups;
  std::vector<int> kept_items;
  for (const auto& [name, members] : groups) {
    std::vector<int> kept;
    for (int item : members) {
      if (!excluded.contains(item)) kept.push_back(item);
    }
    if (kept.empty()) continue;
    kept_items.insert(kept_items.end(), kept.begin(), kept.end());
    kept_groups.emplace_back(name, std::move(kept));
  }

  std::vector<std::vector<std::size_t>> members(kDelayEdges.size() + 1);
  for (std::size_t i = 0; i < data.size(); ++i) members[delay_bin(data.respondents()[i].delay_hours)].push_back(i);

  for (std::size_t b = 0; b < members.size(); ++b) {
    DelayBin bin;
    bin.label = delay_bin_label(b);
    bin.count = members[b].size();
    bin.share = data.empty() ? 0.0 : 100.0 * static_cast<double>(bin.count) / static_cast<double>(data.size());
    const SurveyDataset sub = data.subset(members[b]);
    double after_sum = 0.0, item_sum = 0.0;
    std::size_t after_n = 0, item_n = 0;
    for (const auto& r : sub.respondents()) {
      if (r.sati_after) {
        after_sum += *r.sati_after;
        ++after_n;
      }
      for (int item : kept_items) {
        if (auto v = r.rating(item)) {
          item_sum += *v;
          ++item_n;
        }
      }
    }
    if (after_n > 0) bin.s = after_sum / static_cast<double>(after_n);
    if (item_n > 0) bin.s_items = item_sum / static_cast<double>(item_n);
    if (sub.size() >= 2 && !kept_groups.empty()) {
      try {
        bin.entropy = entropy_over(sub, kept_groups);
      } catch (const std::invalid_argument&) {
      }
    }
    out.bins.push_back(std::move(bin));
  }
  return out;
}

}  // namespace lockserv::scoring
