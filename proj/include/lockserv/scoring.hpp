#pragma once

#include "lockserv/dataset.hpp"
#include "lockserv/sem.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lockserv::scoring {

struct LatentWeights {
  std::string name;
  std::vector<int> items;
  std::vector<double> item_weights;  // standardized loadings
  double weight = 0.0;               // standardized structural weight
};

struct ScoreWeights {
  std::vector<LatentWeights> latents;
  std::vector<std::string> warnings;  // non-positive weights
};

/// Collects the standardized loadings of every latent linked to `quality`
/// by a structural path (either direction) and the path's standardized weight.
ScoreWeights weights_from_estimate(const sem::SemEstimate& estimate, const std::string& quality);

/// Weighted mean of indicator ratings.
double lvr(std::span<const double> ratings, std::span<const double> weights);
double lvr(const RespondentRecord& respondent, const ScoreWeights& w, std::size_t latent);
/// Weighted mean of latent ratings.
double sqr(std::span<const double> lvrs, std::span<const double> weights);

struct RespondentScore {
  std::string id;
  std::vector<double> lvr;
  double sqr = 0.0;
  std::optional<double> error;         // |after - sqr| / after
  std::optional<double> signed_error;  // (after - sqr) / after
};

RespondentScore score(const RespondentRecord& respondent, const ScoreWeights& w);

/// |after - sqr| / after.
double relative_error(double sati_after, double sqr_value);

struct LevelSummary {
  int sati_after = 0;
  std::size_t count = 0;
  double median_signed_error = 0.0;
};

struct ValidationReport {
  std::vector<RespondentScore> scores;
  std::size_t excluded = 0;  // rows missing an indicator or sati_after
  double mean_error = 0.0;
  double mean_signed_error = 0.0;
  double share_within = 0.0;  // share of signed errors inside [-band, band]
  double band = 0.1;
  std::vector<LevelSummary> levels;
};

/// Scores every holdout respondent with complete ratings.
ValidationReport validation_error(const SurveyDataset& holdout, const ScoreWeights& w, double band = 0.1);

/// Per-respondent scores as CSV `id,lvr_1..lvr_k,sqr,error`; error is blank when undefined.
std::string format_scores_csv(std::span<const RespondentScore> scores, std::size_t latents);

/// Normalized entropy of one item over the respondents that answered it.
double entropy(const SurveyDataset& data, int item);

struct ItemEntropy {
  int item = 0;
  double e = 1.0;
  double variability = 0.0;
};

struct GroupEntropy {
  std::string name;
  std::vector<int> items;
  double mean_e = 1.0;
  double variability = 0.0;  // mean of 1 - E over the group's items
};

struct EntropyReport {
  std::vector<ItemEntropy> items;
  std::vector<GroupEntropy> groups;
  std::size_t respondents = 0;
};

using ItemGroups = std::vector<std::pair<std::string, std::vector<int>>>;

EntropyReport entropy_report(const SurveyDataset& data, const ItemGroups& groups);

inline constexpr std::array<double, 4> kDelayEdges{2.0, 4.0, 8.0, 16.0};

/// Bin index of a delay in hours: [0,2], (2,4], (4,8], (8,16], (16,inf).
std::size_t delay_bin(double hours);
std::string delay_bin_label(std::size_t bin);

struct DelayBin {
  std::string label;
  std::size_t count = 0;
  double share = 0.0;                  // percent
  std::optional<double> s;             // mean sati_after
  std::optional<double> s_items;       // mean rating of the non-excluded items
  std::optional<EntropyReport> entropy;  // within-bin variability, excluded items omitted
};

struct DelayStrata {
  std::vector<DelayBin> bins;
  std::vector<int> excluded_items;
  std::size_t respondents = 0;
};

/// Stratifies respondents by delay. `groups` drives the within-bin entropy;
/// items listed in `excluded_items` are dropped from the item-based columns.
DelayStrata delay_strata(const SurveyDataset& data, const ItemGroups& groups, const std::vector<int>& excluded_items);

}  // namespace lockserv::scoring
