#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lockserv {

/// Input that cannot be interpreted at all (bad header, unreadable file).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class QuestionKind { frequency, subjective, satisfaction };

std::string to_string(QuestionKind kind);
QuestionKind question_kind_from_string(const std::string& s);

struct CatalogItem {
  int index = 0;
  std::string abbreviation;
  QuestionKind kind = QuestionKind::satisfaction;
  std::optional<std::string> latent_hint;

  bool operator==(const CatalogItem&) const = default;
};

/// The rated questionnaire items, indexed contiguously from 1. Index 0 and
/// size()+1 are reserved for the overall ratings taken before and after the
/// itemized questions.
class VariableCatalog {
 public:
  VariableCatalog() = default;
  explicit VariableCatalog(std::vector<CatalogItem> items);

  /// The 32-item waterway-lock questionnaire.
  static VariableCatalog standard();
  static VariableCatalog load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<CatalogItem>& items() const { return items_; }
  int size() const { return static_cast<int>(items_.size()); }
  int before_index() const { return 0; }
  int after_index() const { return size() + 1; }
  const CatalogItem& item(int index) const;
  bool contains(int index) const { return index >= 1 && index <= size(); }
  /// Abbreviation for an item, or sati_before / sati_after for the overall ratings.
  std::string label(int index) const;
  /// Items whose latent_hint equals `hint`, ascending.
  std::vector<int> items_with_hint(const std::string& hint) const;

  bool operator==(const VariableCatalog&) const = default;

 private:
  std::vector<CatalogItem> items_;
};

struct RespondentRecord {
  std::string id;
  std::string age_band;
  std::string gender;
  std::string experience_band;
  std::string vessel_type;
  std::string dwt_band;
  double delay_hours = 0.0;
  /// ratings[i - 1] holds item i; nullopt marks a missing answer.
  std::vector<std::optional<int>> ratings;
  std::optional<int> sati_before;
  std::optional<int> sati_after;

  /// Rating by questionnaire index, including 0 (before) and K+1 (after).
  std::optional<int> rating(int index) const;
};

/// Complete-case extraction for a set of items (listwise deletion).
struct ItemMatrix {
  std::vector<int> items;
  std::vector<std::size_t> rows;  // respondent positions that were kept
  Eigen::MatrixXd values;         // rows.size() x items.size()
};

class SurveyDataset {
 public:
  SurveyDataset() = default;
  SurveyDataset(VariableCatalog catalog, std::vector<RespondentRecord> respondents);

  const VariableCatalog& catalog() const { return catalog_; }
  const std::vector<RespondentRecord>& respondents() const { return respondents_; }
  std::size_t size() const { return respondents_.size(); }
  bool empty() const { return respondents_.empty(); }

  /// All catalog items 1..K.
  std::vector<int> item_indices() const;
  ItemMatrix matrix(std::span<const int> items) const;
  SurveyDataset subset(std::span<const std::size_t> positions) const;

 private:
  VariableCatalog catalog_;
  std::vector<RespondentRecord> respondents_;
};

struct RejectedRow {
  std::size_t line = 0;  // 1-based line in the file
  std::string id;
  std::string reason;
};

struct LoadResult {
  SurveyDataset dataset;
  std::vector<RejectedRow> rejected;
  std::size_t total_rows = 0;
  double valid_rate() const {
    return total_rows == 0 ? 0.0 : static_cast<double>(dataset.size()) / static_cast<double>(total_rows);
  }
};

std::string survey_header(const VariableCatalog& catalog);

LoadResult load_survey(const std::filesystem::path& path, const VariableCatalog& catalog);
LoadResult parse_survey(const std::string& text, const VariableCatalog& catalog);
std::string format_survey(const SurveyDataset& dataset);
void write_survey(const std::filesystem::path& path, const SurveyDataset& dataset);

struct ItemStats {
  int index = 0;
  std::string label;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> skewness;
  std::optional<double> kurtosis;  // excess
  std::optional<bool> normal;      // nullopt when skew/kurt are undefined
};

struct DescriptiveReport {
  std::size_t respondents = 0;
  std::vector<ItemStats> items;  // sati_before, items 1..K, sati_after
  std::optional<double> overall_after_mean;
  std::size_t non_normal_count() const;
};

inline constexpr double kNormalityBound = 1.5;

ItemStats item_statistics(std::span<const double> values);
DescriptiveReport describe(const SurveyDataset& dataset);

struct SplitResult {
  SurveyDataset train;
  SurveyDataset holdout;
};

SplitResult split(const SurveyDataset& dataset, std::size_t n_train, std::uint64_t seed);

}  // namespace lockserv
