#include "lockserv/dataset.hpp"

#include "lockserv/rng.hpp"

#include "csv.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace lockserv {

namespace {

constexpr std::size_t kDemographicColumns = 7;  // id .. delay_hours

struct CatalogRow {
  int index;
  const char* abbreviation;
  const char* hint;
};

// Items 4, 27 and 28 have no published abbreviation; they keep neutral names.
constexpr CatalogRow kStandardItems[] = {
    {1, "wea_deal", "Safe & security"},
    {2, "acc_deal", "Safe & security"},
    {3, "inc_deal", "Safe & security"},
    {4, "item_4", "Safe & security"},
    {5, "wait_time", "Time & convenience"},
    {6, "oprt_eff", "Time & convenience"},
    {7, "waitime_change", "Time & convenience"},
    {8, "lock_wktime", "Time & convenience"},
    {9, "lock_cnvnt", "Time & convenience"},
    {10, "cong_deal", "Time & convenience"},
    {11, "cmprhn_regu", "Lockage regulation"},
    {12, "travel_info", "Lockage regulation"},
    {13, "info_pub", "Lockage regulation"},
    {14, "auto_intlgnt", "Lockage regulation"},
    {15, "waste_dispo", "Supporting facilities"},
    {16, "sewage_dispo", "Supporting facilities"},
    {17, "clear_sig", "Supporting facilities"},
    {18, "lay_manag", "Supporting facilities"},
    {19, "light_mark", "Supporting facilities"},
    {20, "add_cnvnt", "Supporting facilities"},
    {21, "support_ser", "Supporting facilities"},
    {22, "env_cln", "Comfortable conditions"},
    {23, "eco_env", "Comfortable conditions"},
    {24, "cmplt_sign", "Comfortable conditions"},
    {25, "ser_att", "Service professional"},
    {26, "uni_drs", "Service professional"},
    {27, "item_27", "Service professional"},
    {28, "item_28", "Service professional"},
    {29, "policy_imple", "Staff skills"},
    {30, "policy_anno", "Staff skills"},
    {31, "cmpln_handle", "Staff skills"},
    {32, "solv_prob", "Staff skills"},
};

QuestionKind standard_kind(int index) {
  static const std::set<int> frequency{1, 2, 3};
  static const std::set<int> subjective{7, 11, 15, 16, 17, 20, 22, 24, 26, 27, 29, 30};
  if (frequency.contains(index)) return QuestionKind::frequency;
  if (subjective.contains(index)) return QuestionKind::subjective;
  return QuestionKind::satisfaction;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct RowError {
  std::string reason;
};

std::optional<int> parse_rating(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) throw RowError{"malformed rating"};
  if (v < 1 || v > 5) throw RowError{"rating out of range"};
  return v;
}

double parse_delay(const std::string& cell) {
  if (cell.empty()) throw RowError{"missing delay"};
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) throw RowError{"malformed delay"};
  if (v < 0.0) throw RowError{"negative delay"};
  return v;
}

}  // namespace

std::string to_string(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::frequency: return "frequency";
    case QuestionKind::subjective: return "subjective";
    case QuestionKind::satisfaction: return "satisfaction";
  }
  return "satisfaction";
}

QuestionKind question_kind_from_string(const std::string& s) {
  if (s == "frequency") return QuestionKind::frequency;
  if (s == "subjective") return QuestionKind::subjective;
  if (s == "satisfaction") return QuestionKind::satisfaction;
  throw InputError("unknown question kind '" + s + "'");
}

// --- VariableCatalog --------------------------------------------------------

VariableCatalog::VariableCatalog(std::vector<CatalogItem> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].index != static_cast<int>(i) + 1) {
      throw InputError("catalog indices must be unique and contiguous from 1");
    }
  }
}

VariableCatalog VariableCatalog::standard() {
  std::vector<CatalogItem> items;
  for (const auto& row : kStandardItems) {
    items.push_back({row.index, row.abbreviation, standard_kind(row.index), std::string(row.hint)});
  }
  return VariableCatalog(std::move(items));
}

VariableCatalog VariableCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open catalog " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("catalog " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw InputError("catalog must be a JSON list");
  std::vector<CatalogItem> items;
  for (const auto& entry : doc) {
    try {
      CatalogItem item;
      item.index = entry.at("index").get<int>();
      item.abbreviation = entry.at("abbreviation").get<std::string>();
      item.kind = question_kind_from_string(entry.at("kind").get<std::string>());
      if (entry.contains("latent_hint") && !entry["latent_hint"].is_null()) {
        item.latent_hint = entry["latent_hint"].get<std::string>();
      }
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("catalog entry: " + std::string(e.what()));
    }
  }
  return VariableCatalog(std::move(items));
}

void VariableCatalog::save(const std::filesystem::path& path) const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& item : items_) {
    doc.push_back({{"index", item.index},
                   {"abbreviation", item.abbreviation},
                   {"kind", to_string(item.kind)},
                   {"latent_hint", item.latent_hint ? nlohmann::json(*item.latent_hint) : nlohmann::json(nullptr)}});
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write catalog " + path.string());
  out << doc.dump(2) << '\n';
}

const CatalogItem& VariableCatalog::item(int index) const {
  if (!contains(index)) throw std::out_of_range("catalog has no item " + std::to_string(index));
  return items_[static_cast<std::size_t>(index - 1)];
}

std::string VariableCatalog::label(int index) const {
  if (index == before_index()) return "sati_before";
  if (index == after_index()) return "sati_after";
  return item(index).abbreviation;
}

std::vector<int> VariableCatalog::items_with_hint(const std::string& hint) const {
  std::vector<int> out;
  for (const auto& item : items_) {
    if (item.latent_hint && *item.latent_hint == hint) out.push_back(item.index);
  }
  return out;
}

// --- RespondentRecord / SurveyDataset -------------------------------------

std::optional<int> RespondentRecord::rating(int index) const {
  if (index == 0) return sati_before;
  if (index == static_cast<int>(ratings.size()) + 1) return sati_after;
  if (index < 1 || index > static_cast<int>(ratings.size())) throw std::out_of_range("no item " + std::to_string(index));
  return ratings[static_cast<std::size_t>(index - 1)];
}

SurveyDataset::SurveyDataset(VariableCatalog catalog, std::vector<RespondentRecord> respondents)
    : catalog_(std::move(catalog)), respondents_(std::move(respondents)) {
  for (const auto& r : respondents_) {
    if (static_cast<int>(r.ratings.size()) != catalog_.size()) {
      throw std::invalid_argument("respondent " + r.id + " has a rating vector that does not match the catalog");
    }
    if (r.delay_hours < 0.0) throw std::invalid_argument("respondent " + r.id + " has a negative delay");
  }
}

std::vector<int> SurveyDataset::item_indices() const {
  std::vector<int> out(static_cast<std::size_t>(catalog_.size()));
  std::iota(out.begin(), out.end(), 1);
  return out;
}

ItemMatrix SurveyDataset::matrix(std::span<const int> items) const {
  ItemMatrix out;
  out.items.assign(items.begin(), items.end());
  for (std::size_t r = 0; r < respondents_.size(); ++r) {
    bool complete = true;
    for (int item : items) {
      if (!respondents_[r].rating(item)) {
        complete = false;
        break;
      }
    }
    if (complete) out.rows.push_back(r);
  }
  out.values.resize(static_cast<Eigen::Index>(out.rows.size()), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    for (std::size_t j = 0; j < items.size(); ++j) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *respondents_[out.rows[i]].rating(items[j]);
    }
  }
  return out;
}

SurveyDataset SurveyDataset::subset(std::span<const std::size_t> positions) const {
  std::vector<RespondentRecord> rows;
  rows.reserve(positions.size());
  for (std::size_t p : positions) rows.push_back(respondents_.at(p));
  return SurveyDataset(catalog_, std::move(rows));
}

// --- CSV I/O ---------------------------------------------------------------

std::string survey_header(const VariableCatalog& catalog) {
  std::string header = "id,age_band,gender,experience_band,vessel_type,dwt_band,delay_hours";
  for (int q = 0; q <= catalog.size() + 1; ++q) header += ",q" + std::to_string(q);
  return header;
}

LoadResult parse_survey(const std::string& text, const VariableCatalog& catalog) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("survey file is empty");
  line = csv::strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != survey_header(catalog)) {
    throw InputError("malformed header: expected '" + survey_header(catalog) + "'");
  }
  const std::size_t expected_fields = kDemographicColumns + static_cast<std::size_t>(catalog.size()) + 2;

  LoadResult result;
  std::vector<RespondentRecord> rows;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = csv::strip_cr(line);
    if (line.empty()) continue;
    ++result.total_rows;
    const auto fields = csv::split_line(line);
    const std::string id = fields.empty() ? std::string() : fields[0];
    try {
      if (fields.size() != expected_fields) throw RowError{"field count mismatch"};
      if (id.empty()) throw RowError{"missing id"};
      RespondentRecord rec;
      rec.id = id;
      rec.age_band = fields[1];
      rec.gender = fields[2];
      rec.experience_band = fields[3];
      rec.vessel_type = fields[4];
      rec.dwt_band = fields[5];
      rec.delay_hours = parse_delay(fields[6]);
      rec.sati_before = parse_rating(fields[7]);
      rec.ratings.reserve(static_cast<std::size_t>(catalog.size()));
      for (int q = 1; q <= catalog.size(); ++q) rec.ratings.push_back(parse_rating(fields[7 + static_cast<std::size_t>(q)]));
      rec.sati_after = parse_rating(fields.back());
      if (!seen.insert(id).second) throw RowError{"duplicate respondent id"};
      rows.push_back(std::move(rec));
    } catch (const RowError& e) {
      result.rejected.push_back({line_no, id, e.reason});
    }
  }
  result.dataset = SurveyDataset(catalog, std::move(rows));
  return result;
}

LoadResult load_survey(const std::filesystem::path& path, const VariableCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open survey " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_survey(buf.str(), catalog);
}

std::string format_survey(const SurveyDataset& dataset) {
  const auto& catalog = dataset.catalog();
  std::string out = survey_header(catalog) + "\n";
  auto cell = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& r : dataset.respondents()) {
    out += csv::quote(r.id) + ',' + csv::quote(r.age_band) + ',' + csv::quote(r.gender) + ',' +
           csv::quote(r.experience_band) + ',' + csv::quote(r.vessel_type) + ',' + csv::quote(r.dwt_band) + ',' +
           format_double(r.delay_hours);
    for (int q = 0; q <= catalog.size() + 1; ++q) out += ',' + cell(r.rating(q));
    out += '\n';
  }
  return out;
}

void write_survey(const std::filesystem::path& path, const SurveyDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write survey " + path.string());
  out << format_survey(dataset);
}

// --- Descriptive statistics -----------------------------------------------

ItemStats item_statistics(std::span<const double> values) {
  ItemStats s;
  s.n = values.size();
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  s.sd = values.size() > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const bool varied = std::any_of(values.begin(), values.end(), [&](double v) { return v != values.front(); });
  if (varied && m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
    s.normal = std::fabs(*s.skewness) <= kNormalityBound && std::fabs(*s.kurtosis) <= kNormalityBound;
  }
  return s;
}

std::size_t DescriptiveReport::non_normal_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const ItemStats& s) {
    return s.normal.has_value() && !*s.normal;
  }));
}

DescriptiveReport describe(const SurveyDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("describe: empty dataset");
  DescriptiveReport report;
  report.respondents = dataset.size();
  const auto& catalog = dataset.catalog();
  for (int q = 0; q <= catalog.size() + 1; ++q) {
    std::vector<double> values;
    values.reserve(dataset.size());
    for (const auto& r : dataset.respondents()) {
      if (auto v = r.rating(q)) values.push_back(*v);
    }
    ItemStats s = item_statistics(values);
    s.index = q;
    s.label = catalog.label(q);
    if (q == catalog.after_index() && s.n > 0) report.overall_after_mean = s.mean;
    report.items.push_back(std::move(s));
  }
  return report;
}

// --- Train / holdout split -------------------------------------------------

SplitResult split(const SurveyDataset& dataset, std::size_t n_train, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split: n_train must satisfy 0 < n_train < " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& rows = dataset.respondents();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].id < rows[b].id; });

  PortableRng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> holdout(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(holdout.begin(), holdout.end());
  return {dataset.subset(train), dataset.subset(holdout)};
}

}  // namespace lockserv
