#include "lockserv/json_io.hpp"

#include "lockserv/rng.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>

namespace lockserv::report {

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

template <typename Pred>
const Json* find_key(const Json& j, const std::string& key, Pred accept) {
  if (j.is_object()) {
    if (auto it = j.find(key); it != j.end() && accept(*it)) return &*it;
    for (const auto& [k, v] : j.items()) {
      if (const Json* hit = find_key(v, key, accept)) return hit;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (const Json* hit = find_key(v, key, accept)) return hit;
    }
  }
  return nullptr;
}

bool is_array(const Json& j) { return j.is_array(); }

std::string fmt(const Json& v, int digits = 3) {
  if (v.is_null()) return "n/a";
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_number_integer() || v.is_number_unsigned()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v.get<double>();
    return out.str();
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

Json metadata(const std::vector<std::string>& reconstructions) {
  Json m;
  m["tool"] = "lockserv";
  m["version"] = kToolVersion;
  m["rng"] = PortableRng::kName;
  m["reconstructions"] = reconstructions;
  m[kTimestampKey] = timestamp();
  return m;
}

Json without_timestamp(Json j) {
  if (j.contains("metadata") && j["metadata"].is_object()) j["metadata"].erase(kTimestampKey);
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const LoadResult& r) {
  Json j;
  j["total_rows"] = r.total_rows;
  j["valid_rows"] = r.dataset.size();
  j["valid_rate"] = r.valid_rate();
  Json rej = Json::array();
  for (const auto& x : r.rejected) rej.push_back({{"line", x.line}, {"id", x.id}, {"reason", x.reason}});
  j["rejected"] = std::move(rej);
  return j;
}

Json to_json(const DescriptiveReport& r) {
  Json j;
  j["respondents"] = r.respondents;
  j["overall_after_mean"] = opt(r.overall_after_mean);
  j["non_normal_count"] = r.non_normal_count();
  j["normality_bound"] = kNormalityBound;
  Json items = Json::array();
  for (const auto& s : r.items) {
    items.push_back({{"index", s.index},
                     {"label", s.label},
                     {"n", s.n},
                     {"mean", s.mean},
                     {"sd", s.sd},
                     {"skewness", opt(s.skewness)},
                     {"kurtosis", opt(s.kurtosis)},
                     {"normal", opt(s.normal)}});
  }
  j["items"] = std::move(items);
  return j;
}

Json to_json(const AdequacyReport& r) {
  Json j;
  j["n"] = r.n;
  j["items"] = r.items;
  j["cronbach_alpha"] = opt(r.cronbach_alpha);
  j["kmo"] = opt(r.kmo);
  if (r.bartlett) {
    j["bartlett"] = {{"chi2", r.bartlett->chi2}, {"df", r.bartlett->df}, {"p_value", r.bartlett->p_value}};
  } else {
    j["bartlett"] = nullptr;
  }
  return j;
}

Json to_json(const efa::LoadingMatrix& m) {
  Json j;
  j["items"] = m.items;
  j["factors"] = m.factors();
  j["loadings"] = mat(m.loadings);
  j["eigenvalues"] = vec(m.eigenvalues);
  j["variance_explained"] = vec(m.variance_explained);
  j["cumulative"] = vec(m.cumulative);
  j["communalities"] = vec(m.communalities());
  j["spectrum"] = vec(m.spectrum);
  return j;
}

Json to_json(const efa::EfaResult& r) {
  Json j;
  j["unrotated"] = to_json(r.unrotated);
  j["rotated"] = to_json(r.rotation.rotated);
  j["rotation"] = {{"sweeps", r.rotation.sweeps}, {"converged", r.rotation.converged}, {"criterion", r.rotation.criterion}};
  const auto& a = r.assignment;
  Json factors = Json::array();
  for (std::size_t f = 0; f < a.factor_items.size(); ++f) {
    factors.push_back({{"factor", f + 1}, {"items", a.factor_items[f]}, {"alpha", f < a.factor_alpha.size() ? opt(a.factor_alpha[f]) : Json(nullptr)}});
  }
  Json dropped = Json::array();
  for (const auto& d : a.dropped) {
    dropped.push_back({{"item", d.item}, {"reason", efa::to_string(d.reason)}, {"max_abs_loading", d.max_abs_loading}});
  }
  j["retained_items"] = a.retained_items;
  j["factors"] = std::move(factors);
  j["dropped"] = std::move(dropped);
  j["warnings"] = a.warnings;
  j["hint_mismatches"] = r.hint_mismatches;
  return j;
}

Json to_json(const sem::SemEstimate& e) {
  Json j;
  j["identification"] = e.identification == sem::Identification::marker ? "marker" : "unit_variance";
  j["converged"] = e.converged;
  j["iterations"] = e.iterations;
  j["gradient_max_norm"] = e.gradient_max_norm;
  j["f_min"] = e.f_min;
  j["chi2"] = e.chi2;
  j["df"] = e.df;
  j["n"] = e.n;
  j["heywood"] = e.heywood;
  Json params = Json::array();
  for (const auto& p : e.params) {
    params.push_back({{"label", p.param.label},
                      {"kind", sem::to_string(p.param.kind)},
                      {"estimate", p.estimate},
                      {"se", p.se},
                      {"z", p.z},
                      {"p_value", p.p_value}});
  }
  j["parameters"] = std::move(params);
  if (e.standardized) {
    const auto& s = *e.standardized;
    const auto& model = e.model;
    Json loadings = Json::array();
    for (int r = 0; r < model.observed_count(); ++r) {
      for (int l = 0; l < model.latent_count(); ++l) {
        if (s.lambda(r, l) == 0.0) continue;
        loadings.push_back({{"latent", model.latents()[static_cast<std::size_t>(l)].name},
                            {"item", model.observed()[static_cast<std::size_t>(r)]},
                            {"std", s.lambda(r, l)},
                            {"smc", s.smc(r)}});
      }
    }
    Json paths = Json::array();
    for (const auto& [to, from] : model.path_indices()) {
      paths.push_back({{"from", model.latents()[static_cast<std::size_t>(from)].name},
                       {"to", model.latents()[static_cast<std::size_t>(to)].name},
                       {"estimate", e.matrices.beta(to, from)},
                       {"std", s.beta(to, from)}});
    }
    Json names = Json::array();
    for (const auto& l : model.latents()) names.push_back(l.name);
    j["standardized"] = {{"loadings", std::move(loadings)}, {"paths", std::move(paths)}, {"latent_names", std::move(names)}, {"latent_correlation", mat(s.latent_corr)}};
  }
  j["warnings"] = e.warnings;
  return j;
}

Json to_json(const sem::FitIndices& f) {
  Json j;
  j["chi2"] = f.chi2;
  j["df"] = f.df;
  j["baseline_chi2"] = f.baseline_chi2;
  j["baseline_df"] = f.baseline_df;
  j["cmin_df"] = opt(f.cmin_df);
  j["rmsea"] = opt(f.rmsea);
  j["cfi"] = f.cfi;
  j["gfi"] = f.gfi;
  j["agfi"] = opt(f.agfi);
  j["nfi"] = f.nfi;
  j["tli"] = opt(f.tli);
  j["ifi"] = f.ifi;
  return j;
}

Json to_json(const std::vector<sem::FitGate>& gates) {
  Json a = Json::array();
  for (const auto& g : gates) a.push_back({{"index", g.index}, {"value", opt(g.value)}, {"rule", g.rule}, {"pass", g.pass}});
  return a;
}

Json to_json(const sem::ValidityReport& v) {
  Json j;
  Json factors = Json::array();
  Json names = Json::array();
  for (const auto& f : v.factors) {
    names.push_back(f.name);
    factors.push_back({{"name", f.name},
                       {"loadings", f.loadings},
                       {"cr", f.cr},
                       {"ave", f.ave},
                       {"convergent", f.convergent},
                       {"discriminant", f.discriminant}});
  }
  j["factors"] = std::move(factors);
  j["fornell_larcker"] = {{"names", std::move(names)}, {"matrix", mat(v.fornell_larcker)}};
  j["discriminant"] = v.discriminant;
  return j;
}

Json to_json(const scoring::ScoreWeights& w) {
  Json j;
  Json structural = Json::array();
  Json latents = Json::array();
  for (const auto& l : w.latents) {
    structural.push_back({{"name", l.name}, {"weight", l.weight}});
    Json items = Json::array();
    for (std::size_t i = 0; i < l.items.size(); ++i) items.push_back({{"item", l.items[i]}, {"weight", l.item_weights[i]}});
    latents.push_back({{"name", l.name}, {"weight", l.weight}, {"items", std::move(items)}});
  }
  j["structural_weights"] = std::move(structural);
  j["latents"] = std::move(latents);
  j["warnings"] = w.warnings;
  return j;
}

Json to_json(const scoring::ValidationReport& v, bool include_scores) {
  Json j;
  j["scored"] = v.scores.size();
  j["excluded"] = v.excluded;
  j["mean_error"] = v.mean_error;
  j["mean_signed_error"] = v.mean_signed_error;
  j["band"] = v.band;
  j["share_within_band"] = v.share_within;
  Json levels = Json::array();
  for (const auto& l : v.levels) {
    levels.push_back({{"sati_after", l.sati_after}, {"count", l.count}, {"median_signed_error", l.median_signed_error}});
  }
  j["levels"] = std::move(levels);
  if (include_scores) {
    Json scores = Json::array();
    for (const auto& s : v.scores) {
      scores.push_back({{"id", s.id}, {"lvr", s.lvr}, {"sqr", s.sqr}, {"error", opt(s.error)}, {"signed_error", opt(s.signed_error)}});
    }
    j["scores"] = std::move(scores);
  }
  return j;
}

Json to_json(const scoring::EntropyReport& e) {
  Json j;
  j["respondents"] = e.respondents;
  Json items = Json::array();
  for (const auto& i : e.items) items.push_back({{"item", i.item}, {"e", i.e}, {"variability", i.variability}});
  Json groups = Json::array();
  for (const auto& g : e.groups) {
    groups.push_back({{"name", g.name}, {"items", g.items}, {"e", g.mean_e}, {"variability", g.variability}});
  }
  j["items"] = std::move(items);
  j["groups"] = std::move(groups);
  return j;
}

Json to_json(const scoring::DelayStrata& d) {
  Json j;
  j["respondents"] = d.respondents;
  j["excluded_items"] = d.excluded_items;
  Json bins = Json::array();
  for (const auto& b : d.bins) {
    bins.push_back({{"label", b.label},
                    {"count", b.count},
                    {"share", b.share},
                    {"s", opt(b.s)},
                    {"s_items", opt(b.s_items)},
                    {"entropy", b.entropy ? to_json(*b.entropy) : Json(nullptr)}});
  }
  j["bins"] = std::move(bins);
  return j;
}

Json to_json(const ahp::WeightVector& w) {
  Json a = Json::array();
  for (std::size_t i = 0; i < w.names.size(); ++i) a.push_back({{"name", w.names[i]}, {"weight", w.weights[i]}, {"rank", w.ranks[i]}});
  return a;
}

Json to_json(const ahp::Consistency& c) { return {{"ci", c.ci}, {"cr", c.cr}, {"pass", c.pass}}; }

Json to_json(const ahp::SupplierAnalysis& a, const ahp::Hierarchy& h) {
  Json j;
  j["respondents"] = a.respondents.size();
  j["used"] = a.used;
  std::size_t consistent = 0;
  for (const auto& r : a.respondents) consistent += r.consistent ? 1 : 0;
  j["consistent_respondents"] = consistent;
  j["criteria"] = {{"matrix", mat(a.criteria_matrix.values())}, {"weights", to_json(a.criteria_weights)}, {"consistency", to_json(a.criteria_consistency)}};
  Json leaves = Json::array();
  for (std::size_t c = 0; c < h.criteria.size(); ++c) {
    leaves.push_back({{"criterion", h.criteria[c].name},
                      {"matrix", mat(a.leaf_matrices[c].values())},
                      {"weights", to_json(a.leaf_weights[c])},
                      {"consistency", to_json(a.leaf_consistency[c])}});
  }
  j["leaves"] = std::move(leaves);
  j["global_weights"] = to_json(a.global);
  j["warnings"] = a.warnings;
  return j;
}

Json to_json(const ahp::BiasReport& b, const ahp::Hierarchy& h) {
  Json j;
  Json rows = Json::array();
  for (const auto& name : h.leaves()) {
    const auto c = h.criterion_of(name);
    rows.push_back({{"factor", name},
                    {"criterion", c ? Json(h.criteria[*c].name) : Json(nullptr)},
                    {"ow", b.ow.weight(name)},
                    {"ow_rank", b.ow.rank(name)},
                    {"sw", b.sw.weight(name)},
                    {"sw_rank", b.sw.rank(name)}});
  }
  j["factors"] = std::move(rows);
  j["spearman"] = b.spearman;
  Json dom = Json::array();
  for (const auto& d : b.dominance) {
    dom.push_back({{"criterion", d.criterion}, {"ow_dominant", d.ow_dominant}, {"sw_dominant", d.sw_dominant}, {"agree", d.agree}});
  }
  j["dominance"] = std::move(dom);
  j["bias_flags"] = b.bias_flags;
  return j;
}

Json to_json(const oprobit::ProbitModel& m) {
  Json j;
  j["n_obs"] = m.n_obs;
  j["categories"] = m.categories;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  Json coef = Json::array();
  for (std::size_t i = 0; i < m.predictors.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    coef.push_back({{"item", m.predictors[i]}, {"coef", m.beta(k)}, {"se", m.beta_se(k)}, {"z", m.beta_z(k)}, {"p_value", m.beta_p(k)}});
  }
  j["coefficients"] = std::move(coef);
  j["cutpoints"] = vec(m.kappa);
  j["cutpoint_se"] = vec(m.kappa_se);
  j["loglik"] = m.loglik;
  j["loglik_null"] = m.loglik_null;
  j["lr_chi2"] = m.lr_chi2;
  j["lr_df"] = m.lr_df;
  j["lr_p"] = m.lr_p;
  j["pseudo_r2"] = m.pseudo_r2;
  return j;
}

Json to_json(const oprobit::EliminationResult& r) {
  Json j;
  j["initial"] = to_json(r.initial);
  j["final"] = to_json(r.final_model);
  Json steps = Json::array();
  for (const auto& s : r.steps) steps.push_back({{"dropped", s.dropped}, {"p_value", s.p_value}});
  j["steps"] = std::move(steps);
  j["survivors"] = r.survivors;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const oprobit::SimplifiedQuestionnaire& q) {
  Json a = Json::array();
  for (const auto& e : q.questions) {
    a.push_back({{"construct", e.construct}, {"question", e.number}, {"item", e.item}, {"abbreviation", e.abbreviation}});
  }
  return a;
}

std::map<std::string, double> structural_weights_from_json(const Json& j) {
  const Json* w = find_key(j, "structural_weights", is_array);
  if (!w || !w->is_array()) throw InputError("no structural_weights in the customer-side JSON");
  std::map<std::string, double> out;
  for (const auto& e : *w) out[e.at("name").get<std::string>()] = e.at("weight").get<double>();
  return out;
}

ahp::WeightVector weights_from_json(const Json& j) {
  const Json* w = j.is_array() ? &j : find_key(j, "global_weights", is_array);
  if (!w || !w->is_array()) throw InputError("no global_weights in the supplier-side JSON");
  std::vector<std::string> names;
  std::vector<double> weights;
  for (const auto& e : *w) {
    names.push_back(e.at("name").get<std::string>());
    weights.push_back(e.at("weight").get<double>());
  }
  return ahp::WeightVector::make(std::move(names), std::move(weights));
}

scoring::ScoreWeights score_weights_from_json(const Json& j) {
  const Json* w = find_key(j, "latents", [](const Json& v) {
    return v.is_array() && !v.empty() && v.front().is_object() && v.front().contains("items");
  });
  if (!w) throw InputError("no latent weights in the JSON document");
  scoring::ScoreWeights out;
  for (const auto& l : *w) {
    scoring::LatentWeights lw;
    lw.name = l.at("name").get<std::string>();
    lw.weight = l.at("weight").get<double>();
    for (const auto& i : l.at("items")) {
      lw.items.push_back(i.at("item").get<int>());
      lw.item_weights.push_back(i.at("weight").get<double>());
    }
    out.latents.push_back(std::move(lw));
  }
  return out;
}

std::string markdown_summary(const Json& b) {
  std::ostringstream md;
  // stages that failed carry {"error": ...} instead of their results
  auto usable = [&](const char* key) { return b.contains(key) && b[key].is_object() && !b[key].contains("error"); };
  auto skipped = [&](const char* key, const char* title) {
    if (b.contains(key) && b[key].is_object() && b[key].contains("error"))
      md << "## " << title << "\n\nNot estimated: " << fmt(b[key]["error"]) << "\n\n";
  };
  md << "# Waterway lock service quality report\n\n";
  if (b.contains("metadata")) {
    const auto& m = b["metadata"];
    md << "Generated by " << fmt(m.value("tool", Json())) << " " << fmt(m.value("version", Json())) << " (RNG "
       << fmt(m.value("rng", Json())) << ").\n\n";
  }

  if (b.contains("data")) {
    const auto& d = b["data"];
    md << "## Data\n\n";
    md << "- rows read: " << fmt(d["load"]["total_rows"]) << ", valid: " << fmt(d["load"]["valid_rows"])
       << " (" << fmt(Json(100.0 * d["load"]["valid_rate"].get<double>()), 1) << "%)\n";
    md << "- mean sati_after: " << fmt(d["descriptive"]["overall_after_mean"], 2) << "\n";
    md << "- items outside the normality bound: " << fmt(d["descriptive"]["non_normal_count"]) << "\n";
    if (b.contains("split")) {
      md << "- train / holdout: " << fmt(b["split"]["train"]) << " / " << fmt(b["split"]["holdout"]) << "\n";
    }
    md << "\n";
  }

  if (b.contains("gates")) {
    md << "## Gates\n\n| Stage | Check | Value | Rule | Pass |\n|---|---|---|---|---|\n";
    for (const auto& g : b["gates"]) {
      md << "| " << fmt(g["stage"]) << " | " << fmt(g["check"]) << " | " << fmt(g["value"]) << " | " << fmt(g["rule"])
         << " | " << fmt(g["pass"]) << " |\n";
    }
    md << "\n";
  }

  skipped("efa", "Exploratory factor analysis");
  if (usable("efa")) {
    const auto& e = b["efa"];
    md << "## Exploratory factor analysis\n\n";
    md << "- factors retained: " << fmt(e["rotated"]["factors"]) << "\n";
    md << "- cumulative variance: " << fmt(e["rotated"]["cumulative"].empty() ? Json() : e["rotated"]["cumulative"].back(), 1) << "%\n";
    for (const auto& d : e["dropped"]) {
      md << "- dropped q" << fmt(d["item"]) << " (" << fmt(d["reason"]) << ", max |loading| " << fmt(d["max_abs_loading"]) << ")\n";
    }
    md << "\n";
  }

  auto fit_table = [&](const Json& s, const char* title) {
    md << "## " << title << "\n\n";
    md << "- converged: " << fmt(s["estimate"]["converged"]) << ", chi2 " << fmt(s["fit"]["chi2"]) << " on "
       << fmt(s["fit"]["df"]) << " df\n\n";
    md << "| Index | Value | Rule | Pass |\n|---|---|---|---|\n";
    for (const auto& g : s["gates"]) {
      md << "| " << fmt(g["index"]) << " | " << fmt(g["value"]) << " | " << fmt(g["rule"]) << " | " << fmt(g["pass"]) << " |\n";
    }
    md << "\n";
  };
  skipped("cfa", "Measurement model");
  if (usable("cfa")) {
    fit_table(b["cfa"], "Measurement model");
    md << "| Construct | CR | AVE | Convergent | Discriminant |\n|---|---|---|---|---|\n";
    for (const auto& f : b["cfa"]["validity"]["factors"]) {
      md << "| " << fmt(f["name"]) << " | " << fmt(f["cr"]) << " | " << fmt(f["ave"]) << " | " << fmt(f["convergent"]) << " | "
         << fmt(f["discriminant"]) << " |\n";
    }
    md << "\n";
  }
  skipped("sem", "Structural model");
  if (usable("sem")) {
    fit_table(b["sem"], "Structural model");
    if (b["sem"]["estimate"].contains("standardized")) {
      md << "| From | To | Estimate | Std. |\n|---|---|---|---|\n";
      for (const auto& p : b["sem"]["estimate"]["standardized"]["paths"]) {
        md << "| " << fmt(p["from"]) << " | " << fmt(p["to"]) << " | " << fmt(p["estimate"]) << " | " << fmt(p["std"]) << " |\n";
      }
      md << "\n";
    }
  }

  if (usable("scoring") && b["scoring"]["validation"].contains("error")) {
    md << "## Holdout validation\n\nNot computed: " << fmt(b["scoring"]["validation"]["error"]) << "\n\n";
  } else if (usable("scoring")) {
    const auto& v = b["scoring"]["validation"];
    md << "## Holdout validation\n\n";
    md << "- scored: " << fmt(v["scored"]) << ", excluded: " << fmt(v["excluded"]) << "\n";
    md << "- mean relative error: " << fmt(Json(100.0 * v["mean_error"].get<double>()), 2) << "%\n";
    md << "- share within +/-" << fmt(v["band"], 2) << ": " << fmt(Json(100.0 * v["share_within_band"].get<double>()), 1) << "%\n\n";
  }

  skipped("entropy", "Delay tolerance");
  if (usable("entropy")) {
    const auto& e = b["entropy"];
    md << "## Delay tolerance\n\n| Delay (h) | Share (%) | S | S (items) |\n|---|---|---|---|\n";
    for (const auto& bin : e["strata"]["bins"]) {
      md << "| " << fmt(bin["label"]) << " | " << fmt(bin["share"], 1) << " | " << fmt(bin["s"], 2) << " | " << fmt(bin["s_items"], 2) << " |\n";
    }
    md << "\n| Latent | E | (1-E)/1e-3 |\n|---|---|---|\n";
    for (const auto& g : e["variability"]["groups"]) {
      md << "| " << fmt(g["name"]) << " | " << fmt(g["e"]) << " | " << fmt(Json(1000.0 * g["variability"].get<double>())) << " |\n";
    }
    md << "\n";
  }

  if (b.contains("supplier")) {
    md << "## Supplier weights\n\n";
    if (!b["supplier"].value("present", false)) {
      md << "Absent: " << fmt(b["supplier"].value("reason", Json("no judgments"))) << "\n\n";
    } else {
      const auto& a = b["supplier"]["analysis"];
      md << "- respondents: " << fmt(a["respondents"]) << ", consistent: " << fmt(a["consistent_respondents"]) << ", used: " << fmt(a["used"]) << "\n";
      md << "- criteria CR: " << fmt(a["criteria"]["consistency"]["cr"]) << "\n\n";
    }
  }
  skipped("bias", "Customer vs supplier weights");
  if (usable("bias")) {
    const auto& bias = b["bias"];
    md << "## Customer vs supplier weights\n\n| Factor | Criterion | OW | SW |\n|---|---|---|---|\n";
    for (const auto& f : bias["factors"]) {
      md << "| " << fmt(f["factor"]) << " | " << fmt(f["criterion"]) << " | " << fmt(f["ow"]) << " (" << fmt(f["ow_rank"]) << ") | "
         << fmt(f["sw"]) << " (" << fmt(f["sw_rank"]) << ") |\n";
    }
    md << "\nSpearman rank correlation: " << fmt(bias["spearman"]) << "\n\n";
    for (const auto& flag : bias["bias_flags"]) md << "- " << fmt(flag) << "\n";
    md << "\n";
  }

  if (b.contains("probit") && !b["probit"].is_null()) {
    const auto& p = b["probit"];
    if (p.contains("error")) {
      md << "## Ordered probit\n\nNot estimated: " << fmt(p["error"]) << "\n\n";
    } else {
      md << "## Ordered probit\n\n| Model | Predictors | LL | LR chi2 | Pseudo R2 |\n|---|---|---|---|---|\n";
      for (const char* k : {"initial", "final"}) {
        const auto& m = p[k];
        md << "| " << k << " | " << m["coefficients"].size() << " | " << fmt(m["loglik"]) << " | " << fmt(m["lr_chi2"]) << " | "
           << fmt(m["pseudo_r2"]) << " |\n";
      }
      md << "\n";
    }
  }
  if (b.contains("questionnaire") && b["questionnaire"].is_array()) {
    md << "## Simplified questionnaire\n\n| No. | Construct | Item | Abbreviation |\n|---|---|---|---|\n";
    for (const auto& q : b["questionnaire"]) {
      md << "| " << fmt(q["question"]) << " | " << fmt(q["construct"]) << " | q" << fmt(q["item"]) << " | " << fmt(q["abbreviation"]) << " |\n";
    }
    md << "\n";
  }

  if (b.contains("warnings") && !b["warnings"].empty()) {
    md << "## Warnings\n\n";
    for (const auto& w : b["warnings"]) md << "- " << fmt(w) << "\n";
    md << "\n";
  }
  return md.str();
}

}  // namespace lockserv::report
