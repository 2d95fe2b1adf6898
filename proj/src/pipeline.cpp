#include "lockserv/pipeline.hpp"

#include "lockserv/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace lockserv::pipeline {

namespace {

using report::Json;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Json gate_json(const GateOutcome& g) {
  return {{"stage", g.stage}, {"check", g.check}, {"value", g.value ? Json(*g.value) : Json(nullptr)}, {"rule", g.rule}, {"pass", g.pass}, {"strict", g.strict}};
}

std::string fmt_rule(const char* op, double v) {
  std::string s = std::to_string(v);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return std::string(op) + " " + s;
}

struct FitBlock {
  sem::SemEstimate estimate;
  sem::FitIndices fit;
  std::vector<sem::FitGate> gates;
};

FitBlock fit_model(const SurveyDataset& data, const sem::MeasurementModel& model, const Thresholds& t) {
  const auto cov = sem::sample_covariance(data, model);
  FitBlock b{sem::standardize(sem::fit_ml(model, cov.s, cov.n)), {}, {}};
  b.fit = sem::fit_indices(b.estimate, cov.s, cov.n);
  b.gates = sem::fit_gates(b.fit, t.fit);
  return b;
}

Json fit_block_json(const FitBlock& b, const sem::MeasurementModel& model) {
  Json j;
  j["model_spec"] = Json::parse(model.to_json_text());
  j["estimate"] = report::to_json(b.estimate);
  j["fit"] = report::to_json(b.fit);
  j["gates"] = report::to_json(b.gates);
  return j;
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  const auto& t = cfg.thresholds;
  require(t.alpha_gate > 0.0 && t.alpha_gate < 1.0, "alpha gate must lie in (0,1)");
  require(t.kmo_gate > 0.0 && t.kmo_gate < 1.0, "KMO gate must lie in (0,1)");
  require(t.bartlett_p > 0.0 && t.bartlett_p < 1.0, "Bartlett p gate must lie in (0,1)");
  require(t.loading > 0.0 && t.loading < 1.0, "loading threshold must lie in (0,1)");
  require(t.cross_margin >= 0.0 && t.cross_margin < 1.0, "cross margin must lie in [0,1)");
  require(t.cr_gate > 0.0 && t.cr_gate < 1.0, "CR gate must lie in (0,1)");
  require(t.probit_alpha > 0.0 && t.probit_alpha < 1.0, "probit alpha must lie in (0,1)");
  require(t.validation_band > 0.0, "validation band must be positive");
  require(t.fit.cmin_df_max > 0.0, "CMIN/DF gate must be positive");
  require(t.fit.rmsea_max > 0.0 && t.fit.rmsea_max < 1.0, "RMSEA gate must lie in (0,1)");
  require(t.fit.incremental_min > 0.0 && t.fit.incremental_min < 1.0, "incremental fit gate must lie in (0,1)");
  require(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0, "train fraction must lie in (0,1)");
  require(!cfg.quality_name.empty(), "quality latent name must not be empty");
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("LOCKSERV_OUTPUT_DIR"); env && *env) return env;
  return "lockserv-out";
}

bool PipelineResult::strict_pass() const {
  return std::all_of(gates.begin(), gates.end(), [](const GateOutcome& g) { return !g.strict || g.pass; });
}

std::vector<GateOutcome> adequacy_gates(const AdequacyReport& r, const Thresholds& t) {
  std::vector<GateOutcome> g;
  g.push_back({"adequacy", "cronbach_alpha", r.cronbach_alpha, fmt_rule(">=", t.alpha_gate), r.cronbach_alpha && *r.cronbach_alpha >= t.alpha_gate});
  g.push_back({"adequacy", "kmo", r.kmo, fmt_rule(">=", t.kmo_gate), r.kmo && *r.kmo >= t.kmo_gate});
  std::optional<double> p;
  if (r.bartlett) p = r.bartlett->p_value;
  g.push_back({"adequacy", "bartlett_p", p, fmt_rule("<", t.bartlett_p), p && *p < t.bartlett_p});
  return g;
}

std::vector<GateOutcome> consistency_gates(const ahp::SupplierAnalysis& a, const ahp::Hierarchy& h) {
  std::vector<GateOutcome> g;
  const std::string rule = "< 0.1";
  g.push_back({"ahp", "cr:criteria", a.criteria_consistency.cr, rule, a.criteria_consistency.pass});
  for (std::size_t c = 0; c < h.criteria.size(); ++c) {
    g.push_back({"ahp", "cr:" + h.criteria[c].name, a.leaf_consistency[c].cr, rule, a.leaf_consistency[c].pass});
  }
  return g;
}

std::string factor_name(const std::vector<int>& items, const VariableCatalog& catalog, const std::vector<std::string>& taken,
                        std::size_t position) {
  std::map<std::string, int> votes;
  std::map<std::string, int> first;
  for (int item : items) {
    if (!catalog.contains(item)) continue;
    const auto& hint = catalog.item(item).latent_hint;
    if (!hint) continue;
    ++votes[*hint];
    if (!first.count(*hint) || item < first[*hint]) first[*hint] = item;
  }
  std::string best;
  for (const auto& [name, count] : votes) {
    if (best.empty() || count > votes[best] || (count == votes[best] && first[name] < first[best])) best = name;
  }
  if (best.empty()) best = "Factor " + std::to_string(position + 1);
  std::string name = best;
  for (int k = 2; std::find(taken.begin(), taken.end(), name) != taken.end(); ++k) name = best + " (" + std::to_string(k) + ")";
  return name;
}

sem::MeasurementModel cfa_from_efa(const efa::FactorAssignment& a, const VariableCatalog& catalog, std::vector<std::string>* warnings) {
  std::vector<sem::LatentSpec> latents;
  std::vector<std::string> taken;
  for (std::size_t f = 0; f < a.factor_items.size(); ++f) {
    const auto& items = a.factor_items[f];
    if (items.size() < 2) {
      if (warnings) warnings->push_back("factor " + std::to_string(f + 1) + " has fewer than two items and is left out of the CFA");
      continue;
    }
    const std::string name = factor_name(items, catalog, taken, f);
    taken.push_back(name);
    latents.push_back({name, items});
  }
  if (latents.empty()) throw sem::ModelError("no factor with at least two items to confirm");
  std::vector<std::pair<std::string, std::string>> cov;
  for (std::size_t i = 0; i < latents.size(); ++i)
    for (std::size_t j = i + 1; j < latents.size(); ++j) cov.emplace_back(latents[i].name, latents[j].name);
  return sem::MeasurementModel(std::move(latents), {}, std::move(cov));
}

sem::MeasurementModel structural_from_cfa(const sem::MeasurementModel& cfa, const VariableCatalog& catalog, const std::string& quality,
                                          std::vector<int> indicators) {
  if (indicators.empty()) indicators = {catalog.before_index(), catalog.after_index()};
  std::vector<sem::LatentSpec> latents = cfa.latents();
  std::vector<sem::Path> paths;
  for (const auto& l : cfa.latents()) paths.push_back({l.name, quality});
  latents.push_back({quality, std::move(indicators)});
  std::vector<std::pair<std::string, std::string>> cov;
  for (const auto& [a, b] : cfa.covariance_pairs()) {
    cov.emplace_back(cfa.latents()[static_cast<std::size_t>(a)].name, cfa.latents()[static_cast<std::size_t>(b)].name);
  }
  return sem::MeasurementModel(std::move(latents), std::move(paths), std::move(cov));
}

sem::MeasurementModel cfa_from_structural(const sem::MeasurementModel& model) {
  std::vector<sem::LatentSpec> latents;
  for (int l = 0; l < model.latent_count(); ++l) {
    const auto& spec = model.latents()[static_cast<std::size_t>(l)];
    if (!model.is_endogenous(l) && spec.indicators.size() >= 2) latents.push_back(spec);
  }
  if (latents.empty()) throw sem::ModelError("the model has no exogenous latent with two indicators");
  std::vector<std::pair<std::string, std::string>> cov;
  for (std::size_t i = 0; i < latents.size(); ++i)
    for (std::size_t j = i + 1; j < latents.size(); ++j) cov.emplace_back(latents[i].name, latents[j].name);
  return sem::MeasurementModel(std::move(latents), {}, std::move(cov));
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  const VariableCatalog catalog = cfg.catalog ? VariableCatalog::load(*cfg.catalog) : VariableCatalog::standard();
  PipelineInputs in{load_survey(cfg.survey, catalog), std::nullopt, std::nullopt};
  if (cfg.judgments) in.judgments = ahp::load_judgments(*cfg.judgments);
  if (cfg.model_spec) in.model_spec = sem::MeasurementModel::load(*cfg.model_spec);
  return run_pipeline(in, cfg);
}

PipelineResult run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg) {
  validate(cfg);
  const SurveyDataset& data = in.survey.dataset;
  const VariableCatalog& catalog = data.catalog();
  const auto& t = cfg.thresholds;
  if (data.empty()) throw InputError("no valid survey rows");

  PipelineResult out;
  Json& b = out.bundle;
  std::vector<std::string> warnings;
  b["metadata"] = report::metadata({
      "entropy is computed per item over respondents and averaged within each latent",
      "delay strata report S as the mean overall rating; s_items averages the non-excluded items",
      "service factors point to the quality latent, which is measured by the before/after overall ratings",
  });

  Json config;
  config["survey"] = cfg.survey.filename().string();
  config["catalog"] = cfg.catalog ? Json(cfg.catalog->filename().string()) : Json("built-in");
  config["model_spec"] = cfg.model_spec ? Json(cfg.model_spec->filename().string()) : (in.model_spec ? Json("supplied") : Json(nullptr));
  config["judgments"] = cfg.judgments ? Json(cfg.judgments->filename().string()) : (in.judgments ? Json("supplied") : Json(nullptr));
  config["seed"] = cfg.seed;
  config["thresholds"] = {{"alpha_gate", t.alpha_gate},     {"kmo_gate", t.kmo_gate},       {"bartlett_p", t.bartlett_p},
                          {"loading", t.loading},           {"cross_margin", t.cross_margin}, {"cr_gate", t.cr_gate},
                          {"probit_alpha", t.probit_alpha}, {"validation_band", t.validation_band},
                          {"cmin_df_max", t.fit.cmin_df_max}, {"rmsea_max", t.fit.rmsea_max}, {"incremental_min", t.fit.incremental_min}};
  config["elimination"] = cfg.elimination == oprobit::EliminationMode::stepwise ? "stepwise" : "single_shot";
  config["exclude_inconsistent"] = cfg.exclude_inconsistent;
  b["config"] = std::move(config);

  // Load and describe.
  b["data"] = {{"load", report::to_json(in.survey)}, {"descriptive", report::to_json(describe(data))}};

  // Reliability and sampling adequacy on the full item set.
  const auto all_items = data.item_indices();
  const ItemMatrix full = data.matrix(all_items);
  const AdequacyReport adequacy_report = adequacy(full.values);
  for (auto& g : adequacy_gates(adequacy_report, t)) out.gates.push_back(g);
  b["adequacy"] = report::to_json(adequacy_report);

  // Split.
  const std::size_t n_train =
      cfg.n_train ? *cfg.n_train : static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(data.size())));
  const SplitResult parts = split(data, n_train, cfg.seed);
  b["split"] = {{"seed", cfg.seed}, {"train", parts.train.size()}, {"holdout", parts.holdout.size()}};

  // EFA on the training part.
  std::optional<efa::EfaResult> efa_result;
  try {
    efa_result = efa::run(parts.train.matrix(all_items), {t.loading, t.cross_margin}, &catalog);
    b["efa"] = report::to_json(*efa_result);
    for (const auto& w : efa_result->assignment.warnings) warnings.push_back("efa: " + w);
  } catch (const std::exception& e) {
    b["efa"] = {{"error", e.what()}};
    warnings.push_back(std::string("efa: ") + e.what());
  }

  // Model specification.
  std::optional<sem::MeasurementModel> cfa_model, sem_model;
  std::string quality = cfg.quality_name;
  try {
    if (in.model_spec) {
      sem_model = *in.model_spec;
      for (int l = 0; l < sem_model->latent_count(); ++l) {
        if (sem_model->is_endogenous(l)) {
          quality = sem_model->latents()[static_cast<std::size_t>(l)].name;
          break;
        }
      }
      cfa_model = cfa_from_structural(*sem_model);
    } else if (efa_result) {
      std::vector<std::string> spec_warnings;
      cfa_model = cfa_from_efa(efa_result->assignment, catalog, &spec_warnings);
      for (auto& w : spec_warnings) warnings.push_back("spec: " + w);
      // an overall rating without variance cannot indicate the quality latent
      std::vector<int> overall;
      for (int item : {catalog.before_index(), catalog.after_index()}) {
        const std::vector<int> one{item};
        const auto m = parts.train.matrix(one);
        const double mean = m.values.size() > 0 ? m.values.mean() : 0.0;
        if (m.values.rows() > 1 && (m.values.array() - mean).abs().maxCoeff() > 0.0) {
          overall.push_back(item);
        } else {
          warnings.push_back("spec: " + catalog.label(item) + " has no variance in the training set and does not indicate " + quality);
        }
      }
      if (overall.empty()) throw sem::ModelError("neither overall rating varies in the training set");
      sem_model = structural_from_cfa(*cfa_model, catalog, quality, overall);
    }
    if (sem_model) {
      for (int item : sem_model->observed()) {
        if (item < 0 || item > catalog.after_index()) throw InputError("model spec refers to item " + std::to_string(item) + " outside the catalog");
      }
    }
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    warnings.push_back(std::string("spec: ") + e.what());
    cfa_model.reset();
    sem_model.reset();
  }

  // CFA and construct validity.
  if (cfa_model) {
    try {
      const FitBlock cfa = fit_model(parts.train, *cfa_model, t);
      Json j = fit_block_json(cfa, *cfa_model);
      j["validity"] = report::to_json(sem::construct_validity(cfa.estimate));
      for (const auto& g : cfa.gates) out.gates.push_back({"cfa", g.index, g.value, g.rule, g.pass, false});
      for (const auto& w : cfa.estimate.warnings) warnings.push_back("cfa: " + w);
      b["cfa"] = std::move(j);
    } catch (const std::exception& e) {
      b["cfa"] = {{"error", e.what()}};
      warnings.push_back(std::string("cfa: ") + e.what());
    }
  }

  // Structural model, scoring on the holdout.
  std::optional<scoring::ScoreWeights> weights;
  if (sem_model) {
    try {
      const FitBlock full_sem = fit_model(parts.train, *sem_model, t);
      b["sem"] = fit_block_json(full_sem, *sem_model);
      for (const auto& g : full_sem.gates) out.gates.push_back({"sem", g.index, g.value, g.rule, g.pass, true});
      for (const auto& w : full_sem.estimate.warnings) warnings.push_back("sem: " + w);
      weights = scoring::weights_from_estimate(full_sem.estimate, quality);
      for (const auto& w : weights->warnings) warnings.push_back("scoring: " + w);
      Json s;
      s["weights"] = report::to_json(*weights);
      try {
        s["validation"] = report::to_json(scoring::validation_error(parts.holdout, *weights, t.validation_band));
      } catch (const std::exception& e) {
        s["validation"] = {{"error", e.what()}};
        warnings.push_back(std::string("validation: ") + e.what());
      }
      b["scoring"] = std::move(s);
    } catch (const std::exception& e) {
      b["sem"] = {{"error", e.what()}};
      warnings.push_back(std::string("sem: ") + e.what());
    }
  }

  // Entropy and delay strata over the full dataset.
  {
    scoring::ItemGroups groups;
    std::vector<int> excluded;
    const sem::MeasurementModel* groups_from = cfa_model ? &*cfa_model : nullptr;
    if (groups_from) {
      for (const auto& l : groups_from->latents()) {
        if (l.name == cfg.strata_exclude_latent) {
          excluded = l.indicators;
          std::sort(excluded.begin(), excluded.end());
        }
        groups.emplace_back(l.name, l.indicators);
      }
      if (excluded.empty()) warnings.push_back("strata: no latent named '" + cfg.strata_exclude_latent + "'; no items excluded");
    }
    scoring::ItemGroups kept;
    for (const auto& g : groups)
      if (g.first != cfg.strata_exclude_latent) kept.push_back(g);
    try {
      Json e;
      e["variability"] = report::to_json(scoring::entropy_report(data, groups));
      e["strata"] = report::to_json(scoring::delay_strata(data, kept, excluded));
      b["entropy"] = std::move(e);
    } catch (const std::exception& ex) {
      b["entropy"] = {{"error", ex.what()}};
      warnings.push_back(std::string("entropy: ") + ex.what());
    }
  }

  // Supplier side.
  const ahp::Hierarchy hierarchy = ahp::Hierarchy::standard();
  std::optional<ahp::SupplierAnalysis> supplier;
  if (in.judgments) {
    try {
      supplier = ahp::analyze(*in.judgments, hierarchy, {t.cr_gate, cfg.exclude_inconsistent});
      b["supplier"] = {{"present", true}, {"analysis", report::to_json(*supplier, hierarchy)}};
      for (auto& g : consistency_gates(*supplier, hierarchy)) {
        g.rule = fmt_rule("<", t.cr_gate);
        out.gates.push_back(g);
      }
      for (const auto& w : supplier->warnings) warnings.push_back("ahp: " + w);
    } catch (const std::exception& e) {
      b["supplier"] = {{"present", false}, {"reason", e.what()}};
      warnings.push_back(std::string("ahp: ") + e.what());
    }
  } else {
    b["supplier"] = {{"present", false}, {"reason", "no judgment file supplied"}};
  }
  if (supplier && weights) {
    try {
      std::map<std::string, double> ow;
      for (const auto& l : weights->latents) ow[l.name] = l.weight;
      b["bias"] = report::to_json(ahp::bias_report(ow, supplier->global, hierarchy), hierarchy);
    } catch (const std::exception& e) {
      b["bias"] = {{"error", e.what()}};
      warnings.push_back(std::string("bias: ") + e.what());
    }
  } else {
    b["bias"] = nullptr;
  }

  // Ordered probit over the retained items with the overall rating as outcome.
  std::vector<int> predictors;
  if (sem_model) {
    for (int item : sem_model->observed())
      if (catalog.contains(item)) predictors.push_back(item);
  } else if (efa_result) {
    predictors = efa_result->assignment.retained_items;
  }
  std::sort(predictors.begin(), predictors.end());
  b["questionnaire"] = nullptr;
  if (predictors.empty()) {
    b["probit"] = {{"error", "no predictors available"}};
  } else {
    try {
      std::vector<int> cols = predictors;
      cols.push_back(catalog.after_index());
      ItemMatrix m = data.matrix(cols);
      const Eigen::Index k = static_cast<Eigen::Index>(predictors.size());
      std::set<int> observed;
      for (Eigen::Index r = 0; r < m.values.rows(); ++r) observed.insert(static_cast<int>(m.values(r, k)));
      std::map<int, int> recode;
      for (int c : observed) recode[c] = static_cast<int>(recode.size()) + 1;
      if (static_cast<int>(observed.size()) != *observed.rbegin() - *observed.begin() + 1 || *observed.begin() != 1) {
        warnings.push_back("probit: outcome categories recoded to the observed levels");
      }
      std::vector<int> y;
      for (Eigen::Index r = 0; r < m.values.rows(); ++r) y.push_back(recode[static_cast<int>(m.values(r, k))]);
      const Eigen::MatrixXd x = m.values.leftCols(k);
      const auto elim = oprobit::backward_eliminate(x, y, predictors, t.probit_alpha, cfg.elimination);
      Json p = report::to_json(elim);
      p["outcome_levels"] = std::vector<int>(observed.begin(), observed.end());
      b["probit"] = std::move(p);
      for (const auto& w : elim.warnings) warnings.push_back("probit: " + w);

      std::map<int, std::string> construct_of;
      std::vector<std::string> order;
      if (cfa_model) {
        for (const auto& l : cfa_model->latents()) {
          order.push_back(l.name);
          for (int item : l.indicators) construct_of[item] = l.name;
        }
      }
      b["questionnaire"] = report::to_json(oprobit::build_questionnaire(elim.survivors, catalog, construct_of, order));
    } catch (const std::exception& e) {
      b["probit"] = {{"error", e.what()}};
      warnings.push_back(std::string("probit: ") + e.what());
    }
  }

  Json gates = Json::array();
  for (const auto& g : out.gates) {
    gates.push_back(gate_json(g));
    if (!g.pass && g.strict) warnings.push_back("gate failed: " + g.stage + " " + g.check + " (" + g.rule + ")");
  }
  b["gates"] = std::move(gates);
  b["strict_pass"] = out.strict_pass();
  b["warnings"] = warnings;
  out.markdown = report::markdown_summary(b);
  return out;
}

void write_outputs(const PipelineResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bundle.json", std::ios::binary) << report::dump(result.bundle);
  std::ofstream(dir / "summary.md", std::ios::binary) << result.markdown;
}

}  // namespace lockserv::pipeline
