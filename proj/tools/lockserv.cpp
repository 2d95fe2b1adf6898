#include "lockserv/ahp.hpp"
#include "lockserv/dataset.hpp"
#include "lockserv/efa.hpp"
#include "lockserv/json_io.hpp"
#include "lockserv/oprobit.hpp"
#include "lockserv/pipeline.hpp"
#include "lockserv/psychometrics.hpp"
#include "lockserv/scoring.hpp"
#include "lockserv/sem.hpp"
#include "lockserv/synth.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace lockserv;
using report::Json;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kGateFailure = 2;

struct GateFailure {};

struct Common {
  std::string input;
  std::string catalog;
  std::string out;
  bool strict = false;
};

VariableCatalog load_catalog(const std::string& path) {
  return path.empty() ? VariableCatalog::standard() : VariableCatalog::load(path);
}

SurveyDataset load_dataset(const Common& c) {
  auto r = load_survey(c.input, load_catalog(c.catalog));
  for (const auto& rej : r.rejected) std::cerr << "line " << rej.line << " (" << rej.id << "): " << rej.reason << "\n";
  if (r.dataset.empty()) throw InputError("no valid survey rows in " + c.input);
  return std::move(r.dataset);
}

Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw InputError("cannot write " + out);
  f << text;
}

void emit_json(Json body, const std::string& out) {
  Json doc;
  doc["metadata"] = report::metadata();
  for (auto& [k, v] : body.items()) doc[k] = v;
  emit(report::dump(doc), out);
}

void check_gates(const std::vector<pipeline::GateOutcome>& gates, bool strict) {
  bool ok = true;
  for (const auto& g : gates) {
    if (g.strict && !g.pass) {
      std::cerr << "gate failed: " << g.stage << " " << g.check << " (" << g.rule << ")\n";
      ok = false;
    }
  }
  if (strict && !ok) throw GateFailure{};
}

Json gates_json(const std::vector<pipeline::GateOutcome>& gates) {
  Json a = Json::array();
  for (const auto& g : gates) {
    a.push_back({{"stage", g.stage}, {"check", g.check}, {"value", g.value ? Json(*g.value) : Json(nullptr)}, {"rule", g.rule}, {"pass", g.pass}});
  }
  return a;
}

std::vector<int> items_or_all(const std::vector<int>& items, const SurveyDataset& d) {
  return items.empty() ? d.item_indices() : items;
}

void add_common(CLI::App* app, Common& c, bool needs_input = true) {
  if (needs_input) app->add_option("-i,--input", c.input, "survey CSV")->required()->check(CLI::ExistingFile);
  app->add_option("-c,--catalog", c.catalog, "variable catalog JSON (default: built-in 32-item catalog)")->check(CLI::ExistingFile);
  app->add_option("-o,--out", c.out, "output file (default: stdout)");
}

sem::MeasurementModel model_for(const SurveyDataset& d, const std::string& spec, const pipeline::Thresholds& t,
                                const std::string& quality, bool structural, std::vector<std::string>& warnings) {
  if (!spec.empty()) {
    auto m = sem::MeasurementModel::load(spec);
    return structural ? m : pipeline::cfa_from_structural(m);
  }
  const auto e = efa::run(d.matrix(d.item_indices()), {t.loading, t.cross_margin}, &d.catalog());
  auto cfa = pipeline::cfa_from_efa(e.assignment, d.catalog(), &warnings);
  return structural ? pipeline::structural_from_cfa(cfa, d.catalog(), quality) : cfa;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Waterway-lock service quality toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(report::kToolVersion));

  Common c;
  pipeline::Thresholds t;

  // validate
  auto* validate = app.add_subcommand("validate", "check a survey CSV against the catalog");
  add_common(validate, c);

  // describe
  auto* describe_cmd = app.add_subcommand("describe", "descriptive statistics and normality screening");
  add_common(describe_cmd, c);

  // reliability
  std::vector<int> items;
  auto* reliability = app.add_subcommand("reliability", "Cronbach alpha, KMO and Bartlett test");
  add_common(reliability, c);
  reliability->add_option("--items", items, "items to include (default: all)")->delimiter(',');
  reliability->add_option("--alpha-gate", t.alpha_gate, "minimum Cronbach alpha")->check(CLI::Range(0.0, 1.0));
  reliability->add_option("--kmo-gate", t.kmo_gate, "minimum KMO")->check(CLI::Range(0.0, 1.0));
  reliability->add_option("--bartlett-p", t.bartlett_p, "maximum Bartlett p-value")->check(CLI::Range(0.0, 1.0));
  reliability->add_flag("--strict", c.strict, "exit 2 when a gate fails");

  // efa
  auto* efa_cmd = app.add_subcommand("efa", "principal components, varimax rotation and item pruning");
  add_common(efa_cmd, c);
  efa_cmd->add_option("--items", items, "items to include (default: all)")->delimiter(',');
  efa_cmd->add_option("--loading", t.loading, "minimum |loading|")->check(CLI::Range(0.0, 1.0));
  efa_cmd->add_option("--cross-margin", t.cross_margin, "minimum gap to the second loading")->check(CLI::Range(0.0, 1.0));

  // sem
  std::string spec, identification = "marker", quality = "Service quality";
  bool measurement_only = false;
  auto* sem_cmd = app.add_subcommand("sem", "maximum-likelihood CFA/SEM fit, fit indices and construct validity");
  add_common(sem_cmd, c);
  sem_cmd->add_option("--spec", spec, "model spec JSON (default: synthesized from EFA)")->check(CLI::ExistingFile);
  sem_cmd->add_option("--identification", identification, "marker or unit_variance")->check(CLI::IsMember({"marker", "unit_variance"}));
  sem_cmd->add_option("--quality", quality, "name of the overall quality latent");
  sem_cmd->add_flag("--measurement-only", measurement_only, "fit only the first-order measurement model");
  sem_cmd->add_flag("--strict", c.strict, "exit 2 when a fit gate fails");

  // score
  std::string weights_path;
  double band = 0.1;
  auto* score_cmd = app.add_subcommand("score", "latent and overall ratings with relative errors");
  add_common(score_cmd, c);
  score_cmd->add_option("--weights", weights_path, "JSON from the sem or report subcommand")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--band", band, "error band for the within-band share")->check(CLI::PositiveNumber);
  std::string scores_csv;
  score_cmd->add_option("--scores-csv", scores_csv, "also write per-respondent scores as CSV");

  // entropy
  std::string exclude_latent = "Time & convenience";
  auto* entropy_cmd = app.add_subcommand("entropy", "rating entropy and delay-stratified satisfaction");
  add_common(entropy_cmd, c);
  entropy_cmd->add_option("--spec", spec, "model spec JSON for the latent groups (default: catalog hints)")->check(CLI::ExistingFile);
  entropy_cmd->add_option("--exclude-latent", exclude_latent, "latent left out of the stratified columns");

  // ahp
  std::string judgments;
  bool exclude_inconsistent = false;
  auto* ahp_cmd = app.add_subcommand("ahp", "supplier weights from pairwise judgments");
  ahp_cmd->add_option("-j,--judgments", judgments, "judgment CSV")->required()->check(CLI::ExistingFile);
  ahp_cmd->add_option("-o,--out", c.out, "output file (default: stdout)");
  ahp_cmd->add_option("--cr-gate", t.cr_gate, "consistency ratio threshold")->check(CLI::Range(0.0, 1.0));
  ahp_cmd->add_flag("--exclude-inconsistent", exclude_inconsistent, "drop respondents failing the CR check");
  ahp_cmd->add_flag("--strict", c.strict, "exit 2 when an aggregated matrix fails the CR gate");

  // probit
  bool single_shot = false;
  auto* probit_cmd = app.add_subcommand("probit", "ordered probit on sati_after with backward elimination");
  add_common(probit_cmd, c);
  probit_cmd->add_option("--items", items, "predictor items (default: all)")->delimiter(',');
  probit_cmd->add_option("--alpha", t.probit_alpha, "significance threshold")->check(CLI::Range(0.0, 1.0));
  probit_cmd->add_flag("--single-shot", single_shot, "drop every insignificant predictor in one pass");
  probit_cmd->add_option("--spec", spec, "model spec JSON for construct labels")->check(CLI::ExistingFile);

  // bias
  std::string ow_path, sw_path;
  auto* bias_cmd = app.add_subcommand("bias", "customer (OW) versus supplier (SW) weights");
  bias_cmd->add_option("--ow", ow_path, "JSON with structural_weights (sem or report output)")->required()->check(CLI::ExistingFile);
  bias_cmd->add_option("--sw", sw_path, "JSON with global_weights (ahp or report output)")->required()->check(CLI::ExistingFile);
  bias_cmd->add_option("-o,--out", c.out, "output file (default: stdout)");

  // synth
  std::string kind = "sem";
  std::size_t n = synth::fixture::kRespondents;
  std::uint64_t seed = synth::fixture::kSeed;
  double noise = synth::fixture::kSupplierNoise;
  std::vector<double> thresholds;
  auto* synth_cmd = app.add_subcommand("synth", "synthetic fixture data with known structure");
  synth_cmd->add_option("--kind", kind, "sem, ahp or probit")->check(CLI::IsMember({"sem", "ahp", "probit"}));
  auto* n_opt = synth_cmd->add_option("--n", n, "respondents (default 750) or supplier respondents (ahp, default 43)");
  synth_cmd->add_option("--seed", seed, "random seed");
  synth_cmd->add_option("--noise", noise, "probability of a one-step judgment perturbation (ahp)")->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--thresholds", thresholds, "four ascending Likert cutoffs (sem)")->delimiter(',')->expected(4);
  synth_cmd->add_option("-o,--out", c.out, "output file (default: stdout)");

  // report
  pipeline::PipelineConfig cfg;
  std::string model_spec, judgments_path, out_dir;
  std::size_t n_train = 0;
  double train_fraction = 0.6;
  auto* report_cmd = app.add_subcommand("report", "full evaluation pipeline: JSON bundle and Markdown summary");
  report_cmd->add_option("-i,--input", c.input, "survey CSV")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("-c,--catalog", c.catalog, "variable catalog JSON")->check(CLI::ExistingFile);
  report_cmd->add_option("--spec", model_spec, "model spec JSON (default: synthesized from EFA)")->check(CLI::ExistingFile);
  report_cmd->add_option("-j,--judgments", judgments_path, "supplier judgment CSV")->check(CLI::ExistingFile);
  report_cmd->add_option("--seed", cfg.seed, "split seed");
  auto* ntrain_opt = report_cmd->add_option("--n-train", n_train, "training rows")->check(CLI::PositiveNumber);
  auto* frac_opt = report_cmd->add_option("--train-fraction", train_fraction, "training share")->check(CLI::Range(0.0, 1.0));
  ntrain_opt->excludes(frac_opt);
  report_cmd->add_option("--out-dir", out_dir, "output directory (default: $LOCKSERV_OUTPUT_DIR or ./lockserv-out)");
  report_cmd->add_option("--alpha-gate", cfg.thresholds.alpha_gate, "minimum Cronbach alpha");
  report_cmd->add_option("--kmo-gate", cfg.thresholds.kmo_gate, "minimum KMO");
  report_cmd->add_option("--loading", cfg.thresholds.loading, "EFA loading threshold");
  report_cmd->add_option("--cross-margin", cfg.thresholds.cross_margin, "EFA cross-loading margin");
  report_cmd->add_option("--cr-gate", cfg.thresholds.cr_gate, "AHP consistency threshold");
  report_cmd->add_option("--probit-alpha", cfg.thresholds.probit_alpha, "ordered probit significance");
  report_cmd->add_flag("--single-shot", single_shot, "single-pass probit elimination");
  report_cmd->add_flag("--exclude-inconsistent", exclude_inconsistent, "drop inconsistent supplier respondents");
  report_cmd->add_option("--exclude-latent", cfg.strata_exclude_latent, "latent left out of the delay strata");
  report_cmd->add_flag("--strict", c.strict, "exit 2 when a documented gate fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (validate->parsed()) {
      auto r = load_survey(c.input, load_catalog(c.catalog));
      emit_json({{"load", report::to_json(r)}}, c.out);
      return r.dataset.empty() ? kInputError : kOk;
    }
    if (describe_cmd->parsed()) {
      emit_json({{"descriptive", report::to_json(describe(load_dataset(c)))}}, c.out);
      return kOk;
    }
    if (reliability->parsed()) {
      const auto d = load_dataset(c);
      const auto rep = adequacy(d.matrix(items_or_all(items, d)).values);
      const auto gates = pipeline::adequacy_gates(rep, t);
      emit_json({{"adequacy", report::to_json(rep)}, {"gates", gates_json(gates)}}, c.out);
      check_gates(gates, c.strict);
      return kOk;
    }
    if (efa_cmd->parsed()) {
      const auto d = load_dataset(c);
      const auto e = efa::run(d.matrix(items_or_all(items, d)), {t.loading, t.cross_margin}, &d.catalog());
      emit_json({{"efa", report::to_json(e)}}, c.out);
      return kOk;
    }
    if (sem_cmd->parsed()) {
      const auto d = load_dataset(c);
      std::vector<std::string> warnings;
      const auto model = model_for(d, spec, t, quality, !measurement_only, warnings);
      const auto cov = sem::sample_covariance(d, model);
      sem::FitOptions opts;
      opts.identification = identification == "marker" ? sem::Identification::marker : sem::Identification::unit_variance;
      const auto est = sem::standardize(sem::fit_ml(model, cov.s, cov.n, opts));
      const auto fit = sem::fit_indices(est, cov.s, cov.n);
      const auto fg = sem::fit_gates(fit, t.fit);
      Json body;
      body["model_spec"] = Json::parse(model.to_json_text());
      body["estimate"] = report::to_json(est);
      body["fit"] = report::to_json(fit);
      body["gates"] = report::to_json(fg);
      body["validity"] = report::to_json(sem::construct_validity(est));
      if (!measurement_only) {
        std::string q = quality;
        for (int l = 0; l < model.latent_count(); ++l)
          if (model.is_endogenous(l)) q = model.latents()[static_cast<std::size_t>(l)].name;
        body["weights"] = report::to_json(scoring::weights_from_estimate(est, q));
      }
      body["warnings"] = warnings;
      emit_json(std::move(body), c.out);
      std::vector<pipeline::GateOutcome> gates;
      for (const auto& g : fg) gates.push_back({"sem", g.index, g.value, g.rule, g.pass, true});
      check_gates(gates, c.strict);
      return kOk;
    }
    if (score_cmd->parsed()) {
      const auto d = load_dataset(c);
      const auto w = report::score_weights_from_json(read_json(weights_path));
      const auto v = scoring::validation_error(d, w, band);
      if (!scores_csv.empty()) emit(scoring::format_scores_csv(v.scores, w.latents.size()), scores_csv);
      emit_json({{"validation", report::to_json(v)}}, c.out);
      return kOk;
    }
    if (entropy_cmd->parsed()) {
      const auto d = load_dataset(c);
      scoring::ItemGroups groups;
      if (!spec.empty()) {
        for (const auto& l : sem::MeasurementModel::load(spec).latents()) {
          std::vector<int> in_catalog;
          for (int i : l.indicators)
            if (d.catalog().contains(i)) in_catalog.push_back(i);
          if (!in_catalog.empty()) groups.emplace_back(l.name, in_catalog);
        }
      } else {
        std::vector<std::string> seen;
        for (const auto& item : d.catalog().items()) {
          if (!item.latent_hint || std::find(seen.begin(), seen.end(), *item.latent_hint) != seen.end()) continue;
          seen.push_back(*item.latent_hint);
          groups.emplace_back(*item.latent_hint, d.catalog().items_with_hint(*item.latent_hint));
        }
      }
      std::vector<int> excluded;
      scoring::ItemGroups kept;
      for (const auto& g : groups) {
        if (g.first == exclude_latent) excluded.insert(excluded.end(), g.second.begin(), g.second.end());
        else kept.push_back(g);
      }
      std::sort(excluded.begin(), excluded.end());
      emit_json({{"variability", report::to_json(scoring::entropy_report(d, groups))},
                 {"strata", report::to_json(scoring::delay_strata(d, kept, excluded))}},
                c.out);
      return kOk;
    }
    if (ahp_cmd->parsed()) {
      const auto h = ahp::Hierarchy::standard();
      const auto a = ahp::analyze(ahp::load_judgments(judgments), h, {t.cr_gate, exclude_inconsistent});
      auto gates = pipeline::consistency_gates(a, h);
      emit_json({{"supplier", report::to_json(a, h)}, {"gates", gates_json(gates)}}, c.out);
      check_gates(gates, c.strict);
      return kOk;
    }
    if (probit_cmd->parsed()) {
      const auto d = load_dataset(c);
      std::vector<int> predictors = items_or_all(items, d);
      std::vector<int> cols = predictors;
      cols.push_back(d.catalog().after_index());
      const auto m = d.matrix(cols);
      const auto k = static_cast<Eigen::Index>(predictors.size());
      std::vector<int> y;
      for (Eigen::Index r = 0; r < m.values.rows(); ++r) y.push_back(static_cast<int>(m.values(r, k)));
      const auto elim = oprobit::backward_eliminate(m.values.leftCols(k), y, predictors, t.probit_alpha,
                                                    single_shot ? oprobit::EliminationMode::single_shot : oprobit::EliminationMode::stepwise);
      std::map<int, std::string> construct_of;
      std::vector<std::string> order;
      if (!spec.empty()) {
        for (const auto& l : sem::MeasurementModel::load(spec).latents()) {
          order.push_back(l.name);
          for (int i : l.indicators) construct_of[i] = l.name;
        }
      } else {
        for (const auto& item : d.catalog().items())
          if (item.latent_hint) construct_of[item.index] = *item.latent_hint;
      }
      emit_json({{"probit", report::to_json(elim)},
                 {"questionnaire", report::to_json(oprobit::build_questionnaire(elim.survivors, d.catalog(), construct_of, order))}},
                c.out);
      return kOk;
    }
    if (bias_cmd->parsed()) {
      const auto h = ahp::Hierarchy::standard();
      const auto b = ahp::bias_report(report::structural_weights_from_json(read_json(ow_path)), report::weights_from_json(read_json(sw_path)), h);
      emit_json({{"bias", report::to_json(b, h)}}, c.out);
      return kOk;
    }
    if (synth_cmd->parsed()) {
      const auto k = synth::kind_from_string(kind);
      if (k == synth::Kind::sem) {
        auto s = synth::fixture::survey_spec(n, seed);
        if (!thresholds.empty()) std::copy(thresholds.begin(), thresholds.end(), s.likert_thresholds.begin());
        emit(format_survey(synth::gen_sem_survey(s).dataset), c.out);
      } else if (k == synth::Kind::ahp) {
        const int m = n_opt->count() ? static_cast<int>(n) : synth::fixture::kSuppliers;
        const auto rows = synth::gen_ahp_judgments(synth::fixture::supplier_truth(), noise, m, seed);
        emit(ahp::format_judgment_csv(rows), c.out);
      } else {
        Eigen::VectorXd beta(3), kappa(4);
        beta << 0.8, -0.5, 0.0;
        kappa << -1.5, -0.5, 0.5, 1.5;
        const auto s = synth::gen_probit(beta, kappa, n, seed);
        std::ostringstream out;
        out << "x1,x2,x3,y\n";
        for (Eigen::Index r = 0; r < s.x.rows(); ++r) {
          for (Eigen::Index j = 0; j < s.x.cols(); ++j) out << s.x(r, j) << ',';
          out << s.y[static_cast<std::size_t>(r)] << '\n';
        }
        emit(out.str(), c.out);
      }
      return kOk;
    }
    if (report_cmd->parsed()) {
      cfg.survey = c.input;
      if (!c.catalog.empty()) cfg.catalog = c.catalog;
      if (!model_spec.empty()) cfg.model_spec = model_spec;
      if (!judgments_path.empty()) cfg.judgments = judgments_path;
      if (n_train > 0) cfg.n_train = n_train;
      cfg.train_fraction = train_fraction;
      cfg.elimination = single_shot ? oprobit::EliminationMode::single_shot : oprobit::EliminationMode::stepwise;
      cfg.exclude_inconsistent = exclude_inconsistent;
      cfg.output_dir = out_dir.empty() ? pipeline::default_output_dir() : fs::path(out_dir);
      const auto result = pipeline::run_pipeline(cfg);
      pipeline::write_outputs(result, cfg.output_dir);
      std::cerr << "wrote " << (cfg.output_dir / "bundle.json").string() << " and " << (cfg.output_dir / "summary.md").string() << "\n";
      check_gates(result.gates, c.strict);
      return kOk;
    }
  } catch (const GateFailure&) {
    return kGateFailure;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}
