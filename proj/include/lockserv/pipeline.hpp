#pragma once

#include "lockserv/ahp.hpp"
#include "lockserv/dataset.hpp"
#include "lockserv/efa.hpp"
#include "lockserv/json_io.hpp"
#include "lockserv/oprobit.hpp"
#include "lockserv/psychometrics.hpp"
#include "lockserv/sem.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lockserv::pipeline {

struct Thresholds {
  double alpha_gate = 0.7;
  double kmo_gate = 0.6;
  double bartlett_p = 0.01;
  double loading = 0.5;
  double cross_margin = 0.2;
  double cr_gate = 0.1;
  double probit_alpha = 0.01;
  double validation_band = 0.1;
  sem::FitGateThresholds fit;
};

struct PipelineConfig {
  std::filesystem::path survey;
  std::optional<std::filesystem::path> catalog;
  std::optional<std::filesystem::path> model_spec;
  std::optional<std::filesystem::path> judgments;
  std::uint64_t seed = 1;
  std::optional<std::size_t> n_train;  // default: 60% of the valid rows
  double train_fraction = 0.6;
  Thresholds thresholds;
  std::filesystem::path output_dir;
  oprobit::EliminationMode elimination = oprobit::EliminationMode::stepwise;
  bool exclude_inconsistent = false;
  std::string quality_name = "Service quality";
  /// Latent whose items are left out of the delay-stratified columns.
  std::string strata_exclude_latent = "Time & convenience";
};

/// Throws std::invalid_argument when a threshold is outside its domain.
void validate(const PipelineConfig& cfg);

/// LOCKSERV_OUTPUT_DIR if set, else ./lockserv-out.
std::filesystem::path default_output_dir();

struct GateOutcome {
  std::string stage;
  std::string check;
  std::optional<double> value;
  std::string rule;
  bool pass = false;
  bool strict = true;  // counts towards --strict
};

std::vector<GateOutcome> adequacy_gates(const AdequacyReport& r, const Thresholds& t);
std::vector<GateOutcome> consistency_gates(const ahp::SupplierAnalysis& a, const ahp::Hierarchy& h);

/// Name for a factor from the majority latent hint of its items; ties go to
/// the hint of the lowest item. `taken` avoids duplicates.
std::string factor_name(const std::vector<int>& items, const VariableCatalog& catalog, const std::vector<std::string>& taken,
                        std::size_t position);

/// CFA spec from an EFA assignment: each factor's items with the strongest
/// loading first as marker, all factor covariances free. Factors with a
/// single item are skipped.
sem::MeasurementModel cfa_from_efa(const efa::FactorAssignment& a, const VariableCatalog& catalog, std::vector<std::string>* warnings = nullptr);

/// Adds the quality latent measured by sati_before and sati_after (or by
/// `indicators` when given) with a path from every first-order factor.
sem::MeasurementModel structural_from_cfa(const sem::MeasurementModel& cfa, const VariableCatalog& catalog, const std::string& quality,
                                          std::vector<int> indicators = {});

/// Measurement-only part of a structural spec: exogenous latents with at
/// least two indicators, covariances all free.
sem::MeasurementModel cfa_from_structural(const sem::MeasurementModel& model);

struct PipelineInputs {
  LoadResult survey;
  std::optional<std::vector<ahp::JudgmentRow>> judgments;
  std::optional<sem::MeasurementModel> model_spec;
};

struct PipelineResult {
  report::Json bundle;
  std::string markdown;
  std::vector<GateOutcome> gates;
  bool strict_pass() const;
};

/// Reads the configured files, then runs the in-memory pipeline.
PipelineResult run_pipeline(const PipelineConfig& cfg);
PipelineResult run_pipeline(const PipelineInputs& inputs, const PipelineConfig& cfg);

/// Writes bundle.json and summary.md into `dir`.
void write_outputs(const PipelineResult& result, const std::filesystem::path& dir);

}  // namespace lockserv::pipeline
