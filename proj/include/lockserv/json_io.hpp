#pragma once

// JSON views of every report type. Key order is insertion order so dumps
// are stable byte for byte.

#include "lockserv/ahp.hpp"
#include "lockserv/dataset.hpp"
#include "lockserv/efa.hpp"
#include "lockserv/oprobit.hpp"
#include "lockserv/psychometrics.hpp"
#include "lockserv/scoring.hpp"
#include "lockserv/sem.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace lockserv::report {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kTimestampKey = "generated_at";

/// Tool name/version, RNG name, reconstruction notes and a timestamp.
/// SOURCE_DATE_EPOCH, when set, pins the timestamp.
Json metadata(const std::vector<std::string>& reconstructions = {});

/// Copy with metadata.generated_at removed, for comparisons.
Json without_timestamp(Json j);

std::string dump(const Json& j);

Json to_json(const LoadResult& r);
Json to_json(const DescriptiveReport& r);
Json to_json(const AdequacyReport& r);
Json to_json(const efa::LoadingMatrix& m);
Json to_json(const efa::EfaResult& r);
Json to_json(const sem::SemEstimate& e);
Json to_json(const sem::FitIndices& f);
Json to_json(const std::vector<sem::FitGate>& gates);
Json to_json(const sem::ValidityReport& v);
Json to_json(const scoring::ScoreWeights& w);
Json to_json(const scoring::ValidationReport& v, bool include_scores = true);
Json to_json(const scoring::EntropyReport& e);
Json to_json(const scoring::DelayStrata& d);
Json to_json(const ahp::WeightVector& w);
Json to_json(const ahp::Consistency& c);
Json to_json(const ahp::SupplierAnalysis& a, const ahp::Hierarchy& h);
Json to_json(const ahp::BiasReport& b, const ahp::Hierarchy& h);
Json to_json(const oprobit::ProbitModel& m);
Json to_json(const oprobit::EliminationResult& r);
Json to_json(const oprobit::SimplifiedQuestionnaire& q);

/// Standardized structural weights, name -> weight, from a JSON document
/// holding "structural_weights" (sem/score/report output).
std::map<std::string, double> structural_weights_from_json(const Json& j);
/// Supplier global weights from a JSON document holding "global_weights"
/// (ahp/report output) or a bare weight list.
ahp::WeightVector weights_from_json(const Json& j);

/// Indicator and structural weights from a "latents" block (sem/report output).
scoring::ScoreWeights score_weights_from_json(const Json& j);

/// Markdown rendering of a pipeline bundle; reads only the JSON.
std::string markdown_summary(const Json& bundle);

}  // namespace lockserv::report
