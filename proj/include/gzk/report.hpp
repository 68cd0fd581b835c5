#pragma once

// Evaluation and classification reports: CSV tables and JSON documents are
// the stable output; SVG plots are rendered from the same tables.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gzk/analysis.hpp"
#include "gzk/pipeline.hpp"

namespace gzk::report {

// Fixed six-decimal rendering; "nan" for undefined values.
std::string fmt(double v);
// JSON number, or null when not finite.
nlohmann::json num(double v);

struct EvaluationReport {
    nlohmann::json config;                    // resolved run configuration
    std::vector<FeatureMode> modes;
    pipeline::AttritionLedger ledger;         // stages up to pupil detection
    analysis::EvaluationRun run;
    std::vector<analysis::OwlnessReport> owlness;
    std::optional<analysis::DeltaReport> delta;  // present when both modes ran
    analysis::OwlThresholds thresholds;
};

// Ledger whose confident count comes from `mode`'s first repetition.
pipeline::AttritionLedger ledger_for(const EvaluationReport& r, FeatureMode mode);

std::string per_user_csv(const EvaluationReport& r);
std::string per_region_csv(const EvaluationReport& r);
std::string confusion_csv(const analysis::ConfusionMatrix& m, bool percentages);
std::string ledger_csv(const EvaluationReport& r);
std::string owlness_csv(const EvaluationReport& r);
std::string sweep_csv(const EvaluationReport& r);
nlohmann::json report_json(const EvaluationReport& r);

std::string per_user_svg(const EvaluationReport& r);      // accuracy in increasing order
std::string region_delta_svg(const EvaluationReport& r);  // requires delta
std::string owlness_svg(const EvaluationReport& r);       // requires delta

// Writes every table (and plots when asked) into `dir`; returns the file names.
std::vector<std::string> write_evaluation(const std::filesystem::path& dir, const EvaluationReport& r, bool plots);

nlohmann::json outcome_json(const pipeline::FrameOutcome& o);
nlohmann::json ledger_json(const pipeline::AttritionLedger& l);

}  // namespace gzk::report
