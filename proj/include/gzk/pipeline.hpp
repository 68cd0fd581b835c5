#pragma once

// Frame-level orchestration: pupil detection -> features -> forest ->
// confidence pruning, with attrition accounting.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gzk/core.hpp"
#include "gzk/features.hpp"
#include "gzk/forest.hpp"
#include "gzk/pupil.hpp"

namespace gzk::pipeline {

struct PipelineConfig {
    FeatureMode mode = FeatureMode::HeadAndEye;
    double confidence_threshold = 10.0;
    pupil::PupilGrid grid;
    forest::ForestConfig forest;
    // Drop frames without a detected pupil in head-only mode too, so both
    // modes classify the same frame set.
    bool require_pupil = true;

    void validate() const;
};

// One ingested frame. `record` is empty when the landmark record was absent
// or unparseable; the identifying fields are kept when they could be read.
struct RawFrame {
    std::string subject_id;
    std::int64_t frame_index = -1;
    std::optional<GazeRegion> label;
    std::optional<FrameRecord> record;
    std::string error;  // why `record` is empty, when known
};

RawFrame from_record(FrameRecord record);

enum class DropReason : std::uint8_t { None, NoFace, PupilFailed, LowConfidence };

std::string_view drop_reason_name(DropReason r) noexcept;

// Stages 3-4 for one frame, independent of the classifier.
struct ProcessedFrame {
    std::string subject_id;
    std::int64_t frame_index = 0;
    GazeRegion label = GazeRegion::Road;
    pupil::PupilResult pupil;
    features::HeadBlock head{};
    std::optional<Point2> eye;  // normalized pupil, present iff the pupil was detected
    Point2 nose_tip;            // normalized landmark 30

    features::FeatureVector feature(FeatureMode mode) const { return features::build_feature(head, eye, mode); }
};

// Empty when the frame has no usable face (missing record or degenerate landmark box).
std::optional<ProcessedFrame> process_frame(const RawFrame& frame, const pupil::PupilGrid& grid);

std::vector<std::optional<ProcessedFrame>> process_batch(std::span<const RawFrame> frames,
                                                         const pupil::PupilGrid& grid,
                                                         ExecPolicy policy = ExecPolicy::Parallel);

struct FrameOutcome {
    std::string subject_id;
    std::int64_t frame_index = -1;
    std::optional<GazeRegion> label;
    DropReason drop = DropReason::None;
    pupil::PupilResult pupil;
    std::optional<Decision> decision;  // present for None and LowConfidence

    bool accepted() const noexcept { return drop == DropReason::None; }
};

struct AttritionLedger {
    std::uint64_t total_frames = 0;
    std::uint64_t faces_detected = 0;
    std::uint64_t pupils_detected = 0;
    std::uint64_t confident_decisions = 0;

    void record(const FrameOutcome& outcome);
    void merge(const AttritionLedger& other);
    // total >= faces >= pupils >= confident
    bool valid() const noexcept;

    friend bool operator==(const AttritionLedger&, const AttritionLedger&) = default;
};

// Throws ModeMismatch when the model dimension does not fit cfg.mode.
void check_model_mode(const forest::ForestModel& model, FeatureMode mode);

// Classifies an already processed frame (skips stages 3-4).
FrameOutcome classify_processed(const ProcessedFrame& frame, const forest::ForestModel& model,
                                const PipelineConfig& cfg);

FrameOutcome classify_frame(const RawFrame& frame, const forest::ForestModel& model, const PipelineConfig& cfg);
FrameOutcome classify_frame(const FrameRecord& frame, const forest::ForestModel& model, const PipelineConfig& cfg);

struct BatchResult {
    std::vector<FrameOutcome> outcomes;
    AttritionLedger ledger;
};

BatchResult classify_batch(std::span<const RawFrame> frames, const forest::ForestModel& model,
                           const PipelineConfig& cfg, ExecPolicy policy = ExecPolicy::Parallel);

struct DecisionRates {
    double confident_hz = 0.0;  // fps * confident / pupils
    double effective_hz = 0.0;  // fps * confident / total
};

// Throws DivisionByZero when pupils or total is zero, InvalidArgument for fps <= 0
// or an inconsistent ledger.
DecisionRates decision_rates(const AttritionLedger& ledger, double fps);

}  // namespace gzk::pipeline
