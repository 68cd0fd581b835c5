#include "gzk/pipeline.hpp"

#include <cmath>

namespace gzk::pipeline {

void PipelineConfig::validate() const {
    if (!(confidence_threshold >= 1.0))
        throw Error(ErrorCode::InvalidArgument, "confidence threshold must be >= 1");
    grid.validate();
    forest.validate();
}

RawFrame from_record(FrameRecord record) {
    RawFrame f;
    f.subject_id = record.subject_id;
    f.frame_index = record.frame_index;
    f.label = record.label;
    f.record = std::move(record);
    return f;
}

std::string_view drop_reason_name(DropReason r) noexcept {
    switch (r) {
        case DropReason::None: return "Accepted";
        case DropReason::NoFace: return "NoFace";
        case DropReason::PupilFailed: return "PupilFailed";
        case DropReason::LowConfidence: return "LowConfidence";
    }
    return "?";
}

std::optional<ProcessedFrame> process_frame(const RawFrame& frame, const pupil::PupilGrid& grid) {
    if (!frame.record) return std::nullopt;
    const FrameRecord& rec = *frame.record;

    ProcessedFrame out;
    out.subject_id = rec.subject_id;
    out.frame_index = rec.frame_index;
    out.label = rec.label;
    try {
        out.head = features::normalize_landmarks(rec.landmarks);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateBox) return std::nullopt;
        throw;
    }
    out.nose_tip = {out.head[2 * kNoseTip], out.head[2 * kNoseTip + 1]};

    out.pupil = pupil::detect_pupil(rec.eye_crop, rec.eye_polygon, grid);
    if (out.pupil.detected()) {
        try {
            out.eye = features::normalize_pupil(*out.pupil.center, rec.eye_polygon);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateEye) throw;
            out.pupil.status = pupil::PupilStatus::NoBlob;
        }
    }
    return out;
}

std::vector<std::optional<ProcessedFrame>> process_batch(std::span<const RawFrame> frames,
                                                         const pupil::PupilGrid& grid, ExecPolicy policy) {
    std::vector<std::optional<ProcessedFrame>> out(frames.size());
    const auto n = static_cast<std::int64_t>(frames.size());
    if (policy == ExecPolicy::Serial) {
        for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = process_frame(frames[static_cast<std::size_t>(i)], grid);
    } else {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = process_frame(frames[static_cast<std::size_t>(i)], grid);
    }
    return out;
}

void AttritionLedger::record(const FrameOutcome& outcome) {
    ++total_frames;
    if (outcome.drop == DropReason::NoFace) return;
    ++faces_detected;
    if (outcome.drop == DropReason::PupilFailed) return;
    ++pupils_detected;
    if (outcome.drop == DropReason::None) ++confident_decisions;
}

void AttritionLedger::merge(const AttritionLedger& other) {
    total_frames += other.total_frames;
    faces_detected += other.faces_detected;
    pupils_detected += other.pupils_detected;
    confident_decisions += other.confident_decisions;
}

bool AttritionLedger::valid() const noexcept {
    return total_frames >= faces_detected && faces_detected >= pupils_detected &&
           pupils_detected >= confident_decisions;
}

void check_model_mode(const forest::ForestModel& model, FeatureMode mode) {
    if (model.feature_dim() != feature_dim(mode))
        throw Error(ErrorCode::ModeMismatch, "model expects " + std::to_string(model.feature_dim()) +
                                                 " features but mode " + std::string(mode_name(mode)) + " produces " +
                                                 std::to_string(feature_dim(mode)));
}

FrameOutcome classify_processed(const ProcessedFrame& frame, const forest::ForestModel& model,
                                const PipelineConfig& cfg) {
    FrameOutcome out;
    out.subject_id = frame.subject_id;
    out.frame_index = frame.frame_index;
    out.label = frame.label;
    out.pupil = frame.pupil;

    const bool need_pupil = cfg.mode == FeatureMode::HeadAndEye || cfg.require_pupil;
    if (need_pupil && !frame.eye) {
        out.drop = DropReason::PupilFailed;
        return out;
    }
    const auto fv = frame.feature(cfg.mode);
    out.decision = make_decision(model.predict_proba(fv), cfg.confidence_threshold);
    out.drop = out.decision->accepted ? DropReason::None : DropReason::LowConfidence;
    return out;
}

FrameOutcome classify_frame(const RawFrame& frame, const forest::ForestModel& model, const PipelineConfig& cfg) {
    check_model_mode(model, cfg.mode);
    auto processed = process_frame(frame, cfg.grid);
    if (!processed) {
        FrameOutcome out;
        out.subject_id = frame.subject_id;
        out.frame_index = frame.frame_index;
        out.label = frame.label;
        out.drop = DropReason::NoFace;
        return out;
    }
    return classify_processed(*processed, model, cfg);
}

FrameOutcome classify_frame(const FrameRecord& frame, const forest::ForestModel& model, const PipelineConfig& cfg) {
    return classify_frame(from_record(frame), model, cfg);
}

BatchResult classify_batch(std::span<const RawFrame> frames, const forest::ForestModel& model,
                           const PipelineConfig& cfg, ExecPolicy policy) {
    check_model_mode(model, cfg.mode);
    BatchResult result;
    result.outcomes.resize(frames.size());
    const auto n = static_cast<std::int64_t>(frames.size());
    if (policy == ExecPolicy::Serial) {
        for (std::int64_t i = 0; i < n; ++i)
            result.outcomes[static_cast<std::size_t>(i)] = classify_frame(frames[static_cast<std::size_t>(i)], model, cfg);
    } else {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::int64_t i = 0; i < n; ++i)
            result.outcomes[static_cast<std::size_t>(i)] = classify_frame(frames[static_cast<std::size_t>(i)], model, cfg);
    }
    // Ledger is folded after the loop so counters never race.
    for (const auto& o : result.outcomes) result.ledger.record(o);
    return result;
}

DecisionRates decision_rates(const AttritionLedger& ledger, double fps) {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
    if (!ledger.valid()) throw Error(ErrorCode::InvalidArgument, "ledger counters are not monotone");
    if (ledger.pupils_detected == 0 || ledger.total_frames == 0)
        throw Error(ErrorCode::DivisionByZero, "ledger has no pupil-passing or no total frames");
    const double confident = static_cast<double>(ledger.confident_decisions);
    return {fps * confident / static_cast<double>(ledger.pupils_detected),
            fps * confident / static_cast<double>(ledger.total_frames)};
}

}  // namespace gzk::pipeline
