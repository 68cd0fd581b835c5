#pragma once

// Owlness metric, strategy partition, confusion matrices and the
// leave-one-subject-out evaluation comparing head-only with head+eye features.

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gzk/core.hpp"
#include "gzk/pipeline.hpp"

namespace gzk::analysis {

// ---------------------------------------------------------------------------
// Owlness

struct SubjectBackground {
    Point2 nose_mean;
    Point2 pupil_mean;
    std::size_t frame_count = 0;
};

// Per-subject mean normalized nose tip and pupil over pupil-passing frames.
class BackgroundModel {
public:
    static BackgroundModel build(std::span<const pipeline::ProcessedFrame> frames);

    // Throws MissingBackground.
    const SubjectBackground& at(const std::string& subject_id) const;
    bool contains(const std::string& subject_id) const { return subjects_.count(subject_id) != 0; }
    const std::map<std::string, SubjectBackground>& subjects() const noexcept { return subjects_; }

private:
    std::map<std::string, SubjectBackground> subjects_;
};

struct OwlnessTerms {
    double d_head = 0.0;
    double d_pupil = 0.0;
    double m = 0.5;  // d_head / (d_head + d_pupil); 0.5 for a motionless frame
};

OwlnessTerms owlness_terms(const Point2& nose_tip, const Point2& pupil, const SubjectBackground& bg);

// Throws MissingPupil (pupil not detected) or MissingBackground.
double owlness_frame(const pipeline::ProcessedFrame& frame, const BackgroundModel& bg);
double owlness_frame(const FrameRecord& frame, const pupil::PupilResult& pupil, const BackgroundModel& bg);

enum class Strategy : std::uint8_t { Owl, Mixed, Lizard };

std::string_view strategy_name(Strategy s) noexcept;

struct OwlThresholds {
    double low = 0.45;
    double high = 0.55;

    void validate() const;
};

Strategy classify_strategy(double m, const OwlThresholds& t) noexcept;

struct OwlnessReport {
    std::string subject_id;
    double m = 0.0;
    double mean_d_head = 0.0;
    double mean_d_pupil = 0.0;
    Strategy strategy = Strategy::Mixed;
    std::size_t frame_count = 0;
};

// Mean of per-frame owlness over the subject's pupil-passing frames in `frames`.
// Throws NoQualifyingFrames.
OwlnessReport owlness_subject(const std::string& subject_id, std::span<const pipeline::ProcessedFrame> frames,
                              const BackgroundModel& bg, const OwlThresholds& thresholds = {});

// One report per subject with pupil-passing frames, sorted by subject id.
std::vector<OwlnessReport> owlness_all(std::span<const pipeline::ProcessedFrame> frames,
                                       const OwlThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Confusion matrix: rows = ground truth, columns = prediction.

class ConfusionMatrix {
public:
    void add(GazeRegion truth, GazeRegion predicted, std::uint64_t weight = 1);
    void merge(const ConfusionMatrix& other);

    std::uint64_t count(GazeRegion truth, GazeRegion predicted) const {
        return counts_[region_index(truth)][region_index(predicted)];
    }
    std::uint64_t row_total(GazeRegion truth) const;
    std::uint64_t total() const;
    // Row-normalized percentages; an empty row stays all zero.
    std::array<std::array<double, kRegionCount>, kRegionCount> row_percentages() const;
    double accuracy() const;                      // NaN when empty
    double region_accuracy(GazeRegion r) const;   // NaN when the row is empty

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::array<std::array<std::uint64_t, kRegionCount>, kRegionCount> counts_{};
};

// ---------------------------------------------------------------------------
// Leave-one-subject-out evaluation

struct SweepPoint {
    double threshold = 1.0;
    std::uint64_t accepted = 0;
    std::uint64_t correct = 0;
    double accuracy = 0.0;  // NaN when nothing is accepted
};

struct EvaluationConfig {
    pipeline::PipelineConfig pipeline;  // mode is ignored; `modes` decides
    std::vector<FeatureMode> modes{FeatureMode::HeadOnly, FeatureMode::HeadAndEye};
    std::size_t repetitions = 100;
    std::uint64_t seed = 0;
    std::size_t min_frames_per_region = 120;
    // Extra pruning thresholds re-applied to the same decisions.
    std::vector<double> sweep_thresholds{1.0, 2.0, 5.0, 10.0, 20.0};

    void validate() const;
};

struct ModeEvaluation {
    FeatureMode mode = FeatureMode::HeadOnly;
    std::vector<double> accuracies;  // per repetition, NaN when nothing was accepted
    double mean = 0.0;               // over repetitions with a defined accuracy; NaN if none
    double stddev = 0.0;
    ConfusionMatrix confusion;       // accepted decisions, all repetitions
    std::uint64_t decisions = 0;     // balanced test decisions, all repetitions
    std::uint64_t accepted = 0;
    // Held-out frames (each counted once, first repetition) with an accepted decision.
    std::uint64_t confident_frames = 0;
    std::vector<SweepPoint> sweep;   // pooled over repetitions, balanced counts
};

struct UserEvaluation {
    std::string subject_id;
    std::vector<ModeEvaluation> modes;

    const ModeEvaluation* find(FeatureMode mode) const;
};

struct EvaluationRun {
    std::vector<UserEvaluation> users;  // sorted by subject id
    bool complete = true;
};

// Subjects with pupil-passing frames, sorted.
std::vector<std::string> subjects_of(std::span<const pipeline::ProcessedFrame> frames);

// Throws InsufficientData naming the first subject/region below the minimum
// number of pupil-passing frames.
void check_sufficiency(std::span<const pipeline::ProcessedFrame> frames, std::size_t min_frames_per_region);

UserEvaluation evaluate_user(const std::string& held_out, std::span<const pipeline::ProcessedFrame> frames,
                             const EvaluationConfig& cfg);

// Every subject held out in turn. `cancel`, when set during the run, stops
// scheduling work and marks the result incomplete.
EvaluationRun evaluate_all(std::span<const pipeline::ProcessedFrame> frames, const EvaluationConfig& cfg,
                           ExecPolicy policy = ExecPolicy::Parallel, const std::atomic<bool>* cancel = nullptr);

// ---------------------------------------------------------------------------
// Reporting

struct RegionDelta {
    GazeRegion region = GazeRegion::Road;
    double head_only = 0.0;
    double head_eye = 0.0;
    double delta = 0.0;
};

struct UserDelta {
    std::string subject_id;
    double owlness = 0.0;
    Strategy strategy = Strategy::Mixed;
    double head_only = 0.0;
    double head_eye = 0.0;
    double delta = 0.0;  // NaN when either accuracy is undefined
};

struct DeltaReport {
    std::vector<RegionDelta> regions;
    std::vector<UserDelta> users;
    double overall_head_only = 0.0;  // mean of per-user mean accuracies
    double overall_head_eye = 0.0;
    double overall_delta = 0.0;
    double pearson_r = 0.0;  // owlness vs per-user delta
    bool pearson_defined = false;
    std::array<double, 3> strategy_mean_delta{};  // indexed by Strategy; NaN when empty
    std::array<std::size_t, 3> strategy_count{};
};

// Throws ModeMismatch unless every user was evaluated in both modes, and
// MissingBackground when a user has no owlness report.
DeltaReport accuracy_delta_report(std::span<const UserEvaluation> users, std::span<const OwlnessReport> owlness,
                                  const OwlThresholds& thresholds = {});

struct LabeledDecision {
    GazeRegion truth = GazeRegion::Road;
    Decision decision;
};

// Re-prunes fixed decisions at each threshold (confidence > threshold).
std::vector<SweepPoint> threshold_sweep(std::span<const LabeledDecision> decisions, std::span<const double> thresholds);

// Empty when undefined (fewer than two points or zero variance).
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
// Pearson on average ranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace gzk::analysis
