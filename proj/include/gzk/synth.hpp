#pragma once

// Synthetic driver populations with known gaze strategy.
//
// A gaze shift g (in normalized box units) is split between the head and the
// eyes by the subject's head gain alpha: the nose tip moves by alpha*g inside
// the nose+eyes box, the pupil by (1-alpha)*g inside the eye box. Without
// noise the owlness of every frame is therefore exactly alpha.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gzk/core.hpp"
#include "gzk/pipeline.hpp"
#include "gzk/random.hpp"

namespace gzk::synth {

using RegionTargets = std::array<Point2, kRegionCount>;

// Road at the origin; center stack and instrument cluster sit close to it.
RegionTargets default_region_targets();

inline constexpr int kEyeCropWidth = 40;
inline constexpr int kEyeCropHeight = 24;

struct SubjectProfile {
    std::string subject_id;
    double head_gain = 0.5;        // alpha in [0,1]
    std::array<Point2, kLandmarkCount> face_template{};  // rest pose, pixels
    double sigma_landmark = 1.0;   // px, per-frame landmark jitter (eye contour points: a quarter of it)
    double sigma_gaze = 0.0;       // per-frame scatter of the gaze target, normalized units
    double sigma_sway = 0.0;       // head sway compensated by the eyes, normalized units
    double sigma_image = 0.03;     // fraction of full intensity scale
    double p_face_fail = 0.0;
    double p_pupil_fail = 0.0;     // conditional on a detected face
    double pupil_radius = 4.0;     // px

    void validate() const;
};

// Canonical frontal face: right-image eye 36..41 is 30 px wide, nose+eyes
// box about 110 x 57 px, centered near (400, 300).
std::array<Point2, kLandmarkCount> canonical_face();

struct FrameTruth {
    Point2 nose_tip_normalized;  // noise-free, in nose+eyes box units
    Point2 pupil_normalized;     // noise-free, in eye box units
    Point2 pupil_center_crop;    // px in the eye crop
};

struct SynthFrame {
    pipeline::RawFrame frame;
    FrameTruth truth;
};

SynthFrame generate_frame(const SubjectProfile& profile, GazeRegion region, std::int64_t frame_index, Rng& rng,
                          const RegionTargets& targets = default_region_targets());

enum class AlphaSchedule { Linspace, Uniform };

struct PopulationConfig {
    std::size_t n_subjects = 40;
    std::size_t frames_per_region = 120;
    std::uint64_t seed = 0;
    AlphaSchedule schedule = AlphaSchedule::Linspace;
    double alpha_min = 0.0;
    double alpha_max = 1.0;
    double sigma_landmark = 1.0;
    double sigma_gaze = 0.02;
    double sigma_sway = 0.04;
    double sigma_image = 0.03;
    double sigma_shape = 0.3;  // px, fixed per-subject template deviation
    double p_face_fail = 0.0;
    double p_pupil_fail = 0.0;
    double pupil_radius = 4.0;
    RegionTargets targets = default_region_targets();

    void validate() const;
};

struct Population {
    std::vector<SubjectProfile> subjects;
    std::vector<SynthFrame> frames;  // subject-major, region-major, then repetition
};

std::vector<SubjectProfile> make_profiles(const PopulationConfig& cfg);

// Deterministic under cfg.seed for either execution policy.
Population generate_population(const PopulationConfig& cfg, ExecPolicy policy = ExecPolicy::Parallel);

// Renders an eye crop with a dark disk; used for direct detector checks.
GrayImage render_eye(int width, int height, const EyePolygon& polygon, const Point2& pupil_center,
                     double pupil_radius, double sigma_image, Rng& rng);

}  // namespace gzk::synth
