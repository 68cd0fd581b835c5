#pragma once

// Calibration-free features: landmarks normalized to the nose+eyes bounding
// box of the current frame, optionally followed by the pupil position inside
// the de-rotated eye box.

#include <array>
#include <span>
#include <vector>

#include "gzk/core.hpp"
#include "gzk/pupil.hpp"

namespace gzk::features {

using HeadBlock = std::array<double, kHeadFeatureDim>;

struct FeatureVector {
    FeatureMode mode = FeatureMode::HeadOnly;
    std::vector<double> values;  // head block, then eye block when mode == HeadAndEye

    std::span<const double> head() const { return std::span(values).first(kHeadFeatureDim); }
    std::optional<Point2> eye() const {
        if (mode != FeatureMode::HeadAndEye) return std::nullopt;
        return Point2{values[kHeadFeatureDim], values[kHeadFeatureDim + 1]};
    }
    std::size_t dim() const noexcept { return values.size(); }
};

// Axis-aligned map of the bounding box of landmarks 27..47 onto [0,1]^2,
// applied to all 68 points (no clamping). Throws DegenerateBox.
HeadBlock normalize_landmarks(const Landmarks& lm);

// Normalized nose tip (landmark 30) without building the whole block.
Point2 normalized_nose_tip(const Landmarks& lm);

// Rotates about polygon point 0 so that corners 0 and 3 are horizontal, then
// expresses the pupil in the rotated polygon's bounding box, clamped to [0,1].
// Throws DegenerateEye.
Point2 normalize_pupil(const Point2& pupil_center, const EyePolygon& eye_polygon);

FeatureVector build_feature(const HeadBlock& head, const std::optional<Point2>& eye, FeatureMode mode);

// Throws MissingPupil when mode needs the eye block and the pupil was not detected.
FeatureVector build_feature(const FrameRecord& frame, const pupil::PupilResult& pupil, FeatureMode mode);

}  // namespace gzk::features
