#include "gzk/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gzk {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DegenerateIntensity: return "DegenerateIntensity";
        case ErrorCode::DegenerateBox: return "DegenerateBox";
        case ErrorCode::DegenerateEye: return "DegenerateEye";
        case ErrorCode::MissingPupil: return "MissingPupil";
        case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::DivisionByZero: return "DivisionByZero";
        case ErrorCode::MissingBackground: return "MissingBackground";
        case ErrorCode::NoQualifyingFrames: return "NoQualifyingFrames";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::ModeMismatch: return "ModeMismatch";
        case ErrorCode::Format: return "Format";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

GazeRegion index_to_region(std::size_t index) {
    if (index >= kRegionCount) throw Error(ErrorCode::InvalidArgument, "region index out of range");
    return kAllRegions[index];
}

std::string_view region_name(GazeRegion r) noexcept {
    switch (r) {
        case GazeRegion::Road: return "Road";
        case GazeRegion::CenterStack: return "CenterStack";
        case GazeRegion::InstrumentCluster: return "InstrumentCluster";
        case GazeRegion::RearviewMirror: return "RearviewMirror";
        case GazeRegion::Left: return "Left";
        case GazeRegion::Right: return "Right";
    }
    return "?";
}

std::optional<GazeRegion> region_from_name(std::string_view name) noexcept {
    for (auto r : kAllRegions)
        if (region_name(r) == name) return r;
    return std::nullopt;
}

std::string_view mode_name(FeatureMode mode) noexcept {
    return mode == FeatureMode::HeadOnly ? "head-only" : "head-eye";
}

std::optional<FeatureMode> mode_from_name(std::string_view name) noexcept {
    if (name == "head-only") return FeatureMode::HeadOnly;
    if (name == "head-eye") return FeatureMode::HeadAndEye;
    return std::nullopt;
}

Landmarks::Landmarks(const std::array<Point2, kLandmarkCount>& points) : points_(points) {
    for (const auto& p : points_)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw Error(ErrorCode::InvalidArgument, "non-finite landmark coordinate");
}

Landmarks Landmarks::from_flat(std::span<const double> flat) {
    if (flat.size() != 2 * kLandmarkCount)
        throw Error(ErrorCode::InvalidArgument,
                    "expected 136 landmark values, got " + std::to_string(flat.size()));
    std::array<Point2, kLandmarkCount> pts;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) pts[i] = {flat[2 * i], flat[2 * i + 1]};
    return Landmarks(pts);
}

EyePolygon Landmarks::right_eye() const {
    EyePolygon eye;
    std::copy_n(points_.begin() + kRightEyeFirst, kEyePoints, eye.begin());
    return eye;
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw Error(ErrorCode::InvalidArgument, "image data length does not match width x height");
}

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : GrayImage(width, height,
                std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                              static_cast<std::size_t>(std::max(height, 0)),
                                          fill)) {}

void FrameRecord::validate() const {
    if (frame_index < 0) throw Error(ErrorCode::InvalidArgument, "frame_index must be >= 0");
    const double w = eye_crop.width();
    const double h = eye_crop.height();
    for (const auto& p : eye_polygon) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x > w - 1.0 ||
            p.y > h - 1.0)
            throw Error(ErrorCode::InvalidArgument, "eye polygon point outside the eye crop");
    }
}

Decision make_decision(const ClassProbabilities& probabilities, double confidence_threshold) {
    Decision d;
    d.probabilities = probabilities;
    std::size_t best = 0;
    for (std::size_t i = 1; i < kRegionCount; ++i)
        if (probabilities[i] > probabilities[best]) best = i;
    double second = -1.0;
    for (std::size_t i = 0; i < kRegionCount; ++i)
        if (i != best) second = std::max(second, probabilities[i]);
    d.region = kAllRegions[best];
    d.confidence = second > 0.0 ? probabilities[best] / second : std::numeric_limits<double>::infinity();
    d.accepted = d.confidence > confidence_threshold;
    return d;
}

}  // namespace gzk
