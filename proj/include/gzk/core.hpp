#pragma once

// Domain types shared by every stage of the gaze pipeline.
//
// Coordinates are image pixels: origin top-left, x to the right, y down.
// Landmarks follow the 68-point Multi-PIE mark-up.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gzk {

enum class ErrorCode {
    InvalidArgument,
    DegenerateIntensity,
    DegenerateBox,
    DegenerateEye,
    MissingPupil,
    EmptyTrainingSet,
    DimensionMismatch,
    EmptyClass,
    DivisionByZero,
    MissingBackground,
    NoQualifyingFrames,
    InsufficientData,
    ModeMismatch,
    Format,
    Io,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Batch kernels run either as an OpenMP loop or as the plain serial
// reference loop; both produce identical results.
enum class ExecPolicy { Serial, Parallel };

// ---------------------------------------------------------------------------
// Gaze regions

enum class GazeRegion : std::uint8_t {
    Road,
    CenterStack,
    InstrumentCluster,
    RearviewMirror,
    Left,
    Right,
};

inline constexpr std::size_t kRegionCount = 6;

inline constexpr std::array<GazeRegion, kRegionCount> kAllRegions = {
    GazeRegion::Road,           GazeRegion::CenterStack, GazeRegion::InstrumentCluster,
    GazeRegion::RearviewMirror, GazeRegion::Left,        GazeRegion::Right,
};

constexpr std::size_t region_index(GazeRegion r) noexcept { return static_cast<std::size_t>(r); }

GazeRegion index_to_region(std::size_t index);
std::string_view region_name(GazeRegion r) noexcept;
std::optional<GazeRegion> region_from_name(std::string_view name) noexcept;

using ClassProbabilities = std::array<double, kRegionCount>;

// ---------------------------------------------------------------------------
// Geometry

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr std::size_t kNoseTip = 30;
inline constexpr std::size_t kNormBoxFirst = 27;  // nose + both eyes: 27..47
inline constexpr std::size_t kNormBoxLast = 47;
inline constexpr std::size_t kRightEyeFirst = 36;  // 36..41, the eye the pupil stage reads
inline constexpr std::size_t kEyePoints = 6;

using EyePolygon = std::array<Point2, kEyePoints>;

class Landmarks {
public:
    // Throws InvalidArgument on a non-finite coordinate.
    explicit Landmarks(const std::array<Point2, kLandmarkCount>& points);
    // Flat (x0, y0, x1, y1, ...) layout, 136 values.
    static Landmarks from_flat(std::span<const double> flat);

    const Point2& operator[](std::size_t i) const { return points_[i]; }
    const std::array<Point2, kLandmarkCount>& points() const noexcept { return points_; }
    EyePolygon right_eye() const;

private:
    std::array<Point2, kLandmarkCount> points_;
};

// ---------------------------------------------------------------------------
// Images

class GrayImage {
public:
    GrayImage(int width, int height, std::vector<std::uint8_t> data);
    GrayImage(int width, int height, std::uint8_t fill);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }

private:
    int width_;
    int height_;
    std::vector<std::uint8_t> data_;
};

// ---------------------------------------------------------------------------
// Frames and decisions

enum class FeatureMode : std::uint8_t { HeadOnly, HeadAndEye };

inline constexpr std::size_t kHeadFeatureDim = 2 * kLandmarkCount;
inline constexpr std::size_t kEyeFeatureDim = 2;

constexpr std::size_t feature_dim(FeatureMode mode) noexcept {
    return mode == FeatureMode::HeadOnly ? kHeadFeatureDim : kHeadFeatureDim + kEyeFeatureDim;
}

std::string_view mode_name(FeatureMode mode) noexcept;  // "head-only" / "head-eye"
std::optional<FeatureMode> mode_from_name(std::string_view name) noexcept;

struct FrameRecord {
    std::string subject_id;
    std::int64_t frame_index = 0;
    Landmarks landmarks;
    GrayImage eye_crop;
    EyePolygon eye_polygon;
    GazeRegion label = GazeRegion::Road;

    // Throws InvalidArgument when frame_index < 0 or the polygon leaves the crop.
    void validate() const;
};

struct Decision {
    GazeRegion region = GazeRegion::Road;
    ClassProbabilities probabilities{};
    double confidence = 1.0;  // p_max / p_second; +inf when p_second == 0
    bool accepted = false;
};

// Argmax with lowest-index tie-break; accepted iff confidence > threshold.
Decision make_decision(const ClassProbabilities& probabilities, double confidence_threshold);

}  // namespace gzk
