#pragma once

// CDF-style pupil extraction on an eye crop:
//   mask to the eye polygon -> percentile rescale -> dark-pixel binarization
//   -> opening -> closing -> largest circular blob,
// searched exhaustively over a 3x3x3 parameter grid per image.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gzk/core.hpp"

namespace gzk::pupil {

struct PupilParams {
    double cdf_threshold = 0.05;
    int opening_window = 1;
    int closing_window = 1;

    friend auto operator<=>(const PupilParams&, const PupilParams&) = default;
};

struct PupilGrid {
    std::array<double, 3> cdf_thresholds{0.03, 0.05, 0.10};
    std::array<int, 3> opening_windows{1, 3, 5};
    std::array<int, 3> closing_windows{1, 3, 5};

    // Throws InvalidArgument for thresholds outside (0,1) or even/non-positive windows.
    void validate() const;
    // All 27 triples in ascending lexicographic order.
    std::vector<PupilParams> triples() const;
    // "t1,t2,t3,o1,o2,o3,c1,c2,c3"
    static PupilGrid parse(const std::string& text);
    std::string to_string() const;
};

enum class PupilStatus : std::uint8_t { Detected, EyeClosed, NoBlob };

std::string_view status_name(PupilStatus s) noexcept;

struct PupilResult {
    PupilStatus status = PupilStatus::NoBlob;
    std::optional<Point2> center;
    int blob_area = 0;
    int bbox_width = 0;
    int bbox_height = 0;
    std::optional<PupilParams> chosen_params;

    bool detected() const noexcept { return status == PupilStatus::Detected; }
};

struct RealImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // 0 or 1

    BinaryImage() = default;
    BinaryImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

struct Blob {
    int area = 0;
    int bbox_width = 0;
    int bbox_height = 0;
    Point2 centroid;
};

inline constexpr int kMinBlobArea = 5;
inline constexpr double kMinBlobAspect = 0.5;
inline constexpr double kClosedEyeRatio = 0.10;

// Pixel (x, y) belongs to the polygon when its center (x, y) is inside (even-odd rule).
BinaryImage polygon_mask(int width, int height, const EyePolygon& polygon);

// Nearest-rank percentile: element at rank ceil(p/100 * n) (1-based) of the sorted values.
double nearest_rank_percentile(std::span<const std::uint8_t> values, double percent);

// Maps p2 -> 0, p98 -> 1 over masked pixels, clamped; masked-out pixels -> 1.
// Throws DegenerateIntensity when p2 == p98 and InvalidArgument for an empty mask.
RealImage rescale_intensity(const GrayImage& img, const EyePolygon& polygon);
RealImage rescale_intensity(const GrayImage& img, const BinaryImage& mask);

// 1 where value < threshold (dark pupil candidates).
BinaryImage binarize(const RealImage& img, double threshold);

// Square structuring element of odd side `window`; pixels outside the image are background.
BinaryImage erode(const BinaryImage& img, int window);
BinaryImage dilate(const BinaryImage& img, int window);
BinaryImage morph_open(const BinaryImage& img, int window);
BinaryImage morph_close(const BinaryImage& img, int window);

// Largest 8-connected component with min(w,h)/max(w,h) >= 0.5; nullopt when none
// qualifies or the winner is smaller than 5 pixels. Equal areas keep the component
// found first in raster order.
std::optional<Blob> largest_circular_blob(const BinaryImage& img);

// Polygon bounding-box height < 10% of its width.
bool eye_is_closed(const EyePolygon& polygon);

// One grid point of the search on an already rescaled image.
std::optional<Blob> evaluate_params(const RealImage& rescaled, const PupilParams& params);

PupilResult detect_pupil(const GrayImage& eye_crop, const EyePolygon& polygon,
                         const PupilGrid& grid = {});

}  // namespace gzk::pupil
