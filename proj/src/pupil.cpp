#include "gzk/pupil.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace gzk::pupil {

std::string_view status_name(PupilStatus s) noexcept {
    switch (s) {
        case PupilStatus::Detected: return "Detected";
        case PupilStatus::EyeClosed: return "EyeClosed";
        case PupilStatus::NoBlob: return "NoBlob";
    }
    return "?";
}

void PupilGrid::validate() const {
    for (double t : cdf_thresholds)
        if (!(t > 0.0 && t < 1.0))
            throw Error(ErrorCode::InvalidArgument, "cdf threshold must lie in (0,1)");
    auto check_window = [](int w) {
        if (w < 1 || w % 2 == 0) throw Error(ErrorCode::InvalidArgument, "morphology window must be odd and >= 1");
    };
    for (int w : opening_windows) check_window(w);
    for (int w : closing_windows) check_window(w);
}

std::vector<PupilParams> PupilGrid::triples() const {
    std::vector<PupilParams> out;
    out.reserve(27);
    for (double t : cdf_thresholds)
        for (int o : opening_windows)
            for (int c : closing_windows) out.push_back({t, o, c});
    std::sort(out.begin(), out.end());
    return out;
}

PupilGrid PupilGrid::parse(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "pupil grid value '" + item + "' is not a number");
        }
    }
    if (v.size() != 9) throw Error(ErrorCode::InvalidArgument, "pupil grid needs exactly 9 comma-separated values");
    PupilGrid g;
    for (int i = 0; i < 3; ++i) {
        g.cdf_thresholds[i] = v[i];
        for (auto [dst, src] : {std::pair{&g.opening_windows[i], v[3 + i]}, std::pair{&g.closing_windows[i], v[6 + i]}}) {
            if (src != std::floor(src)) throw Error(ErrorCode::InvalidArgument, "morphology window must be an integer");
            *dst = static_cast<int>(src);
        }
    }
    g.validate();
    return g;
}

std::string PupilGrid::to_string() const {
    std::ostringstream os;
    os << cdf_thresholds[0] << ',' << cdf_thresholds[1] << ',' << cdf_thresholds[2];
    for (int w : opening_windows) os << ',' << w;
    for (int w : closing_windows) os << ',' << w;
    return os.str();
}

BinaryImage polygon_mask(int width, int height, const EyePolygon& polygon) {
    BinaryImage mask(width, height);
    const std::size_t n = polygon.size();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            bool inside = false;
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                const Point2& a = polygon[i];
                const Point2& b = polygon[j];
                if ((a.y > y) != (b.y > y)) {
                    const double xc = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if (x < xc) inside = !inside;
                }
            }
            mask.at(x, y) = inside ? 1 : 0;
        }
    }
    return mask;
}

double nearest_rank_percentile(std::span<const std::uint8_t> values, double percent) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty set");
    std::vector<std::uint8_t> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(percent * n / 100.0));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

RealImage rescale_intensity(const GrayImage& img, const BinaryImage& mask) {
    std::vector<std::uint8_t> inside;
    inside.reserve(img.data().size());
    for (std::size_t i = 0; i < img.data().size(); ++i)
        if (mask.data[i]) inside.push_back(img.data()[i]);
    if (inside.empty()) throw Error(ErrorCode::InvalidArgument, "eye mask covers no pixels");

    const double lo = nearest_rank_percentile(inside, 2.0);
    const double hi = nearest_rank_percentile(inside, 98.0);
    if (hi == lo) throw Error(ErrorCode::DegenerateIntensity, "2nd and 98th percentiles coincide");

    RealImage out{img.width(), img.height(), std::vector<double>(img.data().size(), 1.0)};
    const double scale = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (mask.data[i]) out.data[i] = std::clamp((img.data()[i] - lo) * scale, 0.0, 1.0);
    return out;
}

RealImage rescale_intensity(const GrayImage& img, const EyePolygon& polygon) {
    return rescale_intensity(img, polygon_mask(img.width(), img.height(), polygon));
}

BinaryImage binarize(const RealImage& img, double threshold) {
    BinaryImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] < threshold ? 1 : 0;
    return out;
}

namespace {

// Sliding-window count along rows (horizontal) or columns (vertical).
// erode keeps pixels whose full in-bounds window is set; dilate keeps any hit.
BinaryImage window_pass(const BinaryImage& in, int window, bool horizontal, bool erode_op) {
    const int r = window / 2;
    BinaryImage out(in.width, in.height);
    const int lines = horizontal ? in.height : in.width;
    const int len = horizontal ? in.width : in.height;
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
    for (int l = 0; l < lines; ++l) {
        auto px = [&](int i) { return horizontal ? in.at(i, l) : in.at(l, i); };
        prefix[0] = 0;
        for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + px(i);
        for (int i = 0; i < len; ++i) {
            const int a = i - r;
            const int b = i + r;
            std::uint8_t v;
            if (erode_op) {
                v = (a >= 0 && b < len && prefix[b + 1] - prefix[a] == window) ? 1 : 0;
            } else {
                v = prefix[std::min(b, len - 1) + 1] - prefix[std::max(a, 0)] > 0 ? 1 : 0;
            }
            if (horizontal)
                out.at(i, l) = v;
            else
                out.at(l, i) = v;
        }
    }
    return out;
}

void check_window(int window) {
    if (window < 1 || window % 2 == 0)
        throw Error(ErrorCode::InvalidArgument, "morphology window must be odd and >= 1");
}

}  // namespace

BinaryImage erode(const BinaryImage& img, int window) {
    check_window(window);
    if (window == 1) return img;
    return window_pass(window_pass(img, window, true, true), window, false, true);
}

BinaryImage dilate(const BinaryImage& img, int window) {
    check_window(window);
    if (window == 1) return img;
    return window_pass(window_pass(img, window, true, false), window, false, false);
}

BinaryImage morph_open(const BinaryImage& img, int window) { return dilate(erode(img, window), window); }

BinaryImage morph_close(const BinaryImage& img, int window) { return erode(dilate(img, window), window); }

std::optional<Blob> largest_circular_blob(const BinaryImage& img) {
    const int w = img.width;
    const int h = img.height;
    std::vector<std::uint8_t> seen(img.data.size(), 0);
    std::vector<int> stack;
    std::optional<Blob> best;

    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const std::size_t s = static_cast<std::size_t>(sy) * w + sx;
            if (!img.data[s] || seen[s]) continue;
            int area = 0, minx = sx, maxx = sx, miny = sy, maxy = sy;
            double sumx = 0.0, sumy = 0.0;
            seen[s] = 1;
            stack.assign(1, static_cast<int>(s));
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int x = p % w;
                const int y = p / w;
                ++area;
                sumx += x;
                sumy += y;
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                        if (img.data[q] && !seen[q]) {
                            seen[q] = 1;
                            stack.push_back(static_cast<int>(q));
                        }
                    }
                }
            }
            const int bw = maxx - minx + 1;
            const int bh = maxy - miny + 1;
            const double aspect = static_cast<double>(std::min(bw, bh)) / std::max(bw, bh);
            if (aspect < kMinBlobAspect) continue;
            if (!best || area > best->area) best = Blob{area, bw, bh, {sumx / area, sumy / area}};
        }
    }
    if (!best || best->area < kMinBlobArea) return std::nullopt;
    return best;
}

bool eye_is_closed(const EyePolygon& polygon) {
    double minx = polygon[0].x, maxx = minx, miny = polygon[0].y, maxy = miny;
    for (const auto& p : polygon) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    return (maxy - miny) < kClosedEyeRatio * (maxx - minx);
}

std::optional<Blob> evaluate_params(const RealImage& rescaled, const PupilParams& params) {
    return largest_circular_blob(
        morph_close(morph_open(binarize(rescaled, params.cdf_threshold), params.opening_window),
                    params.closing_window));
}

PupilResult detect_pupil(const GrayImage& eye_crop, const EyePolygon& polygon, const PupilGrid& grid) {
    PupilResult result;
    if (eye_is_closed(polygon)) {
        result.status = PupilStatus::EyeClosed;
        return result;
    }

    RealImage rescaled;
    try {
        rescaled = rescale_intensity(eye_crop, polygon);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateIntensity && e.code() != ErrorCode::InvalidArgument) throw;
        result.status = PupilStatus::NoBlob;
        return result;
    }

    // Shared prefixes of the pipeline are computed once per (t) and (t, open).
    const std::set<double> thresholds(grid.cdf_thresholds.begin(), grid.cdf_thresholds.end());
    const std::set<int> openings(grid.opening_windows.begin(), grid.opening_windows.end());
    const std::set<int> closings(grid.closing_windows.begin(), grid.closing_windows.end());

    std::optional<Blob> best;
    PupilParams best_params;
    for (double t : thresholds) {
        const BinaryImage bin = binarize(rescaled, t);
        for (int o : openings) {
            const BinaryImage opened = morph_open(bin, o);
            for (int c : closings) {
                auto blob = largest_circular_blob(morph_close(opened, c));
                // Ascending iteration order: strict > keeps the lexicographically smallest triple.
                if (blob && (!best || blob->area > best->area)) {
                    best = blob;
                    best_params = {t, o, c};
                }
            }
        }
    }

    if (!best) {
        result.status = PupilStatus::NoBlob;
        return result;
    }
    result.status = PupilStatus::Detected;
    result.center = best->centroid;
    result.blob_area = best->area;
    result.bbox_width = best->bbox_width;
    result.bbox_height = best->bbox_height;
    result.chosen_params = best_params;
    return result;
}

}  // namespace gzk::pupil
