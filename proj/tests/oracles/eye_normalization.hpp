#pragma once

// Pupil position in the de-rotated eye box via an explicit rotation matrix.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gzk/core.hpp"

namespace oracle {

inline gzk::Point2 normalize_pupil(const gzk::Point2& pupil, const gzk::EyePolygon& poly) {
    const double theta = std::atan2(poly[3].y - poly[0].y, poly[3].x - poly[0].x);
    const std::array<std::array<double, 2>, 2> rot{{{std::cos(-theta), -std::sin(-theta)},
                                                     {std::sin(-theta), std::cos(-theta)}}};
    auto apply = [&](const gzk::Point2& p) {
        const double dx = p.x - poly[0].x, dy = p.y - poly[0].y;
        return gzk::Point2{rot[0][0] * dx + rot[0][1] * dy, rot[1][0] * dx + rot[1][1] * dy};
    };
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (const auto& p : poly) {
        const auto q = apply(p);
        min_x = std::min(min_x, q.x);
        max_x = std::max(max_x, q.x);
        min_y = std::min(min_y, q.y);
        max_y = std::max(max_y, q.y);
    }
    const auto q = apply(pupil);
    return {std::clamp((q.x - min_x) / (max_x - min_x), 0.0, 1.0),
            std::clamp((q.y - min_y) / (max_y - min_y), 0.0, 1.0)};
}

}  // namespace oracle
