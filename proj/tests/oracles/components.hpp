#pragma once

// Flood-fill connected components and the circular-blob rule on top of them.

#include <optional>
#include <vector>

#include "gzk/pupil.hpp"

namespace oracle {

struct Component {
    int area = 0;
    int min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    double sum_x = 0.0, sum_y = 0.0;
};

// Components in order of their first pixel in raster order.
inline std::vector<Component> components(const gzk::pupil::BinaryImage& img) {
    std::vector<int> label(img.data.size(), -1);
    std::vector<Component> out;
    for (int y0 = 0; y0 < img.height; ++y0)
        for (int x0 = 0; x0 < img.width; ++x0) {
            if (!img.at(x0, y0) || label[y0 * img.width + x0] >= 0) continue;
            Component c{0, x0, x0, y0, y0, 0.0, 0.0};
            const int id = static_cast<int>(out.size());
            std::vector<std::pair<int, int>> stack{{x0, y0}};
            label[y0 * img.width + x0] = id;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                ++c.area;
                c.sum_x += x;
                c.sum_y += y;
                c.min_x = std::min(c.min_x, x);
                c.max_x = std::max(c.max_x, x);
                c.min_y = std::min(c.min_y, y);
                c.max_y = std::max(c.max_y, y);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height) continue;
                        if (!img.at(xx, yy) || label[yy * img.width + xx] >= 0) continue;
                        label[yy * img.width + xx] = id;
                        stack.emplace_back(xx, yy);
                    }
            }
            out.push_back(c);
        }
    return out;
}

inline std::optional<gzk::pupil::Blob> largest_circular_blob(const gzk::pupil::BinaryImage& img) {
    std::optional<Component> best;
    for (const auto& c : components(img)) {
        const int w = c.max_x - c.min_x + 1, h = c.max_y - c.min_y + 1;
        if (2 * std::min(w, h) < std::max(w, h)) continue;
        if (!best || c.area > best->area) best = c;
    }
    if (!best || best->area < 5) return std::nullopt;
    gzk::pupil::Blob b;
    b.area = best->area;
    b.bbox_width = best->max_x - best->min_x + 1;
    b.bbox_height = best->max_y - best->min_y + 1;
    b.centroid = {best->sum_x / best->area, best->sum_y / best->area};
    return b;
}

}  // namespace oracle
