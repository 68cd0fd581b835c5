#pragma once

// Brute-force binary morphology: every output pixel scans its full window.

#include "gzk/pupil.hpp"

namespace oracle {

inline gzk::pupil::BinaryImage erode(const gzk::pupil::BinaryImage& in, int w) {
    const int r = w / 2;
    gzk::pupil::BinaryImage out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            bool all = true;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    const bool inside = xx >= 0 && yy >= 0 && xx < in.width && yy < in.height;
                    if (!inside || in.at(xx, yy) == 0) all = false;
                }
            out.at(x, y) = all ? 1 : 0;
        }
    return out;
}

inline gzk::pupil::BinaryImage dilate(const gzk::pupil::BinaryImage& in, int w) {
    const int r = w / 2;
    gzk::pupil::BinaryImage out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            bool any = false;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx >= 0 && yy >= 0 && xx < in.width && yy < in.height && in.at(xx, yy)) any = true;
                }
            out.at(x, y) = any ? 1 : 0;
        }
    return out;
}

inline gzk::pupil::BinaryImage open(const gzk::pupil::BinaryImage& in, int w) { return oracle::dilate(oracle::erode(in, w), w); }
inline gzk::pupil::BinaryImage close(const gzk::pupil::BinaryImage& in, int w) { return oracle::erode(oracle::dilate(in, w), w); }

}  // namespace oracle
