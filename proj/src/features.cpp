#include "gzk/features.hpp"

#include <algorithm>
#include <cmath>

namespace gzk::features {

namespace {

struct Box {
    double minx, miny, width, height;
};

Box normalizing_box(const Landmarks& lm) {
    double minx = lm[kNormBoxFirst].x, maxx = minx;
    double miny = lm[kNormBoxFirst].y, maxy = miny;
    for (std::size_t i = kNormBoxFirst + 1; i <= kNormBoxLast; ++i) {
        minx = std::min(minx, lm[i].x);
        maxx = std::max(maxx, lm[i].x);
        miny = std::min(miny, lm[i].y);
        maxy = std::max(maxy, lm[i].y);
    }
    const Box b{minx, miny, maxx - minx, maxy - miny};
    if (!(b.width > 0.0) || !(b.height > 0.0))
        throw Error(ErrorCode::DegenerateBox, "nose+eyes bounding box has zero width or height");
    return b;
}

}  // namespace

HeadBlock normalize_landmarks(const Landmarks& lm) {
    const Box b = normalizing_box(lm);
    HeadBlock out;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        out[2 * i] = (lm[i].x - b.minx) / b.width;
        out[2 * i + 1] = (lm[i].y - b.miny) / b.height;
    }
    return out;
}

Point2 normalized_nose_tip(const Landmarks& lm) {
    const Box b = normalizing_box(lm);
    return {(lm[kNoseTip].x - b.minx) / b.width, (lm[kNoseTip].y - b.miny) / b.height};
}

Point2 normalize_pupil(const Point2& pupil_center, const EyePolygon& eye) {
    const Point2 origin = eye[0];
    const double dx = eye[3].x - origin.x;
    const double dy = eye[3].y - origin.y;
    const double len = std::hypot(dx, dy);
    if (!(len > 0.0)) throw Error(ErrorCode::DegenerateEye, "eye corners coincide");

    // Rotation by -angle(corner vector): (x, y) -> (c x + s y, -s x + c y).
    const double c = dx / len;
    const double s = dy / len;
    auto rotate = [&](const Point2& p) {
        const double x = p.x - origin.x;
        const double y = p.y - origin.y;
        return Point2{c * x + s * y, -s * x + c * y};
    };

    Point2 first = rotate(eye[0]);
    double minx = first.x, maxx = first.x, miny = first.y, maxy = first.y;
    for (const auto& p : eye) {
        const Point2 r = rotate(p);
        minx = std::min(minx, r.x);
        maxx = std::max(maxx, r.x);
        miny = std::min(miny, r.y);
        maxy = std::max(maxy, r.y);
    }
    if (!(maxx > minx) || !(maxy > miny))
        throw Error(ErrorCode::DegenerateEye, "rotated eye box has zero width or height");

    const Point2 q = rotate(pupil_center);
    return {std::clamp((q.x - minx) / (maxx - minx), 0.0, 1.0), std::clamp((q.y - miny) / (maxy - miny), 0.0, 1.0)};
}

FeatureVector build_feature(const HeadBlock& head, const std::optional<Point2>& eye, FeatureMode mode) {
    FeatureVector fv;
    fv.mode = mode;
    fv.values.reserve(feature_dim(mode));
    fv.values.assign(head.begin(), head.end());
    if (mode == FeatureMode::HeadAndEye) {
        if (!eye) throw Error(ErrorCode::MissingPupil, "head+eye features need a detected pupil");
        fv.values.push_back(eye->x);
        fv.values.push_back(eye->y);
    }
    return fv;
}

FeatureVector build_feature(const FrameRecord& frame, const pupil::PupilResult& pupil, FeatureMode mode) {
    std::optional<Point2> eye;
    if (mode == FeatureMode::HeadAndEye) {
        if (!pupil.detected() || !pupil.center)
            throw Error(ErrorCode::MissingPupil, "pupil status is " + std::string(pupil::status_name(pupil.status)));
        eye = normalize_pupil(*pupil.center, frame.eye_polygon);
    }
    return build_feature(normalize_landmarks(frame.landmarks), eye, mode);
}

}  // namespace gzk::features
