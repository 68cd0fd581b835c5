#include "gzk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gzk/pupil.hpp"

namespace gzk::synth {

namespace {

constexpr Point2 kFaceCenter{400.0, 300.0};
constexpr std::uint8_t kSkin = 140;
constexpr std::uint8_t kSclera = 185;
constexpr std::uint8_t kPupil = 25;
constexpr double kEyeJitterScale = 0.25;

// How strongly each landmark follows the head share of a gaze shift, relative
// to the nose tip. Eyes stay put and the nose base only moves sideways, so the
// nose+eyes box is unchanged and the normalized nose tip moves by exactly
// alpha*g. Jaw points swing the other way, like the far side of a turning head.
Point2 head_weight(std::size_t i) {
    if (i <= 16) return {-0.3, -0.3};
    if (i <= 26) return {0.3, 0.3};
    switch (i) {
        case 27: return {0.25, 0.25};
        case 28: return {0.5, 0.5};
        case 29: return {0.75, 0.75};
        case 30: return {1.0, 1.0};
        default: break;
    }
    if (i <= 35) return {0.8, 0.0};
    if (i <= 47) return {0.0, 0.0};
    return {0.6, 0.6};
}

struct Box {
    double minx, miny, w, h;
};

template <typename Range>
Box bbox_of(const Range& pts) {
    double minx = pts.begin()->x, maxx = minx, miny = pts.begin()->y, maxy = miny;
    for (const auto& p : pts) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    return {minx, miny, maxx - minx, maxy - miny};
}

Box norm_box(const std::array<Point2, kLandmarkCount>& pts) {
    return bbox_of(std::span(pts).subspan(kNormBoxFirst, kNormBoxLast - kNormBoxFirst + 1));
}

}  // namespace

RegionTargets default_region_targets() {
    RegionTargets t;
    t[region_index(GazeRegion::Road)] = {0.0, 0.0};
    t[region_index(GazeRegion::CenterStack)] = {0.10, 0.15};
    t[region_index(GazeRegion::InstrumentCluster)] = {-0.03, 0.12};
    t[region_index(GazeRegion::RearviewMirror)] = {0.20, -0.12};
    t[region_index(GazeRegion::Left)] = {-0.25, 0.02};
    t[region_index(GazeRegion::Right)] = {0.25, 0.05};
    return t;
}

std::array<Point2, kLandmarkCount> canonical_face() {
    std::array<Point2, kLandmarkCount> p{};
    const double pi = std::numbers::pi;
    for (int i = 0; i <= 16; ++i) {
        const double t = i / 16.0;
        p[i] = {-78.0 * std::cos(pi * t), 10.0 + 85.0 * std::sin(pi * t)};
    }
    for (int i = 0; i < 5; ++i) {
        const double s = i / 4.0;
        const double lift = 6.0 * std::sin(pi * s);
        p[17 + i] = {-62.0 + 44.0 * s, -28.0 - lift};
        p[22 + i] = {18.0 + 44.0 * s, -28.0 - lift};
    }
    p[27] = {0, -12};
    p[28] = {0, 0};
    p[29] = {0, 12};
    p[30] = {0, 28};
    p[31] = {-15, 34};
    p[32] = {-8, 38};
    p[33] = {0, 40};
    p[34] = {8, 38};
    p[35] = {15, 34};
    const std::array<Point2, 6> eye = {{{-15, 0}, {-5, -7}, {5, -7}, {15, 0}, {5, 7}, {-5, 7}}};
    for (int i = 0; i < 6; ++i) {
        p[36 + i] = {-40.0 + eye[i].x, -10.0 + eye[i].y};
        // Mirror so 42 is the inner corner and 45 the outer one.
        const std::array<int, 6> mirror = {3, 2, 1, 0, 5, 4};
        p[42 + i] = {40.0 - eye[mirror[i]].x, -10.0 + eye[mirror[i]].y};
    }
    for (int k = 0; k < 12; ++k) {
        const double a = pi + k * (2.0 * pi / 12.0);
        p[48 + k] = {28.0 * std::cos(a), 62.0 + 10.0 * std::sin(a)};
    }
    for (int k = 0; k < 8; ++k) {
        const double a = pi + k * (2.0 * pi / 8.0);
        p[60 + k] = {18.0 * std::cos(a), 62.0 + 4.0 * std::sin(a)};
    }
    for (auto& q : p) q = {q.x + kFaceCenter.x, q.y + kFaceCenter.y};
    return p;
}

void SubjectProfile::validate() const {
    if (!(head_gain >= 0.0 && head_gain <= 1.0)) throw Error(ErrorCode::InvalidArgument, "head gain must lie in [0,1]");
    if (!(sigma_landmark >= 0.0) || !(sigma_image >= 0.0) || !(sigma_gaze >= 0.0) || !(sigma_sway >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise must be >= 0");
    if (!(p_face_fail >= 0.0 && p_face_fail <= 1.0) || !(p_pupil_fail >= 0.0 && p_pupil_fail <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "dropout probabilities must lie in [0,1]");
    if (!(pupil_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "pupil radius must be positive");
}

GrayImage render_eye(int width, int height, const EyePolygon& polygon, const Point2& pupil_center,
                     double pupil_radius, double sigma_image, Rng& rng) {
    const auto mask = pupil::polygon_mask(width, height, polygon);
    GrayImage img(width, height, kSkin);
    const double r2 = pupil_radius * pupil_radius;
    const double sigma = sigma_image * 255.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double v = kSkin;
            if (mask.at(x, y)) {
                const double dx = x - pupil_center.x;
                const double dy = y - pupil_center.y;
                v = dx * dx + dy * dy <= r2 ? kPupil : kSclera;
            }
            if (sigma > 0.0) v += rng.normal(0.0, sigma);
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return img;
}

SynthFrame generate_frame(const SubjectProfile& profile, GazeRegion region, std::int64_t frame_index, Rng& rng,
                          const RegionTargets& targets) {
    SynthFrame out;
    out.frame.subject_id = profile.subject_id;
    out.frame.frame_index = frame_index;
    out.frame.label = region;

    const bool face_fail = rng.bernoulli(profile.p_face_fail);
    const bool eye_closed = rng.bernoulli(profile.p_pupil_fail);

    const Point2 target = targets[region_index(region)];
    const Point2 g{target.x + rng.normal(0.0, profile.sigma_gaze), target.y + rng.normal(0.0, profile.sigma_gaze)};
    const Point2 sway{rng.normal(0.0, profile.sigma_sway), rng.normal(0.0, profile.sigma_sway)};
    const double alpha = profile.head_gain;
    // The eyes counter-rotate against sway, so head + eye still encodes g.
    const Point2 head{alpha * g.x + sway.x, alpha * g.y + sway.y};
    const Point2 eye_shift{(1.0 - alpha) * g.x - sway.x, (1.0 - alpha) * g.y - sway.y};

    const auto& rest = profile.face_template;
    const Box box = norm_box(rest);
    const Point2 drift{rng.normal(0.0, 2.0 * profile.sigma_landmark), rng.normal(0.0, 2.0 * profile.sigma_landmark)};

    std::array<Point2, kLandmarkCount> pts;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const Point2 w = head_weight(i);
        const bool eye_point = i >= kRightEyeFirst && i <= kNormBoxLast;
        const double sigma = profile.sigma_landmark * (eye_point ? kEyeJitterScale : 1.0);
        pts[i] = {rest[i].x + w.x * head.x * box.w + drift.x + rng.normal(0.0, sigma),
                  rest[i].y + w.y * head.y * box.h + drift.y + rng.normal(0.0, sigma)};
    }

    // True eye outline (no alignment noise) fixes the crop and the pupil.
    EyePolygon true_eye;
    for (std::size_t k = 0; k < kEyePoints; ++k)
        true_eye[k] = {rest[kRightEyeFirst + k].x + drift.x, rest[kRightEyeFirst + k].y + drift.y};
    const Box eye_box = bbox_of(true_eye);
    const Point2 origin{std::round(eye_box.minx + eye_box.w / 2.0) - kEyeCropWidth / 2,
                        std::round(eye_box.miny + eye_box.h / 2.0) - kEyeCropHeight / 2};

    const double center_y = eye_box.miny + eye_box.h / 2.0;
    if (eye_closed) {
        // Lids nearly shut: height 4% of the eye width.
        const double half = 0.02 * eye_box.w;
        for (std::size_t k : {1u, 2u}) {
            pts[kRightEyeFirst + k].y = center_y - half;
            true_eye[k].y = center_y - half;
        }
        for (std::size_t k : {4u, 5u}) {
            pts[kRightEyeFirst + k].y = center_y + half;
            true_eye[k].y = center_y + half;
        }
    }

    // Coordinates are stored with millipixel resolution so the text dataset
    // reproduces the in-memory frame exactly.
    auto quantize = [](double v) { return std::round(v * 1000.0) / 1000.0; };
    for (auto& p : pts) p = {quantize(p.x), quantize(p.y)};
    EyePolygon crop_eye;
    for (std::size_t k = 0; k < kEyePoints; ++k) {
        Point2& p = pts[kRightEyeFirst + k];
        p.x = std::clamp(p.x, origin.x + 0.5, origin.x + kEyeCropWidth - 1.5);
        p.y = std::clamp(p.y, origin.y + 0.5, origin.y + kEyeCropHeight - 1.5);
        crop_eye[k] = {quantize(p.x - origin.x), quantize(p.y - origin.y)};
    }
    EyePolygon true_crop_eye;
    for (std::size_t k = 0; k < kEyePoints; ++k) true_crop_eye[k] = {true_eye[k].x - origin.x, true_eye[k].y - origin.y};

    const Point2 pupil_center{eye_box.minx - origin.x + (0.5 + eye_shift.x) * eye_box.w,
                              eye_box.miny - origin.y + (0.5 + eye_shift.y) * eye_box.h};
    GrayImage crop = render_eye(kEyeCropWidth, kEyeCropHeight, true_crop_eye, pupil_center, profile.pupil_radius,
                                profile.sigma_image, rng);

    const Point2 rest_tip{(rest[kNoseTip].x - box.minx) / box.w, (rest[kNoseTip].y - box.miny) / box.h};
    out.truth = {{rest_tip.x + head.x, rest_tip.y + head.y}, {0.5 + eye_shift.x, 0.5 + eye_shift.y}, pupil_center};

    if (!face_fail) {
        FrameRecord rec{profile.subject_id, frame_index, Landmarks(pts), std::move(crop), crop_eye, region};
        rec.validate();
        out.frame.record = std::move(rec);
    }
    return out;
}

void PopulationConfig::validate() const {
    if (n_subjects < 1) throw Error(ErrorCode::InvalidArgument, "need at least one subject");
    if (frames_per_region < 1) throw Error(ErrorCode::InvalidArgument, "frames_per_region must be >= 1");
    if (!(alpha_min >= 0.0 && alpha_max <= 1.0 && alpha_min <= alpha_max))
        throw Error(ErrorCode::InvalidArgument, "alpha range must lie within [0,1]");
    if (!(sigma_shape >= 0.0)) throw Error(ErrorCode::InvalidArgument, "shape noise must be >= 0");
}

std::vector<SubjectProfile> make_profiles(const PopulationConfig& cfg) {
    cfg.validate();
    const auto canon = canonical_face();
    const std::size_t width = std::max<std::size_t>(2, std::to_string(cfg.n_subjects - 1).size());
    std::vector<SubjectProfile> out;
    out.reserve(cfg.n_subjects);
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
        Rng rng(derive_seed(cfg.seed, {0, i}));
        SubjectProfile p;
        std::string num = std::to_string(i);
        p.subject_id = "s" + std::string(width - num.size(), '0') + num;

        const double u = rng.uniform01();
        if (cfg.schedule == AlphaSchedule::Linspace)
            p.head_gain = cfg.n_subjects == 1 ? 0.5 * (cfg.alpha_min + cfg.alpha_max)
                                              : cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * static_cast<double>(i) /
                                                                    static_cast<double>(cfg.n_subjects - 1);
        else
            p.head_gain = cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * u;

        const double scale = rng.uniform(0.92, 1.08);
        const Point2 shift{rng.uniform(-30.0, 30.0), rng.uniform(-30.0, 30.0)};
        for (std::size_t k = 0; k < kLandmarkCount; ++k) {
            const Point2 c = canon[k];
            p.face_template[k] = {kFaceCenter.x + shift.x + scale * (c.x - kFaceCenter.x) + rng.normal(0.0, cfg.sigma_shape),
                                  kFaceCenter.y + shift.y + scale * (c.y - kFaceCenter.y) + rng.normal(0.0, cfg.sigma_shape)};
        }
        p.sigma_landmark = cfg.sigma_landmark;
        p.sigma_gaze = cfg.sigma_gaze;
        p.sigma_sway = cfg.sigma_sway;
        p.sigma_image = cfg.sigma_image;
        p.p_face_fail = cfg.p_face_fail;
        p.p_pupil_fail = cfg.p_pupil_fail;
        p.pupil_radius = cfg.pupil_radius;
        p.validate();
        out.push_back(std::move(p));
    }
    return out;
}

Population generate_population(const PopulationConfig& cfg, ExecPolicy policy) {
    Population pop;
    pop.subjects = make_profiles(cfg);
    const std::size_t per_subject = kRegionCount * cfg.frames_per_region;
    pop.frames.resize(pop.subjects.size() * per_subject);

    auto fill_subject = [&](std::size_t s) {
        Rng rng(derive_seed(cfg.seed, {1, s}));
        std::size_t k = s * per_subject;
        std::int64_t index = 0;
        for (auto region : kAllRegions)
            for (std::size_t f = 0; f < cfg.frames_per_region; ++f)
                pop.frames[k++] = generate_frame(pop.subjects[s], region, index++, rng, cfg.targets);
    };

    const auto n = static_cast<std::int64_t>(pop.subjects.size());
    if (policy == ExecPolicy::Serial) {
        for (std::int64_t s = 0; s < n; ++s) fill_subject(static_cast<std::size_t>(s));
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t s = 0; s < n; ++s) fill_subject(static_cast<std::size_t>(s));
    }
    return pop;
}

}  // namespace gzk::synth
