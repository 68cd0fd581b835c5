#include <cmath>

#include <doctest.h>

#include "gzk/analysis.hpp"
#include "gzk/features.hpp"
#include "gzk/synth.hpp"
#include "support.hpp"

using namespace gzk;
using namespace gzk::synth;
using testing::error_of;

namespace {

SubjectProfile quiet_profile(double alpha) {
    SubjectProfile p;
    p.subject_id = "s";
    p.head_gain = alpha;
    p.face_template = canonical_face();
    p.sigma_landmark = 0.0;
    p.sigma_image = 0.0;
    return p;
}

PopulationConfig quiet_population(double alpha_min, double alpha_max, std::size_t subjects, std::size_t frames) {
    PopulationConfig c;
    c.n_subjects = subjects;
    c.frames_per_region = frames;
    c.alpha_min = alpha_min;
    c.alpha_max = alpha_max;
    c.sigma_landmark = 0.0;
    c.sigma_gaze = 0.0;
    c.sigma_sway = 0.0;
    c.sigma_shape = 0.0;
    return c;
}

std::vector<pipeline::ProcessedFrame> processed(const Population& pop) {
    std::vector<pipeline::RawFrame> raw;
    for (const auto& f : pop.frames) raw.push_back(f.frame);
    std::vector<pipeline::ProcessedFrame> out;
    for (auto& p : pipeline::process_batch(raw, {}))
        if (p) out.push_back(std::move(*p));
    return out;
}

}  // namespace

TEST_CASE("canonical face geometry") {
    const auto f = canonical_face();
    const auto eye = Landmarks(f).right_eye();
    CHECK(eye[3].x - eye[0].x == doctest::Approx(30.0).epsilon(0.05));
    const auto h = features::normalize_landmarks(Landmarks(f));
    CHECK(h[2 * kNoseTip] > 0.0);
    CHECK(h[2 * kNoseTip] < 1.0);
}

TEST_CASE("pure head turner moves only the head") {
    const auto p = quiet_profile(1.0);
    Rng rng(1);
    const auto road = generate_frame(p, GazeRegion::Road, 0, rng);
    const auto left = generate_frame(p, GazeRegion::Left, 1, rng);
    const auto target = default_region_targets()[region_index(GazeRegion::Left)];
    CHECK(left.truth.pupil_normalized == Point2{0.5, 0.5});
    const auto tip_road = features::normalized_nose_tip(road.frame.record->landmarks);
    const auto tip_left = features::normalized_nose_tip(left.frame.record->landmarks);
    CHECK(tip_left.x - tip_road.x == doctest::Approx(target.x).epsilon(1e-3));
    CHECK(tip_left.y - tip_road.y == doctest::Approx(target.y).epsilon(1e-3));

    const auto& rec = *left.frame.record;
    const auto pr = pupil::detect_pupil(rec.eye_crop, rec.eye_polygon);
    REQUIRE(pr.detected());
    CHECK(std::hypot(pr.center->x - left.truth.pupil_center_crop.x, pr.center->y - left.truth.pupil_center_crop.y) < 1.0);
}

TEST_CASE("pure eye mover keeps the head still") {
    const auto p = quiet_profile(0.0);
    Rng rng(2);
    const auto road = generate_frame(p, GazeRegion::Road, 0, rng);
    const auto left = generate_frame(p, GazeRegion::Left, 1, rng);
    CHECK(road.frame.record->landmarks.points() == left.frame.record->landmarks.points());
    const auto target = default_region_targets()[region_index(GazeRegion::Left)];
    CHECK(left.truth.pupil_normalized.x == doctest::Approx(0.5 + target.x));
    const auto& rec = *left.frame.record;
    const auto pr = pupil::detect_pupil(rec.eye_crop, rec.eye_polygon);
    REQUIRE(pr.detected());
    CHECK(std::hypot(pr.center->x - left.truth.pupil_center_crop.x, pr.center->y - left.truth.pupil_center_crop.y) < 1.0);
    const auto measured = features::normalize_pupil(*pr.center, rec.eye_polygon);
    CHECK(measured.x < 0.5);
}

TEST_CASE("measured owlness recovers the head gain") {
    for (double alpha : {0.2, 0.5, 0.8}) {
        CAPTURE(alpha);
        const auto pop = generate_population(quiet_population(alpha, alpha, 1, 20));
        const auto rep = analysis::owlness_all(processed(pop));
        REQUIRE(rep.size() == 1);
        CHECK(std::abs(rep[0].m - alpha) < 0.05);
    }
}

TEST_CASE("population shape and determinism") {
    PopulationConfig c;
    c.n_subjects = 40;
    c.frames_per_region = 120;
    c.seed = 7;
    const auto a = generate_population(c, ExecPolicy::Parallel);
    CHECK(a.frames.size() == 28800);
    CHECK(a.subjects.size() == 40);
    CHECK(a.subjects.front().subject_id == "s00");
    CHECK(a.subjects.back().subject_id == "s39");
    CHECK(a.subjects.front().head_gain == 0.0);
    CHECK(a.subjects.back().head_gain == 1.0);

    c.n_subjects = 4;
    c.frames_per_region = 10;
    const auto b = generate_population(c, ExecPolicy::Parallel);
    const auto s = generate_population(c, ExecPolicy::Serial);
    REQUIRE(b.frames.size() == s.frames.size());
    for (std::size_t i = 0; i < b.frames.size(); ++i) {
        const auto& x = b.frames[i].frame;
        const auto& y = s.frames[i].frame;
        CHECK(x.label == y.label);
        CHECK(x.record->landmarks.points() == y.record->landmarks.points());
        CHECK(std::equal(x.record->eye_crop.data().begin(), x.record->eye_crop.data().end(),
                         y.record->eye_crop.data().begin()));
    }
    const auto first = b.frames[0].frame.record->landmarks.points();
    c.seed = 8;
    CHECK(generate_population(c).frames[0].frame.record->landmarks.points() != first);
}

TEST_CASE("dropout rates") {
    PopulationConfig c;
    c.n_subjects = 5;
    c.frames_per_region = 100;
    c.p_face_fail = 0.3;
    c.p_pupil_fail = 0.5;
    const auto pop = generate_population(c);
    std::size_t faces = 0, closed = 0;
    for (const auto& f : pop.frames) {
        if (!f.frame.record) continue;
        ++faces;
        if (pupil::eye_is_closed(f.frame.record->eye_polygon)) ++closed;
    }
    CHECK(faces / 3000.0 == doctest::Approx(0.7).epsilon(0.05));
    CHECK(closed / double(faces) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("labels are recoverable across identical subjects") {
    const auto pop = generate_population(quiet_population(0.5, 0.5, 2, 20));
    const auto frames = processed(pop);
    forest::TrainingSet train;
    for (const auto& f : frames)
        if (f.subject_id == "s00") train.add(f.feature(FeatureMode::HeadAndEye).values, f.label);
    forest::ForestConfig cfg;
    cfg.n_trees = 20;
    const auto model = forest::train(train, cfg);
    std::size_t tested = 0;
    for (const auto& f : frames) {
        if (f.subject_id != "s01") continue;
        ++tested;
        CHECK(make_decision(model.predict_proba(f.feature(FeatureMode::HeadAndEye)), 1.0).region == f.label);
    }
    CHECK(tested == 120);
}

TEST_CASE("generator validation") {
    PopulationConfig c;
    c.n_subjects = 0;
    CHECK(error_of([&] { generate_population(c); }) == ErrorCode::InvalidArgument);
    c = {};
    c.alpha_max = 1.5;
    CHECK(error_of([&] { generate_population(c); }) == ErrorCode::InvalidArgument);
    c = {};
    c.p_face_fail = 2.0;
    CHECK(error_of([&] { generate_population(c); }) == ErrorCode::InvalidArgument);
}
