#include <cmath>
#include <limits>

#include <doctest.h>

#include "gzk/pipeline.hpp"
#include "gzk/synth.hpp"
#include "support.hpp"

using namespace gzk;
using namespace gzk::pipeline;
using testing::constant_model;
using testing::error_of;

namespace {

synth::Population small_population(double p_face, double p_pupil, std::uint64_t seed) {
    synth::PopulationConfig cfg;
    cfg.n_subjects = 3;
    cfg.frames_per_region = 20;
    cfg.seed = seed;
    cfg.p_face_fail = p_face;
    cfg.p_pupil_fail = p_pupil;
    return synth::generate_population(cfg);
}

std::vector<RawFrame> raw(const synth::Population& pop) {
    std::vector<RawFrame> out;
    for (const auto& f : pop.frames) out.push_back(f.frame);
    return out;
}

forest::ForestModel trained_model(const std::vector<RawFrame>& frames, FeatureMode mode, std::uint32_t trees) {
    forest::TrainingSet ts;
    for (const auto& p : process_batch(frames, {}))
        if (p && p->eye) ts.add(p->feature(mode).values, p->label);
    forest::ForestConfig cfg;
    cfg.n_trees = trees;
    cfg.rng_seed = 1;
    return forest::train(ts, cfg);
}

}  // namespace

TEST_CASE("pipeline config validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.confidence_threshold = 0.5;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg.confidence_threshold = std::numeric_limits<double>::infinity();
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("confidence pruning on a fixed forest") {
    const auto pop = small_population(0, 0, 1);
    const auto& frame = pop.frames[0].frame;
    PipelineConfig cfg;

    SUBCASE("confident decision is accepted") {
        const auto m = constant_model({0.917, 0.0166, 0.0166, 0.0166, 0.0166, 0.0166}, 138);
        const auto o = classify_frame(frame, m, cfg);
        CHECK(o.drop == DropReason::None);
        REQUIRE(o.decision);
        CHECK(o.decision->region == GazeRegion::Road);
        CHECK(o.decision->confidence == doctest::Approx(55.24).epsilon(1e-3));
    }
    SUBCASE("ambiguous decision is pruned") {
        const auto m = constant_model({0.55, 0.05, 0.10, 0.10, 0.10, 0.10}, 138);
        const auto o = classify_frame(frame, m, cfg);
        CHECK(o.drop == DropReason::LowConfidence);
        REQUIRE(o.decision);
        CHECK(o.decision->confidence == doctest::Approx(5.5));
    }
    SUBCASE("model and mode must agree") {
        const auto m = constant_model({1, 0, 0, 0, 0, 0}, 136);
        CHECK(error_of([&] { classify_frame(frame, m, cfg); }) == ErrorCode::ModeMismatch);
        cfg.mode = FeatureMode::HeadOnly;
        CHECK(classify_frame(frame, m, cfg).accepted());
    }
}

TEST_CASE("frames without a face or pupil are dropped at their stage") {
    PipelineConfig cfg;
    const auto m = constant_model({1, 0, 0, 0, 0, 0}, 138);
    RawFrame no_face;
    no_face.subject_id = "s";
    no_face.frame_index = 4;
    no_face.error = "unparseable";
    const auto a = classify_frame(no_face, m, cfg);
    CHECK(a.drop == DropReason::NoFace);
    CHECK(a.frame_index == 4);
    CHECK_FALSE(a.decision);

    synth::PopulationConfig pc;
    pc.n_subjects = 1;
    pc.frames_per_region = 3;
    pc.p_pupil_fail = 1.0;
    const auto closed = synth::generate_population(pc);
    const auto b = classify_frame(closed.frames[0].frame, m, cfg);
    CHECK(b.drop == DropReason::PupilFailed);
    CHECK(b.pupil.status == pupil::PupilStatus::EyeClosed);

    SUBCASE("head-only drops them too unless asked not to") {
        cfg.mode = FeatureMode::HeadOnly;
        const auto h = constant_model({1, 0, 0, 0, 0, 0}, 136);
        CHECK(classify_frame(closed.frames[0].frame, h, cfg).drop == DropReason::PupilFailed);
        cfg.require_pupil = false;
        CHECK(classify_frame(closed.frames[0].frame, h, cfg).drop == DropReason::None);
    }
}

TEST_CASE("attrition ledger is monotone and replayable") {
    const auto frames = raw(small_population(0.2, 0.25, 2));
    const auto model = trained_model(frames, FeatureMode::HeadAndEye, 15);
    PipelineConfig cfg;
    const auto a = classify_batch(frames, model, cfg);
    CHECK(a.ledger.valid());
    CHECK(a.ledger.total_frames == frames.size());
    CHECK(a.ledger.faces_detected < a.ledger.total_frames);
    CHECK(a.ledger.pupils_detected < a.ledger.faces_detected);
    const auto b = classify_batch(frames, model, cfg, ExecPolicy::Serial);
    CHECK(a.ledger == b.ledger);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(a.outcomes[i].drop == b.outcomes[i].drop);
        if (a.outcomes[i].decision) CHECK(a.outcomes[i].decision->probabilities == b.outcomes[i].decision->probabilities);
    }
    AttritionLedger merged;
    for (const auto& o : a.outcomes) {
        AttritionLedger one;
        one.record(o);
        merged.merge(one);
    }
    CHECK(merged == a.ledger);
}

TEST_CASE("raising the threshold only removes accepted frames") {
    const auto frames = raw(small_population(0, 0, 3));
    const auto model = trained_model(frames, FeatureMode::HeadAndEye, 20);
    PipelineConfig lo, hi, never;
    lo.confidence_threshold = 2;
    hi.confidence_threshold = 8;
    never.confidence_threshold = std::numeric_limits<double>::infinity();
    const auto a = classify_batch(frames, model, lo);
    const auto b = classify_batch(frames, model, hi);
    const auto c = classify_batch(frames, model, never);
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (b.outcomes[i].accepted()) CHECK(a.outcomes[i].accepted());
    CHECK(b.ledger.confident_decisions <= a.ledger.confident_decisions);
    CHECK(c.ledger.confident_decisions == 0);
    CHECK(c.ledger.pupils_detected == a.ledger.pupils_detected);
}

TEST_CASE("processing is policy independent") {
    const auto frames = raw(small_population(0.1, 0.1, 4));
    const auto a = process_batch(frames, {}, ExecPolicy::Parallel);
    const auto b = process_batch(frames, {}, ExecPolicy::Serial);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].has_value() == b[i].has_value());
        if (!a[i]) continue;
        CHECK(a[i]->head == b[i]->head);
        CHECK(a[i]->eye == b[i]->eye);
        CHECK(a[i]->pupil.chosen_params == b[i]->pupil.chosen_params);
    }
}

TEST_CASE("decision rates") {
    SUBCASE("attrition from the ledger") {
        AttritionLedger l{1000, 794, 616, 71};
        const auto r = decision_rates(l, 30.0);
        CHECK(r.confident_hz == doctest::Approx(30.0 * 71 / 616));
        CHECK(r.effective_hz == doctest::Approx(2.13));
    }
    SUBCASE("no attrition gives the frame rate") {
        const auto r = decision_rates({50, 50, 50, 50}, 30.0);
        CHECK(r.confident_hz == 30.0);
        CHECK(r.effective_hz == 30.0);
    }
    SUBCASE("nothing confident") {
        const auto r = decision_rates({50, 40, 30, 0}, 30.0);
        CHECK(r.confident_hz == 0.0);
        CHECK(r.effective_hz == 0.0);
    }
    SUBCASE("errors") {
        CHECK(error_of([] { decision_rates({10, 5, 0, 0}, 30.0); }) == ErrorCode::DivisionByZero);
        CHECK(error_of([] { decision_rates({0, 0, 0, 0}, 30.0); }) == ErrorCode::DivisionByZero);
        CHECK(error_of([] { decision_rates({10, 5, 5, 1}, 0.0); }) == ErrorCode::InvalidArgument);
        CHECK(error_of([] { decision_rates({10, 5, 6, 1}, 30.0); }) == ErrorCode::InvalidArgument);
    }
}
