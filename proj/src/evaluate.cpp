#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "gzk/analysis.hpp"
#include "gzk/random.hpp"

namespace gzk::analysis {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RepResult {
    double accuracy = kNaN;
    ConfusionMatrix confusion;
    std::uint64_t decisions = 0;
    std::uint64_t accepted = 0;
    std::uint64_t confident_frames = 0;
    std::vector<std::uint64_t> sweep_accepted, sweep_correct;
};

// Pupil-passing frames only, grouped once.
struct FramePool {
    std::vector<const pipeline::ProcessedFrame*> frames;
    std::vector<std::string> subjects;
    std::vector<std::size_t> subject_of;  // index into subjects, per frame

    explicit FramePool(std::span<const pipeline::ProcessedFrame> all) {
        std::set<std::string> ids;
        for (const auto& f : all)
            if (f.eye) ids.insert(f.subject_id);
        subjects.assign(ids.begin(), ids.end());
        for (const auto& f : all) {
            if (!f.eye) continue;
            frames.push_back(&f);
            subject_of.push_back(static_cast<std::size_t>(
                std::lower_bound(subjects.begin(), subjects.end(), f.subject_id) - subjects.begin()));
        }
    }

    std::size_t index_of(const std::string& id) const {
        auto it = std::lower_bound(subjects.begin(), subjects.end(), id);
        if (it == subjects.end() || *it != id)
            throw Error(ErrorCode::InsufficientData, "subject " + id + " has no pupil-passing frames");
        return static_cast<std::size_t>(it - subjects.begin());
    }
};

void append_row(forest::TrainingSet& ts, const pipeline::ProcessedFrame& f, FeatureMode mode) {
    ts.dim = feature_dim(mode);
    ts.x.insert(ts.x.end(), f.head.begin(), f.head.end());
    if (mode == FeatureMode::HeadAndEye) {
        ts.x.push_back(f.eye->x);
        ts.x.push_back(f.eye->y);
    }
    ts.y.push_back(static_cast<std::uint8_t>(region_index(f.label)));
}

// One repetition for one held-out subject, all requested modes.
std::vector<RepResult> run_repetition(const FramePool& pool, std::size_t user, std::size_t rep,
                                      const EvaluationConfig& cfg) {
    const std::uint64_t seed = derive_seed(cfg.seed, {user, rep});

    std::vector<std::size_t> train_idx, test_idx;
    std::vector<std::uint8_t> train_labels, test_labels;
    for (std::size_t i = 0; i < pool.frames.size(); ++i) {
        const auto label = static_cast<std::uint8_t>(region_index(pool.frames[i]->label));
        if (pool.subject_of[i] == user) {
            test_idx.push_back(i);
            test_labels.push_back(label);
        } else {
            train_idx.push_back(i);
            train_labels.push_back(label);
        }
    }
    const auto train_sel = forest::subsample_balance(train_labels, derive_seed(seed, {1}));
    const auto test_sel = forest::supersample_balance(test_labels, derive_seed(seed, {2}));

    // Balanced test set as multiplicities over the subject's frames.
    std::map<std::size_t, std::uint64_t> multiplicity;
    for (auto k : test_sel) ++multiplicity[test_idx[k]];

    std::vector<RepResult> out;
    for (FeatureMode mode : cfg.modes) {
        forest::TrainingSet train;
        train.x.reserve(train_sel.size() * feature_dim(mode));
        for (auto k : train_sel) append_row(train, *pool.frames[train_idx[k]], mode);

        auto fcfg = cfg.pipeline.forest;
        fcfg.rng_seed = derive_seed(seed, {3});
        const auto model = forest::train(train, fcfg, ExecPolicy::Serial);

        RepResult r;
        r.sweep_accepted.assign(cfg.sweep_thresholds.size(), 0);
        r.sweep_correct.assign(cfg.sweep_thresholds.size(), 0);
        std::uint64_t correct = 0;
        for (const auto& [frame, count] : multiplicity) {
            const auto& f = *pool.frames[frame];
            const auto d = make_decision(model.predict_proba(f.feature(mode).values), cfg.pipeline.confidence_threshold);
            r.decisions += count;
            for (std::size_t t = 0; t < cfg.sweep_thresholds.size(); ++t) {
                if (!(d.confidence > cfg.sweep_thresholds[t])) continue;
                r.sweep_accepted[t] += count;
                if (d.region == f.label) r.sweep_correct[t] += count;
            }
            if (!d.accepted) continue;
            ++r.confident_frames;
            r.accepted += count;
            r.confusion.add(f.label, d.region, count);
            if (d.region == f.label) correct += count;
        }
        if (r.accepted > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(r.accepted);
        out.push_back(std::move(r));
    }
    return out;
}

UserEvaluation summarize(const std::string& id, const std::vector<std::vector<RepResult>>& reps,
                         const EvaluationConfig& cfg) {
    UserEvaluation u;
    u.subject_id = id;
    for (std::size_t m = 0; m < cfg.modes.size(); ++m) {
        ModeEvaluation me;
        me.mode = cfg.modes[m];
        double sum = 0.0;
        std::size_t n = 0;
        std::vector<std::uint64_t> sweep_accepted(cfg.sweep_thresholds.size()), sweep_correct(cfg.sweep_thresholds.size());
        if (!reps.empty() && !reps.front().empty()) me.confident_frames = reps.front()[m].confident_frames;
        for (const auto& rep : reps) {
            if (rep.empty()) continue;  // cancelled before this repetition ran
            const auto& r = rep[m];
            me.accuracies.push_back(r.accuracy);
            me.confusion.merge(r.confusion);
            me.decisions += r.decisions;
            me.accepted += r.accepted;
            for (std::size_t t = 0; t < sweep_accepted.size(); ++t) {
                sweep_accepted[t] += r.sweep_accepted[t];
                sweep_correct[t] += r.sweep_correct[t];
            }
            if (std::isfinite(r.accuracy)) {
                sum += r.accuracy;
                ++n;
            }
        }
        me.mean = n ? sum / static_cast<double>(n) : kNaN;
        double ss = 0.0;
        for (double a : me.accuracies)
            if (std::isfinite(a)) ss += (a - me.mean) * (a - me.mean);
        me.stddev = n ? std::sqrt(ss / static_cast<double>(n)) : kNaN;
        for (std::size_t t = 0; t < sweep_accepted.size(); ++t) {
            SweepPoint p;
            p.threshold = cfg.sweep_thresholds[t];
            p.accepted = sweep_accepted[t];
            p.correct = sweep_correct[t];
            p.accuracy = p.accepted ? static_cast<double>(p.correct) / static_cast<double>(p.accepted) : kNaN;
            me.sweep.push_back(p);
        }
        u.modes.push_back(std::move(me));
    }
    return u;
}

}  // namespace

void EvaluationConfig::validate() const {
    pipeline.validate();
    if (repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
    if (modes.empty()) throw Error(ErrorCode::InvalidArgument, "at least one feature mode is required");
    for (std::size_t i = 0; i < modes.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (modes[i] == modes[j]) throw Error(ErrorCode::InvalidArgument, "feature modes must be distinct");
    for (double t : sweep_thresholds)
        if (!(t >= 1.0)) throw Error(ErrorCode::InvalidArgument, "sweep thresholds must be >= 1");
}

std::vector<std::string> subjects_of(std::span<const pipeline::ProcessedFrame> frames) {
    return FramePool(frames).subjects;
}

void check_sufficiency(std::span<const pipeline::ProcessedFrame> frames, std::size_t min_frames_per_region) {
    std::map<std::string, std::array<std::size_t, kRegionCount>> counts;
    for (const auto& f : frames) {
        auto& c = counts[f.subject_id];
        if (f.eye) ++c[region_index(f.label)];
    }
    for (const auto& [id, c] : counts)
        for (auto r : kAllRegions)
            if (c[region_index(r)] < min_frames_per_region)
                throw Error(ErrorCode::InsufficientData,
                            "subject " + id + " has " + std::to_string(c[region_index(r)]) +
                                " pupil-passing frames for region " + std::string(region_name(r)) + " (minimum " +
                                std::to_string(min_frames_per_region) + ")");
}

UserEvaluation evaluate_user(const std::string& held_out, std::span<const pipeline::ProcessedFrame> frames,
                             const EvaluationConfig& cfg) {
    cfg.validate();
    check_sufficiency(frames, cfg.min_frames_per_region);
    const FramePool pool(frames);
    if (pool.subjects.size() < 2) throw Error(ErrorCode::InsufficientData, "evaluation needs at least two subjects");
    const std::size_t user = pool.index_of(held_out);
    std::vector<std::vector<RepResult>> reps(cfg.repetitions);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) reps[r] = run_repetition(pool, user, r, cfg);
    return summarize(held_out, reps, cfg);
}

EvaluationRun evaluate_all(std::span<const pipeline::ProcessedFrame> frames, const EvaluationConfig& cfg,
                           ExecPolicy policy, const std::atomic<bool>* cancel) {
    cfg.validate();
    check_sufficiency(frames, cfg.min_frames_per_region);
    const FramePool pool(frames);
    if (pool.subjects.size() < 2) throw Error(ErrorCode::InsufficientData, "evaluation needs at least two subjects");

    const std::size_t n_users = pool.subjects.size();
    const std::size_t n_reps = cfg.repetitions;
    std::vector<std::vector<std::vector<RepResult>>> results(n_users, std::vector<std::vector<RepResult>>(n_reps));

    auto cancelled = [&] { return cancel && cancel->load(std::memory_order_relaxed); };
    const auto n_tasks = static_cast<std::int64_t>(n_users * n_reps);
    if (policy == ExecPolicy::Serial) {
        for (std::int64_t t = 0; t < n_tasks; ++t) {
            if (cancelled()) break;
            const auto u = static_cast<std::size_t>(t) / n_reps;
            const auto r = static_cast<std::size_t>(t) % n_reps;
            results[u][r] = run_repetition(pool, u, r, cfg);
        }
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t t = 0; t < n_tasks; ++t) {
            if (cancelled()) continue;
            const auto u = static_cast<std::size_t>(t) / n_reps;
            const auto r = static_cast<std::size_t>(t) % n_reps;
            results[u][r] = run_repetition(pool, u, r, cfg);
        }
    }

    EvaluationRun run;
    for (std::size_t u = 0; u < n_users; ++u) {
        for (const auto& rep : results[u])
            if (rep.empty()) run.complete = false;
        run.users.push_back(summarize(pool.subjects[u], results[u], cfg));
    }
    return run;
}

}  // namespace gzk::analysis
