#include "gzk/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gzk/features.hpp"

namespace gzk::analysis {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

BackgroundModel BackgroundModel::build(std::span<const pipeline::ProcessedFrame> frames) {
    BackgroundModel bg;
    for (const auto& f : frames) {
        if (!f.eye) continue;
        auto& s = bg.subjects_[f.subject_id];
        s.nose_mean.x += f.nose_tip.x;
        s.nose_mean.y += f.nose_tip.y;
        s.pupil_mean.x += f.eye->x;
        s.pupil_mean.y += f.eye->y;
        ++s.frame_count;
    }
    for (auto& [id, s] : bg.subjects_) {
        const double n = static_cast<double>(s.frame_count);
        s.nose_mean = {s.nose_mean.x / n, s.nose_mean.y / n};
        s.pupil_mean = {s.pupil_mean.x / n, s.pupil_mean.y / n};
    }
    return bg;
}

const SubjectBackground& BackgroundModel::at(const std::string& subject_id) const {
    auto it = subjects_.find(subject_id);
    if (it == subjects_.end()) throw Error(ErrorCode::MissingBackground, "no background model for subject " + subject_id);
    return it->second;
}

OwlnessTerms owlness_terms(const Point2& nose_tip, const Point2& pupil, const SubjectBackground& bg) {
    OwlnessTerms t;
    t.d_head = std::hypot(nose_tip.x - bg.nose_mean.x, nose_tip.y - bg.nose_mean.y);
    t.d_pupil = std::hypot(pupil.x - bg.pupil_mean.x, pupil.y - bg.pupil_mean.y);
    const double sum = t.d_head + t.d_pupil;
    t.m = sum > 0.0 ? t.d_head / sum : 0.5;
    return t;
}

double owlness_frame(const pipeline::ProcessedFrame& frame, const BackgroundModel& bg) {
    if (!frame.eye) throw Error(ErrorCode::MissingPupil, "owlness needs a detected pupil");
    return owlness_terms(frame.nose_tip, *frame.eye, bg.at(frame.subject_id)).m;
}

double owlness_frame(const FrameRecord& frame, const pupil::PupilResult& pupil, const BackgroundModel& bg) {
    if (!pupil.detected() || !pupil.center) throw Error(ErrorCode::MissingPupil, "owlness needs a detected pupil");
    const auto& background = bg.at(frame.subject_id);
    return owlness_terms(features::normalized_nose_tip(frame.landmarks),
                         features::normalize_pupil(*pupil.center, frame.eye_polygon), background)
        .m;
}

std::string_view strategy_name(Strategy s) noexcept {
    switch (s) {
        case Strategy::Owl: return "Owl";
        case Strategy::Mixed: return "Mixed";
        case Strategy::Lizard: return "Lizard";
    }
    return "?";
}

void OwlThresholds::validate() const {
    if (!(low >= 0.0 && low <= high && high <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "owl thresholds must satisfy 0 <= low <= high <= 1");
}

Strategy classify_strategy(double m, const OwlThresholds& t) noexcept {
    if (m < t.low) return Strategy::Lizard;
    if (m > t.high) return Strategy::Owl;
    return Strategy::Mixed;
}

OwlnessReport owlness_subject(const std::string& subject_id, std::span<const pipeline::ProcessedFrame> frames,
                              const BackgroundModel& bg, const OwlThresholds& thresholds) {
    OwlnessReport r;
    r.subject_id = subject_id;
    double sum_m = 0.0, sum_h = 0.0, sum_p = 0.0;
    for (const auto& f : frames) {
        if (f.subject_id != subject_id || !f.eye) continue;
        const auto t = owlness_terms(f.nose_tip, *f.eye, bg.at(subject_id));
        sum_m += t.m;
        sum_h += t.d_head;
        sum_p += t.d_pupil;
        ++r.frame_count;
    }
    if (r.frame_count == 0) throw Error(ErrorCode::NoQualifyingFrames, "no pupil-passing frames for " + subject_id);
    const double n = static_cast<double>(r.frame_count);
    r.m = sum_m / n;
    r.mean_d_head = sum_h / n;
    r.mean_d_pupil = sum_p / n;
    r.strategy = classify_strategy(r.m, thresholds);
    return r;
}

std::vector<OwlnessReport> owlness_all(std::span<const pipeline::ProcessedFrame> frames,
                                       const OwlThresholds& thresholds) {
    thresholds.validate();
    const auto bg = BackgroundModel::build(frames);
    std::vector<OwlnessReport> out;
    for (const auto& [id, s] : bg.subjects()) out.push_back(owlness_subject(id, frames, bg, thresholds));
    return out;
}

// ---------------------------------------------------------------------------

void ConfusionMatrix::add(GazeRegion truth, GazeRegion predicted, std::uint64_t weight) {
    counts_[region_index(truth)][region_index(predicted)] += weight;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    for (std::size_t i = 0; i < kRegionCount; ++i)
        for (std::size_t j = 0; j < kRegionCount; ++j) counts_[i][j] += other.counts_[i][j];
}

std::uint64_t ConfusionMatrix::row_total(GazeRegion truth) const {
    const auto& row = counts_[region_index(truth)];
    return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto r : kAllRegions) t += row_total(r);
    return t;
}

std::array<std::array<double, kRegionCount>, kRegionCount> ConfusionMatrix::row_percentages() const {
    std::array<std::array<double, kRegionCount>, kRegionCount> out{};
    for (std::size_t i = 0; i < kRegionCount; ++i) {
        const auto total_row = row_total(kAllRegions[i]);
        if (total_row == 0) continue;
        for (std::size_t j = 0; j < kRegionCount; ++j)
            out[i][j] = 100.0 * static_cast<double>(counts_[i][j]) / static_cast<double>(total_row);
    }
    return out;
}

double ConfusionMatrix::accuracy() const {
    const auto t = total();
    if (t == 0) return kNaN;
    std::uint64_t diag = 0;
    for (std::size_t i = 0; i < kRegionCount; ++i) diag += counts_[i][i];
    return static_cast<double>(diag) / static_cast<double>(t);
}

double ConfusionMatrix::region_accuracy(GazeRegion r) const {
    const auto t = row_total(r);
    if (t == 0) return kNaN;
    return static_cast<double>(count(r, r)) / static_cast<double>(t);
}

// ---------------------------------------------------------------------------

const ModeEvaluation* UserEvaluation::find(FeatureMode mode) const {
    for (const auto& m : modes)
        if (m.mode == mode) return &m;
    return nullptr;
}

DeltaReport accuracy_delta_report(std::span<const UserEvaluation> users, std::span<const OwlnessReport> owlness,
                                  const OwlThresholds& thresholds) {
    thresholds.validate();
    DeltaReport rep;
    ConfusionMatrix pooled_head, pooled_eye;
    std::vector<double> xs, ys;
    double sum_head = 0.0, sum_eye = 0.0;
    std::size_t n_head = 0, n_eye = 0;
    std::array<double, 3> strategy_sum{};

    for (const auto& u : users) {
        const auto* head = u.find(FeatureMode::HeadOnly);
        const auto* eye = u.find(FeatureMode::HeadAndEye);
        if (!head || !eye)
            throw Error(ErrorCode::ModeMismatch, "subject " + u.subject_id + " lacks one of the two feature modes");
        auto it = std::find_if(owlness.begin(), owlness.end(),
                               [&](const OwlnessReport& o) { return o.subject_id == u.subject_id; });
        if (it == owlness.end()) throw Error(ErrorCode::MissingBackground, "no owlness report for " + u.subject_id);

        pooled_head.merge(head->confusion);
        pooled_eye.merge(eye->confusion);

        UserDelta d;
        d.subject_id = u.subject_id;
        d.owlness = it->m;
        d.strategy = classify_strategy(it->m, thresholds);
        d.head_only = head->mean;
        d.head_eye = eye->mean;
        d.delta = eye->mean - head->mean;
        rep.users.push_back(d);

        if (std::isfinite(head->mean)) {
            sum_head += head->mean;
            ++n_head;
        }
        if (std::isfinite(eye->mean)) {
            sum_eye += eye->mean;
            ++n_eye;
        }
        if (std::isfinite(d.delta)) {
            xs.push_back(d.owlness);
            ys.push_back(d.delta);
            const auto s = static_cast<std::size_t>(d.strategy);
            strategy_sum[s] += d.delta;
            ++rep.strategy_count[s];
        }
    }

    for (auto r : kAllRegions) {
        RegionDelta rd;
        rd.region = r;
        rd.head_only = pooled_head.region_accuracy(r);
        rd.head_eye = pooled_eye.region_accuracy(r);
        rd.delta = rd.head_eye - rd.head_only;
        rep.regions.push_back(rd);
    }
    rep.overall_head_only = n_head ? sum_head / static_cast<double>(n_head) : kNaN;
    rep.overall_head_eye = n_eye ? sum_eye / static_cast<double>(n_eye) : kNaN;
    rep.overall_delta = rep.overall_head_eye - rep.overall_head_only;
    for (std::size_t s = 0; s < 3; ++s)
        rep.strategy_mean_delta[s] = rep.strategy_count[s] ? strategy_sum[s] / static_cast<double>(rep.strategy_count[s]) : kNaN;

    if (auto r = pearson(xs, ys)) {
        rep.pearson_r = *r;
        rep.pearson_defined = true;
    } else {
        rep.pearson_r = kNaN;
        rep.pearson_defined = false;
    }
    return rep;
}

std::vector<SweepPoint> threshold_sweep(std::span<const LabeledDecision> decisions,
                                        std::span<const double> thresholds) {
    std::vector<SweepPoint> out;
    for (double t : thresholds) {
        SweepPoint p;
        p.threshold = t;
        for (const auto& d : decisions) {
            if (!(d.decision.confidence > t)) continue;
            ++p.accepted;
            if (d.decision.region == d.truth) ++p.correct;
        }
        p.accuracy = p.accepted ? static_cast<double>(p.correct) / static_cast<double>(p.accepted) : kNaN;
        out.push_back(p);
    }
    return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) return std::nullopt;
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

}  // namespace gzk::analysis
