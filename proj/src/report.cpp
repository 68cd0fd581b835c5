#include "gzk/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gzk/io.hpp"

namespace gzk::report {

using nlohmann::json;

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

namespace {

const analysis::ModeEvaluation* mode_of(const analysis::UserEvaluation& u, FeatureMode m) { return u.find(m); }

analysis::ConfusionMatrix pooled_confusion(const EvaluationReport& r, FeatureMode mode) {
    analysis::ConfusionMatrix m;
    for (const auto& u : r.run.users)
        if (const auto* me = mode_of(u, mode)) m.merge(me->confusion);
    return m;
}

const analysis::OwlnessReport* owl_of(const EvaluationReport& r, const std::string& id) {
    for (const auto& o : r.owlness)
        if (o.subject_id == id) return &o;
    return nullptr;
}

FeatureMode primary_mode(const EvaluationReport& r) {
    for (auto m : r.modes)
        if (m == FeatureMode::HeadAndEye) return m;
    return r.modes.front();
}

std::string mode_tag(FeatureMode m) {
    std::string s(mode_name(m));
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

}  // namespace

pipeline::AttritionLedger ledger_for(const EvaluationReport& r, FeatureMode mode) {
    auto l = r.ledger;
    l.confident_decisions = 0;
    for (const auto& u : r.run.users)
        if (const auto* me = mode_of(u, mode)) l.confident_decisions += me->confident_frames;
    return l;
}

std::string per_user_csv(const EvaluationReport& r) {
    std::string out = "subject_id,owlness,strategy";
    for (auto m : r.modes) out += "," + mode_tag(m) + "_mean," + mode_tag(m) + "_std";
    if (r.delta) out += ",delta";
    out += '\n';
    for (const auto& u : r.run.users) {
        const auto* o = owl_of(r, u.subject_id);
        out += u.subject_id + "," + (o ? fmt(o->m) : "nan") + "," +
               (o ? std::string(analysis::strategy_name(analysis::classify_strategy(o->m, r.thresholds))) : "");
        for (auto m : r.modes) {
            const auto* me = mode_of(u, m);
            out += "," + (me ? fmt(me->mean) : "nan") + "," + (me ? fmt(me->stddev) : "nan");
        }
        if (r.delta) {
            double d = std::nan("");
            for (const auto& ud : r.delta->users)
                if (ud.subject_id == u.subject_id) d = ud.delta;
            out += "," + fmt(d);
        }
        out += '\n';
    }
    return out;
}

std::string per_region_csv(const EvaluationReport& r) {
    std::string out = "region";
    for (auto m : r.modes) out += "," + mode_tag(m);
    if (r.delta) out += ",delta";
    out += '\n';
    std::vector<analysis::ConfusionMatrix> pooled;
    for (auto m : r.modes) pooled.push_back(pooled_confusion(r, m));
    for (auto reg : kAllRegions) {
        out += std::string(region_name(reg));
        for (const auto& c : pooled) out += "," + fmt(c.region_accuracy(reg));
        if (r.delta) out += "," + fmt(r.delta->regions[region_index(reg)].delta);
        out += '\n';
    }
    return out;
}

std::string confusion_csv(const analysis::ConfusionMatrix& m, bool percentages) {
    std::string out = "truth";
    for (auto c : kAllRegions) out += "," + std::string(region_name(c));
    out += '\n';
    const auto pct = m.row_percentages();
    for (auto t : kAllRegions) {
        out += std::string(region_name(t));
        for (auto c : kAllRegions)
            out += "," + (percentages ? fmt(pct[region_index(t)][region_index(c)]) : std::to_string(m.count(t, c)));
        out += '\n';
    }
    return out;
}

std::string ledger_csv(const EvaluationReport& r) {
    std::string out = "mode,stage,count,percent_of_total\n";
    for (auto m : r.modes) {
        const auto l = ledger_for(r, m);
        const double total = static_cast<double>(l.total_frames);
        auto row = [&](const char* stage, std::uint64_t n) {
            out += std::string(mode_name(m)) + "," + stage + "," + std::to_string(n) + "," +
                   fmt(total > 0 ? 100.0 * static_cast<double>(n) / total : std::nan("")) + "\n";
        };
        row("total", l.total_frames);
        row("faces", l.faces_detected);
        row("pupils", l.pupils_detected);
        row("confident", l.confident_decisions);
    }
    return out;
}

std::string owlness_csv(const EvaluationReport& r) {
    std::string out = "subject_id,owlness,mean_d_head,mean_d_pupil,strategy,frames\n";
    for (const auto& o : r.owlness)
        out += o.subject_id + "," + fmt(o.m) + "," + fmt(o.mean_d_head) + "," + fmt(o.mean_d_pupil) + "," +
               std::string(analysis::strategy_name(o.strategy)) + "," + std::to_string(o.frame_count) + "\n";
    return out;
}

std::string sweep_csv(const EvaluationReport& r) {
    std::string out = "mode,threshold,accepted,correct,accuracy\n";
    for (auto m : r.modes) {
        std::vector<analysis::SweepPoint> pooled;
        for (const auto& u : r.run.users) {
            const auto* me = mode_of(u, m);
            if (!me) continue;
            if (pooled.empty()) pooled.resize(me->sweep.size());
            for (std::size_t i = 0; i < me->sweep.size(); ++i) {
                pooled[i].threshold = me->sweep[i].threshold;
                pooled[i].accepted += me->sweep[i].accepted;
                pooled[i].correct += me->sweep[i].correct;
            }
        }
        for (const auto& p : pooled) {
            const double acc =
                p.accepted ? static_cast<double>(p.correct) / static_cast<double>(p.accepted) : std::nan("");
            out += std::string(mode_name(m)) + "," + fmt(p.threshold) + "," + std::to_string(p.accepted) + "," +
                   std::to_string(p.correct) + "," + fmt(acc) + "\n";
        }
    }
    return out;
}

json ledger_json(const pipeline::AttritionLedger& l) {
    return {{"total_frames", l.total_frames},
            {"faces_detected", l.faces_detected},
            {"pupils_detected", l.pupils_detected},
            {"confident_decisions", l.confident_decisions}};
}

json report_json(const EvaluationReport& r) {
    json j;
    j["complete"] = r.run.complete;
    j["config"] = r.config;
    j["ledger"] = ledger_json(ledger_for(r, primary_mode(r)));
    json by_mode = json::object();
    for (auto m : r.modes) by_mode[std::string(mode_name(m))] = ledger_json(ledger_for(r, m));
    j["ledger_by_mode"] = by_mode;

    json users = json::array();
    for (const auto& u : r.run.users) {
        json ju = {{"subject_id", u.subject_id}};
        if (const auto* o = owl_of(r, u.subject_id)) {
            ju["owlness"] = num(o->m);
            ju["strategy"] = analysis::strategy_name(analysis::classify_strategy(o->m, r.thresholds));
        }
        json modes = json::object();
        for (const auto& me : u.modes) {
            json accs = json::array();
            for (double a : me.accuracies) accs.push_back(num(a));
            modes[std::string(mode_name(me.mode))] = {{"mean", num(me.mean)},
                                                       {"std", num(me.stddev)},
                                                       {"decisions", me.decisions},
                                                       {"accepted", me.accepted},
                                                       {"accuracies", accs}};
        }
        ju["modes"] = modes;
        users.push_back(ju);
    }
    j["users"] = users;

    json regions = json::array();
    for (auto reg : kAllRegions) {
        json jr = {{"region", region_name(reg)}};
        for (auto m : r.modes) jr[std::string(mode_name(m))] = num(pooled_confusion(r, m).region_accuracy(reg));
        if (r.delta) jr["delta"] = num(r.delta->regions[region_index(reg)].delta);
        regions.push_back(jr);
    }
    j["regions"] = regions;

    json confusion = json::object();
    for (auto m : r.modes) {
        const auto c = pooled_confusion(r, m);
        json rows = json::array();
        for (auto t : kAllRegions) {
            json row = json::array();
            for (auto p : kAllRegions) row.push_back(c.count(t, p));
            rows.push_back(row);
        }
        confusion[std::string(mode_name(m))] = rows;
    }
    j["confusion"] = confusion;

    if (r.delta) {
        const auto& d = *r.delta;
        json strategies = json::object();
        for (auto s : {analysis::Strategy::Owl, analysis::Strategy::Mixed, analysis::Strategy::Lizard}) {
            const auto i = static_cast<std::size_t>(s);
            strategies[std::string(analysis::strategy_name(s))] = {{"subjects", d.strategy_count[i]},
                                                                    {"mean_delta", num(d.strategy_mean_delta[i])}};
        }
        j["delta"] = {{"overall_head_only", num(d.overall_head_only)},
                      {"overall_head_eye", num(d.overall_head_eye)},
                      {"overall_delta", num(d.overall_delta)},
                      {"pearson_r", d.pearson_defined ? json(d.pearson_r) : json(nullptr)},
                      {"pearson_defined", d.pearson_defined},
                      {"strategies", strategies}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kW = 640, kH = 400, kL = 60, kR = 20, kT = 30, kB = 50;

std::string header(const std::string& title) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                  "font-size=\"11\">\n<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n"
                  "<text x=\"%.0f\" y=\"18\" font-size=\"13\">%s</text>\n",
                  kW, kH, kL, title.c_str());
    return buf;
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke, const char* extra = "") {
    char buf[256];
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" %s/>\n", x1, y1,
                  x2, y2, stroke, extra);
    return buf;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
    char buf[256];
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"%s\">%s</text>\n", x, y, anchor,
                  s.c_str());
    return buf;
}

struct Axes {
    double xmin, xmax, ymin, ymax;
    double px(double x) const { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); }
    double py(double y) const { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); }

    std::string frame(const std::string& xlabel, const std::string& ylabel) const {
        std::string s = line(kL, kH - kB, kW - kR, kH - kB, "black") + line(kL, kT, kL, kH - kB, "black");
        for (int i = 0; i <= 4; ++i) {
            const double y = ymin + (ymax - ymin) * i / 4.0;
            char lab[32];
            std::snprintf(lab, sizeof lab, "%.2f", y);
            s += line(kL - 4, py(y), kL, py(y), "black") + text(kL - 6, py(y) + 4, lab, "end");
        }
        s += text((kL + kW - kR) / 2, kH - 12, xlabel);
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "<text x=\"14\" y=\"%.2f\" text-anchor=\"middle\" transform=\"rotate(-90 14 %.2f)\">%s</text>\n",
                      (kT + kH - kB) / 2, (kT + kH - kB) / 2, ylabel.c_str());
        return s + buf;
    }
};

std::pair<double, double> padded_range(const std::vector<double>& v, double lo, double hi) {
    for (double x : v)
        if (std::isfinite(x)) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    return {lo, hi};
}

}  // namespace

std::string per_user_svg(const EvaluationReport& r) {
    std::string s = header("Per-user accuracy, increasing order");
    std::vector<double> all;
    for (const auto& u : r.run.users)
        for (const auto& me : u.modes) all.push_back(me.mean);
    const auto [lo, hi] = padded_range(all, 1.0, 1.0);
    const Axes ax{0.0, static_cast<double>(std::max<std::size_t>(r.run.users.size(), 2) - 1), std::max(0.0, lo - 0.05),
                  std::min(1.0, hi) > lo ? std::min(1.0, hi) : 1.0};
    s += ax.frame("users (sorted)", "accuracy");
    const char* colors[] = {"#d95f02", "#1b9e77"};
    for (std::size_t mi = 0; mi < r.modes.size(); ++mi) {
        std::vector<double> v;
        for (const auto& u : r.run.users)
            if (const auto* me = mode_of(u, r.modes[mi]); me && std::isfinite(me->mean)) v.push_back(me->mean);
        std::sort(v.begin(), v.end());
        std::string pts;
        for (std::size_t i = 0; i < v.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", ax.px(static_cast<double>(i)), ax.py(v[i]));
            pts += buf;
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(colors[mi % 2]) + "\" stroke-width=\"2\" points=\"" +
             pts + "\"/>\n";
        s += "<text x=\"" + fmt(kW - kR - 100) + "\" y=\"" + fmt(kH - kB - 30 + 14.0 * static_cast<double>(mi)) +
             "\" fill=\"" + colors[mi % 2] + "\">" + std::string(mode_name(r.modes[mi])) + "</text>\n";
    }
    return s + "</svg>\n";
}

std::string region_delta_svg(const EvaluationReport& r) {
    if (!r.delta) throw Error(ErrorCode::ModeMismatch, "region deltas need both feature modes");
    std::string s = header("Accuracy increase per gaze region (head+eye minus head-only)");
    std::vector<double> v;
    for (const auto& d : r.delta->regions) v.push_back(d.delta);
    const auto [lo, hi] = padded_range(v, 0.0, 0.0);
    const Axes ax{0.0, static_cast<double>(kRegionCount), lo, hi};
    s += ax.frame("region", "accuracy delta");
    s += line(kL, ax.py(0.0), kW - kR, ax.py(0.0), "gray");
    for (std::size_t i = 0; i < kRegionCount; ++i) {
        const double d = std::isfinite(v[i]) ? v[i] : 0.0;
        const double x0 = ax.px(i + 0.15), x1 = ax.px(i + 0.85);
        const double y0 = ax.py(std::max(d, 0.0)), y1 = ax.py(std::min(d, 0.0));
        char buf[256];
        std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"#7570b3\"/>\n",
                      x0, y0, x1 - x0, y1 - y0);
        s += buf;
        s += text((x0 + x1) / 2, kH - kB + 14, std::string(region_name(index_to_region(i))));
    }
    return s + "</svg>\n";
}

std::string owlness_svg(const EvaluationReport& r) {
    if (!r.delta) throw Error(ErrorCode::ModeMismatch, "owlness scatter needs both feature modes");
    std::string s = header("Per-user accuracy increase versus owlness");
    std::vector<double> ys;
    for (const auto& u : r.delta->users) ys.push_back(u.delta);
    const auto [lo, hi] = padded_range(ys, 0.0, 0.0);
    const Axes ax{0.0, 1.0, lo, hi};
    s += ax.frame("owlness M", "accuracy delta");
    s += line(ax.px(r.thresholds.low), kT, ax.px(r.thresholds.low), kH - kB, "gray", "stroke-dasharray=\"4 3\"");
    s += line(ax.px(r.thresholds.high), kT, ax.px(r.thresholds.high), kH - kB, "gray", "stroke-dasharray=\"4 3\"");
    for (const auto& u : r.delta->users) {
        if (!std::isfinite(u.delta)) continue;
        char buf[160];
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#e7298a\"/>\n",
                      ax.px(u.owlness), ax.py(u.delta));
        s += buf;
    }
    if (r.delta->pearson_defined) s += text(kW - kR - 60, kT + 10, "r = " + fmt(r.delta->pearson_r));
    return s + "</svg>\n";
}

std::vector<std::string> write_evaluation(const std::filesystem::path& dir, const EvaluationReport& r, bool plots) {
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("report.json", report_json(r).dump(2) + "\n");
    files.emplace_back("per_user.csv", per_user_csv(r));
    files.emplace_back("per_region.csv", per_region_csv(r));
    files.emplace_back("ledger.csv", ledger_csv(r));
    files.emplace_back("owlness.csv", owlness_csv(r));
    files.emplace_back("sweep.csv", sweep_csv(r));
    for (auto m : r.modes) {
        const auto c = pooled_confusion(r, m);
        files.emplace_back("confusion_" + mode_tag(m) + ".csv", confusion_csv(c, false));
        files.emplace_back("confusion_" + mode_tag(m) + "_percent.csv", confusion_csv(c, true));
    }
    if (plots) {
        files.emplace_back("per_user_accuracy.svg", per_user_svg(r));
        if (r.delta) {
            files.emplace_back("region_delta.svg", region_delta_svg(r));
            files.emplace_back("owlness_delta.svg", owlness_svg(r));
        }
    }
    std::vector<std::string> names;
    for (const auto& [name, body] : files) {
        io::write_file(dir / name, body);
        names.push_back(name);
    }
    return names;
}

json outcome_json(const pipeline::FrameOutcome& o) {
    json j;
    j["subject_id"] = o.subject_id;
    j["frame_index"] = o.frame_index;
    j["label"] = o.label ? json(region_name(*o.label)) : json(nullptr);
    j["status"] = pipeline::drop_reason_name(o.drop);
    if (o.drop == pipeline::DropReason::NoFace) {
        j["pupil"] = nullptr;
    } else {
        j["pupil"] = pupil::status_name(o.pupil.status);
    }
    if (o.decision) {
        j["region"] = region_name(o.decision->region);
        j["confidence"] = num(o.decision->confidence);
        json p = json::object();
        for (auto reg : kAllRegions) p[std::string(region_name(reg))] = o.decision->probabilities[region_index(reg)];
        j["probabilities"] = p;
    } else {
        j["region"] = nullptr;
        j["confidence"] = nullptr;
        j["probabilities"] = nullptr;
    }
    return j;
}

}  // namespace gzk::report
