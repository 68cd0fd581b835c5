#include "gzk/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "gzk/analysis.hpp"
#include "gzk/io.hpp"
#include "gzk/report.hpp"
#include "gzk/synth.hpp"

namespace gzk::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::atomic<bool> g_cancel{false};

extern "C" void on_interrupt(int) { g_cancel.store(true); }

struct Options {
    std::string config;

    // shared
    std::string data;
    std::string out;
    std::string mode;
    std::uint64_t seed = 0;
    double confidence_threshold = 10.0;
    std::string pupil_grid = pupil::PupilGrid{}.to_string();
    std::size_t min_frames = 120;

    // forest
    std::uint32_t trees = 2000;
    std::uint32_t depth = 25;
    std::uint32_t features_per_split = 0;
    std::uint32_t min_samples_leaf = 1;

    // synth
    std::size_t subjects = 40;
    std::size_t frames_per_region = 120;
    std::string alpha_schedule = "linspace";
    double alpha_min = 0.0;
    double alpha_max = 1.0;
    double sigma_landmark = 1.0;
    double sigma_gaze = 0.02;
    double sigma_sway = 0.04;
    double sigma_image = 0.03;
    double sigma_shape = 0.3;
    double p_face_fail = 0.0;
    double p_pupil_fail = 0.0;
    double pupil_radius = 4.0;

    // train
    std::vector<std::string> exclude;

    // evaluate
    std::size_t repetitions = 100;
    std::string owl_thresholds = "0.45,0.55";
    std::string sweep = "1,2,5,10,20";
    bool plots = false;

    // classify
    std::string model;
    double fps = 30.0;
};

struct Commands {
    CLI::App* synth;
    CLI::App* train;
    CLI::App* evaluate;
    CLI::App* classify;
};

void add_forest_options(CLI::App* c, Options& o) {
    c->add_option("--trees", o.trees, "Trees in the forest")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--depth", o.depth, "Maximum tree depth")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--features-per-split", o.features_per_split, "Features tried per split (0 = sqrt of dimension)")
        ->capture_default_str();
    c->add_option("--min-samples-leaf", o.min_samples_leaf, "Minimum bootstrap weight per leaf")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

void add_common(CLI::App* c, Options& o) {
    c->add_option("--config", o.config, "JSON file of option values; flags override it");
}

Commands build(CLI::App& app, Options& o) {
    app.require_subcommand(1);
    Commands cmd{};

    cmd.synth = app.add_subcommand("synth", "Generate a synthetic driver population");
    add_common(cmd.synth, o);
    cmd.synth->add_option("--out", o.out, "Output dataset directory")->required();
    cmd.synth->add_option("--subjects", o.subjects, "Number of subjects")->capture_default_str()->check(CLI::PositiveNumber);
    cmd.synth->add_option("--frames-per-region", o.frames_per_region, "Frames per subject and region")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.synth->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd.synth->add_option("--alpha-schedule", o.alpha_schedule, "Head gain schedule")
        ->capture_default_str()
        ->check(CLI::IsMember({"linspace", "uniform"}));
    cmd.synth->add_option("--alpha-min", o.alpha_min, "Smallest head gain")->capture_default_str();
    cmd.synth->add_option("--alpha-max", o.alpha_max, "Largest head gain")->capture_default_str();
    cmd.synth->add_option("--sigma-landmark", o.sigma_landmark, "Landmark jitter (px)")->capture_default_str();
    cmd.synth->add_option("--sigma-gaze", o.sigma_gaze, "Per-frame gaze scatter (normalized)")->capture_default_str();
    cmd.synth->add_option("--sigma-sway", o.sigma_sway, "Eye-compensated head sway (normalized)")->capture_default_str();
    cmd.synth->add_option("--sigma-image", o.sigma_image, "Eye image noise (fraction of 255)")->capture_default_str();
    cmd.synth->add_option("--sigma-shape", o.sigma_shape, "Per-subject face shape deviation (px)")->capture_default_str();
    cmd.synth->add_option("--p-face-fail", o.p_face_fail, "Probability of a frame without a face")->capture_default_str();
    cmd.synth->add_option("--p-pupil-fail", o.p_pupil_fail, "Probability of a closed eye given a face")
        ->capture_default_str();
    cmd.synth->add_option("--pupil-radius", o.pupil_radius, "Pupil disk radius (px)")->capture_default_str();

    cmd.train = app.add_subcommand("train", "Train a gaze-region forest on a dataset");
    add_common(cmd.train, o);
    cmd.train->add_option("--data", o.data, "Dataset directory or frames.jsonl")->required();
    cmd.train->add_option("--out", o.out, "Output directory for model.gzkf and training_digest.json")->required();
    cmd.train->add_option("--mode", o.mode, "Feature mode (default head-eye)")
        ->check(CLI::IsMember({"head-only", "head-eye"}));
    cmd.train->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd.train->add_option("--pupil-grid", o.pupil_grid, "Nine values: 3 CDF thresholds, 3 opening, 3 closing windows")
        ->capture_default_str();
    cmd.train->add_option("--min-frames", o.min_frames, "Minimum pupil-passing frames per subject and region")
        ->capture_default_str();
    cmd.train->add_option("--exclude-subject", o.exclude, "Subject left out of training (repeatable)");
    add_forest_options(cmd.train, o);

    cmd.evaluate = app.add_subcommand("evaluate", "Leave-one-subject-out evaluation");
    add_common(cmd.evaluate, o);
    cmd.evaluate->add_option("--data", o.data, "Dataset directory or frames.jsonl")->required();
    cmd.evaluate->add_option("--out", o.out, "Report directory")->required();
    cmd.evaluate->add_option("--mode", o.mode, "Feature mode, or both (default both)")
        ->check(CLI::IsMember({"head-only", "head-eye", "both"}));
    cmd.evaluate->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd.evaluate->add_option("--confidence-threshold", o.confidence_threshold, "Decision pruning threshold (>= 1)")
        ->capture_default_str();
    cmd.evaluate->add_option("--repetitions", o.repetitions, "Repetitions per held-out subject")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.evaluate->add_option("--owl-thresholds", o.owl_thresholds, "low,high owlness partition thresholds")
        ->capture_default_str();
    cmd.evaluate->add_option("--pupil-grid", o.pupil_grid, "Nine values: 3 CDF thresholds, 3 opening, 3 closing windows")
        ->capture_default_str();
    cmd.evaluate->add_option("--min-frames", o.min_frames, "Minimum pupil-passing frames per subject and region")
        ->capture_default_str();
    cmd.evaluate->add_option("--sweep", o.sweep, "Comma-separated thresholds re-applied to the same decisions")
        ->capture_default_str();
    cmd.evaluate->add_flag("--plots", o.plots, "Also write SVG plots");
    add_forest_options(cmd.evaluate, o);

    cmd.classify = app.add_subcommand("classify", "Classify frames with a trained model");
    add_common(cmd.classify, o);
    cmd.classify->add_option("--data", o.data, "Dataset directory or frames.jsonl")->required();
    cmd.classify->add_option("--model", o.model, "Model file")->required();
    cmd.classify->add_option("--out", o.out, "Output directory for decisions.jsonl and ledger.json")->required();
    cmd.classify->add_option("--mode", o.mode, "Feature mode of the model (default head-eye)")
        ->check(CLI::IsMember({"head-only", "head-eye"}));
    cmd.classify->add_option("--confidence-threshold", o.confidence_threshold, "Decision pruning threshold (>= 1)")
        ->capture_default_str();
    cmd.classify->add_option("--pupil-grid", o.pupil_grid, "Nine values: 3 CDF thresholds, 3 opening, 3 closing windows")
        ->capture_default_str();
    cmd.classify->add_option("--fps", o.fps, "Frame rate for the decision-rate summary")->capture_default_str();
    return cmd;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, what + ": '" + item + "' is not a number");
        }
    }
    return v;
}

analysis::OwlThresholds parse_owl(const std::string& text) {
    const auto v = parse_list(text, "--owl-thresholds");
    if (v.size() != 2) throw Error(ErrorCode::InvalidArgument, "--owl-thresholds takes two values: low,high");
    analysis::OwlThresholds t{v[0], v[1]};
    t.validate();
    return t;
}

forest::ForestConfig forest_config(const Options& o) {
    forest::ForestConfig f;
    f.n_trees = o.trees;
    f.max_depth = o.depth;
    f.features_per_split = o.features_per_split;
    f.min_samples_leaf = o.min_samples_leaf;
    f.rng_seed = o.seed;
    f.validate();
    return f;
}

json forest_json(const forest::ForestConfig& f) {
    return {{"trees", f.n_trees},
            {"depth", f.max_depth},
            {"features_per_split", f.features_per_split},
            {"min_samples_leaf", f.min_samples_leaf},
            {"bootstrap", f.bootstrap}};
}

std::vector<pipeline::RawFrame> load_frames(const std::string& data) {
    const auto path = io::resolve_frames_path(data);
    return io::read_frames(path);
}

// Faces only; every face must carry a label.
std::vector<pipeline::ProcessedFrame> process_labeled(const std::vector<pipeline::RawFrame>& frames,
                                                      const pupil::PupilGrid& grid, pipeline::AttritionLedger& ledger) {
    for (const auto& f : frames)
        if (f.record && !f.label)
            throw Error(ErrorCode::Format, "frame " + std::to_string(f.frame_index) + " of subject " + f.subject_id +
                                               " has no label");
    auto processed = pipeline::process_batch(frames, grid);
    std::vector<pipeline::ProcessedFrame> out;
    ledger.total_frames = frames.size();
    for (auto& p : processed) {
        if (!p) continue;
        ++ledger.faces_detected;
        if (p->eye) ++ledger.pupils_detected;
        out.push_back(std::move(*p));
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& o, std::ostream& out) {
    synth::PopulationConfig cfg;
    cfg.n_subjects = o.subjects;
    cfg.frames_per_region = o.frames_per_region;
    cfg.seed = o.seed;
    cfg.schedule = o.alpha_schedule == "uniform" ? synth::AlphaSchedule::Uniform : synth::AlphaSchedule::Linspace;
    cfg.alpha_min = o.alpha_min;
    cfg.alpha_max = o.alpha_max;
    cfg.sigma_landmark = o.sigma_landmark;
    cfg.sigma_gaze = o.sigma_gaze;
    cfg.sigma_sway = o.sigma_sway;
    cfg.sigma_image = o.sigma_image;
    cfg.sigma_shape = o.sigma_shape;
    cfg.p_face_fail = o.p_face_fail;
    cfg.p_pupil_fail = o.p_pupil_fail;
    cfg.pupil_radius = o.pupil_radius;
    cfg.validate();
    if (!(cfg.sigma_landmark >= 0.0 && cfg.sigma_image >= 0.0 && cfg.sigma_gaze >= 0.0 && cfg.sigma_sway >= 0.0 && cfg.p_face_fail >= 0.0 && cfg.p_face_fail <= 1.0 &&
          cfg.p_pupil_fail >= 0.0 && cfg.p_pupil_fail <= 1.0 && cfg.pupil_radius > 0.0))
        throw Error(ErrorCode::InvalidArgument, "noise levels must be >= 0, probabilities in [0,1], radius > 0");

    const auto pop = synth::generate_population(cfg);
    const auto s = io::write_dataset(o.out, pop, cfg);
    out << "wrote " << s.frames << " frames (" << s.faces << " with a face) to " << o.out << "\n";
    out << "digest " << io::hex64(s.digest) << "\n";
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    const auto mode = *mode_from_name(o.mode);
    const auto grid = pupil::PupilGrid::parse(o.pupil_grid);
    auto fcfg = forest_config(o);

    auto frames = load_frames(o.data);
    const std::set<std::string> excluded(o.exclude.begin(), o.exclude.end());
    std::erase_if(frames, [&](const pipeline::RawFrame& f) { return excluded.count(f.subject_id) != 0; });

    pipeline::AttritionLedger ledger;
    const auto processed = process_labeled(frames, grid, ledger);
    analysis::check_sufficiency(processed, o.min_frames);

    std::vector<const pipeline::ProcessedFrame*> usable;
    std::vector<std::uint8_t> labels;
    for (const auto& p : processed) {
        if (!p.eye) continue;
        usable.push_back(&p);
        labels.push_back(static_cast<std::uint8_t>(region_index(p.label)));
    }
    if (usable.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no pupil-passing frames to train on");
    const auto selection = forest::subsample_balance(labels, derive_seed(o.seed, {1}));

    forest::TrainingSet ts;
    ts.dim = feature_dim(mode);
    for (auto k : selection) ts.add(usable[k]->feature(mode).values, usable[k]->label);
    fcfg.rng_seed = o.seed;
    const auto model = forest::train(ts, fcfg);

    const std::string bytes = io::encode_model(model);
    io::write_file(fs::path(o.out) / "model.gzkf", bytes);

    json counts = json::object();
    for (auto r : kAllRegions) counts[std::string(region_name(r))] = model.digest().class_counts[region_index(r)];
    json digest = {
        {"mode", mode_name(mode)},
        {"feature_dim", model.feature_dim()},
        {"class_counts", counts},
        {"rng_seed", model.digest().rng_seed},
        {"subjects", analysis::subjects_of(processed)},
        {"excluded_subjects", std::vector<std::string>(excluded.begin(), excluded.end())},
        {"training_rows", ts.size()},
        {"forest", forest_json(fcfg)},
        {"pupil_grid", grid.to_string()},
        {"min_frames", o.min_frames},
        {"ledger", report::ledger_json(ledger)},
        {"model_fnv1a64", io::hex64(io::fnv1a64(bytes))},
    };
    io::write_file(fs::path(o.out) / "training_digest.json", digest.dump(2) + "\n");
    out << "trained " << fcfg.n_trees << " trees on " << ts.size() << " balanced frames, feature_dim "
        << model.feature_dim() << "\n";
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
    analysis::EvaluationConfig ecfg;
    if (o.mode == "head-only")
        ecfg.modes = {FeatureMode::HeadOnly};
    else if (o.mode == "head-eye")
        ecfg.modes = {FeatureMode::HeadAndEye};
    ecfg.pipeline.confidence_threshold = o.confidence_threshold;
    ecfg.pipeline.grid = pupil::PupilGrid::parse(o.pupil_grid);
    ecfg.pipeline.forest = forest_config(o);
    ecfg.repetitions = o.repetitions;
    ecfg.seed = o.seed;
    ecfg.min_frames_per_region = o.min_frames;
    ecfg.sweep_thresholds = parse_list(o.sweep, "--sweep");
    const auto thresholds = parse_owl(o.owl_thresholds);
    ecfg.validate();

    report::EvaluationReport rep;
    rep.modes = ecfg.modes;
    rep.thresholds = thresholds;
    json modes = json::array();
    for (auto m : ecfg.modes) modes.push_back(mode_name(m));
    json sweep = ecfg.sweep_thresholds;
    rep.config = {
        {"data", o.data},
        {"modes", modes},
        {"seed", o.seed},
        {"confidence_threshold", o.confidence_threshold},
        {"repetitions", o.repetitions},
        {"owl_thresholds", {thresholds.low, thresholds.high}},
        {"pupil_grid", ecfg.pipeline.grid.to_string()},
        {"min_frames", o.min_frames},
        {"sweep", sweep},
        {"forest", forest_json(ecfg.pipeline.forest)},
        {"require_pupil", ecfg.pipeline.require_pupil},
    };

    const auto frames = load_frames(o.data);
    const auto processed = process_labeled(frames, ecfg.pipeline.grid, rep.ledger);
    rep.owlness = analysis::owlness_all(processed, thresholds);

    g_cancel.store(false);
    auto previous = std::signal(SIGINT, on_interrupt);
    try {
        rep.run = analysis::evaluate_all(processed, ecfg, ExecPolicy::Parallel, &g_cancel);
    } catch (...) {
        std::signal(SIGINT, previous);
        throw;
    }
    std::signal(SIGINT, previous);

    if (ecfg.modes.size() == 2) rep.delta = analysis::accuracy_delta_report(rep.run.users, rep.owlness, thresholds);
    for (auto m : ecfg.modes)
        if (!report::ledger_for(rep, m).valid()) {
            err << "internal error: attrition ledger is inconsistent\n";
            return kExitInternal;
        }

    const auto files = report::write_evaluation(o.out, rep, o.plots);
    out << "evaluated " << rep.run.users.size() << " subjects x " << ecfg.repetitions << " repetitions";
    if (rep.delta)
        out << ": head-only " << report::fmt(rep.delta->overall_head_only) << ", head-eye "
            << report::fmt(rep.delta->overall_head_eye);
    out << "\n";
    if (!rep.run.complete) err << "interrupted: report marked incomplete\n";
    out << "wrote " << files.size() << " files to " << o.out << "\n";
    return kExitOk;
}

int cmd_classify(const Options& o, std::ostream& out) {
    pipeline::PipelineConfig cfg;
    cfg.mode = *mode_from_name(o.mode);
    cfg.confidence_threshold = o.confidence_threshold;
    cfg.grid = pupil::PupilGrid::parse(o.pupil_grid);
    cfg.validate();
    if (!(o.fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "--fps must be positive");

    const auto model = io::read_model(o.model);
    pipeline::check_model_mode(model, cfg.mode);
    const auto frames = load_frames(o.data);
    const auto result = pipeline::classify_batch(frames, model, cfg);
    if (!result.ledger.valid()) throw std::logic_error("attrition ledger is inconsistent");

    std::string lines;
    for (const auto& oc : result.outcomes) lines += report::outcome_json(oc).dump() + "\n";
    io::write_file(fs::path(o.out) / "decisions.jsonl", lines);

    json summary = {
        {"ledger", report::ledger_json(result.ledger)},
        {"config",
         {{"mode", mode_name(cfg.mode)},
          {"confidence_threshold", cfg.confidence_threshold},
          {"pupil_grid", cfg.grid.to_string()},
          {"fps", o.fps}}},
    };
    if (result.ledger.pupils_detected > 0 && result.ledger.total_frames > 0) {
        const auto rates = pipeline::decision_rates(result.ledger, o.fps);
        summary["decision_rate_hz"] = rates.confident_hz;
        summary["effective_rate_hz"] = rates.effective_hz;
    } else {
        summary["decision_rate_hz"] = nullptr;
        summary["effective_rate_hz"] = nullptr;
    }
    io::write_file(fs::path(o.out) / "ledger.json", summary.dump(2) + "\n");
    out << "classified " << result.outcomes.size() << " frames, " << result.ledger.confident_decisions
        << " accepted\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

void apply_thread_env() {
    const char* env = std::getenv("GZK_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw Error(ErrorCode::InvalidArgument, "GZK_THREADS must be a positive integer");
    omp_set_num_threads(static_cast<int>(n));
}

std::optional<std::vector<std::string>> config_tokens(const json& v) {
    auto scalar = [](const json& x) -> std::optional<std::string> {
        if (x.is_string()) return x.get<std::string>();
        if (x.is_number()) return x.dump();
        return std::nullopt;
    };
    if (auto s = scalar(v)) return std::vector<std::string>{*s};
    if (v.is_array()) {
        std::string joined;
        for (const auto& x : v) {
            auto s = scalar(x);
            if (!s) return std::nullopt;
            if (!joined.empty()) joined += ",";
            joined += *s;
        }
        return std::vector<std::string>{joined};
    }
    return std::nullopt;
}

int exit_code_for(const Error& e) { return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitData; }

int parse_failure(const CLI::App& app, const CLI::ParseError& e, std::ostream& out, std::ostream& err) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
        out << app.help();
        return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
}

CLI::App* active(const CLI::App& app) { return app.get_subcommands().empty() ? nullptr : app.get_subcommands().front(); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        apply_thread_env();

        Options o;
        CLI::App app{"Driver gaze-region classification from landmarks and eye crops", "gzk"};
        build(app, o);
        {
            std::vector<std::string> rev(args.rbegin(), args.rend());
            try {
                app.parse(rev);
            } catch (const CLI::CallForHelp&) {
                const CLI::App* sub = active(app);
                out << (sub ? sub->help() : app.help());
                return kExitOk;
            } catch (const CLI::ParseError& e) {
                return parse_failure(app, e, out, err);
            }
        }
        CLI::App* sub = active(app);
        std::string name = sub->get_name();

        if (!o.config.empty()) {
            json cfg;
            try {
                cfg = json::parse(io::read_file(o.config));
            } catch (const json::exception& e) {
                err << "error: config file " << o.config << " is not valid JSON: " << e.what() << "\n";
                return kExitUsage;
            }
            if (!cfg.is_object()) {
                err << "error: config file " << o.config << " must hold a JSON object\n";
                return kExitUsage;
            }
            std::vector<std::string> extra;
            for (const auto& [key, value] : cfg.items()) {
                CLI::Option* opt = key == "config" || key == "help" ? nullptr : sub->get_option_no_throw("--" + key);
                if (!opt) {
                    err << "error: unknown config key '" << key << "' for command " << name << "\n";
                    return kExitUsage;
                }
                if (opt->count() > 0) continue;
                if (value.is_boolean() && opt->get_expected_min() == 0) {
                    if (value.get<bool>()) extra.push_back("--" + key);
                    continue;
                }
                auto tokens = config_tokens(value);
                if (!tokens || opt->get_expected_min() == 0) {
                    err << "error: invalid value for config key '" << key << "'\n";
                    return kExitUsage;
                }
                extra.push_back("--" + key);
                extra.insert(extra.end(), tokens->begin(), tokens->end());
            }
            Options o2;
            CLI::App app2{"gzk"};
            build(app2, o2);
            std::vector<std::string> all(args);
            all.insert(all.end(), extra.begin(), extra.end());
            std::vector<std::string> rev(all.rbegin(), all.rend());
            try {
                app2.parse(rev);
            } catch (const CLI::ParseError& e) {
                err << "error: config file " << o.config << ": " << e.what() << "\n";
                return kExitUsage;
            }
            o = std::move(o2);
        }

        if (o.mode.empty()) o.mode = name == "evaluate" ? "both" : "head-eye";
        if (name == "synth") return cmd_synth(o, out);
        if (name == "train") return cmd_train(o, out);
        if (name == "evaluate") return cmd_evaluate(o, out, err);
        return cmd_classify(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace gzk::cli
