// Command-line front end: dataset synthesis, training, analysis, camera/time
// calibration, screening, and evaluation. Every command is deterministic for
// a fixed seed, and every output directory receives the fully resolved
// configuration that produced it.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gaitkit/calib.hpp"
#include "gaitkit/core.hpp"
#include "gaitkit/eval.hpp"
#include "gaitkit/gait_params.hpp"
#include "gaitkit/model.hpp"
#include "gaitkit/phase_codec.hpp"
#include "gaitkit/smoother.hpp"
#include "gaitkit/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gaitkit;

namespace {

// Flag and config-file problems exit 1 (usage), unlike bad input data (2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Layered option resolution: built-in defaults < config file < explicit
// flags. Records every final value so it can be written next to the outputs.
class ConfigLayer {
  public:
    explicit ConfigLayer(const std::string& path) {
        if (path.empty()) {
            return;
        }
        std::ifstream in(path);
        if (!in) {
            throw UsageError("cannot open config file: " + path);
        }
        try {
            in >> file_;
        } catch (const json::exception& err) {
            throw UsageError("config file " + path + ": " + err.what());
        }
        if (!file_.is_object()) {
            throw UsageError("config file " + path + ": expected a JSON object");
        }
    }

    template <typename T>
    void resolve(const std::string& key, T& var, const CLI::Option* opt) {
        consumed_.push_back(key);
        if ((opt == nullptr || opt->count() == 0) && file_.contains(key)) {
            try {
                var = file_.at(key).get<T>();
            } catch (const json::exception& err) {
                throw UsageError("config key " + key + ": " + err.what());
            }
        }
        resolved_[key] = var;
    }

    void record(const std::string& key, const json& value) {
        consumed_.push_back(key);
        resolved_[key] = value;
    }

    // Catches config-file typos that would otherwise be ignored silently.
    void check_unknown() const {
        for (const auto& [key, value] : file_.items()) {
            (void)value;
            if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end()) {
                throw UsageError("unknown config key: " + key);
            }
        }
    }

    const json& file() const { return file_; }
    const json& resolved() const { return resolved_; }

  private:
    json file_ = json::object();
    json resolved_ = json::object();
    std::vector<std::string> consumed_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

void write_resolved(const fs::path& dir, const std::string& command, ConfigLayer& layer) {
    layer.check_unknown();
    json doc = layer.resolved();
    doc["command"] = command;
    write_text(dir / "resolved_config.json", doc.dump(1) + "\n");
}

std::vector<fs::path> trial_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() == ".json" && name != "manifest.json" &&
            name != "resolved_config.json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw DataError("no trial files in " + dir.string());
    }
    return files;
}

std::vector<std::pair<int, int>> parse_buckets(const std::vector<std::string>& specs) {
    std::vector<std::pair<int, int>> out;
    for (const std::string& spec : specs) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos) {
            throw UsageError("bucket spec must be LENGTH:BATCH, got: " + spec);
        }
        try {
            out.emplace_back(std::stoi(spec.substr(0, colon)),
                             std::stoi(spec.substr(colon + 1)));
        } catch (const std::exception&) {
            throw UsageError("bucket spec must be LENGTH:BATCH, got: " + spec);
        }
    }
    return out;
}

json buckets_to_json(const std::vector<std::pair<int, int>>& buckets) {
    json arr = json::array();
    for (const auto& [len, batch] : buckets) {
        arr.push_back({len, batch});
    }
    return arr;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) {
        out.push_back(field);
    }
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw DataError(what + ": not a number: " + s);
    }
}

int event_type_index(const std::string& name) {
    const auto& names = event_type_names();
    for (int i = 0; i < kEventTypes; ++i) {
        if (name == names[static_cast<std::size_t>(i)]) {
            return i;
        }
    }
    throw DataError("unknown event type: " + name);
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    int n = 50;
    std::uint64_t seed = 0;
    std::string out;
    std::string config;
    double cadence_min = 60.0, cadence_max = 140.0;
    double step_min = 0.35, step_max = 0.70;
    double height_min = 1.50, height_max = 1.95;
    double duration_min = 4.0, duration_max = 6.0;
    double asym_min = 1.0, asym_max = 1.0;
    double noise = 0.0;
    double fps = 30.0;
    std::string prefix = "synth";
};

int run_synth(const SynthArgs& a, const std::map<std::string, CLI::Option*>& opts) {
    ConfigLayer layer(a.config);
    SynthArgs r = a;
    layer.resolve("n", r.n, opts.at("n"));
    layer.resolve("seed", r.seed, opts.at("seed"));
    layer.resolve("cadence_min", r.cadence_min, opts.at("cadence_min"));
    layer.resolve("cadence_max", r.cadence_max, opts.at("cadence_max"));
    layer.resolve("step_min", r.step_min, opts.at("step_min"));
    layer.resolve("step_max", r.step_max, opts.at("step_max"));
    layer.resolve("height_min", r.height_min, opts.at("height_min"));
    layer.resolve("height_max", r.height_max, opts.at("height_max"));
    layer.resolve("duration_min", r.duration_min, opts.at("duration_min"));
    layer.resolve("duration_max", r.duration_max, opts.at("duration_max"));
    layer.resolve("asym_min", r.asym_min, opts.at("asym_min"));
    layer.resolve("asym_max", r.asym_max, opts.at("asym_max"));
    layer.resolve("noise", r.noise, opts.at("noise"));
    layer.resolve("fps", r.fps, opts.at("fps"));
    layer.resolve("prefix", r.prefix, opts.at("prefix"));
    layer.record("out", a.out);

    if (r.n < 1) {
        throw UsageError("n: must be positive");
    }
    SpecRanges ranges;
    ranges.cadence_spm = {r.cadence_min, r.cadence_max};
    ranges.step_length_m = {r.step_min, r.step_max};
    ranges.height_m = {r.height_min, r.height_max};
    ranges.duration_s = {r.duration_min, r.duration_max};
    ranges.asymmetry = {r.asym_min, r.asym_max};
    ranges.noise_sigma_m = r.noise;
    ranges.fps = r.fps;
    ranges.id_prefix = r.prefix;

    const std::vector<Trial> trials = make_dataset(r.n, ranges, r.seed);

    ensure_dir(a.out);
    json manifest;
    manifest["n"] = r.n;
    manifest["seed"] = r.seed;
    manifest["trials"] = json::array();
    for (const Trial& trial : trials) {
        const std::string file = trial.id + ".json";
        save_trial(trial, fs::path(a.out) / file);
        manifest["trials"].push_back({{"id", trial.id}, {"file", file}});
    }
    write_text(fs::path(a.out) / "manifest.json", manifest.dump(1) + "\n");
    write_resolved(a.out, "synth", layer);
    std::cout << "wrote " << trials.size() << " trials to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config;
    bool full_scale = false;
    int layers = 0, heads = 0, embed_dim = 0, mlp_hidden = 0, epochs = 0;
    double dropout = 0, lr = 0, weight_decay = 0, lambda = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> buckets;
};

int run_train(const TrainArgs& a, const std::map<std::string, CLI::Option*>& opts) {
    ConfigLayer layer(a.config);
    bool full = a.full_scale;
    layer.resolve("full_scale", full, opts.at("full_scale"));
    ModelConfig cfg = full ? ModelConfig::full_scale() : ModelConfig();

    auto resolve_int = [&](const char* key, int& field, const char* flag, int given) {
        field = opts.at(flag)->count() > 0 ? given : field;
        layer.resolve(key, field, opts.at(flag));
    };
    auto resolve_dbl = [&](const char* key, double& field, const char* flag, double given) {
        field = opts.at(flag)->count() > 0 ? given : field;
        layer.resolve(key, field, opts.at(flag));
    };
    resolve_int("layers", cfg.layers, "layers", a.layers);
    resolve_int("heads", cfg.heads, "heads", a.heads);
    resolve_int("embed_dim", cfg.embed_dim, "embed_dim", a.embed_dim);
    resolve_int("mlp_hidden", cfg.mlp_hidden, "mlp_hidden", a.mlp_hidden);
    resolve_int("epochs", cfg.epochs, "epochs", a.epochs);
    resolve_dbl("dropout", cfg.dropout_p, "dropout", a.dropout);
    resolve_dbl("lr", cfg.lr, "lr", a.lr);
    resolve_dbl("weight_decay", cfg.weight_decay, "weight_decay", a.weight_decay);
    resolve_dbl("lambda", cfg.consistency_weight, "lambda", a.lambda);
    cfg.seed = a.seed;
    layer.resolve("seed", cfg.seed, opts.at("seed"));
    if (opts.at("buckets")->count() > 0) {
        cfg.buckets = parse_buckets(a.buckets);
    } else if (layer.file().contains("buckets")) {
        cfg.buckets.clear();
        for (const auto& pair : layer.file().at("buckets")) {
            cfg.buckets.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
        }
    }
    layer.record("buckets", buckets_to_json(cfg.buckets));
    layer.record("data", a.data);
    layer.record("out", a.out);
    cfg.validate();

    std::vector<Trial> dataset;
    for (const fs::path& file : trial_files(a.data)) {
        dataset.push_back(load_trial(file));
    }

    const TrainResult result = train(dataset, cfg);
    ensure_dir(a.out);
    save_checkpoint(result.params, cfg.epochs, fs::path(a.out) / "checkpoint.json");
    std::ostringstream trace;
    trace << "epoch\tloss\n";
    for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu\t%.9g\n", e + 1, result.loss_trace[e]);
        trace << buf;
    }
    write_text(fs::path(a.out) / "loss_trace.tsv", trace.str());
    write_resolved(a.out, "train", layer);

    if (result.skipped_trials > 0) {
        std::cerr << "warning: skipped " << result.skipped_trials
                  << " trials without ground-truth targets\n";
    }
    std::cout << "trained " << cfg.epochs << " epochs on "
              << dataset.size() - static_cast<std::size_t>(result.skipped_trials)
              << " trials";
    if (!result.loss_trace.empty()) {
        std::cout << ", final loss " << result.loss_trace.back();
    }
    std::cout << "\n";
    return 0;
}

// -------------------------------------------------------------- analyze ----

std::vector<KinematicFrame> to_frames(const Eigen::MatrixXd& kin) {
    std::vector<KinematicFrame> frames(static_cast<std::size_t>(kin.rows()));
    for (Eigen::Index t = 0; t < kin.rows(); ++t) {
        for (int c = 0; c < KinematicFrame::kChannels; ++c) {
            frames[static_cast<std::size_t>(t)].set_channel(c, kin(t, c));
        }
    }
    return frames;
}

struct AnalyzeArgs {
    std::string data;
    std::string checkpoint;
    std::string out;
    std::string config;
    bool oracle_kinematics = false;
    std::uint64_t seed = 0;
};

int run_analyze(const AnalyzeArgs& a, const std::map<std::string, CLI::Option*>& opts) {
    ConfigLayer layer(a.config);
    AnalyzeArgs r = a;
    layer.resolve("oracle_kinematics", r.oracle_kinematics, opts.at("oracle_kinematics"));
    layer.resolve("checkpoint", r.checkpoint, opts.at("checkpoint"));
    layer.resolve("seed", r.seed, opts.at("seed"));
    layer.record("data", a.data);
    layer.record("out", a.out);

    std::optional<Checkpoint> ckpt;
    if (!r.oracle_kinematics) {
        if (r.checkpoint.empty()) {
            throw UsageError("analyze needs --checkpoint unless --oracle-kinematics is set");
        }
        ckpt = load_checkpoint(r.checkpoint);
    }

    ensure_dir(a.out);
    std::ostringstream events_os, params_os, residuals_os, failures_os;
    residuals_os << "trial_id\treconstruction_residual\n";
    failures_os << "file\terror\n";
    int failures = 0;
    bool first = true;

    for (const fs::path& file : trial_files(a.data)) {
        try {
            const Trial trial = load_trial(file);
            Eigen::MatrixXd phase_obs;
            std::vector<KinematicFrame> kin;
            if (r.oracle_kinematics) {
                if (!trial.gt_kinematics.has_value() || !trial.gt_events.has_value()) {
                    throw DataError("trial " + trial.id +
                                    ": oracle mode needs ground-truth targets");
                }
                kin = *trial.gt_kinematics;
                std::vector<double> times(trial.frames.size());
                for (std::size_t i = 0; i < times.size(); ++i) {
                    times[i] = trial.frame_time(i);
                }
                phase_obs = phase_matrix(encode(*trial.gt_events, times).frames);
            } else {
                const ModelOutput out = infer(trial, ckpt->params);
                kin = to_frames(out.kinematics);
                phase_obs = out.phase_q;
            }

            const auto smoothed = smooth(phase_obs, trial.dt());
            const DetectedEvents detected = detect_events(smoothed, trial.dt());
            const double residual = reconstruction_residual(phase_obs, smoothed);

            std::vector<GaitCycleParams> est_params;
            for (const GaitCycle& cycle : parse_cycles(detected).cycles) {
                est_params.push_back(extract_parameters(cycle, kin, trial.fps));
            }
            write_events_tsv(events_os, trial.id, &detected,
                             trial.gt_events.has_value() ? &*trial.gt_events : nullptr,
                             first);
            write_params_tsv(params_os, trial.id, est_params,
                             r.oracle_kinematics ? "oracle" : "model", first);
            if (trial.gt_events.has_value() && trial.gt_kinematics.has_value()) {
                std::vector<GaitCycleParams> truth_params;
                for (const GaitCycle& cycle : parse_cycles(*trial.gt_events).cycles) {
                    truth_params.push_back(
                        extract_parameters(cycle, *trial.gt_kinematics, trial.fps));
                }
                write_params_tsv(params_os, trial.id, truth_params, "truth", false);
            }
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9g", residual);
            residuals_os << trial.id << '\t' << buf << '\n';
            first = false;
        } catch (const DataError& err) {
            ++failures;
            failures_os << file.filename().string() << '\t' << err.what() << '\n';
        } catch (const NumericError& err) {
            ++failures;
            failures_os << file.filename().string() << '\t' << err.what() << '\n';
        }
    }

    write_text(fs::path(a.out) / "events.tsv", events_os.str());
    write_text(fs::path(a.out) / "params.tsv", params_os.str());
    write_text(fs::path(a.out) / "residuals.tsv", residuals_os.str());
    if (failures > 0) {
        write_text(fs::path(a.out) / "failures.tsv", failures_os.str());
    }
    write_resolved(a.out, "analyze", layer);

    if (failures > 0) {
        std::cerr << failures << " trials failed; see failures.tsv\n";
        return 2;
    }
    std::cout << "analyzed trials written to " << a.out << "\n";
    return 0;
}

// ------------------------------------------------------ calibrate/screen ----

struct CalibrateArgs {
    std::string problem;
    std::string out;
    std::string config;
    double delta_px = 5.0, lr = 0.01, offset_window = 0.5, confidence = 0.5;
    int max_iters = 2000;
};

int run_calibrate(const CalibrateArgs& a, const std::map<std::string, CLI::Option*>& opts) {
    ConfigLayer layer(a.config);
    CalibrateArgs r = a;
    layer.resolve("delta_px", r.delta_px, opts.at("delta_px"));
    layer.resolve("lr", r.lr, opts.at("lr"));
    layer.resolve("max_iters", r.max_iters, opts.at("max_iters"));
    layer.resolve("offset_window", r.offset_window, opts.at("offset_window"));
    layer.resolve("confidence", r.confidence, opts.at("confidence"));
    layer.record("problem", a.problem);
    layer.record("out", a.out);

    CalibrateConfig cfg;
    cfg.delta_px = r.delta_px;
    cfg.lr = r.lr;
    cfg.max_iters = r.max_iters;
    cfg.offset_window_s = r.offset_window;
    cfg.confidence_threshold = r.confidence;

    const SyncProblem problem = load_sync_problem(a.problem);
    const SyncResult result = calibrate(problem, cfg);

    ensure_dir(a.out);
    std::ostringstream report;
    write_sync_report(report, result);
    write_text(fs::path(a.out) / "sync_report.txt", report.str());
    write_resolved(a.out, "calibrate", layer);
    std::cout << report.str();
    return 0;
}

struct ScreenArgs {
    std::string report;
    std::string out;
    std::string config;
    double mean_huber = 0.0;
    double offset = 0.0;
    double frac_missing = 0.0;
    bool bbox_swapped = false;
    int sync_frames = 0;
    bool events_invalid = false;
};

int run_screen(const ScreenArgs& a, const std::map<std::string, CLI::Option*>& opts) {
    ConfigLayer layer(a.config);
    ScreenArgs r = a;
    if (!a.report.empty()) {
        std::ifstream in(a.report);
        if (!in) {
            throw DataError("cannot open sync report: " + a.report);
        }
        std::string line;
        while (std::getline(in, line)) {
            const auto fields = split_tabs(line);
            if (fields.size() != 2) {
                continue;
            }
            if (fields[0] == "mean_huber" && opts.at("mean_huber")->count() == 0) {
                r.mean_huber = parse_double(fields[1], "mean_huber");
            }
            if (fields[0] == "offset_s" && opts.at("offset")->count() == 0) {
                r.offset = parse_double(fields[1], "offset_s");
            }
        }
    }
    if (a.report.empty()) {
        layer.resolve("mean_huber", r.mean_huber, opts.at("mean_huber"));
        layer.resolve("offset", r.offset, opts.at("offset"));
    } else {
        // Report-derived values are measurements, not configuration; only an
        // explicit flag (already applied while parsing) may override them.
        layer.record("mean_huber", r.mean_huber);
        layer.record("offset", r.offset);
    }
    layer.resolve("frac_missing", r.frac_missing, opts.at("frac_missing"));
    layer.resolve("bbox_swapped", r.bbox_swapped, opts.at("bbox_swapped"));
    layer.resolve("sync_frames", r.sync_frames, opts.at("sync_frames"));
    layer.resolve("events_invalid", r.events_invalid, opts.at("events_invalid"));
    layer.record("report", a.report);
    layer.record("out", a.out);

    SyncResult sync;
    sync.mean_huber = r.mean_huber;
    sync.offset = r.offset;
    DetectionStats stats;
    stats.frac_missing = r.frac_missing;
    stats.bbox_swapped = r.bbox_swapped;
    const ScreenDecision decision =
        screen_trial(sync, stats, r.sync_frames, !r.events_invalid);

    std::ostringstream os;
    os << "decision\t" << (decision.accept ? "accept" : "reject") << '\n';
    for (const std::string& reason : decision.reasons) {
        os << "reason\t" << reason << '\n';
    }
    std::cout << os.str();
    if (!a.out.empty()) {
        ensure_dir(a.out);
        write_text(fs::path(a.out) / "screen.txt", os.str());
        write_resolved(a.out, "screen", layer);
    }
    return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string analysis;
    std::string events;
    std::string params;
    std::string out;
    std::string config;
};

struct TrialTables {
    EventAnnotations detected;
    EventAnnotations truth_events;
    std::vector<GaitCycleParams> est_params;
    std::vector<GaitCycleParams> truth_params;
};

void read_events_tsv(const fs::path& path, std::map<std::string, TrialTables>& trials) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": empty file");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != 4) {
            throw DataError(path.string() + ": expected 4 columns, got line: " + line);
        }
        const int type = event_type_index(fields[0]);
        const double t = parse_double(fields[1], "time_s");
        TrialTables& entry = trials[fields[3]];
        if (fields[2] == "detected") {
            entry.detected.list(type).push_back(t);
        } else if (fields[2] == "ground_truth") {
            entry.truth_events.list(type).push_back(t);
        } else {
            throw DataError(path.string() + ": unknown source: " + fields[2]);
        }
    }
}

void read_params_tsv(const fs::path& path, std::map<std::string, TrialTables>& trials) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": empty file");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != 11) {
            throw DataError(path.string() + ": expected 11 columns, got line: " + line);
        }
        GaitCycleParams p;
        if (fields[1] == side_name(Side::Left)) {
            p.side = Side::Left;
        } else if (fields[1] == side_name(Side::Right)) {
            p.side = Side::Right;
        } else {
            throw DataError(path.string() + ": unknown side: " + fields[1]);
        }
        p.start = parse_double(fields[2], "start_s");
        p.end = parse_double(fields[3], "end_s");
        p.cadence_spm = parse_double(fields[4], "cadence_spm");
        p.step_time_s = parse_double(fields[5], "step_time_s");
        p.step_length_m = parse_double(fields[6], "step_length_m");
        p.velocity_mps = parse_double(fields[7], "velocity_mps");
        p.double_stance_s = parse_double(fields[8], "double_stance_s");
        p.single_support_s = parse_double(fields[9], "single_support_s");
        TrialTables& entry = trials[fields[0]];
        if (fields[10] == "truth") {
            entry.truth_params.push_back(p);
        } else {
            entry.est_params.push_back(p);
        }
    }
}

int run_eval(const EvalArgs& a, const std::map<std::string, CLI::Option*>& opts) {
    ConfigLayer layer(a.config);
    EvalArgs r = a;
    layer.resolve("events", r.events, opts.at("events"));
    layer.resolve("params", r.params, opts.at("params"));
    layer.record("analysis", a.analysis);
    layer.record("out", a.out);

    fs::path events_path = r.events;
    fs::path params_path = r.params;
    if (!a.analysis.empty()) {
        if (events_path.empty()) {
            events_path = fs::path(a.analysis) / "events.tsv";
        }
        if (params_path.empty()) {
            params_path = fs::path(a.analysis) / "params.tsv";
        }
    }
    if (events_path.empty() || params_path.empty()) {
        throw UsageError("eval needs --analysis or both --events and --params");
    }

    std::map<std::string, TrialTables> tables;
    read_events_tsv(events_path, tables);
    read_params_tsv(params_path, tables);

    std::vector<TrialEvalInput> inputs;
    for (const auto& [trial_id, t] : tables) {
        TrialEvalInput input;
        input.trial_id = trial_id;
        input.detected = t.detected;
        input.truth_events = t.truth_events;
        input.cycle_pairs = pair_first_cycles(t.est_params, t.truth_params);
        inputs.push_back(std::move(input));
    }

    const AgreementReport report = evaluate(inputs);

    ensure_dir(a.out);
    std::ostringstream report_os;
    write_report(report_os, report);
    write_text(fs::path(a.out) / "report.txt", report_os.str());
    std::ostringstream hist_os;
    write_error_histogram(hist_os, report.pooled_errors_s);
    write_text(fs::path(a.out) / "event_error_histogram.tsv", hist_os.str());
    std::ostringstream cmp_os;
    write_comparison_tsv(cmp_os, inputs);
    write_text(fs::path(a.out) / "comparison.tsv", cmp_os.str());
    write_resolved(a.out, "eval", layer);
    std::cout << report_os.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gait kinematics and event analysis toolkit"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    TrainArgs train_args;
    AnalyzeArgs analyze_args;
    CalibrateArgs calib_args;
    ScreenArgs screen_args;
    EvalArgs eval_args;
    std::map<std::string, CLI::Option*> synth_opts, train_opts, analyze_opts, calib_opts,
        screen_opts, eval_opts;

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic trials");
    synth_opts["n"] = synth->add_option("--n", synth_args.n, "number of trials");
    synth_opts["seed"] = synth->add_option("--seed", synth_args.seed, "random seed");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--config", synth_args.config, "JSON config file");
    synth_opts["cadence_min"] = synth->add_option("--cadence-min", synth_args.cadence_min);
    synth_opts["cadence_max"] = synth->add_option("--cadence-max", synth_args.cadence_max);
    synth_opts["step_min"] = synth->add_option("--step-min", synth_args.step_min);
    synth_opts["step_max"] = synth->add_option("--step-max", synth_args.step_max);
    synth_opts["height_min"] = synth->add_option("--height-min", synth_args.height_min);
    synth_opts["height_max"] = synth->add_option("--height-max", synth_args.height_max);
    synth_opts["duration_min"] =
        synth->add_option("--duration-min", synth_args.duration_min);
    synth_opts["duration_max"] =
        synth->add_option("--duration-max", synth_args.duration_max);
    synth_opts["asym_min"] = synth->add_option("--asym-min", synth_args.asym_min);
    synth_opts["asym_max"] = synth->add_option("--asym-max", synth_args.asym_max);
    synth_opts["noise"] = synth->add_option("--noise", synth_args.noise,
                                            "joint noise sigma, meters");
    synth_opts["fps"] = synth->add_option("--fps", synth_args.fps);
    synth_opts["prefix"] = synth->add_option("--prefix", synth_args.prefix, "trial id prefix");

    CLI::App* train = app.add_subcommand("train", "train the sequence model");
    train->add_option("--data", train_args.data, "trial directory")->required();
    train->add_option("--out", train_args.out, "output directory")->required();
    train->add_option("--config", train_args.config, "JSON config file");
    train_opts["full_scale"] = train->add_flag("--full-scale", train_args.full_scale,
                                               "production-scale model defaults");
    train_opts["layers"] = train->add_option("--layers", train_args.layers);
    train_opts["heads"] = train->add_option("--heads", train_args.heads);
    train_opts["embed_dim"] = train->add_option("--embed-dim", train_args.embed_dim);
    train_opts["mlp_hidden"] = train->add_option("--mlp-hidden", train_args.mlp_hidden);
    train_opts["epochs"] = train->add_option("--epochs", train_args.epochs);
    train_opts["dropout"] = train->add_option("--dropout", train_args.dropout);
    train_opts["lr"] = train->add_option("--lr", train_args.lr);
    train_opts["weight_decay"] =
        train->add_option("--weight-decay", train_args.weight_decay);
    train_opts["lambda"] = train->add_option("--lambda", train_args.lambda,
                                             "physical-consistency loss weight");
    train_opts["seed"] = train->add_option("--seed", train_args.seed);
    train_opts["buckets"] = train->add_option("--buckets", train_args.buckets,
                                              "LENGTH:BATCH pairs")
                                ->delimiter(',');

    CLI::App* analyze = app.add_subcommand("analyze", "events and parameters from trials");
    analyze->add_option("--data", analyze_args.data, "trial directory")->required();
    analyze->add_option("--out", analyze_args.out, "output directory")->required();
    analyze->add_option("--config", analyze_args.config, "JSON config file");
    analyze_opts["checkpoint"] =
        analyze->add_option("--checkpoint", analyze_args.checkpoint, "model checkpoint");
    analyze_opts["oracle_kinematics"] =
        analyze->add_flag("--oracle-kinematics", analyze_args.oracle_kinematics,
                          "bypass the model, use ground-truth channels");
    analyze_opts["seed"] = analyze->add_option("--seed", analyze_args.seed);

    CLI::App* calibrate_cmd =
        app.add_subcommand("calibrate", "camera/time-offset calibration");
    calibrate_cmd->add_option("--problem", calib_args.problem, "sync problem JSON")
        ->required();
    calibrate_cmd->add_option("--out", calib_args.out, "output directory")->required();
    calibrate_cmd->add_option("--config", calib_args.config, "JSON config file");
    calib_opts["delta_px"] = calibrate_cmd->add_option("--delta-px", calib_args.delta_px);
    calib_opts["lr"] = calibrate_cmd->add_option("--lr", calib_args.lr);
    calib_opts["max_iters"] = calibrate_cmd->add_option("--max-iters", calib_args.max_iters);
    calib_opts["offset_window"] =
        calibrate_cmd->add_option("--offset-window", calib_args.offset_window);
    calib_opts["confidence"] =
        calibrate_cmd->add_option("--confidence", calib_args.confidence);

    CLI::App* screen = app.add_subcommand("screen", "trial screening decision");
    screen->add_option("--report", screen_args.report, "sync report to read");
    screen->add_option("--out", screen_args.out, "output directory");
    screen->add_option("--config", screen_args.config, "JSON config file");
    screen_opts["mean_huber"] = screen->add_option("--mean-huber", screen_args.mean_huber);
    screen_opts["offset"] = screen->add_option("--offset", screen_args.offset, "seconds");
    screen_opts["frac_missing"] =
        screen->add_option("--frac-missing", screen_args.frac_missing);
    screen_opts["bbox_swapped"] =
        screen->add_flag("--bbox-swapped", screen_args.bbox_swapped);
    screen_opts["sync_frames"] =
        screen->add_option("--sync-frames", screen_args.sync_frames)->required();
    screen_opts["events_invalid"] =
        screen->add_flag("--events-invalid", screen_args.events_invalid);

    CLI::App* eval_cmd = app.add_subcommand("eval", "agreement report from analyze tables");
    eval_opts["analysis"] =
        eval_cmd->add_option("--analysis", eval_args.analysis, "analyze output directory");
    eval_opts["events"] = eval_cmd->add_option("--events", eval_args.events, "events.tsv");
    eval_opts["params"] = eval_cmd->add_option("--params", eval_args.params, "params.tsv");
    eval_cmd->add_option("--out", eval_args.out, "output directory")->required();
    eval_cmd->add_option("--config", eval_args.config, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (synth->parsed()) {
            return run_synth(synth_args, synth_opts);
        }
        if (train->parsed()) {
            return run_train(train_args, train_opts);
        }
        if (analyze->parsed()) {
            return run_analyze(analyze_args, analyze_opts);
        }
        if (calibrate_cmd->parsed()) {
            return run_calibrate(calib_args, calib_opts);
        }
        if (screen->parsed()) {
            return run_screen(screen_args, screen_opts);
        }
        if (eval_cmd->parsed()) {
            return run_eval(eval_args, eval_opts);
        }
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const NumericError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 1;
}
