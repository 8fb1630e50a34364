#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "parse/baselines.hpp"
#include "parse/boundary.hpp"
#include "parse/datasets.hpp"
#include "parse/metrics.hpp"
#include "parse/partonomy.hpp"
#include "parse/stack.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "parse 0.1.0";

int run(const std::vector<std::string>& args);  // forward, for replay

// ---------------------------------------------------------------------------
// small utilities

std::vector<int> parse_ints(const std::string& s, const char* what) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            size_t used = 0;
            out.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw parse::config_error(std::string(what) + ": bad integer list entry '" + tok + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw parse::config_error(std::string(what) + ": bad number list entry '" + tok + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

// Strips directory and the longest known suffix, leaving the video stem.
std::string stem_of(const std::string& path) {
    std::string base = fs::path(path).filename().string();
    for (const char* suf : {".gt.json", ".pred.json", ".report.json", ".trace.csv",
                            ".prsf", ".json", ".csv", ".ckpt"}) {
        size_t n = std::string(suf).size();
        if (base.size() > n && base.compare(base.size() - n, n, suf) == 0)
            return base.substr(0, base.size() - n);
    }
    return base;
}

bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

// Files given directly, or found by suffix inside given directories (sorted
// so runs are reproducible regardless of directory iteration order).
std::vector<std::string> collect_inputs(const std::vector<std::string>& args,
                                        const std::string& suffix) {
    std::vector<std::string> out;
    for (const std::string& a : args) {
        if (fs::is_directory(a)) {
            std::vector<std::string> found;
            for (const auto& e : fs::directory_iterator(a))
                if (e.is_regular_file() && ends_with(e.path().filename().string(), suffix))
                    found.push_back(e.path().string());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(a)) {
            out.push_back(a);
        } else {
            throw parse::config_error("input not found: " + a);
        }
    }
    if (out.empty()) throw parse::config_error("no input files (looked for *" + suffix + ")");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw parse::format_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw parse::format_error("write failed: " + path);
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::string>& argv, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json m;
    m["tool"] = kToolVersion;
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = config;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    write_text((fs::path(dir) / (command + "_manifest.json")).string(), m.dump(2) + "\n");
}

// First-error-wins parallel loop; worker count never exceeds the item count.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex mu;
    std::exception_ptr err;
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

std::uint32_t env_seed_default() {
    if (const char* s = std::getenv("PARSE_SEED")) {
        try {
            return static_cast<std::uint32_t>(std::stoul(s));
        } catch (const std::exception&) {
            throw parse::config_error("PARSE_SEED is not a number");
        }
    }
    return 0;
}

int env_jobs_default() {
    if (const char* s = std::getenv("PARSE_JOBS")) {
        try {
            return std::max(1, std::stoi(s));
        } catch (const std::exception&) {
            throw parse::config_error("PARSE_JOBS is not a number");
        }
    }
    return 1;
}

// ---------------------------------------------------------------------------
// presets

struct Preset {
    int hidden = 0;               // 0 = leave default
    double adapt_lr = -1.0;       // <0 = leave default
    std::vector<int> smooth;      // finest first
    std::vector<int> radius;      // finest first
    std::vector<int> k;           // finest first
};

// Dataset presets are stated for three predictor levels, finest first.
Preset named_preset(const std::string& name) {
    if (name == "breakfast") return {64, -1.0, {4, 3, 2}, {4, 20, 30}, {38, 22, 6}};
    if (name == "salads") return {512, -1.0, {3, 3, 3}, {4, 20, 45}, {52, 36, 19}};
    if (name == "assembly") return {128, 1e-5, {3, 3, 3}, {4, 30, 60}, {242, 134, 26}};
    if (name == "fps-default" || name.empty()) return {};
    throw parse::config_error("unknown preset: " + name);
}

// Frame-rate-derived smoothing and radii for a 3-level stack.
void fps_default_boundary(float fps, std::vector<int>& smooth, std::vector<int>& radius) {
    int ks = std::max(3, static_cast<int>(std::lround(0.2 * fps)));
    smooth.assign(3, ks);
    radius = {std::max(1, static_cast<int>(std::lround(0.25 * fps))),
              std::max(1, static_cast<int>(std::lround(1.25 * fps))),
              std::max(1, static_cast<int>(std::lround(2.00 * fps)))};
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const std::vector<std::string>& argv, const std::string& out_dir,
              int videos, int levels, const std::string& durations_s,
              const std::string& jitters_s, int dim, double separation, double noise,
              double drift, double fps, int target_frames, std::uint32_t seed) {
    parse::SynthConfig cfg;
    cfg.levels = levels;
    cfg.mean_durations = parse_ints(durations_s, "--mean-durations");
    if (jitters_s.empty()) {
        cfg.jitters.clear();
        for (int m : cfg.mean_durations) cfg.jitters.push_back(m / 4);
    } else {
        cfg.jitters = parse_ints(jitters_s, "--jitters");
    }
    cfg.dim = dim;
    cfg.separation = separation;
    cfg.noise = noise;
    cfg.drift = drift;
    cfg.fps = static_cast<float>(fps);
    cfg.target_frames = target_frames;
    if (videos < 1) throw parse::config_error("--videos must be >= 1");
    fs::create_directories(out_dir);

    json config{{"videos", videos},
                {"levels", cfg.levels},
                {"mean_durations", cfg.mean_durations},
                {"jitters", cfg.jitters},
                {"dim", cfg.dim},
                {"separation", cfg.separation},
                {"noise", cfg.noise},
                {"drift", cfg.drift},
                {"fps", cfg.fps},
                {"target_frames", cfg.target_frames},
                {"seed", seed}};
    std::cout << "synth config: " << config.dump() << "\n";

    std::vector<std::string> outputs;
    for (int v = 0; v < videos; ++v) {
        parse::SynthConfig vc = cfg;
        vc.seed = seed + static_cast<std::uint32_t>(v);
        auto [feats, gt] = parse::generate_synthetic(vc);
        char name[32];
        std::snprintf(name, sizeof(name), "video_%03d", v);
        std::string fpath = (fs::path(out_dir) / (std::string(name) + ".prsf")).string();
        std::string apath = (fs::path(out_dir) / (std::string(name) + ".gt.json")).string();
        parse::write_features(fpath, feats);
        parse::write_annotation(apath, gt, feats.fps);
        outputs.push_back(fpath);
        outputs.push_back(apath);
    }
    write_manifest(out_dir, "synth", argv, config, {}, outputs);
    std::cout << "wrote " << videos << " videos to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::vector<std::string>& argv, const std::vector<std::string>& inputs,
              const std::string& out_ckpt, std::string trace_csv, int levels, int hidden,
              int memory, double lambda_sparse, double lr, double adapt_lr, int window,
              bool znorm, bool no_top_attention, std::uint32_t seed,
              const std::string& preset_name, bool hidden_given, bool adapt_given) {
    Preset preset = named_preset(preset_name);
    if (preset.hidden > 0 && !hidden_given) hidden = preset.hidden;
    if (preset.adapt_lr > 0.0 && !adapt_given) adapt_lr = preset.adapt_lr;

    std::vector<std::string> files = collect_inputs(inputs, ".prsf");
    std::vector<parse::FeatureSequence> feats;
    feats.reserve(files.size());
    for (const std::string& f : files) feats.push_back(parse::read_features(f));

    parse::StackConfig cfg = parse::StackConfig::uniform(levels, feats[0].dim, hidden, memory);
    cfg.lambda_sparse = lambda_sparse;
    cfg.train_lr = lr;
    cfg.adapt_lr = adapt_lr;
    cfg.window = window;
    cfg.znorm = znorm;
    cfg.top_self_attention = !no_top_attention;
    cfg.check();

    json config{{"levels", cfg.levels},        {"input_dim", cfg.input_dim},
                {"hidden", hidden},            {"memory", memory},
                {"lambda_sparse", cfg.lambda_sparse}, {"train_lr", cfg.train_lr},
                {"adapt_lr", cfg.adapt_lr},    {"window", cfg.window},
                {"znorm", cfg.znorm},          {"top_self_attention", cfg.top_self_attention},
                {"seed", seed},                {"preset", preset_name}};
    std::cout << "train config: " << config.dump() << "\n";

    parse::TrainResult res = parse::train_stream(feats, cfg, seed);

    fs::path ckpt(out_ckpt);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    parse::save_checkpoint(out_ckpt, res.params);
    if (trace_csv.empty())
        trace_csv = (ckpt.has_parent_path() ? ckpt.parent_path() / "energy.csv"
                                            : fs::path("energy.csv"))
                        .string();
    std::string csv = "step,energy\n";
    char line[64];
    for (size_t i = 0; i < res.energy.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.17g\n", i, res.energy[i]);
        csv += line;
    }
    write_text(trace_csv, csv);

    std::string mdir = ckpt.has_parent_path() ? ckpt.parent_path().string() : ".";
    write_manifest(mdir, "train", argv, config, files, {out_ckpt, trace_csv});
    double first = res.energy.front(), last = res.energy.back();
    std::cout << "trained on " << files.size() << " videos, " << res.energy.size()
              << " steps (energy " << first << " -> " << last << ", "
              << res.skipped_updates << " skipped updates)\n";
    std::cout << "checkpoint: " << out_ckpt << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// infer

int cmd_infer(const std::vector<std::string>& argv, const std::vector<std::string>& inputs,
              const std::string& ckpt_path, const std::string& out_dir, double adapt_lr,
              bool adapt_given, std::string smooth_s, std::string radii_s,
              const std::string& preset_name, int jobs) {
    parse::StackParams trained = parse::load_checkpoint(ckpt_path);
    if (adapt_given) {
        trained.cfg.adapt_lr = adapt_lr;
        trained.cfg.check();
    }
    int N = trained.cfg.levels;

    Preset preset = named_preset(preset_name);
    bool use_fps_default = false;
    std::vector<int> smooth, radius;
    if (!smooth_s.empty()) smooth = parse_ints(smooth_s, "--smooth");
    if (!radii_s.empty()) radius = parse_ints(radii_s, "--radii");
    if (smooth.empty() && !preset.smooth.empty()) smooth = preset.smooth;
    if (radius.empty() && !preset.radius.empty()) radius = preset.radius;
    if (radius.empty() || smooth.empty()) {
        if (N == 3) {
            use_fps_default = true;  // derived per video from its frame rate
        } else {
            throw parse::config_error(
                "stack has " + std::to_string(N) +
                " levels: pass --radii and --smooth explicitly (frame-rate defaults "
                "only cover 3 levels)");
        }
    }
    if (!use_fps_default &&
        (static_cast<int>(smooth.size()) != N || static_cast<int>(radius.size()) != N))
        throw parse::config_error("--smooth and --radii need one entry per level");

    std::vector<std::string> files = collect_inputs(inputs, ".prsf");
    fs::create_directories(out_dir);

    json config{{"checkpoint", ckpt_path},
                {"adapt_lr", trained.cfg.adapt_lr},
                {"preset", preset_name.empty() ? (use_fps_default ? "fps-default" : "")
                                               : preset_name},
                {"smooth", smooth},
                {"radii", radius}};
    std::cout << "infer config: " << config.dump() << "\n";

    std::vector<std::string> outputs(files.size() * 2);
    parallel_for(static_cast<int>(files.size()), jobs, [&](int i) {
        parse::FeatureSequence feats = parse::read_features(files[i]);
        parse::ErrorTraces traces = parse::infer_stream(feats, trained);

        parse::BoundaryConfig bcfg;
        if (use_fps_default) {
            fps_default_boundary(feats.fps, bcfg.smooth, bcfg.radius);
        } else {
            bcfg.smooth = smooth;
            bcfg.radius = radius;
        }
        std::vector<parse::BoundarySet> bounds = parse::extract_boundaries(traces, bcfg);
        std::vector<std::vector<int>> sets;
        for (const auto& b : bounds) sets.push_back(b.frames);
        parse::Partonomy pred = parse::from_boundaries(sets, feats.frames);

        std::string stem = stem_of(files[i]);
        std::string tpath = (fs::path(out_dir) / (stem + ".trace.csv")).string();
        std::string apath = (fs::path(out_dir) / (stem + ".pred.json")).string();
        std::string csv = "t,level,loss\n";
        char line[96];
        for (size_t t = 0; t < traces[0].size(); ++t)
            for (int lv = 0; lv < N; ++lv) {
                std::snprintf(line, sizeof(line), "%zu,%d,%.17g\n", t, lv + 1, traces[lv][t]);
                csv += line;
            }
        write_text(tpath, csv);
        parse::write_annotation(apath, pred, feats.fps);
        outputs[2 * i] = tpath;
        outputs[2 * i + 1] = apath;
    });
    write_manifest(out_dir, "infer", argv, config, files, outputs);
    std::cout << "inferred " << files.size() << " videos into " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// baseline

int cmd_baseline(const std::vector<std::string>& argv, const std::vector<std::string>& inputs,
                 const std::string& out_dir, const std::string& method_s, std::string k_s,
                 const std::string& durations_s, const std::string& oracle_from,
                 std::uint32_t seed, const std::string& preset_name, int jobs) {
    parse::BaselineConfig cfg;
    cfg.seed = seed;
    if (method_s == "fixed") {
        cfg.method = parse::BaselineMethod::fixed;
    } else if (method_s == "kmeans") {
        cfg.method = parse::BaselineMethod::kmeans;
    } else if (method_s == "kmeans-oracle") {
        cfg.method = parse::BaselineMethod::kmeans_oracle;
    } else if (method_s == "linkage") {
        cfg.method = parse::BaselineMethod::linkage;
    } else {
        throw parse::config_error("unknown method: " + method_s +
                                  " (expected fixed|kmeans|kmeans-oracle|linkage)");
    }
    Preset preset = named_preset(preset_name);
    if (k_s.empty() && !preset.k.empty()) {
        cfg.k = preset.k;
    } else if (!k_s.empty()) {
        cfg.k = parse_ints(k_s, "--k");
    }
    if (!durations_s.empty()) cfg.durations = parse_doubles(durations_s, "--durations");
    if (cfg.method == parse::BaselineMethod::fixed && cfg.durations.empty())
        throw parse::config_error("fixed baseline needs --durations");
    if ((cfg.method == parse::BaselineMethod::kmeans ||
         cfg.method == parse::BaselineMethod::linkage) &&
        cfg.k.empty())
        throw parse::config_error(method_s + " baseline needs --k");
    if (cfg.method == parse::BaselineMethod::kmeans_oracle && oracle_from.empty())
        throw parse::config_error("kmeans-oracle needs --oracle-from");

    std::vector<std::string> files = collect_inputs(inputs, ".prsf");
    fs::create_directories(out_dir);

    json config{{"method", method_s}, {"k", cfg.k},     {"durations", cfg.durations},
                {"seed", seed},       {"preset", preset_name}, {"oracle_from", oracle_from}};
    std::cout << "baseline config: " << config.dump() << "\n";

    std::vector<std::string> outputs(files.size());
    std::vector<int> violations(files.size(), 0);
    parallel_for(static_cast<int>(files.size()), jobs, [&](int i) {
        parse::FeatureSequence feats = parse::read_features(files[i]);
        std::string stem = stem_of(files[i]);
        parse::Partonomy gt;
        const parse::Partonomy* gt_ptr = nullptr;
        if (cfg.method == parse::BaselineMethod::kmeans_oracle) {
            std::string gpath = oracle_from;
            if (fs::is_directory(oracle_from))
                gpath = (fs::path(oracle_from) / (stem + ".gt.json")).string();
            gt = parse::read_annotation(gpath).first;
            gt_ptr = &gt;
        }
        parse::BaselineOutput out = parse::build_baseline_partonomy(feats, cfg, gt_ptr);
        violations[i] = out.pre_nest_violations;
        std::string apath = (fs::path(out_dir) / (stem + ".pred.json")).string();
        parse::write_annotation(apath, out.partonomy, feats.fps);
        outputs[i] = apath;
    });
    int total_viol = 0;
    for (int v : violations) total_viol += v;
    write_manifest(out_dir, "baseline", argv, config, files, outputs);
    std::cout << "baseline wrote " << files.size() << " predictions ("
              << total_viol << " pre-nesting containment violations repaired)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::vector<std::string>& argv, const std::vector<std::string>& pred_in,
             const std::string& gt_in, const std::string& out_dir, int tolerance,
             bool tolerance_given, const std::string& match_s, double alpha, double beta,
             double tau, int jobs) {
    parse::MatchMode mode;
    if (match_s == "literal") {
        mode = parse::MatchMode::literal;
    } else if (match_s == "one-to-one") {
        mode = parse::MatchMode::one_to_one;
    } else {
        throw parse::config_error("unknown --match: " + match_s);
    }
    std::vector<std::string> preds = collect_inputs(pred_in, ".pred.json");
    fs::create_directories(out_dir);

    json config{{"tolerance", tolerance_given ? json(tolerance) : json("round(fps)")},
                {"match", match_s},
                {"alpha", alpha},
                {"beta", beta},
                {"tau", tau},
                {"gt", gt_in}};
    std::cout << "eval config: " << config.dump() << "\n";

    std::vector<std::string> outputs(preds.size());
    parallel_for(static_cast<int>(preds.size()), jobs, [&](int i) {
        std::string stem = stem_of(preds[i]);
        std::string gpath = gt_in;
        if (fs::is_directory(gt_in))
            gpath = (fs::path(gt_in) / (stem + ".gt.json")).string();
        if (!fs::exists(gpath))
            throw parse::config_error("ground truth not found for " + stem + ": " + gpath);
        auto [pred, pred_fps] = parse::read_annotation(preds[i]);
        auto [gt, gt_fps] = parse::read_annotation(gpath);
        (void)pred_fps;
        if (pred.total_frames != gt.total_frames)
            throw parse::config_error(stem + ": prediction and ground truth disagree on T");
        int w = tolerance_given ? tolerance
                                : std::max(1, static_cast<int>(std::lround(gt_fps)));

        parse::MetricReport r;
        r.video = stem;
        parse::TedResult tr = parse::ted(pred, gt, alpha, beta);
        r.ted_raw = tr.raw_cost;
        r.ted_sim = tr.ted_sim;
        r.alpha = alpha;
        r.beta = beta;
        r.tau = tau;
        r.tolerance = w;
        r.mode = mode;
        parse::Hf1Result hres = parse::hf1(pred, gt, tau, w);
        r.hf1_mean = hres.hf1;
        r.seg_precision = hres.precision;
        r.seg_recall = hres.recall;
        r.seg_f1 = hres.f1;
        r.matched_pred_level = hres.matched_pred_level;
        for (size_t gi = 0; gi < gt.levels.size(); ++gi) {
            int pi = hres.matched_pred_level[gi];
            r.boundary.push_back(parse::hgebd(
                parse::boundary_set_of(pred.levels[pi - 1], pi),
                parse::boundary_set_of(gt.levels[gi], static_cast<int>(gi) + 1), w, mode));
        }
        std::string rpath = (fs::path(out_dir) / (stem + ".report.json")).string();
        parse::write_report(rpath, r);
        outputs[i] = rpath;
    });
    write_manifest(out_dir, "eval", argv, config, preds, outputs);
    std::cout << "evaluated " << preds.size() << " videos into " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_file) {
    std::vector<std::string> files = collect_inputs(inputs, ".report.json");
    std::vector<parse::MetricReport> reports;
    reports.reserve(files.size());
    for (const std::string& f : files) reports.push_back(parse::read_report(f));
    parse::MetricReport agg = parse::aggregate_reports(reports);
    std::cout << parse::format_report_table(agg);
    if (!out_file.empty()) {
        parse::write_report(out_file, agg);
        std::cout << "aggregate written to " << out_file << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// replay

int cmd_replay(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw parse::format_error("cannot open: " + manifest_path);
    json m;
    try {
        m = json::parse(in);
    } catch (const json::parse_error& e) {
        throw parse::format_error("bad manifest: " + std::string(e.what()));
    }
    if (!m.contains("argv") || !m["argv"].is_array())
        throw parse::format_error("manifest has no argv list: " + manifest_path);
    std::vector<std::string> args;
    for (const auto& a : m["argv"]) args.push_back(a.get<std::string>());
    std::cout << "replaying: " << m.value("command", "?") << "\n";
    return run(args);
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args) {
    CLI::App app{"Hierarchical event segmentation by streaming prediction error"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::uint32_t seed = env_seed_default();
    int jobs = env_jobs_default();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic feature streams with ground truth");
    std::string sy_out = "data";
    int sy_videos = 10, sy_levels = 3, sy_dim = 16, sy_target = 2000;
    std::string sy_dur = "20,100,400", sy_jit;
    double sy_sep = 4.0, sy_noise = 0.5, sy_drift = 0.0, sy_fps = 15.0;
    synth->add_option("--out", sy_out, "Output directory")->capture_default_str();
    synth->add_option("--videos", sy_videos, "Number of videos")->capture_default_str();
    synth->add_option("--levels", sy_levels, "Hierarchy depth")->capture_default_str();
    synth->add_option("--mean-durations", sy_dur, "Mean segment frames per level, finest first")
        ->capture_default_str();
    synth->add_option("--jitters", sy_jit, "Duration jitter per level (default mean/4)");
    synth->add_option("--dim", sy_dim, "Feature dimension")->capture_default_str();
    synth->add_option("--separation", sy_sep, "Regime separation scale")->capture_default_str();
    synth->add_option("--noise", sy_noise, "Frame noise std dev")->capture_default_str();
    synth->add_option("--drift", sy_drift, "Within-segment drift rate")->capture_default_str();
    synth->add_option("--fps", sy_fps, "Frames per second")->capture_default_str();
    synth->add_option("--target-frames", sy_target, "Minimum frames per video")
        ->capture_default_str();
    synth->add_option("--seed", seed, "Base seed (video v uses seed+v)");

    // train
    auto* train = app.add_subcommand("train", "Stream-train a predictor stack");
    std::vector<std::string> tr_in;
    std::string tr_out = "model.ckpt", tr_trace, tr_preset;
    int tr_levels = 3, tr_hidden = 64, tr_memory = 5, tr_window = 1;
    double tr_lambda = 0.1, tr_lr = 1e-3, tr_adapt = 1e-6;
    bool tr_znorm = false, tr_no_top = false;
    train->add_option("inputs", tr_in, "Feature files or directories")->required();
    train->add_option("--out", tr_out, "Checkpoint path")->capture_default_str();
    train->add_option("--trace", tr_trace, "Energy CSV path (default beside checkpoint)");
    train->add_option("--levels", tr_levels, "Predictor levels")->capture_default_str();
    auto* tr_hidden_opt =
        train->add_option("--hidden", tr_hidden, "Hidden dim per level")->capture_default_str();
    train->add_option("--memory", tr_memory, "Attention memory depth")->capture_default_str();
    train->add_option("--lambda-sparse", tr_lambda, "Sparsity weight")->capture_default_str();
    train->add_option("--lr", tr_lr, "Training learning rate")->capture_default_str();
    auto* tr_adapt_opt = train->add_option("--adapt-lr", tr_adapt, "Stored adaptation rate")
                             ->capture_default_str();
    train->add_option("--window", tr_window, "Timesteps per update")->capture_default_str();
    train->add_flag("--znorm", tr_znorm, "Causal feature normalization");
    train->add_flag("--no-top-attention", tr_no_top, "Disable top-level self attention");
    train->add_option("--seed", seed, "Parameter init seed");
    train->add_option("--preset", tr_preset, "breakfast|salads|assembly");

    // infer
    auto* infer = app.add_subcommand("infer", "Stream videos, write error traces and partonomies");
    std::vector<std::string> in_in;
    std::string in_ckpt, in_out = "pred", in_smooth, in_radii, in_preset;
    double in_adapt = 1e-6;
    infer->add_option("inputs", in_in, "Feature files or directories")->required();
    infer->add_option("--checkpoint", in_ckpt, "Trained checkpoint")->required();
    infer->add_option("--out", in_out, "Output directory")->capture_default_str();
    auto* in_adapt_opt = infer->add_option("--adapt-lr", in_adapt, "Adaptation learning rate");
    infer->add_option("--smooth", in_smooth, "Smoothing window per level");
    infer->add_option("--radii", in_radii, "Peak radius per level");
    infer->add_option("--preset", in_preset, "breakfast|salads|assembly|fps-default");
    infer->add_option("--jobs", jobs, "Parallel videos");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Non-learned segmentation baselines");
    std::vector<std::string> bl_in;
    std::string bl_out = "baseline", bl_method, bl_k, bl_dur, bl_oracle, bl_preset;
    baseline->add_option("inputs", bl_in, "Feature files or directories")->required();
    baseline->add_option("--out", bl_out, "Output directory")->capture_default_str();
    baseline->add_option("--method", bl_method, "fixed|kmeans|kmeans-oracle|linkage")->required();
    baseline->add_option("--k", bl_k, "Cluster counts per level, finest first");
    baseline->add_option("--durations", bl_dur, "Fixed segment length per level, finest first");
    baseline->add_option("--oracle-from", bl_oracle, "Ground-truth annotation file or directory");
    baseline->add_option("--seed", seed, "Clustering seed");
    baseline->add_option("--preset", bl_preset, "breakfast|salads|assembly (sets --k)");
    baseline->add_option("--jobs", jobs, "Parallel videos");

    // eval
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
    std::vector<std::string> ev_pred;
    std::string ev_gt, ev_out = "reports", ev_match = "literal";
    int ev_tol = 15;
    double ev_alpha = 1.0, ev_beta = 0.0, ev_tau = 0.5;
    eval->add_option("predictions", ev_pred, "Prediction files or directories")->required();
    eval->add_option("--gt", ev_gt, "Ground-truth file or directory")->required();
    eval->add_option("--out", ev_out, "Report directory")->capture_default_str();
    auto* ev_tol_opt = eval->add_option("--tolerance", ev_tol, "Boundary window, frames "
                                                              "(default round(fps))");
    eval->add_option("--match", ev_match, "literal|one-to-one")->capture_default_str();
    eval->add_option("--alpha", ev_alpha, "Tree edit insert/delete cost")->capture_default_str();
    eval->add_option("--beta", ev_beta, "Tree edit relabel cost")->capture_default_str();
    eval->add_option("--tau", ev_tau, "Segment IoU threshold")->capture_default_str();
    eval->add_option("--jobs", jobs, "Parallel videos");

    // report
    auto* report = app.add_subcommand("report", "Aggregate per-video reports");
    std::vector<std::string> rp_in;
    std::string rp_out;
    report->add_option("reports", rp_in, "Report files or directories")->required();
    report->add_option("--out", rp_out, "Write aggregate JSON here");

    // replay
    auto* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
    std::string rp_manifest;
    replay->add_option("manifest", rp_manifest, "Manifest JSON path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth)
            return cmd_synth(args, sy_out, sy_videos, sy_levels, sy_dur, sy_jit, sy_dim,
                             sy_sep, sy_noise, sy_drift, sy_fps, sy_target, seed);
        if (*train)
            return cmd_train(args, tr_in, tr_out, tr_trace, tr_levels, tr_hidden, tr_memory,
                             tr_lambda, tr_lr, tr_adapt, tr_window, tr_znorm, tr_no_top, seed,
                             tr_preset, tr_hidden_opt->count() > 0, tr_adapt_opt->count() > 0);
        if (*infer)
            return cmd_infer(args, in_in, in_ckpt, in_out, in_adapt,
                             in_adapt_opt->count() > 0, in_smooth, in_radii, in_preset, jobs);
        if (*baseline)
            return cmd_baseline(args, bl_in, bl_out, bl_method, bl_k, bl_dur, bl_oracle, seed,
                                bl_preset, jobs);
        if (*eval)
            return cmd_eval(args, ev_pred, ev_gt, ev_out, ev_tol, ev_tol_opt->count() > 0,
                            ev_match, ev_alpha, ev_beta, ev_tau, jobs);
        if (*report) return cmd_report(rp_in, rp_out);
        if (*replay) return cmd_replay(rp_manifest);
    } catch (const parse::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const parse::shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const parse::format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const parse::numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args);
}
