#include "parse/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature files are written in native little-endian order");

namespace parse {

namespace {

constexpr char kFeatureMagic[4] = {'P', 'R', 'S', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

void check_synth(const SynthConfig& cfg) {
    if (cfg.levels < 1) throw config_error("levels must be >= 1");
    if (static_cast<int>(cfg.mean_durations.size()) != cfg.levels ||
        static_cast<int>(cfg.jitters.size()) != cfg.levels)
        throw config_error("need one mean duration and jitter per level");
    for (int i = 0; i < cfg.levels; ++i) {
        if (cfg.mean_durations[i] < 1) throw config_error("mean durations must be >= 1");
        if (cfg.jitters[i] < 0 || cfg.jitters[i] >= cfg.mean_durations[i])
            throw config_error("jitter must be in [0, mean)");
        if (i > 0 && cfg.mean_durations[i] <= cfg.mean_durations[i - 1])
            throw config_error("mean durations must increase toward coarse levels");
    }
    if (cfg.dim < 1) throw config_error("dim must be >= 1");
    if (!(cfg.separation > 0.0)) throw config_error("separation must be positive");
    if (cfg.noise < 0.0) throw config_error("noise must be >= 0");
    if (cfg.drift < 0.0) throw config_error("drift must be >= 0");
    if (!(cfg.fps > 0.0f)) throw config_error("fps must be positive");
    if (cfg.target_frames < 2) throw config_error("target_frames must be >= 2");
}

int draw_duration(Rng& rng, int mean, int jitter) {
    int lo = std::max(1, mean - jitter);
    int hi = mean + jitter;
    return static_cast<int>(rng.uniform_int(lo, hi));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void warn_unknown(const nlohmann::json& obj, const char* where,
                  std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok)
            std::cerr << "warning: ignoring unknown annotation field '" << it.key()
                      << "' in " << where << "\n";
    }
}

}  // namespace

std::pair<FeatureSequence, Partonomy> generate_synthetic(const SynthConfig& cfg) {
    check_synth(cfg);
    Rng rng(cfg.seed);

    // Segment structure, coarsest level first during construction. The top
    // level grows until it covers target_frames; each level below carves its
    // parents independently, truncating the final child to fit.
    std::vector<std::vector<Segment>> built(cfg.levels);
    int top = cfg.levels - 1;
    {
        int t = 0;
        while (t < cfg.target_frames) {
            int dur = draw_duration(rng, cfg.mean_durations[top], cfg.jitters[top]);
            built[top].push_back({t, t + dur, ""});
            t += dur;
        }
    }
    for (int lvl = top - 1; lvl >= 0; --lvl) {
        for (const Segment& par : built[lvl + 1]) {
            int t = par.start;
            while (t < par.end) {
                int dur = draw_duration(rng, cfg.mean_durations[lvl], cfg.jitters[lvl]);
                int end = std::min(t + dur, par.end);
                built[lvl].push_back({t, end, ""});
                t = end;
            }
        }
    }
    int T = built[top].back().end;

    // Nested means: top segments spread at the separation scale, each level
    // down adds offsets at half the scale of the level above.
    std::vector<std::vector<std::vector<double>>> means(cfg.levels);
    means[top].resize(built[top].size());
    for (auto& m : means[top]) {
        m.resize(cfg.dim);
        for (int k = 0; k < cfg.dim; ++k) m[k] = cfg.separation * rng.gauss();
    }
    double scale = cfg.separation;
    for (int lvl = top - 1; lvl >= 0; --lvl) {
        scale *= 0.5;
        means[lvl].resize(built[lvl].size());
        size_t c = 0;
        for (size_t j = 0; j < built[lvl].size(); ++j) {
            while (built[lvl + 1][c].end <= built[lvl][j].start) ++c;
            means[lvl][j].resize(cfg.dim);
            for (int k = 0; k < cfg.dim; ++k)
                means[lvl][j][k] = means[lvl + 1][c][k] + scale * rng.gauss();
        }
    }

    // Per-finest-segment drift direction (unit vector, drawn even when the
    // drift rate is zero so the draw sequence depends only on the structure).
    std::vector<std::vector<double>> drift_dir(built[0].size());
    for (auto& v : drift_dir) {
        v.resize(cfg.dim);
        double norm2 = 0.0;
        for (int k = 0; k < cfg.dim; ++k) {
            v[k] = rng.gauss();
            norm2 += v[k] * v[k];
        }
        double norm = std::sqrt(norm2);
        if (norm > 0.0)
            for (int k = 0; k < cfg.dim; ++k) v[k] = v[k] / norm * cfg.drift;
        else
            std::fill(v.begin(), v.end(), 0.0);
    }

    FeatureSequence feats(T, cfg.dim, cfg.fps);
    for (size_t j = 0; j < built[0].size(); ++j) {
        const Segment& s = built[0][j];
        for (int t = s.start; t < s.end; ++t) {
            float* row = feats.row(t);
            for (int k = 0; k < cfg.dim; ++k) {
                double x = means[0][j][k] + drift_dir[j][k] * (t - s.start) +
                           cfg.noise * rng.gauss();
                row[k] = static_cast<float>(x);
            }
        }
    }

    std::vector<Level> levels(cfg.levels);
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
        levels[lvl].segments = built[lvl];
        for (size_t j = 0; j < levels[lvl].segments.size(); ++j)
            levels[lvl].segments[j].label =
                "L" + std::to_string(lvl + 1) + "s" + std::to_string(j);
    }
    Partonomy gt = nest_recursive(levels);
    feats.check();
    return {std::move(feats), std::move(gt)};
}

void write_features(const std::string& path, const FeatureSequence& f) {
    f.check();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot open for writing: " + path);
    out.write(kFeatureMagic, 4);
    write_u32(out, kFeatureVersion);
    write_u32(out, static_cast<std::uint32_t>(f.frames));
    write_u32(out, static_cast<std::uint32_t>(f.dim));
    float fps = f.fps;
    out.write(reinterpret_cast<const char*>(&fps), 4);
    out.write(reinterpret_cast<const char*>(f.data.data()),
              static_cast<std::streamsize>(f.data.size() * sizeof(float)));
    if (!out) throw format_error("write failed: " + path);
}

FeatureSequence read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw format_error("cannot open: " + path);
    long long size = static_cast<long long>(in.tellg());
    in.seekg(0);
    if (size < 20) throw format_error("truncated header in " + path, size);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kFeatureMagic, 4) != 0)
        throw format_error("bad magic in " + path, 0);
    std::uint32_t version = read_u32(in);
    if (version != kFeatureVersion)
        throw format_error("unsupported version " + std::to_string(version) +
                               " in " + path, 4);
    std::uint32_t T = read_u32(in);
    std::uint32_t d = read_u32(in);
    float fps = 0.0f;
    in.read(reinterpret_cast<char*>(&fps), 4);
    if (T < 2) throw format_error("frame count must be >= 2 in " + path, 8);
    if (d < 1) throw format_error("feature dim must be >= 1 in " + path, 12);
    if (!(fps > 0.0f) || !std::isfinite(fps))
        throw format_error("fps must be positive in " + path, 16);
    long long expect = 20ll + 4ll * T * d;
    if (size != expect)
        throw format_error("payload length mismatch in " + path +
                               " (expected " + std::to_string(expect) +
                               " bytes, found " + std::to_string(size) + ")",
                           std::min(size, expect));
    FeatureSequence f(static_cast<int>(T), static_cast<int>(d), fps);
    in.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(float)));
    if (!in) throw format_error("payload read failed in " + path, 20);
    for (size_t i = 0; i < f.data.size(); ++i)
        if (!std::isfinite(f.data[i]))
            throw format_error("non-finite value in " + path,
                               20ll + 4ll * static_cast<long long>(i));
    return f;
}

void write_annotation(const std::string& path, const Partonomy& p, float fps) {
    std::vector<std::string> bad = validate(p);
    if (!bad.empty()) throw config_error("refusing to write invalid partonomy: " + bad[0]);
    nlohmann::json j;
    j["fps"] = fps;
    j["T"] = p.total_frames;
    j["levels"] = nlohmann::json::array();
    for (size_t i = 0; i < p.levels.size(); ++i) {
        nlohmann::json lv;
        lv["name"] = "L" + std::to_string(i + 1);
        lv["segments"] = nlohmann::json::array();
        for (const Segment& s : p.levels[i].segments) {
            nlohmann::json seg;
            seg["start"] = s.start;
            seg["end"] = s.end;
            seg["label"] = s.label;
            lv["segments"].push_back(std::move(seg));
        }
        j["levels"].push_back(std::move(lv));
    }
    std::ofstream out(path);
    if (!out) throw format_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw format_error("write failed: " + path);
}

std::pair<Partonomy, float> read_annotation(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("json parse error in " + path + ": " + e.what(),
                           static_cast<long long>(e.byte));
    }
    if (!j.is_object()) throw format_error("annotation root must be an object: " + path);
    warn_unknown(j, "annotation root", {"fps", "T", "levels"});
    if (!j.contains("fps") || !j["fps"].is_number())
        throw format_error("missing or non-numeric 'fps' in " + path);
    if (!j.contains("T") || !j["T"].is_number_integer())
        throw format_error("missing or non-integer 'T' in " + path);
    if (!j.contains("levels") || !j["levels"].is_array() || j["levels"].empty())
        throw format_error("missing or empty 'levels' array in " + path);
    float fps = j["fps"].get<float>();
    int T = j["T"].get<int>();
    Partonomy p;
    p.total_frames = T;
    for (const auto& lv : j["levels"]) {
        if (!lv.is_object() || !lv.contains("segments") || !lv["segments"].is_array())
            throw format_error("each level needs a 'segments' array in " + path);
        warn_unknown(lv, "level object", {"name", "segments"});
        Level level;
        for (const auto& seg : lv["segments"]) {
            if (!seg.is_object() || !seg.contains("start") || !seg.contains("end") ||
                !seg["start"].is_number_integer() || !seg["end"].is_number_integer())
                throw format_error("segment needs integer 'start' and 'end' in " + path);
            warn_unknown(seg, "segment object", {"start", "end", "label"});
            Segment s;
            s.start = seg["start"].get<int>();
            s.end = seg["end"].get<int>();
            if (seg.contains("label")) {
                if (!seg["label"].is_string())
                    throw format_error("segment 'label' must be a string in " + path);
                s.label = seg["label"].get<std::string>();
            }
            level.segments.push_back(std::move(s));
        }
        p.levels.push_back(std::move(level));
    }
    rebuild_parent_links(p);
    std::vector<std::string> bad = validate(p);
    if (!bad.empty())
        throw format_error("invalid annotation in " + path + ": " + bad[0]);
    return {std::move(p), fps};
}

}  // namespace parse
