// Synthetic corpus generation and the on-disk formats: binary feature files
// and JSON annotations.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "parse/datasets.hpp"
#include "parse/partonomy.hpp"

using namespace parse;

namespace {

const std::filesystem::path kDir = [] {
    std::filesystem::path p = "/tmp/parse_test_datasets";
    std::filesystem::create_directories(p);
    return p;
}();

std::string path_of(const char* name) { return (kDir / name).string(); }

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    REQUIRE(out.good());
}

SynthConfig small_config(std::uint32_t seed) {
    SynthConfig cfg;
    cfg.levels = 3;
    cfg.mean_durations = {5, 20, 60};
    cfg.jitters = {2, 5, 15};
    cfg.dim = 4;
    cfg.separation = 3.0;
    cfg.noise = 0.25;
    cfg.target_frames = 200;
    cfg.seed = seed;
    return cfg;
}

bool same_partonomy(const Partonomy& a, const Partonomy& b) {
    if (a.total_frames != b.total_frames) return false;
    if (a.levels.size() != b.levels.size()) return false;
    for (size_t l = 0; l < a.levels.size(); ++l) {
        const auto& sa = a.levels[l].segments;
        const auto& sb = b.levels[l].segments;
        if (sa.size() != sb.size()) return false;
        for (size_t j = 0; j < sa.size(); ++j)
            if (sa[j].start != sb[j].start || sa[j].end != sb[j].end ||
                sa[j].label != sb[j].label)
                return false;
    }
    return true;
}

// Runs fn with stderr redirected to a file, returns what was written.
template <typename Fn>
std::string captured_stderr(Fn&& fn) {
    std::string path = path_of("stderr_capture.txt");
    std::fflush(stderr);
    int saved = dup(2);
    REQUIRE(saved >= 0);
    int fd = open(path.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644);
    REQUIRE(fd >= 0);
    dup2(fd, 2);
    close(fd);
    fn();
    std::fflush(stderr);
    dup2(saved, 2);
    close(saved);
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate_synthetic: zero noise and drift give piecewise-constant frames") {
    SynthConfig cfg = small_config(17);
    cfg.noise = 0.0;
    cfg.drift = 0.0;
    auto [feats, gt] = generate_synthetic(cfg);
    REQUIRE(feats.frames == gt.total_frames);
    const std::vector<int> fine_vec = boundaries_of(gt.levels[0]);
    const std::set<int> fine(fine_vec.begin(), fine_vec.end());
    for (int t = 1; t < feats.frames; ++t) {
        bool differs = false;
        for (int k = 0; k < feats.dim; ++k)
            if (feats.row(t)[k] != feats.row(t - 1)[k]) differs = true;
        CHECK(differs == (fine.count(t) == 1));
    }
}

TEST_CASE("generate_synthetic: same seed reproduces the corpus bit for bit") {
    SynthConfig cfg = small_config(99);
    auto [fa, pa] = generate_synthetic(cfg);
    auto [fb, pb] = generate_synthetic(cfg);
    CHECK(fa.data == fb.data);
    CHECK(fa.frames == fb.frames);
    CHECK(same_partonomy(pa, pb));
    cfg.seed = 100;
    auto [fc, pc] = generate_synthetic(cfg);
    CHECK(fa.data != fc.data);
}

TEST_CASE("generate_synthetic: segment counts track T over mean duration") {
    for (std::uint32_t seed = 0; seed < 50; ++seed) {
        SynthConfig cfg;
        cfg.levels = 3;
        cfg.mean_durations = {20, 100, 400};
        cfg.jitters = {5, 20, 80};
        cfg.dim = 8;
        cfg.target_frames = 2000;
        cfg.seed = seed;
        auto [feats, gt] = generate_synthetic(cfg);
        double T = feats.frames;
        REQUIRE(gt.levels.size() == 3);
        for (int l = 0; l < 3; ++l) {
            double expect = T / cfg.mean_durations[l];
            double count = static_cast<double>(gt.levels[l].segments.size());
            CHECK(std::abs(count - expect) <= 0.3 * expect + 1.0);
        }
    }
}

TEST_CASE("generate_synthetic: ground truth always validates and is labeled") {
    Rng rng(4242);
    for (int trial = 0; trial < 30; ++trial) {
        SynthConfig cfg;
        cfg.levels = static_cast<int>(rng.uniform_int(1, 3));
        cfg.mean_durations.clear();
        cfg.jitters.clear();
        int mean = static_cast<int>(rng.uniform_int(3, 8));
        for (int l = 0; l < cfg.levels; ++l) {
            cfg.mean_durations.push_back(mean);
            cfg.jitters.push_back(static_cast<int>(rng.uniform_int(0, mean - 1)));
            mean *= static_cast<int>(rng.uniform_int(2, 4));
        }
        cfg.dim = static_cast<int>(rng.uniform_int(1, 6));
        cfg.noise = rng.uniform();
        cfg.drift = rng.uniform() * 0.1;
        cfg.target_frames = static_cast<int>(rng.uniform_int(50, 400));
        cfg.seed = static_cast<std::uint32_t>(trial);
        auto [feats, gt] = generate_synthetic(cfg);
        CHECK(validate(gt).empty());
        CHECK(gt.total_frames == feats.frames);
        CHECK(static_cast<int>(gt.levels.size()) == cfg.levels);
        CHECK(feats.frames >= cfg.target_frames);
        for (const Level& lv : gt.levels)
            for (const Segment& s : lv.segments) CHECK(!s.label.empty());
    }
}

TEST_CASE("generate_synthetic: rejects inconsistent configurations") {
    SynthConfig cfg = small_config(0);
    SynthConfig bad = cfg;
    bad.levels = 0;
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.mean_durations = {5, 20};  // one entry short
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.jitters[0] = cfg.mean_durations[0];  // jitter must stay below the mean
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.mean_durations = {20, 20, 60};  // must increase toward coarse levels
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.dim = 0;
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.separation = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.noise = -1.0;
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
    bad = cfg;
    bad.target_frames = 1;
    CHECK_THROWS_AS(generate_synthetic(bad), config_error);
}

TEST_CASE("feature files: write then read restores every field and byte") {
    Rng rng(7);
    FeatureSequence f(37, 5, 12.5f);
    for (float& x : f.data) x = static_cast<float>(rng.uniform() * 4.0 - 2.0);
    const std::string path = path_of("roundtrip.prsf");
    write_features(path, f);
    FeatureSequence g = read_features(path);
    CHECK(g.frames == f.frames);
    CHECK(g.dim == f.dim);
    CHECK(g.fps == f.fps);
    CHECK(g.data == f.data);
}

TEST_CASE("feature files: corrupted magic is rejected at offset zero") {
    FeatureSequence f(4, 2, 30.0f);
    const std::string path = path_of("badmagic.prsf");
    write_features(path, f);
    std::vector<char> bytes = slurp(path);
    bytes[0] = 'X';
    dump(path, bytes);
    try {
        read_features(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.offset == 0);
    }
}

TEST_CASE("feature files: unsupported version is rejected at its offset") {
    FeatureSequence f(4, 2, 30.0f);
    const std::string path = path_of("badversion.prsf");
    write_features(path, f);
    std::vector<char> bytes = slurp(path);
    bytes[4] = 9;
    dump(path, bytes);
    try {
        read_features(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.offset == 4);
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
}

TEST_CASE("feature files: payload length must match the header") {
    FeatureSequence f(6, 3, 30.0f);
    const std::string path = path_of("truncated.prsf");
    write_features(path, f);
    std::vector<char> bytes = slurp(path);
    std::vector<char> cut(bytes.begin(), bytes.end() - 4);
    dump(path, cut);
    CHECK_THROWS_AS(read_features(path), format_error);
    std::vector<char> extended = bytes;
    extended.push_back(0);
    dump(path, extended);
    CHECK_THROWS_AS(read_features(path), format_error);
    // Too short to even hold the header.
    dump(path, std::vector<char>(bytes.begin(), bytes.begin() + 10));
    CHECK_THROWS_AS(read_features(path), format_error);
}

TEST_CASE("feature files: non-finite payload values are rejected with their offset") {
    FeatureSequence f(3, 2, 30.0f);
    const std::string path = path_of("nonfinite.prsf");
    write_features(path, f);
    std::vector<char> bytes = slurp(path);
    // Third float of the payload becomes +inf (0x7f800000, little endian).
    size_t at = 20 + 2 * 4;
    bytes[at + 0] = 0;
    bytes[at + 1] = 0;
    bytes[at + 2] = static_cast<char>(0x80);
    bytes[at + 3] = static_cast<char>(0x7f);
    dump(path, bytes);
    try {
        read_features(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.offset == static_cast<long long>(at));
    }
}

TEST_CASE("feature files: zero fps in the header is rejected") {
    FeatureSequence f(3, 2, 30.0f);
    const std::string path = path_of("zerofps.prsf");
    write_features(path, f);
    std::vector<char> bytes = slurp(path);
    bytes[16] = bytes[17] = bytes[18] = bytes[19] = 0;
    dump(path, bytes);
    try {
        read_features(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.offset == 16);
    }
}

TEST_CASE("annotations: write then read restores the labeled partonomy") {
    auto [feats, gt] = generate_synthetic(small_config(3));
    const std::string path = path_of("roundtrip.json");
    write_annotation(path, gt, feats.fps);
    auto [back, fps] = read_annotation(path);
    CHECK(fps == feats.fps);
    CHECK(same_partonomy(back, gt));
    CHECK(validate(back).empty());
}

TEST_CASE("annotations: unknown fields are ignored with a warning") {
    Partonomy p = from_boundaries({{5}, {}}, 10);
    const std::string path = path_of("extra.json");
    write_annotation(path, p, 30.0f);
    // Splice unknown fields into the root and into one segment.
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    in.close();
    j["comment"] = "hand edited";
    j["levels"][0]["segments"][0]["confidence"] = 0.5;
    {
        std::ofstream out(path);
        out << j.dump(2);
    }
    Partonomy back;
    std::string err = captured_stderr([&] { back = read_annotation(path).first; });
    CHECK(same_partonomy(back, p));
    CHECK(err.find("comment") != std::string::npos);
    CHECK(err.find("confidence") != std::string::npos);
    CHECK(err.find("warning") != std::string::npos);
}

TEST_CASE("annotations: malformed documents are rejected") {
    const std::string path = path_of("malformed.json");
    auto write_text = [&](const std::string& text) {
        std::ofstream out(path);
        out << text;
    };
    write_text("{ not json");
    CHECK_THROWS_AS(read_annotation(path), format_error);
    write_text("[1,2,3]");
    CHECK_THROWS_AS(read_annotation(path), format_error);
    write_text(R"({"T": 10, "levels": [{"segments": [{"start":0,"end":10}]}]})");
    CHECK_THROWS_WITH_AS(read_annotation(path),
                         doctest::Contains("fps"), format_error);
    write_text(R"({"fps": 30, "T": 10, "levels": []})");
    CHECK_THROWS_AS(read_annotation(path), format_error);
    write_text(R"({"fps": 30, "T": 10,
                   "levels": [{"segments": [{"start":0}]}]})");
    CHECK_THROWS_AS(read_annotation(path), format_error);
    // Structurally broken content: a gap between segments.
    write_text(R"({"fps": 30, "T": 10,
                   "levels": [{"segments": [{"start":0,"end":4},
                                            {"start":6,"end":10}]}]})");
    CHECK_THROWS_WITH_AS(read_annotation(path),
                         doctest::Contains("invalid annotation"), format_error);
}

TEST_CASE("annotations: refuse to write an invalid partonomy") {
    Partonomy p = from_boundaries({{5}}, 10);
    p.levels[0].segments[0].end = 4;  // introduce a gap
    const std::string path = path_of("never_written.json");
    CHECK_THROWS_AS(write_annotation(path, p, 30.0f), config_error);
}

TEST_CASE("missing files raise format errors naming the path") {
    CHECK_THROWS_WITH_AS(read_features(path_of("no_such.prsf")),
                         doctest::Contains("no_such.prsf"), format_error);
    CHECK_THROWS_WITH_AS(read_annotation(path_of("no_such.json")),
                         doctest::Contains("no_such.json"), format_error);
}
