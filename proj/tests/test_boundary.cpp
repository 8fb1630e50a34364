#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "parse/boundary.hpp"
#include "parse/common.hpp"

using parse::BoundaryConfig;
using parse::BoundarySet;
using parse::Rng;
using std::vector;

TEST_CASE("moving average: window one is the identity") {
    vector<double> t{3.0, -1.0, 4.0, 1.5, -9.0};
    vector<double> out = parse::moving_average(t, 1);
    REQUIRE(out.size() == t.size());
    for (size_t i = 0; i < t.size(); ++i) CHECK(out[i] == t[i]);
}

TEST_CASE("moving average: constant traces are fixed points") {
    vector<double> t(20, 2.5);
    for (int K : {1, 2, 3, 7, 19, 20, 50}) {
        vector<double> out = parse::moving_average(t, K);
        for (double v : out) CHECK(v == 2.5);
    }
}

TEST_CASE("moving average: trailing window warms up over short prefixes") {
    // window 3 over (0,0,3,0,0): prefix means use only what exists so far
    vector<double> t{0.0, 0.0, 3.0, 0.0, 0.0};
    vector<double> out = parse::moving_average(t, 3);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 1.0);
    CHECK(out[3] == 1.0);
    CHECK(out[4] == 1.0);
}

TEST_CASE("moving average: rejects a non-positive window") {
    CHECK_THROWS_AS(parse::moving_average({1.0, 2.0}, 0), parse::config_error);
    CHECK_THROWS_AS(parse::moving_average({1.0, 2.0}, -3), parse::config_error);
}

TEST_CASE("second difference: linear ramps vanish, quadratics are constant") {
    vector<double> ramp, quad;
    for (int i = 0; i < 12; ++i) {
        ramp.push_back(3.0 * i - 5.0);
        quad.push_back(static_cast<double>(i) * i);
    }
    vector<double> dr = parse::second_difference(ramp);
    vector<double> dq = parse::second_difference(quad);
    REQUIRE(dr.size() == ramp.size());
    for (size_t i = 1; i + 1 < dr.size(); ++i) {
        CHECK(dr[i] == 0.0);
        CHECK(dq[i] == 2.0);
    }
    // endpoints carry sentinels that can never win a peak comparison
    CHECK(dr.front() < -1e300);
    CHECK(dr.back() < -1e300);
}

TEST_CASE("second difference: a unit impulse leaves the +1 -2 +1 stencil") {
    vector<double> t(9, 0.0);
    t[4] = 1.0;
    vector<double> d = parse::second_difference(t);
    CHECK(d[3] == 1.0);
    CHECK(d[4] == -2.0);
    CHECK(d[5] == 1.0);
    for (size_t i = 1; i + 1 < d.size(); ++i)
        if (i < 3 || i > 5) CHECK(d[i] == 0.0);
}

TEST_CASE("local maxima: radius widening prunes the weaker of two peaks") {
    vector<double> s{0.0, 5.0, 0.0, 0.0, 5.0, 0.0};
    SUBCASE("radius 1 keeps both") {
        vector<int> m = parse::local_maxima(s, 1);
        REQUIRE(m.size() == 2);
        CHECK(m[0] == 1);
        CHECK(m[1] == 4);
    }
    SUBCASE("radius 3 sees the tie and drops both") {
        CHECK(parse::local_maxima(s, 3).empty());
    }
    SUBCASE("radius 3 with one peak raised keeps only it") {
        s[4] = 6.0;
        vector<int> m = parse::local_maxima(s, 3);
        REQUIRE(m.size() == 1);
        CHECK(m[0] == 4);
    }
}

TEST_CASE("local maxima: plateaus have no strict peak") {
    vector<double> s{0.0, 1.0, 1.0, 0.0};
    CHECK(parse::local_maxima(s, 1).empty());
}

TEST_CASE("local maxima: flat signals yield nothing") {
    CHECK(parse::local_maxima(vector<double>(30, 0.7), 2).empty());
    CHECK(parse::local_maxima({}, 2).empty());
}

TEST_CASE("local maxima: out-of-range neighborhood is simply ignored") {
    // a single interior sample dominating its in-range window wins even when
    // the radius extends past both ends
    vector<double> s{0.0, 2.0, 0.0};
    vector<int> m = parse::local_maxima(s, 10);
    REQUIRE(m.size() == 1);
    CHECK(m[0] == 1);
}

TEST_CASE("extract: planted regime steps land within one frame") {
    const int planted[] = {20, 45, 70};
    auto make_trace = [&](double noise_amp, Rng& rng) {
        vector<double> trace(100);
        for (size_t i = 0; i < trace.size(); ++i) {
            const bool high = (i >= 20 && i < 45) || i >= 70;
            trace[i] = (high ? 4.0 : 0.0) + noise_amp * rng.uniform();
        }
        return trace;
    };
    BoundaryConfig cfg;
    cfg.smooth = {1};
    cfg.radius = {5};

    SUBCASE("clean floor: exactly the three steps, each within one frame") {
        Rng rng(31);
        vector<BoundarySet> out = parse::extract_boundaries({make_trace(0.0, rng)}, cfg);
        REQUIRE(out.size() == 1);
        CHECK(out[0].level == 1);
        REQUIRE(out[0].frames.size() == 3);
        for (size_t i = 0; i < 3; ++i)
            CHECK(std::abs(out[0].frames[i] - planted[i]) <= 1);
    }
    SUBCASE("noisy floor: noise adds peaks of its own but never loses a step") {
        Rng rng(31);
        vector<BoundarySet> out = parse::extract_boundaries({make_trace(0.05, rng)}, cfg);
        for (int p : planted) {
            bool found = false;
            for (int f : out[0].frames) found |= std::abs(f - p) <= 1;
            CHECK(found);
        }
    }
}

TEST_CASE("extract: boundary frames always lie strictly inside (0, T)") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int T = 3 + static_cast<int>(rng.uniform_int(0, 60));
        vector<double> trace(static_cast<size_t>(T - 1));
        for (auto& v : trace) v = rng.uniform();
        BoundaryConfig cfg;
        cfg.smooth = {1 + static_cast<int>(rng.uniform_int(0, 3))};
        cfg.radius = {1 + static_cast<int>(rng.uniform_int(0, 4))};
        vector<BoundarySet> out = parse::extract_boundaries({trace}, cfg);
        int prev = 0;
        for (int f : out[0].frames) {
            CHECK(f > 0);
            CHECK(f < T);
            CHECK(f > prev);  // strictly increasing
            prev = f;
        }
    }
}

TEST_CASE("extract: widening the radius only removes boundaries") {
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = 10 + static_cast<int>(rng.uniform_int(0, 80));
        vector<double> trace(static_cast<size_t>(len));
        for (auto& v : trace) v = rng.uniform() * 3.0;
        const int ks = 1 + static_cast<int>(rng.uniform_int(0, 3));
        const int r1 = 1 + static_cast<int>(rng.uniform_int(0, 5));
        const int r2 = r1 + 1 + static_cast<int>(rng.uniform_int(0, 5));
        BoundaryConfig c1, c2;
        c1.smooth = {ks};
        c1.radius = {r1};
        c2.smooth = {ks};
        c2.radius = {r2};
        vector<int> wide = parse::extract_boundaries({trace}, c2)[0].frames;
        vector<int> narrow = parse::extract_boundaries({trace}, c1)[0].frames;
        std::set<int> narrow_set(narrow.begin(), narrow.end());
        for (int f : wide) CHECK(narrow_set.count(f) == 1);
    }
}

TEST_CASE("extract: exact equivariance under time shift and amplitude scale") {
    // Integer-valued traces keep every mean and difference exactly
    // representable, so the checks below are == not approx.
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = 40;
        vector<double> base(len);
        for (auto& v : base) v = static_cast<double>(rng.uniform_int(0, 1 << 20));
        for (int ks : {1, 2, 4, 8}) {
            const int r = 3;
            BoundaryConfig cfg;
            cfg.smooth = {ks};
            cfg.radius = {r};
            vector<int> b0 = parse::extract_boundaries({base}, cfg)[0].frames;

            // time shift: prepend copies of the first sample; every peak far
            // enough past the warm-up region moves by exactly the shift
            const int shift = 7;
            const int margin = ks + r;  // past here all compared values agree
            vector<double> shifted(static_cast<size_t>(shift), base[0]);
            shifted.insert(shifted.end(), base.begin(), base.end());
            vector<int> bs = parse::extract_boundaries({shifted}, cfg)[0].frames;
            vector<int> expect, got;
            for (int f : b0)
                if (f > margin) expect.push_back(f + shift);
            for (int f : bs)
                if (f - shift > margin) got.push_back(f);
            CHECK(got == expect);

            // amplitude scale by a power of two is exact, so peaks are equal
            vector<double> scaled = base;
            for (auto& v : scaled) v *= 8.0;
            CHECK(parse::extract_boundaries({scaled}, cfg)[0].frames == b0);
        }
    }
}

TEST_CASE("extract: levels are numbered bottom-up from one") {
    // an upward step at index c peaks the curvature at trace c-1, frame c
    auto step_at = [](int c) {
        vector<double> t(30, 0.0);
        for (int i = c; i < 30; ++i) t[static_cast<size_t>(i)] = 5.0;
        return t;
    };
    BoundaryConfig cfg;
    cfg.smooth = {1, 1};
    cfg.radius = {2, 2};
    vector<BoundarySet> out = parse::extract_boundaries({step_at(10), step_at(20)}, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out[0].level == 1);
    CHECK(out[1].level == 2);
    REQUIRE(out[0].frames.size() == 1);
    REQUIRE(out[1].frames.size() == 1);
    CHECK(out[0].frames[0] == 10);
    CHECK(out[1].frames[0] == 20);
}

TEST_CASE("extract: a trace too short to score stays empty") {
    BoundaryConfig cfg;
    cfg.smooth = {1};
    cfg.radius = {2};
    vector<BoundarySet> out = parse::extract_boundaries({{0.5, 0.7}}, cfg);
    REQUIRE(out.size() == 1);
    CHECK(out[0].frames.empty());
}

TEST_CASE("extract: config shape must match the trace count") {
    BoundaryConfig cfg;
    cfg.smooth = {1};
    cfg.radius = {2, 3};
    CHECK_THROWS_AS(cfg.check(1), parse::config_error);
    cfg.smooth = {1, 1};
    CHECK_NOTHROW(cfg.check(2));
    cfg.radius = {2, 0};
    CHECK_THROWS_AS(cfg.check(2), parse::config_error);
}
