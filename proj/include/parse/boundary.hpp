#pragma once

#include <vector>

#include "parse/stack.hpp"

namespace parse {

// Per-level peak detection settings: trailing-mean window and the radius a
// peak must dominate. One entry of each per trace level.
struct BoundaryConfig {
    std::vector<int> smooth;  // K_s per level, frames
    std::vector<int> radius;  // r per level, frames

    void check(size_t levels) const;
};

// Event boundaries for one level: frame indices strictly inside (0, T),
// strictly increasing. Segment endpoints 0 and T stay implicit.
struct BoundarySet {
    int level = 0;  // 1-based
    std::vector<int> frames;
};

// Trailing mean over the last min(t+1, K_s) samples; length preserved.
std::vector<double> moving_average(const std::vector<double>& trace, int K_s);

// Central second difference; both endpoints get a -inf sentinel so they
// never win a local-max comparison.
std::vector<double> second_difference(const std::vector<double>& trace);

// Indices whose value strictly exceeds every other value within distance r
// (out-of-range neighbors ignored; ties disqualify).
std::vector<int> local_maxima(const std::vector<double>& signal, int r);

// Full pipeline per level: smooth, double-difference, pick strict local
// maxima, then shift to frame coordinates (trace index t marks the
// transition into frame t+1). With a trailing mean the detection lag of a
// live system is radius+1 frames; run offline here, locations are exact.
std::vector<BoundarySet> extract_boundaries(const ErrorTraces& traces,
                                            const BoundaryConfig& cfg);

}  // namespace parse
