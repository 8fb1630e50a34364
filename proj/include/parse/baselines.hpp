#pragma once

#include <cstdint>
#include <vector>

#include "parse/features.hpp"
#include "parse/partonomy.hpp"

namespace parse {

enum class BaselineMethod { fixed, kmeans, kmeans_oracle, linkage };

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::fixed;
    std::vector<double> durations;  // fixed: mean segment length per level, finest first
    std::vector<int> k;             // kmeans/linkage: target counts per level, finest first
    std::uint32_t seed = 0;
};

// Cuts every level at multiples of its average duration (final partial
// segment kept), then nests the levels.
Partonomy fixed_length(int T, float fps, const std::vector<double>& durations);

// Lloyd k-means over frame vectors (k-means++ seeding, at most 100
// iterations or centroid shift below 1e-6); a boundary wherever the
// assigned cluster changes between consecutive frames.
Level kmeans_segment(const FeatureSequence& features, int k, std::uint32_t seed);

// kmeans_segment with k taken from the ground truth's segment count at the
// given level (1-based).
Level oracle_kmeans(const FeatureSequence& features, const Partonomy& gt, int level,
                    std::uint32_t seed);

// Bottom-up Ward-style merging restricted to temporally adjacent runs, so
// clusters stay contiguous. Cutting the merge sequence at each requested k
// (finest-first, nonincreasing) yields levels that nest by construction.
Partonomy linkage_segment(const FeatureSequence& features, const std::vector<int>& k);

struct BaselineOutput {
    Partonomy partonomy;
    // validate() violation count on the stacked flat levels before nesting
    // repaired them; zero means the raw method was already consistent.
    int pre_nest_violations = 0;
};

// Dispatch, nest, validate. gt is only consulted by kmeans_oracle.
BaselineOutput build_baseline_partonomy(const FeatureSequence& features,
                                        const BaselineConfig& cfg,
                                        const Partonomy* gt = nullptr);

}  // namespace parse
