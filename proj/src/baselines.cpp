#include "parse/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parse {

namespace {

Level level_from_interior(std::vector<int> b, int T) {
    Level out;
    int prev = 0;
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    for (int x : b) {
        if (x <= prev || x >= T) continue;
        out.segments.push_back({prev, x, ""});
        prev = x;
    }
    out.segments.push_back({prev, T, ""});
    return out;
}

double sq_dist(const float* a, const double* c, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        double diff = a[i] - c[i];
        s += diff * diff;
    }
    return s;
}

// Violations of the stacked flat levels before any snapping.
int raw_violation_count(std::vector<Level> levels, int T) {
    Partonomy raw;
    raw.total_frames = T;
    raw.levels = std::move(levels);
    rebuild_parent_links(raw);
    return static_cast<int>(validate(raw).size());
}

}  // namespace

Partonomy fixed_length(int T, float fps, const std::vector<double>& durations) {
    (void)fps;
    if (T <= 0) throw config_error("T must be positive");
    if (durations.empty()) throw config_error("need at least one duration");
    std::vector<Level> levels;
    for (size_t i = 0; i < durations.size(); ++i) {
        double d = durations[i];
        if (!(d > 0.0)) throw config_error("durations must be positive");
        if (i > 0 && d < durations[i - 1])
            throw config_error("durations must be nondecreasing toward coarse levels");
        std::vector<int> b;
        for (int m = 1; static_cast<double>(m) * d < static_cast<double>(T); ++m)
            b.push_back(static_cast<int>(std::llround(m * d)));
        levels.push_back(level_from_interior(std::move(b), T));
    }
    return nest_recursive(levels);
}

Level kmeans_segment(const FeatureSequence& features, int k, std::uint32_t seed) {
    features.check();
    int T = features.frames, d = features.dim;
    if (k < 1) throw config_error("k must be >= 1");
    if (k > T) throw config_error("k exceeds frame count");
    Rng rng(seed);

    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    {
        int first = static_cast<int>(rng.uniform_int(0, T - 1));
        centers.emplace_back(features.row(first), features.row(first) + d);
        std::vector<double> d2(T);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int t = 0; t < T; ++t) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& ctr : centers)
                    best = std::min(best, sq_dist(features.row(t), ctr.data(), d));
                d2[t] = best;
                total += best;
            }
            int pick = 0;
            if (total > 0.0) {
                double target = rng.uniform() * total;
                double acc = 0.0;
                pick = T - 1;
                for (int t = 0; t < T; ++t) {
                    acc += d2[t];
                    if (acc >= target) {
                        pick = t;
                        break;
                    }
                }
            } else {
                pick = static_cast<int>(rng.uniform_int(0, T - 1));
            }
            centers.emplace_back(features.row(pick), features.row(pick) + d);
        }
    }

    std::vector<int> assign(T, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (int t = 0; t < T; ++t) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double dist = sq_dist(features.row(t), centers[c].data(), d);
                if (dist < bd) {
                    bd = dist;
                    best = c;
                }
            }
            assign[t] = best;
        }
        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        std::vector<int> counts(k, 0);
        for (int t = 0; t < T; ++t) {
            counts[assign[t]] += 1;
            const float* row = features.row(t);
            for (int i = 0; i < d; ++i) sums[assign[t]][i] += row[i];
        }
        // An emptied cluster restarts at the frame farthest from its center.
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            int far = 0;
            double fd = -1.0;
            for (int t = 0; t < T; ++t) {
                double dist = sq_dist(features.row(t), centers[assign[t]].data(), d);
                if (dist > fd) {
                    fd = dist;
                    far = t;
                }
            }
            counts[assign[far]] -= 1;
            const float* row = features.row(far);
            for (int i = 0; i < d; ++i) sums[assign[far]][i] -= row[i];
            assign[far] = c;
            counts[c] = 1;
            sums[c].assign(row, row + d);
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] <= 0) continue;  // still empty: keep the old center
            for (int i = 0; i < d; ++i) {
                double nc = sums[c][i] / counts[c];
                shift = std::max(shift, std::abs(nc - centers[c][i]));
                centers[c][i] = nc;
            }
        }
        if (shift < 1e-6) break;
    }
    // Final assignment against the converged centers.
    for (int t = 0; t < T; ++t) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            double dist = sq_dist(features.row(t), centers[c].data(), d);
            if (dist < bd) {
                bd = dist;
                best = c;
            }
        }
        assign[t] = best;
    }
    std::vector<int> b;
    for (int t = 1; t < T; ++t)
        if (assign[t] != assign[t - 1]) b.push_back(t);
    return level_from_interior(std::move(b), T);
}

Level oracle_kmeans(const FeatureSequence& features, const Partonomy& gt, int level,
                    std::uint32_t seed) {
    if (level < 1 || level > static_cast<int>(gt.levels.size()))
        throw config_error("oracle level out of range");
    int k = static_cast<int>(gt.levels[level - 1].segments.size());
    return kmeans_segment(features, std::min(k, features.frames), seed);
}

Partonomy linkage_segment(const FeatureSequence& features, const std::vector<int>& k) {
    features.check();
    int T = features.frames, d = features.dim;
    if (k.empty()) throw config_error("need at least one cut level");
    for (size_t i = 0; i < k.size(); ++i) {
        if (k[i] < 1) throw config_error("k must be >= 1");
        if (k[i] > T) throw config_error("k exceeds frame count");
        if (i > 0 && k[i] > k[i - 1])
            throw config_error("k must be nonincreasing toward coarse levels");
    }

    // Adjacent-run Ward merging over a doubly linked list of clusters. Each
    // merge erases one boundary; the erase order defines every cut at once.
    std::vector<std::vector<double>> sum(T, std::vector<double>(d));
    std::vector<int> count(T, 1), next(T), prev(T);
    for (int t = 0; t < T; ++t) {
        const float* row = features.row(t);
        for (int i = 0; i < d; ++i) sum[t][i] = row[i];
        next[t] = t + 1;
        prev[t] = t - 1;
    }
    auto ward = [&](int a, int b) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            double diff = sum[a][i] / count[a] - sum[b][i] / count[b];
            s += diff * diff;
        }
        return s * count[a] * count[b] / static_cast<double>(count[a] + count[b]);
    };
    std::vector<int> erased;  // boundary frames, in merge order
    erased.reserve(T - 1);
    int head = 0;
    for (int merges = 0; merges < T - 1; ++merges) {
        int best_a = -1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int a = head; next[a] < T; a = next[a]) {
            double c = ward(a, next[a]);
            if (c < best_cost) {
                best_cost = c;
                best_a = a;
            }
        }
        int b = next[best_a];
        erased.push_back(b);  // cluster b starts at frame index b
        for (int i = 0; i < d; ++i) sum[best_a][i] += sum[b][i];
        count[best_a] += count[b];
        next[best_a] = next[b];
        if (next[b] < T) prev[next[b]] = best_a;
    }

    // After m merges, the surviving boundaries are those not yet erased.
    std::vector<Level> levels;
    for (int kk : k) {
        int m = T - kk;
        std::vector<char> gone(T, 0);
        for (int i = 0; i < m; ++i) gone[erased[i]] = 1;
        std::vector<int> b;
        for (int t = 1; t < T; ++t)
            if (!gone[t]) b.push_back(t);
        levels.push_back(level_from_interior(std::move(b), T));
    }
    return nest_recursive(levels);
}

BaselineOutput build_baseline_partonomy(const FeatureSequence& features,
                                        const BaselineConfig& cfg, const Partonomy* gt) {
    features.check();
    int T = features.frames;
    BaselineOutput out;
    switch (cfg.method) {
        case BaselineMethod::fixed: {
            out.partonomy = fixed_length(T, features.fps, cfg.durations);
            std::vector<Level> flat;
            for (size_t i = 0; i < cfg.durations.size(); ++i) {
                std::vector<int> b;
                for (int m = 1; m * cfg.durations[i] < T; ++m)
                    b.push_back(static_cast<int>(std::llround(m * cfg.durations[i])));
                flat.push_back(level_from_interior(std::move(b), T));
            }
            out.pre_nest_violations = raw_violation_count(std::move(flat), T);
            return out;
        }
        case BaselineMethod::kmeans:
        case BaselineMethod::kmeans_oracle: {
            std::vector<int> ks = cfg.k;
            if (cfg.method == BaselineMethod::kmeans_oracle) {
                if (!gt) throw config_error("oracle k-means needs ground truth");
                ks.clear();
                for (const Level& lv : gt->levels)
                    ks.push_back(std::min(static_cast<int>(lv.segments.size()), T));
            }
            if (ks.empty()) throw config_error("k-means baseline needs cluster counts");
            std::vector<Level> flat;
            for (size_t i = 0; i < ks.size(); ++i)
                flat.push_back(kmeans_segment(features, ks[i],
                                              cfg.seed + static_cast<std::uint32_t>(i)));
            out.pre_nest_violations = raw_violation_count(flat, T);
            out.partonomy = nest_recursive(flat);
            return out;
        }
        case BaselineMethod::linkage: {
            if (cfg.k.empty()) throw config_error("linkage baseline needs cluster counts");
            out.partonomy = linkage_segment(features, cfg.k);
            out.pre_nest_violations = 0;  // nesting holds by construction
            return out;
        }
    }
    throw config_error("unknown baseline method");
}

}  // namespace parse
