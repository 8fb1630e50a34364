#include "parse/boundary.hpp"

#include <algorithm>
#include <iostream>
#include <limits>

namespace parse {

void BoundaryConfig::check(size_t levels) const {
    if (smooth.size() != levels || radius.size() != levels)
        throw config_error("boundary config needs one smooth and radius entry per level");
    for (int v : smooth)
        if (v < 1) throw config_error("smoothing window must be >= 1");
    for (int v : radius)
        if (v < 1) throw config_error("radius must be >= 1");
}

std::vector<double> moving_average(const std::vector<double>& trace, int K_s) {
    if (trace.empty()) throw config_error("cannot smooth an empty trace");
    if (K_s < 1) throw config_error("smoothing window must be >= 1");
    std::vector<double> out(trace.size());
    for (size_t t = 0; t < trace.size(); ++t) {
        size_t n = std::min(t + 1, static_cast<size_t>(K_s));
        double acc = 0.0;
        for (size_t u = t + 1 - n; u <= t; ++u) acc += trace[u];
        out[t] = acc / static_cast<double>(n);
    }
    return out;
}

std::vector<double> second_difference(const std::vector<double>& trace) {
    if (trace.size() < 3) throw config_error("second difference needs at least 3 samples");
    std::vector<double> out(trace.size());
    double neg_inf = -std::numeric_limits<double>::infinity();
    out.front() = neg_inf;
    out.back() = neg_inf;
    for (size_t t = 1; t + 1 < trace.size(); ++t)
        out[t] = trace[t + 1] - 2.0 * trace[t] + trace[t - 1];
    return out;
}

std::vector<int> local_maxima(const std::vector<double>& signal, int r) {
    if (r < 1) throw config_error("radius must be >= 1");
    std::vector<int> out;
    int n = static_cast<int>(signal.size());
    for (int t = 0; t < n; ++t) {
        bool wins = true;
        int lo = std::max(0, t - r);
        int hi = std::min(n - 1, t + r);
        for (int u = lo; u <= hi && wins; ++u)
            if (u != t && !(signal[t] > signal[u])) wins = false;
        if (wins) out.push_back(t);
    }
    return out;
}

std::vector<BoundarySet> extract_boundaries(const ErrorTraces& traces,
                                            const BoundaryConfig& cfg) {
    cfg.check(traces.size());
    std::vector<BoundarySet> out;
    for (size_t i = 0; i < traces.size(); ++i) {
        BoundarySet bs;
        bs.level = static_cast<int>(i) + 1;
        if (traces[i].size() < 3) {
            std::cerr << "warning: trace for level " << bs.level
                      << " too short for boundary extraction ("
                      << traces[i].size() << " samples)\n";
            out.push_back(std::move(bs));
            continue;
        }
        std::vector<double> s = second_difference(moving_average(traces[i], cfg.smooth[i]));
        for (int t : local_maxima(s, cfg.radius[i])) bs.frames.push_back(t + 1);
        std::sort(bs.frames.begin(), bs.frames.end());
        bs.frames.erase(std::unique(bs.frames.begin(), bs.frames.end()), bs.frames.end());
        out.push_back(std::move(bs));
    }
    return out;
}

}  // namespace parse
