#include "parse/partonomy.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <string>

namespace parse {

namespace {

// Throws if `level` is not a contiguous cover of [0, T).
void require_flat_level(const Level& level, int T, const char* what) {
    if (level.segments.empty())
        throw config_error(std::string(what) + ": level has no segments");
    int cursor = 0;
    for (const Segment& s : level.segments) {
        if (s.start != cursor)
            throw config_error(std::string(what) + ": gap or overlap at frame " +
                               std::to_string(s.start));
        if (s.end <= s.start)
            throw config_error(std::string(what) + ": empty segment at frame " +
                               std::to_string(s.start));
        cursor = s.end;
    }
    if (cursor != T)
        throw config_error(std::string(what) + ": level spans " +
                           std::to_string(cursor) + " frames, expected " +
                           std::to_string(T));
}

// Nearest element of sorted nonempty `v` to x; ties break to the smaller.
int snap_to(const std::vector<int>& v, int x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end()) return v.back();
    if (it == v.begin()) return v.front();
    int hi = *it;
    int lo = *(it - 1);
    return (x - lo <= hi - x) ? lo : hi;
}

Level level_from_boundaries(const std::vector<int>& interior, int T) {
    Level out;
    int prev = 0;
    for (int b : interior) {
        out.segments.push_back({prev, b, ""});
        prev = b;
    }
    out.segments.push_back({prev, T, ""});
    return out;
}

// Snaps `coarse` onto the interior boundaries of `base`. Preserves labels;
// drops segments whose span collapses. Assumes both are flat covers of [0,T).
Level snap_level(const Level& coarse, const Level& base, int T, SnapStats* stats) {
    std::vector<int> targets = boundaries_of(base);
    Level out;
    int prev = 0;
    for (size_t j = 0; j < coarse.segments.size(); ++j) {
        const Segment& s = coarse.segments[j];
        int end = s.end;
        if (end != T) {
            if (targets.empty()) {
                end = prev;  // nothing to snap to: collapse interior cuts
            } else {
                end = snap_to(targets, s.end);
            }
            if (stats && end != s.end) {
                stats->moved += 1;
                stats->max_distance = std::max(stats->max_distance, std::abs(end - s.end));
            }
        }
        if (end <= prev) {
            if (stats) stats->dropped_segments += 1;
            continue;
        }
        out.segments.push_back({prev, end, s.label});
        prev = end;
    }
    if (out.segments.empty() || out.segments.back().end != T) {
        // The final span must reach T; reopen it if the last cut swallowed it.
        if (!out.segments.empty() && out.segments.back().end < T)
            out.segments.push_back({out.segments.back().end, T, coarse.segments.back().label});
        else if (out.segments.empty())
            out.segments.push_back({0, T, coarse.segments.back().label});
    }
    return out;
}

}  // namespace

void rebuild_parent_links(Partonomy& p) {
    p.parents.assign(p.levels.empty() ? 0 : p.levels.size() - 1, {});
    for (size_t i = 0; i + 1 < p.levels.size(); ++i) {
        const Level& fine = p.levels[i];
        const Level& coarse = p.levels[i + 1];
        p.parents[i].resize(fine.segments.size(), -1);
        size_t c = 0;
        for (size_t j = 0; j < fine.segments.size(); ++j) {
            while (c < coarse.segments.size() &&
                   coarse.segments[c].end <= fine.segments[j].start)
                ++c;
            if (c < coarse.segments.size() &&
                coarse.segments[c].start <= fine.segments[j].start &&
                fine.segments[j].end <= coarse.segments[c].end)
                p.parents[i][j] = static_cast<int>(c);
        }
    }
}

std::vector<int> boundaries_of(const Level& level) {
    std::vector<int> out;
    for (size_t j = 1; j < level.segments.size(); ++j)
        out.push_back(level.segments[j].start);
    return out;
}

std::vector<Segment> children(const Segment& parent, const Level& lower) {
    std::vector<Segment> out;
    for (const Segment& s : lower.segments)
        if (parent.start <= s.start && s.end <= parent.end) out.push_back(s);
    return out;
}

std::vector<std::string> validate(const Partonomy& p) {
    std::vector<std::string> bad;
    if (p.total_frames <= 0) bad.push_back("total_frames must be positive");
    if (p.levels.empty()) {
        bad.push_back("no levels");
        return bad;
    }
    for (size_t i = 0; i < p.levels.size(); ++i) {
        const Level& lv = p.levels[i];
        std::string tag = "level " + std::to_string(i + 1);
        if (lv.segments.empty()) {
            bad.push_back(tag + ": no segments");
            continue;
        }
        int cursor = 0;
        for (const Segment& s : lv.segments) {
            if (s.start != cursor) {
                bad.push_back(tag + ": gap or overlap at frame " + std::to_string(s.start));
                break;
            }
            if (s.end <= s.start) {
                bad.push_back(tag + ": empty segment at frame " + std::to_string(s.start));
                break;
            }
            cursor = s.end;
        }
        if (!lv.segments.empty() && lv.segments.front().start == 0 &&
            lv.segments.back().end != p.total_frames)
            bad.push_back(tag + ": does not end at frame " + std::to_string(p.total_frames));
    }
    // Boundary containment: every coarser boundary is a finer boundary.
    for (size_t i = 0; i + 1 < p.levels.size(); ++i) {
        std::vector<int> fine = boundaries_of(p.levels[i]);
        std::set<int> fine_set(fine.begin(), fine.end());
        for (int b : boundaries_of(p.levels[i + 1]))
            if (!fine_set.count(b))
                bad.push_back("level " + std::to_string(i + 2) + ": boundary " +
                              std::to_string(b) + " absent one level below");
        if (p.levels[i + 1].segments.size() > p.levels[i].segments.size())
            bad.push_back("level " + std::to_string(i + 2) +
                          ": more segments than level below");
    }
    // Parent links must exist and agree with containment.
    if (p.parents.size() != p.levels.size() - 1) {
        bad.push_back("parent link table has wrong level count");
        return bad;
    }
    for (size_t i = 0; i + 1 < p.levels.size(); ++i) {
        if (p.parents[i].size() != p.levels[i].segments.size()) {
            bad.push_back("parent links for level " + std::to_string(i + 1) +
                          " have wrong length");
            continue;
        }
        for (size_t j = 0; j < p.parents[i].size(); ++j) {
            int c = p.parents[i][j];
            const Segment& s = p.levels[i].segments[j];
            if (c < 0 || c >= static_cast<int>(p.levels[i + 1].segments.size())) {
                bad.push_back("segment " + std::to_string(j) + " at level " +
                              std::to_string(i + 1) + " has no parent");
                continue;
            }
            const Segment& par = p.levels[i + 1].segments[c];
            if (!(par.start <= s.start && s.end <= par.end))
                bad.push_back("segment " + std::to_string(j) + " at level " +
                              std::to_string(i + 1) + " escapes its parent");
        }
    }
    return bad;
}

Partonomy from_boundaries(const std::vector<std::vector<int>>& boundary_sets,
                          int total_frames) {
    if (total_frames <= 0) throw config_error("total_frames must be positive");
    if (boundary_sets.empty()) throw config_error("need at least one boundary set");
    Partonomy p;
    p.total_frames = total_frames;
    std::vector<int> prev;
    for (size_t i = 0; i < boundary_sets.size(); ++i) {
        std::vector<int> b = boundary_sets[i];
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        for (int x : b)
            if (x <= 0 || x >= total_frames)
                throw config_error("boundary " + std::to_string(x) +
                                   " outside (0, T)");
        if (i > 0) {
            // Coarser cuts must reuse cuts kept at the level below.
            std::vector<int> snapped;
            for (int x : b) {
                if (prev.empty()) break;
                snapped.push_back(snap_to(prev, x));
            }
            std::sort(snapped.begin(), snapped.end());
            snapped.erase(std::unique(snapped.begin(), snapped.end()), snapped.end());
            b = std::move(snapped);
        }
        p.levels.push_back(level_from_boundaries(b, total_frames));
        prev = std::move(b);
    }
    rebuild_parent_links(p);
    return p;
}

Partonomy nest_recursive(const std::vector<Level>& flat_levels, SnapStats* stats) {
    if (flat_levels.empty()) throw config_error("need at least one level");
    if (flat_levels[0].segments.empty())
        throw config_error("finest level has no segments");
    int T = flat_levels[0].segments.back().end;
    for (size_t i = 0; i < flat_levels.size(); ++i)
        require_flat_level(flat_levels[i], T,
                           ("input level " + std::to_string(i + 1)).c_str());
    Partonomy p;
    p.total_frames = T;
    p.levels.push_back(flat_levels[0]);
    for (size_t i = 1; i < flat_levels.size(); ++i)
        p.levels.push_back(snap_level(flat_levels[i], p.levels.back(), T, stats));
    rebuild_parent_links(p);
    return p;
}

Partonomy from_flat_annotations(const Level& fine, const Level& coarse,
                                SnapStats* stats) {
    return nest_recursive({fine, coarse}, stats);
}

std::pair<FeatureSequence, Partonomy> concat_videos(
    const std::vector<VideoItem>& items) {
    if (items.empty()) throw config_error("no videos to concatenate");
    int d = items[0].features.dim;
    float fps = items[0].features.fps;
    int total = 0;
    for (const VideoItem& v : items) {
        v.features.check();
        if (v.features.dim != d) throw shape_error("feature dim mismatch across videos");
        if (v.features.fps != fps) throw config_error("fps mismatch across videos");
        require_flat_level(v.fine, v.features.frames, "video fine level");
        require_flat_level(v.coarse, v.features.frames, "video coarse level");
        total += v.features.frames;
    }
    FeatureSequence feats(total, d, fps);
    Level fine, coarse, top;
    int offset = 0;
    for (size_t i = 0; i < items.size(); ++i) {
        const VideoItem& v = items[i];
        std::copy(v.features.data.begin(), v.features.data.end(),
                  feats.data.begin() + static_cast<size_t>(offset) * d);
        for (Segment s : v.fine.segments)
            fine.segments.push_back({s.start + offset, s.end + offset, s.label});
        for (Segment s : v.coarse.segments)
            coarse.segments.push_back({s.start + offset, s.end + offset, s.label});
        top.segments.push_back({offset, offset + v.features.frames, ""});
        offset += v.features.frames;
    }
    Partonomy p = nest_recursive({fine, coarse, top});
    return {std::move(feats), std::move(p)};
}

}  // namespace parse
