#pragma once

#include <string>
#include <utility>
#include <vector>

#include "parse/features.hpp"

namespace parse {

// Half-open frame span [start, end) with an optional label.
struct Segment {
    int start = 0;
    int end = 0;
    std::string label;
};

// One segmentation layer: segments sorted by start, contiguous over [0, T).
struct Level {
    std::vector<Segment> segments;
};

// Nested multi-level segmentation. levels[0] is the finest layer; every
// coarser segment is an exact union of segments one level below.
// parents[i][j] is the index (into levels[i+1].segments) of the segment
// containing levels[i].segments[j].
struct Partonomy {
    int total_frames = 0;
    std::vector<Level> levels;               // finest first
    std::vector<std::vector<int>> parents;   // size levels.size()-1
};

// Statistics from snapping coarse boundaries onto a finer boundary set.
struct SnapStats {
    int moved = 0;           // boundaries whose frame changed
    int max_distance = 0;    // largest single move, in frames
    int dropped_segments = 0;  // segments collapsed to zero length and removed
};

// Interior boundary frames of a level (segment starts except frame 0).
std::vector<int> boundaries_of(const Level& level);

// Segments of `lower` fully contained in `parent`.
std::vector<Segment> children(const Segment& parent, const Level& lower);

// Recomputes parent links from segment containment. Segments not contained
// in any next-coarser segment get parent -1 (validate reports those).
void rebuild_parent_links(Partonomy& p);

// Returns violation descriptions; empty means the partonomy is valid.
// Checks per-level contiguity over [0, total_frames), cross-level boundary
// containment, nonincreasing segment counts, and parent-link consistency.
std::vector<std::string> validate(const Partonomy& p);

// Builds a nested partonomy from per-level interior boundary sets, finest
// first. Each set is normalized (sorted, deduplicated) and must lie strictly
// inside (0, total_frames). Coarser boundaries are snapped to the nearest
// boundary retained at the level below (ties break toward the earlier
// frame). Segments are unlabeled.
Partonomy from_boundaries(const std::vector<std::vector<int>>& boundary_sets,
                          int total_frames);

// Aligns independently produced flat levels into a nested partonomy by
// snapping each coarser level's boundaries onto the level below. Labels are
// preserved; segments collapsed by snapping are dropped and counted.
Partonomy nest_recursive(const std::vector<Level>& flat_levels,
                         SnapStats* stats = nullptr);

// Two-level convenience wrapper around nest_recursive.
Partonomy from_flat_annotations(const Level& fine, const Level& coarse,
                                SnapStats* stats = nullptr);

// One source video for corpus concatenation.
struct VideoItem {
    FeatureSequence features;
    Level fine;
    Level coarse;
};

// Concatenates videos along time into one stream whose top level has one
// segment per source video. Per-video levels must span their own video.
std::pair<FeatureSequence, Partonomy> concat_videos(
    const std::vector<VideoItem>& items);

}  // namespace parse
