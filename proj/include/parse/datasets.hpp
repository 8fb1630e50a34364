#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "parse/features.hpp"
#include "parse/partonomy.hpp"

namespace parse {

// Synthetic corpus parameters. Durations and jitters are finest-first and
// must grow toward the coarse end so segments can nest.
struct SynthConfig {
    int levels = 3;
    std::vector<int> mean_durations = {20, 100, 400};  // frames, finest first
    std::vector<int> jitters = {5, 20, 80};            // +- frames, finest first
    int dim = 16;
    double separation = 4.0;   // spacing scale between segment means
    double noise = 0.5;        // per-frame Gaussian std dev
    double drift = 0.0;        // per-frame mean drift magnitude
    float fps = 15.0f;
    int target_frames = 2000;  // top level grows until it covers this many
    std::uint32_t seed = 0;
};

// Draws one video: piecewise-constant nested means plus optional linear
// drift and Gaussian frame noise. Ground truth labels each segment.
std::pair<FeatureSequence, Partonomy> generate_synthetic(const SynthConfig& cfg);

// Binary feature container: magic "PRSF", format version, T, d, fps, then
// T*d little-endian f32 rows. Read errors carry the failing byte offset.
void write_features(const std::string& path, const FeatureSequence& f);
FeatureSequence read_features(const std::string& path);

// JSON annotation files hold fps, T, and per-level segment lists, finest
// first. Unknown fields are ignored with a warning on stderr.
void write_annotation(const std::string& path, const Partonomy& p, float fps);
std::pair<Partonomy, float> read_annotation(const std::string& path);

}  // namespace parse
