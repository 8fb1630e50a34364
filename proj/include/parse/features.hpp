#pragma once

#include <vector>

#include "parse/common.hpp"

namespace parse {

// Per-frame feature stream: T rows of d floats at a fixed frame rate.
struct FeatureSequence {
    int frames = 0;
    int dim = 0;
    float fps = 0.0f;
    std::vector<float> data;  // row-major T x d

    FeatureSequence() = default;
    FeatureSequence(int T, int d, float fps_)
        : frames(T), dim(d), fps(fps_), data(static_cast<size_t>(T) * d, 0.0f) {}

    float* row(int t) { return &data[static_cast<size_t>(t) * dim]; }
    const float* row(int t) const { return &data[static_cast<size_t>(t) * dim]; }

    void check() const {
        if (frames < 2) throw config_error("feature sequence needs at least 2 frames");
        if (dim < 1) throw config_error("feature dim must be >= 1");
        if (!(fps > 0.0f)) throw config_error("fps must be positive");
        if (data.size() != static_cast<size_t>(frames) * dim)
            throw shape_error("feature data size != T*d");
        if (!all_finite(data)) throw config_error("feature data contains non-finite values");
    }
};

}  // namespace parse
