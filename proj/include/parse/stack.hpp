#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "parse/features.hpp"
#include "parse/nn.hpp"

namespace parse {

// Hierarchy shape and training hyperparameters. Levels are numbered 1..N
// bottom-up; hidden_dims and memory are indexed level-1 first. Attention
// couples the query dim of level i to the states of level i+1, so hidden
// dims of levels 2..N must agree; level 1's may differ.
struct StackConfig {
    int levels = 3;                  // N
    int input_dim = 16;              // feature dim d
    std::vector<int> hidden_dims;    // per level
    std::vector<int> memory;         // FIFO depth read by each level; entry 0 unused
    double lambda_sparse = 0.1;
    double train_lr = 1e-3;
    double adapt_lr = 1e-6;
    int window = 1;                  // timesteps per gradient update
    bool top_self_attention = true;  // top level attends over its own history
    bool znorm = false;              // causal per-dimension feature normalization

    static StackConfig uniform(int N, int d, int d_h, int K);
    void check() const;
};

// All learnable state: one LSTM-plus-head parameter set per level.
struct StackParams {
    StackConfig cfg;
    std::vector<nn::Parameters> level;

    std::uint64_t fingerprint() const;
};

// Streaming state carried between steps of one video.
struct StackState {
    std::vector<nn::RecurrentState> level;
    // fifo[i]: detached snapshots read by level i+1 (0-based i), newest first.
    // Level i+1 < N reads states of level i+2; the top reads its own.
    std::vector<std::vector<nn::VecD>> fifo;
    long long t = 0;  // completed steps

    struct RunningNorm {
        long long count = 0;
        std::vector<double> mean, m2;
    } norm;
};

// Per-step diagnostics. energy always equals the recorded per-level terms
// summed in level order.
struct StepOutput {
    std::vector<nn::VecD> prediction;   // per level; level 1 predicts the next frame
    std::vector<double> pred_loss;      // normalized squared error per level
    std::vector<double> sparse_loss;    // L1 of the new hidden state per level
    double energy = 0.0;
};

StackParams make_stack(const StackConfig& cfg, std::uint32_t seed);
StackState init_state(const StackParams& sp);

// One forward transition: consume the frame pair (f_t, f_next), update all
// level states and FIFOs in place. No gradients, no parameter change.
StepOutput step(StackParams& sp, StackState& st, const float* f_t, const float* f_next);

// Like step(), but records the transition, zeroes all parameter gradients,
// and backpropagates the step energy into them. Parameters themselves are
// not updated. This is the gradient-validation hook: what it leaves in the
// gradient slots is exactly what one optimizer window of size 1 would use.
StepOutput step_with_gradients(StackParams& sp, StackState& st, const float* f_t,
                               const float* f_next);

// Recombines recorded per-level terms into the total objective.
double energy(const StepOutput& out, double lambda_sparse);

// Per-level prediction-loss series, one entry per transition (length T-1).
using ErrorTraces = std::vector<std::vector<double>>;

struct TrainResult {
    StackParams params;
    std::vector<double> energy;      // one entry per transition, videos concatenated
    int skipped_updates = 0;         // windows dropped for non-finite gradients
};

// Single streaming pass over the videos in order: states reset between
// videos, parameters persist, one optimizer update per window at train_lr.
TrainResult train_stream(const std::vector<FeatureSequence>& videos,
                         const StackConfig& cfg, std::uint32_t seed);

// Streams one video through a private copy of the trained parameters,
// adapting per window at adapt_lr, and records every level's prediction
// loss. The caller's parameters are never modified.
ErrorTraces infer_stream(const FeatureSequence& video, const StackParams& trained);

// Versioned binary checkpoint with shape metadata and a trailing checksum.
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const StackParams& sp);
StackParams load_checkpoint(const std::string& path);

}  // namespace parse
