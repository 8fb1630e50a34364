#include "parse/stack.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

namespace parse {

using nn::CellVals;
using nn::OptimizerState;
using nn::Parameters;
using nn::Tape;
using nn::VecD;

StackConfig StackConfig::uniform(int N, int d, int d_h, int K) {
    StackConfig cfg;
    cfg.levels = N;
    cfg.input_dim = d;
    cfg.hidden_dims.assign(N, d_h);
    cfg.memory.assign(N, K);
    return cfg;
}

void StackConfig::check() const {
    if (levels < 2) throw config_error("stack needs at least 2 levels");
    if (input_dim < 1) throw config_error("input_dim must be >= 1");
    if (static_cast<int>(hidden_dims.size()) != levels ||
        static_cast<int>(memory.size()) != levels)
        throw config_error("hidden_dims and memory need one entry per level");
    for (int i = 0; i < levels; ++i) {
        if (hidden_dims[i] < 1) throw config_error("hidden dims must be positive");
        if (memory[i] < 1) throw config_error("memory depth must be >= 1");
    }
    // Attention matches each level's query against level-above states, so
    // hidden dims from level 2 up must be equal.
    for (int i = 2; i < levels; ++i)
        if (hidden_dims[i] != hidden_dims[1])
            throw config_error("hidden dims of levels 2..N must be equal");
    if (lambda_sparse < 0.0) throw config_error("lambda_sparse must be >= 0");
    if (!(train_lr > 0.0)) throw config_error("train_lr must be positive");
    if (adapt_lr < 0.0) throw config_error("adapt_lr must be >= 0");
    if (adapt_lr > train_lr) throw config_error("adapt_lr must not exceed train_lr");
    if (window < 1) throw config_error("window must be >= 1");
}

std::uint64_t StackParams::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const Parameters& p : level) {
        std::uint64_t f = p.fingerprint();
        for (int i = 0; i < 8; ++i) {
            h ^= (f >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

namespace {

// Input dim of level i (0-based): raw features for the bottom, the lower
// level's hidden state plus an attention context of own width otherwise.
int level_input_dim(const StackConfig& cfg, int i) {
    if (i == 0) return cfg.input_dim;
    return cfg.hidden_dims[i - 1] + cfg.hidden_dims[i];
}

int level_output_dim(const StackConfig& cfg, int i) {
    if (i == 0) return cfg.input_dim;
    return cfg.hidden_dims[i - 1];
}

void require_feature_dim(const StackConfig& cfg, int d) {
    if (d != cfg.input_dim)
        throw shape_error("feature dim " + std::to_string(d) +
                          " != configured input_dim " + std::to_string(cfg.input_dim));
}

// Causal z-normalization: stats only ever include frames seen before the
// value being normalized was used as an input.
VecD normalized(const StackState::RunningNorm& n, const float* f, int d) {
    VecD out(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) {
        double sd = 0.0;
        if (n.count > 0) sd = std::sqrt(n.m2[k] / static_cast<double>(n.count));
        out[k] = (f[k] - (n.count > 0 ? n.mean[k] : 0.0)) / std::max(sd, 1e-6);
    }
    return out;
}

void norm_update(StackState::RunningNorm& n, const float* f, int d) {
    if (n.mean.empty()) {
        n.mean.assign(d, 0.0);
        n.m2.assign(d, 0.0);
    }
    n.count += 1;
    for (int k = 0; k < d; ++k) {
        double delta = f[k] - n.mean[k];
        n.mean[k] += delta / static_cast<double>(n.count);
        n.m2[k] += delta * (f[k] - n.mean[k]);
    }
}

// One transition recorded on the tape. Own-level states thread through as
// tape nodes (differentiable within the window); everything that crosses
// levels is a detached value snapshot: the lower-level input, the
// prediction target, and every FIFO entry.
StepOutput step_on_tape(Tape& tape, StackParams& sp, StackState& st,
                        std::vector<CellVals>& cells, const float* f_t,
                        const float* f_next, Tape::Val* energy_node = nullptr) {
    const StackConfig& cfg = sp.cfg;
    int N = cfg.levels;
    StepOutput out;
    out.prediction.resize(N);
    out.pred_loss.resize(N);
    out.sparse_loss.resize(N);

    VecD in0, target0;
    if (cfg.znorm) {
        norm_update(st.norm, f_t, cfg.input_dim);
        in0 = normalized(st.norm, f_t, cfg.input_dim);
        target0 = normalized(st.norm, f_next, cfg.input_dim);
    } else {
        in0.assign(f_t, f_t + cfg.input_dim);
        target0.assign(f_next, f_next + cfg.input_dim);
    }

    // Pre-update hidden values, the inputs and attention queries of this step.
    std::vector<VecD> pre_h(N);
    for (int i = 0; i < N; ++i) pre_h[i] = tape.value(cells[i].h);

    std::vector<Tape::Val> preds(N);
    std::vector<VecD> new_h_vals(N);
    for (int i = 0; i < N; ++i) {
        Tape::Val x;
        if (i == 0) {
            x = tape.constant(in0);
        } else {
            Tape::Val lower = tape.constant(pre_h[i - 1]);
            Tape::Val ctx;
            bool attends = (i < N - 1) || cfg.top_self_attention;
            if (attends && !st.fifo[i].empty()) {
                std::vector<Tape::Val> mem;
                mem.reserve(st.fifo[i].size());
                for (const VecD& m : st.fifo[i]) mem.push_back(tape.constant(m));
                ctx = tape.attention(cells[i].h, mem);
            } else {
                ctx = tape.constant(VecD(static_cast<size_t>(cfg.hidden_dims[i]), 0.0));
            }
            x = tape.concat(lower, ctx);
        }
        cells[i] = nn::lstm_cell(tape, sp.level[i], x, cells[i]);
        preds[i] = nn::output_head(tape, sp.level[i], cells[i].h);
        new_h_vals[i] = tape.value(cells[i].h);
        const VecD& cv = tape.value(cells[i].c);
        if (!all_finite(new_h_vals[i]) || !all_finite(cv))
            throw numeric_error("non-finite hidden state", i + 1, st.t);
    }

    std::vector<Tape::Val> terms;
    std::vector<double> weights;
    for (int i = 0; i < N; ++i) {
        const VecD& target = (i == 0) ? target0 : new_h_vals[i - 1];
        int d = level_output_dim(cfg, i);
        Tape::Val lp = tape.sq_error_to_const(preds[i], target, 1.0 / d);
        Tape::Val ls = tape.l1_norm(cells[i].h);
        out.prediction[i] = tape.value(preds[i]);
        out.pred_loss[i] = tape.scalar(lp);
        out.sparse_loss[i] = tape.scalar(ls);
        if (!std::isfinite(out.pred_loss[i]) || !std::isfinite(out.sparse_loss[i]))
            throw numeric_error("non-finite loss", i + 1, st.t);
        terms.push_back(lp);
        weights.push_back(1.0);
        terms.push_back(ls);
        weights.push_back(cfg.lambda_sparse);
    }
    Tape::Val e = tape.weighted_sum(terms, weights);
    out.energy = tape.scalar(e);
    if (energy_node) *energy_node = e;

    // FIFO update: each reader receives the new state of its source level
    // (the level above, or the top level itself), newest first.
    for (int i = 1; i < N; ++i) {
        int src = (i < N - 1) ? i + 1 : N - 1;
        if (i == N - 1 && !cfg.top_self_attention) continue;
        st.fifo[i].insert(st.fifo[i].begin(), new_h_vals[src]);
        if (static_cast<int>(st.fifo[i].size()) > cfg.memory[i]) st.fifo[i].pop_back();
    }
    st.t += 1;
    return out;
}

void state_from_cells(const Tape& tape, const std::vector<CellVals>& cells,
                      StackState& st) {
    for (size_t i = 0; i < cells.size(); ++i) {
        st.level[i].hidden = tape.value(cells[i].h);
        st.level[i].cell = tape.value(cells[i].c);
    }
}

std::vector<CellVals> cells_from_state(Tape& tape, const StackState& st) {
    std::vector<CellVals> cells(st.level.size());
    for (size_t i = 0; i < st.level.size(); ++i) {
        cells[i].h = tape.constant(st.level[i].hidden);
        cells[i].c = tape.constant(st.level[i].cell);
    }
    return cells;
}

// Streams one video, optionally updating parameters once per window.
// Returns per-step outputs via the callback; used by train and infer paths.
template <typename PerStep>
void stream_video(StackParams& sp, std::vector<OptimizerState>* opts,
                  const FeatureSequence& video, int video_id, int* consecutive_skips,
                  int* skipped, PerStep&& per_step) {
    const StackConfig& cfg = sp.cfg;
    require_feature_dim(cfg, video.dim);
    StackState st = init_state(sp);
    Tape tape;
    int T = video.frames;
    int s = 0;
    while (s < T - 1) {
        int w = std::min(cfg.window, T - 1 - s);
        tape.clear();
        std::vector<CellVals> cells = cells_from_state(tape, st);
        std::vector<Tape::Val> energies;
        for (int j = 0; j < w; ++j) {
            StepOutput out;
            Tape::Val e;
            try {
                out = step_on_tape(tape, sp, st, cells, video.row(s + j), video.row(s + j + 1), &e);
            } catch (const numeric_error& err) {
                throw numeric_error("video " + std::to_string(video_id) + ": non-finite value",
                                    err.level, err.t);
            }
            energies.push_back(e);
            per_step(out);
        }
        state_from_cells(tape, cells, st);
        if (opts) {
            Tape::Val window_energy =
                tape.weighted_sum(energies, std::vector<double>(energies.size(), 1.0));
            for (auto& p : sp.level) p.zero_grad();
            tape.backward(window_energy);
            bool ok = true;
            for (auto& p : sp.level)
                if (!p.grads_finite()) ok = false;
            if (ok) {
                for (size_t i = 0; i < sp.level.size(); ++i)
                    ok = adam_step(sp.level[i], (*opts)[i]) && ok;
            }
            if (!ok) {
                *consecutive_skips += 1;
                if (skipped) *skipped += 1;
                std::cerr << "warning: skipping update with non-finite gradients"
                          << " (video " << video_id << ", t=" << st.t << ")\n";
                if (*consecutive_skips >= 100)
                    throw numeric_error("100 consecutive non-finite gradient windows",
                                        0, st.t);
            } else {
                *consecutive_skips = 0;
            }
        }
        s += w;
    }
}

}  // namespace

StackParams make_stack(const StackConfig& cfg, std::uint32_t seed) {
    cfg.check();
    StackParams sp;
    sp.cfg = cfg;
    Rng rng(seed);
    for (int i = 0; i < cfg.levels; ++i)
        sp.level.push_back(nn::make_level_params(level_input_dim(cfg, i), cfg.hidden_dims[i],
                                                 level_output_dim(cfg, i), rng));
    return sp;
}

StackState init_state(const StackParams& sp) {
    StackState st;
    int N = sp.cfg.levels;
    st.level.resize(N);
    for (int i = 0; i < N; ++i) {
        st.level[i].hidden.assign(sp.cfg.hidden_dims[i], 0.0);
        st.level[i].cell.assign(sp.cfg.hidden_dims[i], 0.0);
    }
    st.fifo.resize(N);
    return st;
}

StepOutput step(StackParams& sp, StackState& st, const float* f_t, const float* f_next) {
    Tape tape;
    std::vector<CellVals> cells = cells_from_state(tape, st);
    StepOutput out = step_on_tape(tape, sp, st, cells, f_t, f_next);
    state_from_cells(tape, cells, st);
    return out;
}

StepOutput step_with_gradients(StackParams& sp, StackState& st, const float* f_t,
                               const float* f_next) {
    Tape tape;
    std::vector<CellVals> cells = cells_from_state(tape, st);
    Tape::Val e;
    StepOutput out = step_on_tape(tape, sp, st, cells, f_t, f_next, &e);
    state_from_cells(tape, cells, st);
    for (auto& p : sp.level) p.zero_grad();
    tape.backward(e);
    return out;
}

double energy(const StepOutput& out, double lambda_sparse) {
    double e = 0.0;
    for (size_t i = 0; i < out.pred_loss.size(); ++i)
        e += out.pred_loss[i] + lambda_sparse * out.sparse_loss[i];
    return e;
}

TrainResult train_stream(const std::vector<FeatureSequence>& videos,
                         const StackConfig& cfg, std::uint32_t seed) {
    if (videos.empty()) throw config_error("no videos to train on");
    for (const FeatureSequence& v : videos) v.check();
    TrainResult res;
    res.params = make_stack(cfg, seed);
    std::vector<OptimizerState> opts;
    for (auto& p : res.params.level) opts.emplace_back(p, cfg.train_lr);
    int consecutive = 0;
    for (size_t vi = 0; vi < videos.size(); ++vi)
        stream_video(res.params, &opts, videos[vi], static_cast<int>(vi), &consecutive,
                     &res.skipped_updates,
                     [&](const StepOutput& out) { res.energy.push_back(out.energy); });
    return res;
}

ErrorTraces infer_stream(const FeatureSequence& video, const StackParams& trained) {
    video.check();
    if (video.frames < 2) throw config_error("video needs at least 2 frames");
    StackParams sp = trained;  // private adaptive copy
    std::vector<OptimizerState> opts;
    for (auto& p : sp.level) opts.emplace_back(p, sp.cfg.adapt_lr);
    ErrorTraces traces(sp.cfg.levels);
    int consecutive = 0;
    stream_video(sp, &opts, video, 0, &consecutive, nullptr, [&](const StepOutput& out) {
        for (int i = 0; i < sp.cfg.levels; ++i) traces[i].push_back(out.pred_loss[i]);
    });
    return traces;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "PRSC", version, config, per-level tensors with
// names and shapes, then a CRC32 of every preceding byte.

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'R', 'S', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::uint32_t crc32(const unsigned char* data, size_t n) {
    static std::uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    std::uint32_t c = 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

struct ByteSink {
    std::vector<unsigned char> bytes;
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    }
    void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xff));
    }
    void u8(bool v) { bytes.push_back(v ? 1 : 0); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void f32s(const std::vector<float>& v) {
        size_t off = bytes.size();
        bytes.resize(off + v.size() * 4);
        std::memcpy(bytes.data() + off, v.data(), v.size() * 4);
    }
};

struct ByteSource {
    const std::vector<unsigned char>& bytes;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) {
        if (pos + n > bytes.size())
            throw format_error("truncated checkpoint: " + path,
                               static_cast<long long>(bytes.size()));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    int i32() { return static_cast<int>(u32()); }
    double f64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    bool u8() {
        need(1);
        return bytes[pos++] != 0;
    }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + n));
        pos += n;
        return s;
    }
    void f32s(std::vector<float>& v) {
        need(v.size() * 4);
        std::memcpy(v.data(), bytes.data() + pos, v.size() * 4);
        pos += v.size() * 4;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const StackParams& sp) {
    sp.cfg.check();
    ByteSink sink;
    sink.bytes.insert(sink.bytes.end(), kCheckpointMagic, kCheckpointMagic + 4);
    sink.u32(kCheckpointVersion);
    const StackConfig& c = sp.cfg;
    sink.i32(c.levels);
    sink.i32(c.input_dim);
    for (int v : c.hidden_dims) sink.i32(v);
    for (int v : c.memory) sink.i32(v);
    sink.f64(c.lambda_sparse);
    sink.f64(c.train_lr);
    sink.f64(c.adapt_lr);
    sink.i32(c.window);
    sink.u8(c.top_self_attention);
    sink.u8(c.znorm);
    sink.u32(static_cast<std::uint32_t>(sp.level.size()));
    for (const Parameters& p : sp.level) {
        sink.u32(static_cast<std::uint32_t>(p.tensors.size()));
        for (const nn::Tensor& t : p.tensors) {
            sink.str(t.name);
            sink.i32(t.rows);
            sink.i32(t.cols);
            sink.f32s(t.w);
        }
    }
    sink.u32(crc32(sink.bytes.data(), sink.bytes.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(sink.bytes.data()),
              static_cast<std::streamsize>(sink.bytes.size()));
    if (!out) throw format_error("write failed: " + path);
}

StackParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw format_error("cannot open: " + path);
    std::vector<unsigned char> bytes(static_cast<size_t>(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw format_error("read failed: " + path);
    if (bytes.size() < 12) throw format_error("truncated checkpoint: " + path,
                                              static_cast<long long>(bytes.size()));
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw format_error("bad magic in " + path, 0);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
        throw format_error("checksum mismatch in " + path,
                           static_cast<long long>(bytes.size()) - 4);
    ByteSource src{bytes, 4, path};
    std::uint32_t version = src.u32();
    if (version != kCheckpointVersion)
        throw format_error("unsupported checkpoint version " + std::to_string(version) +
                               " in " + path, 4);
    StackParams sp;
    StackConfig& c = sp.cfg;
    c.levels = src.i32();
    if (c.levels < 2 || c.levels > 64)
        throw format_error("implausible level count in " + path, 8);
    c.input_dim = src.i32();
    c.hidden_dims.resize(c.levels);
    for (int& v : c.hidden_dims) v = src.i32();
    c.memory.resize(c.levels);
    for (int& v : c.memory) v = src.i32();
    c.lambda_sparse = src.f64();
    c.train_lr = src.f64();
    c.adapt_lr = src.f64();
    c.window = src.i32();
    c.top_self_attention = src.u8();
    c.znorm = src.u8();
    c.check();
    std::uint32_t levels = src.u32();
    if (levels != static_cast<std::uint32_t>(c.levels))
        throw format_error("level table does not match config in " + path);
    for (std::uint32_t li = 0; li < levels; ++li) {
        Parameters p;
        std::uint32_t nt = src.u32();
        for (std::uint32_t ti = 0; ti < nt; ++ti) {
            std::string name = src.str();
            int rows = src.i32();
            int cols = src.i32();
            if (rows < 1 || cols < 1 || static_cast<long long>(rows) * cols > (1ll << 28))
                throw format_error("implausible tensor shape in " + path);
            nn::Tensor& t = p.add(name, rows, cols);
            src.f32s(t.w);
            if (!all_finite(t.w))
                throw format_error("non-finite parameter values in " + path);
        }
        sp.level.push_back(std::move(p));
    }
    // Shape cross-check against what the config implies.
    for (int i = 0; i < c.levels; ++i) {
        const nn::Tensor& wx = sp.level[i].at("w_x");
        if (wx.cols != level_input_dim(c, i) || wx.rows != 4 * c.hidden_dims[i])
            throw format_error("tensor shapes do not match config in " + path);
    }
    return sp;
}

}  // namespace parse
