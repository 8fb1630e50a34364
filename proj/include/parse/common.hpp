#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace parse {

// Raised when tensor/vector dimensions disagree with what an operation expects.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when a configuration violates its invariants (bad level counts, negative
// durations, and so on).
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when an on-disk file is malformed. `offset` is the byte offset of the
// first bad byte where that is known, -1 otherwise.
struct format_error : std::runtime_error {
    long long offset = -1;
    explicit format_error(const std::string& msg, long long off = -1)
        : std::runtime_error(off >= 0 ? msg + " (byte offset " + std::to_string(off) + ")" : msg),
          offset(off) {}
};

// Raised when a non-finite value shows up during streaming computation.
// Carries the level (1-based) and timestep where it was detected.
struct numeric_error : std::runtime_error {
    int level = 0;
    long long t = 0;
    numeric_error(const std::string& msg, int level_, long long t_)
        : std::runtime_error(msg + " (level " + std::to_string(level_) + ", t=" + std::to_string(t_) + ")"),
          level(level_),
          t(t_) {}
};

// Seeded portable random source.
//
// The raw stream is std::mt19937 (its output sequence is pinned by the C++
// standard), and every derived draw below is defined directly on those 32-bit
// words so a reimplementation in any language reproduces the same values:
//
//   u32()               one raw Mersenne-Twister word
//   uniform()           u32() * 2^-32                        in [0, 1)
//   uniform_open()      (u32() + 1) * 2^-32                  in (0, 1]
//   gauss()             Box-Muller, consumes exactly two words:
//                       sqrt(-2 ln u1) * cos(2 pi u2), u1 = uniform_open(),
//                       u2 = uniform(); the sine partner is discarded
//   uniform_int(lo,hi)  lo + floor(u32() * (hi-lo+1) / 2^32)
//
// All intermediate arithmetic is IEEE double.
class Rng {
  public:
    explicit Rng(std::uint32_t seed) : gen_(seed) {}

    std::uint32_t u32() { return gen_(); }

    double uniform() { return static_cast<double>(u32()) * 0x1p-32; }

    double uniform_open() { return (static_cast<double>(u32()) + 1.0) * 0x1p-32; }

    double gauss() {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Inclusive on both ends.
    long long uniform_int(long long lo, long long hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<long long>((static_cast<std::uint64_t>(u32()) * span) >> 32);
    }

  private:
    std::mt19937 gen_;
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const std::vector<float>& v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace parse
