// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stylefuse {

// ---------------------------------------------------------------------------
// Error hierarchy
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or layer-count mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Layer range or scalar argument outside its admissible interval.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Text token outside the embedder vocabulary.
class VocabularyError : public Error {
public:
    using Error::Error;
};

/// The pose estimator could not produce a pose at all.
class PoseEstimationError : public Error {
public:
    using Error::Error;
};

/// A CLIP-space direction collapsed below the usable norm threshold.
class DegenerateDirectionError : public Error {
public:
    using Error::Error;
};

/// Optimization produced a non-finite loss; carries the offending step.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step)
        : Error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

/// Checkpoint/container file is unreadable, corrupted, or version-incompatible.
class CheckpointError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic seeded RNG
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded pseudorandom stream with platform-independent draw sequences.
///
/// mt19937_64 output is pinned by the standard; all value transforms
/// (uniform reals, inclusive integer ranges, normals) are done here rather
/// than through std distributions, which are implementation-defined.
/// Box-Muller keeps no cached spare so the stream state is exactly the
/// engine state.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        if (!(lo <= hi)) throw ConfigError("uniform(): empty range");
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [lo, hi], both bounds inclusive.
    int uniform_int(int lo, int hi) {
        if (lo > hi) throw ConfigError("uniform_int(): empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Independent child stream derived from the base seed and a stream id.
    SeededRng fork(std::uint64_t stream_id) const {
        return SeededRng(splitmix64(seed_ ^ splitmix64(stream_id + 0x51ed2701ULL)));
    }

    /// Engine state as text (portable across runs; format pinned by the standard).
    std::string save_state() const {
        std::ostringstream oss;
        oss << seed_ << ' ' << engine_;
        return oss.str();
    }

    void load_state(const std::string& text) {
        std::istringstream iss(text);
        iss >> seed_ >> engine_;
        if (!iss) throw CheckpointError("SeededRng: malformed state string");
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Byte hashing for frozen-parameter checks
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t hash_doubles(const double* data, std::size_t n,
                                  std::uint64_t h = kFnvOffset) {
    return fnv1a64(data, n * sizeof(double), h);
}

}  // namespace stylefuse
