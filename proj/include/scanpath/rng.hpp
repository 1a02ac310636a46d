#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace scanpath {

/// Seeded generator with a fixed, platform-independent sampling algorithm.
///
/// The engine is std::mt19937_64 (fully specified by the standard). The
/// distributions are implemented here instead of using the <random>
/// distribution templates, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent stream for (seed, a, b), e.g. (run seed, step, purpose).
    static Rng derived(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via Box-Muller; consumes two uniforms per call.
    double normal();

    std::string state() const;
    void set_state(const std::string& text);

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used for seed mixing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace scanpath
