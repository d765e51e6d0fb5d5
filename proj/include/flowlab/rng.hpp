#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace flowlab {

/// Deterministic random source. Built on std::mt19937_64 (bit-exact across
/// platforms by the standard) with a hand-rolled Box-Muller normal sampler,
/// since std::normal_distribution is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer uniform in [0, bound) via rejection (unbiased).
    std::uint64_t uniform_below(std::uint64_t bound);

    /// Standard normal, Box-Muller with one cached spare.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives a child seed from a master seed and a stream name. Simulations,
/// dataset generators and training runs each own a stream so that adding or
/// reordering consumers does not perturb the others.
std::uint64_t derive_seed(std::uint64_t master, const std::string& stream);

/// splitmix64 finalizer; also used as the config-hash mixer.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over bytes, the project-wide stable content hash.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t basis = 1469598103934665603ull);
std::uint64_t fnv1a64(const std::string& s);

/// 16-hex-digit rendering of a hash, used for cache directory names.
std::string hash_hex(std::uint64_t h);

} // namespace flowlab
