#ifndef GEB_RNG_HPP
#define GEB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace geb {

// Deterministic RNG used throughout. mt19937_64 has a fully specified bit
// stream; all value mappings below are hand-rolled so that identical
// (seed, call sequence) yields identical doubles on every platform.
// std::*_distribution is never used (its output is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(uniform01() * static_cast<double>(n)) % n;
    }

    // Standard normal, Box-Muller. Fixed consumption: two draws per pair.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        const double th = 6.283185307179586 * u2;
        cached_ = r * std::sin(th);
        have_cached_ = true;
        return r * std::cos(th);
    }

    // Categorical draw by CDF inversion over non-negative weights.
    int categorical(std::span<const double> w) {
        double total = 0.0;
        for (double x : w) total += x;
        const double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

    // Categorical draw excluding one index (weights renormalized implicitly).
    int categorical_excluding(std::span<const double> w, int excluded) {
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (static_cast<int>(i) != excluded) total += w[i];
        const double u = uniform01() * total;
        double acc = 0.0;
        int last = -1;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (static_cast<int>(i) == excluded) continue;
            last = static_cast<int>(i);
            acc += w[i];
            if (u < acc) return last;
        }
        return last;
    }

    // Independent stream derived from (seed, stream id). Used so that
    // e.g. instance generation and rollout sampling never interleave.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ull);
        // splitmix64 finalizer
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z = z ^ (z >> 31);
        return Rng(z);
    }

    static std::uint64_t hash_label(std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace geb

#endif
