#pragma once

#include "frmofdm/common.hpp"

#include <cstdint>

namespace frmofdm {

// Counter-based pseudo-random stream (splitmix64 core). Every consumer owns
// its stream, so results do not depend on sharing or call interleaving across
// threads. Substreams are derived by hashing (seed, stream id) which keeps
// Monte-Carlo runs bitwise reproducible for a fixed master seed regardless of
// the worker count that executes them.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent substream for e.g. a trial or sample index.
    static Rng substream(std::uint64_t seed, std::uint64_t id, std::uint64_t purpose = 0) {
        Rng mix(seed);
        std::uint64_t a = mix.next_u64();
        Rng h(a ^ (id * 0x9E3779B97F4A7C15ULL) ^ (purpose * 0xBF58476D1CE4E5B9ULL));
        return Rng(h.next_u64());
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard real Gaussian via Box-Muller.
    double gauss() {
        double u1 = 1.0 - uniform(); // (0, 1], keeps the log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    /// CSCG with unit variance (0.5 per real dimension).
    cx cgauss() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-std::log(u1));
        return cx(r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2));
    }

    /// Uniform phase point on the complex unit circle.
    cx unit_phase() { return std::polar(1.0, 2.0 * kPi * uniform()); }

    bool bernoulli_half() { return (next_u64() & 1ULL) != 0; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

inline arma::cx_vec cgauss_vec(Rng& rng, arma::uword n, double var = 1.0) {
    arma::cx_vec v(n);
    double s = std::sqrt(var);
    for (arma::uword i = 0; i < n; ++i) v[i] = s * rng.cgauss();
    return v;
}

} // namespace frmofdm
