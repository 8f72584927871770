#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace risfl {

using Complex = std::complex<double>;
using ComplexVec = std::vector<Complex>;

/// Seeded random stream backed by a 64-bit Mersenne Twister.
///
/// Uniform and normal variates are produced by fixed conversions defined here
/// (53-bit mantissa uniforms, polar-free Box-Muller normals) so that a given
/// seed yields the same numbers under every standard library.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer on [0, n). Unbiased (rejection sampling).
    std::size_t uniform_index(std::size_t n);
    double normal();
    /// Circularly symmetric complex Gaussian with E|z|^2 = variance.
    Complex cscg(double variance);

    /// Independent stream for a worker or sub-task.
    RngStream derive(std::uint64_t stream_id) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

RngStream seeded_rng(std::uint64_t seed);

/// splitmix64 finalizer applied to the pair; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream_id);

ComplexVec sample_cscg(RngStream& rng, double variance, std::size_t n);

}  // namespace risfl
