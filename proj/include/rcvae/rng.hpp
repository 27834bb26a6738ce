#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rcvae/matrix.hpp"

namespace rcvae {

// Deterministic PRNG: xoshiro256++ seeded through splitmix64, with a
// Box-Muller transform for standard-normal draws. Identical seed gives an
// identical stream on every platform; the algorithm id below is persisted
// in checkpoints so stored seeds stay replayable.
//
// Substreams: split(tag) derives an independent generator keyed on
// (original seed, tag) only, never on how much of the parent stream has
// been consumed.
class Rng {
  public:
    static constexpr const char* kAlgorithm = "xoshiro256++/box-muller/1";

    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit();

    // N(0,1). Cosine branch of Box-Muller; every draw consumes exactly two
    // uniforms, so the draw index -> uniform pair mapping is fixed.
    double next_normal();

    std::vector<double> normal_vec(std::size_t n);
    Matrix normal_matrix(std::size_t rows, std::size_t cols);

    // Unbiased integer in [0, n) via rejection sampling; n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    Rng split(std::uint64_t tag) const;

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

  private:
    std::uint64_t seed_ = 0;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace rcvae
