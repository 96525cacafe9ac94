#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace psdbp {

/// Probability mass function on {0, 1, ..., k_max}. Whatever mass is not
/// listed lives strictly above k_max and is carried in `tail_mass`.
struct OffspringPMF {
    std::vector<double> probabilities;
    double tail_mass = 0.0;

    std::size_t k_max() const { return probabilities.empty() ? 0 : probabilities.size() - 1; }
    double at(std::size_t k) const { return k < probabilities.size() ? probabilities[k] : 0.0; }
    double total() const;
    double mean() const;
    double second_moment() const;
    double variance() const;
};

/// Convolution of two PMFs restricted to {0..out_max}. Listed entries are
/// exact whenever the unlisted mass of both inputs lies above out_max; the
/// returned tail is accumulated without cancellation.
OffspringPMF convolve(const OffspringPMF& a, const OffspringPMF& b, std::size_t out_max);

/// PMF of the sum of `i` independent draws, truncated at `out_max`, by
/// binary exponentiation (O(log i) truncated convolutions).
OffspringPMF convolve_power(const OffspringPMF& pmf, std::uint64_t i, std::size_t out_max);

/// Drops listed entries above `out_max`, moving their mass into the tail.
OffspringPMF truncate(const OffspringPMF& pmf, std::size_t out_max);

} // namespace psdbp
