#pragma once

// Banded truncated PMFs used by the fast kernel builder. A Band lists the
// probabilities of the window [first, first + values.size()) inside
// {0..limit}; `tail` is the exact mass above `limit`. Entries below the trim
// threshold at either end of the window are dropped.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace psdbp::detail {

inline constexpr double kTrim = 1e-30;

struct Band {
    std::size_t first = 0;
    std::vector<double> values;
    double tail = 0.0;

    std::size_t last() const { return first + values.size() - 1; }
    bool empty() const { return values.empty(); }
    double at(std::size_t k) const {
        return (k < first || k >= first + values.size()) ? 0.0 : values[k - first];
    }
};

/// Removes leading/trailing entries below `trim`.
void trim_band(Band& band, double trim = kTrim);

/// Binomial(n, p) probabilities above `trim`, renormalized to sum to 1.
Band binomial_band(std::uint64_t n, double p, double trim = kTrim);

/// Truncated convolution on {0..limit}; the tail is exact (no cancellation)
/// provided both inputs keep their unlisted mass above `limit`.
Band convolve_band(const Band& a, const Band& b, std::size_t limit);

/// dst += w * src on {0..limit} (src is already restricted to that range).
void axpy_band(Band& dst, double w, const Band& src);

} // namespace psdbp::detail
