#include "psdbp/pmf.hpp"

#include "psdbp/errors.hpp"

#include <algorithm>

namespace psdbp {

double OffspringPMF::total() const {
    double s = 0.0;
    for (double p : probabilities) s += p;
    return s + tail_mass;
}

double OffspringPMF::mean() const {
    double s = 0.0;
    for (std::size_t k = 1; k < probabilities.size(); ++k) s += static_cast<double>(k) * probabilities[k];
    return s;
}

double OffspringPMF::second_moment() const {
    double s = 0.0;
    for (std::size_t k = 1; k < probabilities.size(); ++k) {
        const double kk = static_cast<double>(k);
        s += kk * kk * probabilities[k];
    }
    return s;
}

double OffspringPMF::variance() const {
    const double m = mean();
    return second_moment() - m * m;
}

OffspringPMF truncate(const OffspringPMF& pmf, std::size_t out_max) {
    if (pmf.probabilities.size() <= out_max + 1) return pmf;
    OffspringPMF out;
    out.probabilities.assign(pmf.probabilities.begin(),
                             pmf.probabilities.begin() + static_cast<std::ptrdiff_t>(out_max + 1));
    double moved = 0.0;
    for (std::size_t k = out_max + 1; k < pmf.probabilities.size(); ++k) moved += pmf.probabilities[k];
    out.tail_mass = pmf.tail_mass + moved;
    return out;
}

OffspringPMF convolve(const OffspringPMF& a, const OffspringPMF& b, std::size_t out_max) {
    OffspringPMF out;
    if (a.probabilities.empty() || b.probabilities.empty()) {
        out.probabilities.assign(1, 0.0);
        out.tail_mass = 1.0;
        return out;
    }
    const std::size_t la = a.k_max();
    const std::size_t lb = b.k_max();
    const std::size_t lr = std::min(out_max, la + lb);
    out.probabilities.assign(lr + 1, 0.0);
    for (std::size_t x = 0; x <= std::min(la, lr); ++x) {
        const double ax = a.probabilities[x];
        if (ax == 0.0) continue;
        const std::size_t ymax = std::min(lb, lr - x);
        double* dst = out.probabilities.data() + x;
        for (std::size_t y = 0; y <= ymax; ++y) dst[y] += ax * b.probabilities[y];
    }

    // above[t] = listed mass of b strictly above t, for t in [0, lb].
    std::vector<double> above(lb + 1, 0.0);
    for (std::size_t t = lb; t-- > 0;) above[t] = above[t + 1] + b.probabilities[t + 1];
    const double b_listed = above[0] + b.probabilities[0];

    double overflow = 0.0;
    double a_listed = 0.0;
    for (std::size_t x = 0; x <= la; ++x) {
        const double ax = a.probabilities[x];
        a_listed += ax;
        if (ax == 0.0) continue;
        if (x > out_max) {
            overflow += ax * b_listed;
        } else if (out_max - x < lb) {
            overflow += ax * above[out_max - x];
        }
    }
    out.tail_mass = overflow + a.tail_mass + a_listed * b.tail_mass;
    return out;
}

OffspringPMF convolve_power(const OffspringPMF& pmf, std::uint64_t i, std::size_t out_max) {
    if (out_max == 0) throw DomainError("convolve_power: out_max must be positive");
    if (i == 0) throw DomainError("convolve_power: power must be at least 1");

    OffspringPMF base = truncate(pmf, out_max);
    OffspringPMF result;
    bool have_result = false;
    while (i > 0) {
        if (i & 1U) {
            result = have_result ? convolve(result, base, out_max) : base;
            have_result = true;
        }
        i >>= 1U;
        if (i > 0) base = convolve(base, base, out_max);
    }
    return result;
}

} // namespace psdbp
