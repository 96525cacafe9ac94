#include "band.hpp"

#include <algorithm>
#include <cmath>

namespace psdbp::detail {

void trim_band(Band& band, double trim) {
    std::size_t lo = 0;
    std::size_t hi = band.values.size();
    while (lo < hi && band.values[lo] < trim) ++lo;
    while (hi > lo && band.values[hi - 1] < trim) --hi;
    if (lo == 0 && hi == band.values.size()) return;
    std::vector<double> kept(band.values.begin() + static_cast<std::ptrdiff_t>(lo),
                             band.values.begin() + static_cast<std::ptrdiff_t>(hi));
    band.first += lo;
    band.values = std::move(kept);
}

Band binomial_band(std::uint64_t n, double p, double trim) {
    Band out;
    if (n == 0 || p <= 0.0) {
        out.first = 0;
        out.values = {1.0};
        return out;
    }
    if (p >= 1.0) {
        out.first = n;
        out.values = {1.0};
        return out;
    }
    const double nn = static_cast<double>(n);
    auto mode = static_cast<std::uint64_t>(std::floor((nn + 1.0) * p));
    mode = std::min(mode, n);
    const double md = static_cast<double>(mode);
    const double log_mode = std::lgamma(nn + 1.0) - std::lgamma(md + 1.0) - std::lgamma(nn - md + 1.0) +
                            md * std::log(p) + (nn - md) * std::log1p(-p);
    const double odds = p / (1.0 - p);

    std::vector<double> up{std::exp(log_mode)};
    for (std::uint64_t j = mode; j < n; ++j) {
        const double next = up.back() * static_cast<double>(n - j) / static_cast<double>(j + 1) * odds;
        if (next < trim) break;
        up.push_back(next);
    }
    std::vector<double> down;
    double cur = up.front();
    for (std::uint64_t j = mode; j > 0; --j) {
        cur = cur * static_cast<double>(j) / static_cast<double>(n - j + 1) / odds;
        if (cur < trim) break;
        down.push_back(cur);
    }
    out.first = mode - down.size();
    out.values.reserve(down.size() + up.size());
    out.values.assign(down.rbegin(), down.rend());
    out.values.insert(out.values.end(), up.begin(), up.end());
    double total = 0.0;
    for (double v : out.values) total += v;
    for (double& v : out.values) v /= total;
    return out;
}

Band convolve_band(const Band& a, const Band& b, std::size_t limit) {
    Band out;
    if (a.empty() || b.empty()) {
        out.tail = 1.0;
        return out;
    }
    const std::size_t first = a.first + b.first;
    if (first > limit) {
        out.first = limit;
        double la = 0.0;
        double lb = 0.0;
        for (double v : a.values) la += v;
        for (double v : b.values) lb += v;
        out.tail = la * lb + a.tail + la * b.tail;
        return out;
    }
    const std::size_t last = std::min(limit, a.last() + b.last());
    out.first = first;
    out.values.assign(last - first + 1, 0.0);
    const std::size_t nb = b.values.size();
    double a_listed = 0.0;
    double overflow = 0.0;

    // above[t]: listed mass of b at offsets > t within its window.
    std::vector<double> above(nb, 0.0);
    for (std::size_t t = nb - 1; t-- > 0;) above[t] = above[t + 1] + b.values[t + 1];
    const double b_listed = above[0] + b.values[0];

    for (std::size_t xi = 0; xi < a.values.size(); ++xi) {
        const double ax = a.values[xi];
        a_listed += ax;
        if (ax == 0.0) continue;
        const std::size_t x = a.first + xi;
        if (x + b.first > limit) {
            overflow += ax * b_listed;
            continue;
        }
        // b offsets with x + b.first + t <= limit
        const std::size_t tmax = std::min(nb - 1, limit - x - b.first);
        double* dst = out.values.data() + (x + b.first - first);
        const double* src = b.values.data();
        for (std::size_t t = 0; t <= tmax; ++t) dst[t] += ax * src[t];
        if (tmax + 1 < nb) overflow += ax * above[tmax];
    }
    out.tail = overflow + a.tail + a_listed * b.tail;
    trim_band(out);
    return out;
}

void axpy_band(Band& dst, double w, const Band& src) {
    dst.tail += w * src.tail;
    if (src.empty() || w == 0.0) return;
    if (dst.empty()) {
        dst.first = src.first;
        dst.values.assign(src.values.size(), 0.0);
    } else if (src.first < dst.first || src.last() > dst.last()) {
        const std::size_t nf = std::min(dst.first, src.first);
        const std::size_t nl = std::max(dst.last(), src.last());
        std::vector<double> grown(nl - nf + 1, 0.0);
        std::copy(dst.values.begin(), dst.values.end(), grown.begin() + static_cast<std::ptrdiff_t>(dst.first - nf));
        dst.first = nf;
        dst.values = std::move(grown);
    }
    double* d = dst.values.data() + (src.first - dst.first);
    for (std::size_t k = 0; k < src.values.size(); ++k) d[k] += w * src.values[k];
}

} // namespace psdbp::detail
