#include "psdbp/optimizer.hpp"

#include "psdbp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace psdbp {

namespace {

struct Vertex {
    std::vector<double> x;
    double f;
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double diameter(const std::vector<Vertex>& s) {
    double d = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i)
        for (std::size_t k = 0; k < s[i].x.size(); ++k) d = std::max(d, std::abs(s[i].x[k] - s[0].x[k]));
    return d;
}

} // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options) {
    const std::size_t d = x0.size();
    if (d == 0) throw DomainError("nelder_mead needs at least one coordinate");
    NelderMeadResult res;
    auto eval = [&](std::vector<double>& x) {
        for (double& xi : x) xi = clamp01(xi);
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<Vertex> s;
    s.reserve(d + 1);
    s.push_back({x0, eval(x0)});
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> x = s[0].x;
        x[k] += (x[k] + options.initial_step <= 1.0) ? options.initial_step : -options.initial_step;
        const double fx = eval(x);
        s.push_back({std::move(x), fx});
    }
    auto order = [&] {
        std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    };
    order();

    std::vector<double> centroid(d);
    auto along = [&](double t) {
        std::vector<double> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = centroid[k] + t * (s[d].x[k] - centroid[k]);
        return x;
    };

    while (res.iterations < options.max_iter && diameter(s) >= options.tol) {
        ++res.iterations;
        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < d; ++k) centroid[k] += s[i].x[k] / static_cast<double>(d);

        std::vector<double> xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < s[0].f) {
            std::vector<double> xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) s[d] = {std::move(xe), fe};
            else s[d] = {std::move(xr), fr};
        } else if (fr < s[d - 1].f) {
            s[d] = {std::move(xr), fr};
        } else {
            const bool outside = fr < s[d].f;
            std::vector<double> xc = along(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : s[d].f)) {
                s[d] = {std::move(xc), fc};
            } else {
                for (std::size_t i = 1; i <= d; ++i) {
                    for (std::size_t k = 0; k < d; ++k) s[i].x[k] = s[0].x[k] + 0.5 * (s[i].x[k] - s[0].x[k]);
                    s[i].f = eval(s[i].x);
                }
            }
        }
        order();
    }
    res.converged = diameter(s) < options.tol;
    res.x = s[0].x;
    res.value = s[0].f;
    return res;
}

} // namespace psdbp
