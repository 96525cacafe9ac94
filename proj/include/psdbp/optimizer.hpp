#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace psdbp {

struct NelderMeadOptions {
    double tol = 1e-8;            // simplex diameter in unit-box coordinates
    std::size_t max_iter = 2000;
    double initial_step = 0.05;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead on the unit box [0,1]^d. Trial points are clamped into the
/// box. Non-finite objective values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options = {});

} // namespace psdbp
