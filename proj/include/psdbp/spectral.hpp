#pragma once

#include "psdbp/kernel.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace psdbp {

/// Perron root rho with left vector u (u^T 1 = 1, the quasi-stationary
/// distribution) and right vector v (u^T v = 1).
struct SpectralTriple {
    double rho = 0.0;
    /// 1 - rho. For a TruncatedKernel this is u^T (extinction + lost mass),
    /// which keeps its relative accuracy when rho is within 1e-16 of 1.
    double decay = 0.0;
    std::vector<double> u;
    std::vector<double> v;
    double left_residual = 0.0;   // ||u^T Q - rho u^T||_inf
    double right_residual = 0.0;  // ||Q v - rho v||_inf
    std::size_t iterations = 0;
};

struct SpectralOptions {
    double tol = 1e-12;
    std::size_t max_iter = 100000;
};

/// Power iteration on Q and Q^T from the uniform vector. Throws
/// ReducibilityError on an all-zero row and NonConvergenceError when
/// max_iter is exhausted.
SpectralTriple spectral(const BandedMatrix& q, const SpectralOptions& options = {});
SpectralTriple spectral(const TruncatedKernel& kernel, const SpectralOptions& options = {});

/// Test oracle: repeated squaring of Q (up to 2^40) with log-norm tracking.
/// rho comes from the growth rate of the norms, u and v from the rank-one
/// limit. Dense; at most 64 states.
SpectralTriple spectral_oracle(const BandedMatrix& q);

/// Right Perron pair only, scaled so max(v) = 1. `start` (when non-empty and
/// of matching size) replaces the uniform starting vector.
struct RightPerron {
    double rho = 0.0;
    std::vector<double> v;
    double residual = 0.0;
    std::size_t iterations = 0;
};

RightPerron right_perron(const BandedMatrix& q, const SpectralOptions& options = {},
                         std::span<const double> start = {});

/// Same pair by inverse iteration on (sigma I - Q), with sigma just above
/// the Collatz-Wielandt upper bound max_i (Q x)_i / x_i of the start (or of
/// a few power steps from the uniform vector). One dense LU per call, so
/// it pays off when the spectral gap is small; same stopping rule as
/// right_perron, which it falls back to if the shifted solve stalls.
RightPerron right_perron_shift_invert(const BandedMatrix& q, const SpectralOptions& options = {},
                                      std::span<const double> start = {});

} // namespace psdbp
