#pragma once

#include "psdbp/estimation.hpp"
#include "psdbp/offspring.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace psdbp {

using Matrix = std::vector<std::vector<double>>;

/// Standard normal quantile: Acklam's rational approximation (relative
/// error below 1.2e-9) polished by one Halley step against erfc. Returns
/// -inf / +inf at p = 0 / 1.
double normal_quantile(double p);

/// Chi-square quantile with two degrees of freedom: -2 log(1 - p).
double chi2_2_quantile(double p);

/// gamma(z) = sigma2_up(z) / (u_z v_z), z = 1..z_max. States with
/// u_z v_z == 0 exactly (never visited by the conditioned chain, e.g. odd
/// sizes under binary splitting) get +inf. Throws TailTruncationError when
/// u_z v_z is positive but below 1e-300.
std::vector<double> gamma_curve(const OffspringModel& model, const Theta& theta0, std::size_t z_max);

/// Limit of the weights under the conditioned chain: u v (W1),
/// z u v / sum k u_k v_k (W2), the latter restricted to z <= z* and
/// renormalized (Capped).
std::vector<double> limit_weights(std::span<const double> stationary, const WeightScheme& scheme);

struct Sandwich {
    Matrix eta;
    Matrix zeta;
    Matrix beta;
};

/// eta = 2 sum w g g^T, zeta = 4 sum w2gamma g g^T, beta = eta^-1 zeta eta^-1
/// (two symmetric solves). w2gamma[z] is w_z^2 gamma(z). Throws
/// IdentifiabilityError when the smallest eigenvalue of eta is below
/// 1e-10 times the largest.
Sandwich sandwich(std::span<const double> w, std::span<const double> w2gamma, const Matrix& grad);

struct CovarianceReport {
    Theta theta;
    WeightScheme scheme;
    std::size_t z_max = 0;
    std::vector<double> gamma;
    std::vector<double> weight_limit;
    Matrix grad;
    Matrix eta;
    Matrix zeta;
    Matrix beta;
    /// Limit weight sitting on the top state, which absorbs the mass above
    /// z_max; a proxy for the truncated tail of the sums.
    double tail_bound = 0.0;
};

/// Asymptotic covariance of sqrt(n) (theta_hat - theta) at `theta`, which is
/// theta0 in the theory; pass an estimate for a plug-in version.
CovarianceReport covariance(const OffspringModel& model, const Theta& theta, const WeightScheme& scheme,
                            std::size_t z_max, std::span<const double> fd_steps = {});

/// theta_hat_j -/+ q_{(1+level)/2} sqrt(beta_jj / n).
std::vector<std::pair<double, double>> confidence_interval(const Theta& theta_hat, const Matrix& beta, double n,
                                                           double level);

struct EllipsePoint {
    double phi;
    double x;
    double y;
};

/// Boundary theta_hat + A (cos phi, sin phi) / sqrt(n) with
/// A A^T = chi2_2_quantile(level) beta, at `points` equally spaced angles.
std::vector<EllipsePoint> confidence_ellipse(const Theta& theta_hat, const Matrix& beta, double n, double level,
                                             std::size_t points);

} // namespace psdbp
