#pragma once

#include "psdbp/kernel.hpp"
#include "psdbp/spectral.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace psdbp {

/// The chain conditioned on eventual non-extinction, restricted to 1..z_max.
struct QProcess {
    BandedMatrix q_up;                // row-stochastic
    std::vector<double> stationary;   // u_z v_z
    double rho = 0.0;
    std::vector<double> u;
    std::vector<double> v;

    std::size_t z_max() const { return q_up.size(); }
};

/// Q_up(i, j) = Q(i, j) v_j / (rho v_i), with rho v_i taken as (Q v)_i so
/// that rows sum to 1 to rounding. Throws SpectralIntegrityError if
/// some v_i is not strictly positive.
QProcess q_transition(const SpectralTriple& triple, const TruncatedKernel& kernel);
QProcess q_transition(const SpectralTriple& triple, const BandedMatrix& q);

/// Conditioned mean and variance per individual at state z (1-based).
double m_up(const QProcess& qp, std::size_t z);
double sigma2_up(const QProcess& qp, std::size_t z);

/// Everything the estimators and the covariance need at one (model, theta,
/// z_max), from a single kernel build and spectral solve. Vectors are
/// indexed by z - 1.
struct ConditionedCurves {
    std::size_t z_max = 0;
    double rho = 0.0;
    double decay = 0.0;   // 1 - rho
    std::vector<double> m;
    std::vector<double> m_up;
    std::vector<double> sigma2_up;
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> stationary;
};

/// Builds the curves from an explicit kernel. Throws
/// ModelMisspecificationError when the kernel has no route to extinction.
ConditionedCurves conditioned_curves(const TruncatedKernel& kernel, const SpectralOptions& options = {});

/// Memoized on (model, theta to 12 significant digits, z_max). Safe to call
/// concurrently.
std::shared_ptr<const ConditionedCurves> conditioned_curves(const OffspringModel& model, const Theta& theta,
                                                            std::size_t z_max);

/// m_up(z, theta) for z = 1..z_max.
std::vector<double> m_up_curve(const OffspringModel& model, const Theta& theta, std::size_t z_max);

/// Default central-difference step: max(1e-4 |theta_j|, 1e-6).
std::vector<double> default_fd_steps(const Theta& theta);

/// Central-difference gradient of m_up in theta. Result is z_max rows of
/// d entries. Throws DomainError if theta +/- h leaves the parameter space.
std::vector<std::vector<double>> grad_m_up(const OffspringModel& model, const Theta& theta, std::size_t z_max,
                                           std::span<const double> h = {});

void clear_curve_cache();
std::size_t curve_cache_size();

/// Cheap repeated m_up evaluation along an optimizer path: only the right
/// Perron vector is computed, warm-started from the previous call (resized
/// when z_max changes). Not thread-safe; use one per thread.
class MupEvaluator {
  public:
    explicit MupEvaluator(OffspringModel model) : model_(std::move(model)) {}

    /// m_up at every state 1..z_max.
    const std::vector<double>& operator()(const Theta& theta, std::size_t z_max);

    std::size_t evaluations() const { return evaluations_; }

  private:
    OffspringModel model_;
    std::vector<double> warm_;
    std::vector<double> out_;
    std::size_t evaluations_ = 0;
};

/// m_up from Q and a positive right Perron vector. Rows are normalized by
/// (Q v)_z, which equals rho v_z at the eigenvector and keeps each
/// conditioned row exactly stochastic.
std::vector<double> m_up_from_right(const BandedMatrix& q, std::span<const double> v);

} // namespace psdbp
