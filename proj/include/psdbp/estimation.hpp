#pragma once

#include "psdbp/errors.hpp"
#include "psdbp/offspring.hpp"
#include "psdbp/optimizer.hpp"
#include "psdbp/simulator.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psdbp {

/// Per-state transition counts of one trajectory or of several pooled
/// ones. Steps leaving state 0 are never counted.
struct SufficientStats {
    std::map<std::uint64_t, std::uint64_t> visits;          // j_n(z)
    std::map<std::uint64_t, std::uint64_t> successor_sum;   // sum of Z_{i+1} over Z_i = z
    std::uint64_t total_parents = 0;                        // sum of Z_i, i < n
    std::uint64_t n_steps = 0;                              // steps taken from positive states

    std::uint64_t max_state() const { return visits.empty() ? 0 : visits.rbegin()->first; }
    bool empty() const { return visits.empty(); }
    void add(std::span<const std::uint64_t> states);
    void merge(const SufficientStats& other);
    bool operator==(const SufficientStats&) const = default;
};

SufficientStats sufficient_stats(std::span<const std::uint64_t> states);
SufficientStats sufficient_stats(std::span<const Trajectory> trajectories);
SufficientStats sufficient_stats(const std::vector<std::vector<std::uint64_t>>& trajectories);

/// successor_sum(z) / (z visits(z)), and 0 for an unvisited z.
double mle_m(const SufficientStats& stats, std::uint64_t z);

enum class WeightKind { W1, W2, Capped };

struct WeightScheme {
    WeightKind kind = WeightKind::W2;
    std::uint64_t cap = 0;   // z*, Capped only

    static WeightScheme w1() { return {WeightKind::W1, 0}; }
    static WeightScheme w2() { return {WeightKind::W2, 0}; }
    static WeightScheme capped(std::uint64_t z_star);
    std::string name() const;
    bool operator==(const WeightScheme&) const = default;
};

WeightScheme parse_weight_scheme(const std::string& s);

/// W1: visits / n_steps. W2: z visits / total_parents. Capped: W2 on
/// z <= z*, renormalized.
std::map<std::uint64_t, double> weights(const SufficientStats& stats, const WeightScheme& scheme);

/// QProcess fits m_up (the C-consistent estimator); Raw fits m (its
/// counterpart).
enum class TargetMode { QProcess, Raw };
std::string target_name(TargetMode mode);
TargetMode parse_target(const std::string& s);

/// Truncation used while estimating when none is fixed:
/// max(min(ceil(4 K), 4 max_obs), 2 max_obs, 64).
std::size_t estimation_z_max(double K, std::uint64_t max_observed);

/// Weighted squared distance between m-hat and the target over visited
/// states. z_max (QProcess mode) must cover every visited state.
double objective(const Theta& theta, const SufficientStats& stats, const WeightScheme& scheme, TargetMode mode,
                 const OffspringModel& model, std::size_t z_max);
/// Same, with z_max from estimation_z_max().
double objective(const Theta& theta, const SufficientStats& stats, const WeightScheme& scheme, TargetMode mode,
                 const OffspringModel& model);

struct ParameterBounds {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<bool> log_scale;
};

/// K in [1, 20 max_obs] (log scale), probabilities in [0.01, 0.99], means
/// in [1.01, 50].
ParameterBounds default_bounds(const OffspringModel& model, const SufficientStats& stats);

struct EstimateOptions {
    std::optional<ParameterBounds> bounds;
    std::size_t grid_points = 5;      // per coordinate
    std::size_t refine_top = 0;       // simplex runs from the best grid points; 0 = all
    NelderMeadOptions simplex;
    std::optional<std::size_t> z_max; // fixed truncation instead of the rule
};

struct MultistartEntry {
    Theta start;
    Theta endpoint;
    double start_value = 0.0;
    double value = 0.0;
    std::size_t iterations = 0;
    bool refined = false;
    bool converged = false;
};

struct EstimateResult {
    Theta theta_hat;
    double objective = 0.0;
    TargetMode mode = TargetMode::QProcess;
    WeightScheme scheme;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    std::size_t z_max = 0;   // truncation at theta_hat (QProcess mode)
    std::vector<MultistartEntry> multistart_log;
};

/// Every simplex run stopped on its iteration cap.
class EstimationNonConvergence : public NonConvergenceError {
  public:
    EstimationNonConvergence(const std::string& what, std::vector<MultistartEntry> log)
        : NonConvergenceError(what, 0.0, 0.0), log_(std::move(log)) {}
    const std::vector<MultistartEntry>& multistart_log() const noexcept { return log_; }

  private:
    std::vector<MultistartEntry> log_;
};

/// Multistart bounded Nelder-Mead. Starts form a grid_points^d lattice at
/// cell centres of the box (log-spaced for K). Ties between endpoints go
/// to the smaller K.
EstimateResult estimate(const SufficientStats& stats, const OffspringModel& model, const WeightScheme& scheme,
                        TargetMode mode, const EstimateOptions& options = {});

} // namespace psdbp
