#include "psdbp/estimation.hpp"

#include "psdbp/qprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace psdbp {

void SufficientStats::add(std::span<const std::uint64_t> states) {
    if (states.size() < 2) throw DomainError("a trajectory needs at least two observations");
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
        const std::uint64_t z = states[i];
        if (z == 0) continue;
        ++visits[z];
        successor_sum[z] += states[i + 1];
        total_parents += z;
        ++n_steps;
    }
}

void SufficientStats::merge(const SufficientStats& other) {
    for (const auto& [z, c] : other.visits) visits[z] += c;
    for (const auto& [z, s] : other.successor_sum) successor_sum[z] += s;
    total_parents += other.total_parents;
    n_steps += other.n_steps;
}

SufficientStats sufficient_stats(std::span<const std::uint64_t> states) {
    SufficientStats s;
    s.add(states);
    return s;
}

SufficientStats sufficient_stats(std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw DomainError("no trajectories supplied");
    SufficientStats s;
    for (const Trajectory& t : trajectories) s.add(t.states);
    return s;
}

SufficientStats sufficient_stats(const std::vector<std::vector<std::uint64_t>>& trajectories) {
    if (trajectories.empty()) throw DomainError("no trajectories supplied");
    SufficientStats s;
    for (const auto& t : trajectories) s.add(t);
    return s;
}

double mle_m(const SufficientStats& stats, std::uint64_t z) {
    if (z < 1) throw DomainError("mle_m needs z >= 1");
    const auto it = stats.visits.find(z);
    if (it == stats.visits.end()) return 0.0;
    const double succ = static_cast<double>(stats.successor_sum.at(z));
    return succ / (static_cast<double>(z) * static_cast<double>(it->second));
}

WeightScheme WeightScheme::capped(std::uint64_t z_star) {
    if (z_star < 1) throw DomainError("weight cap z* must be at least 1");
    return {WeightKind::Capped, z_star};
}

std::string WeightScheme::name() const {
    switch (kind) {
    case WeightKind::W1: return "w1";
    case WeightKind::W2: return "w2";
    case WeightKind::Capped: return "capped:" + std::to_string(cap);
    }
    return "?";
}

WeightScheme parse_weight_scheme(const std::string& s) {
    if (s == "w1" || s == "W1") return WeightScheme::w1();
    if (s == "w2" || s == "W2") return WeightScheme::w2();
    const std::string prefix = "capped:";
    if (s.rfind(prefix, 0) == 0) {
        try {
            return WeightScheme::capped(std::stoull(s.substr(prefix.size())));
        } catch (const std::logic_error&) {
        }
    }
    throw DomainError("unknown weight scheme '" + s + "' (expected w1, w2 or capped:<z*>)");
}

std::map<std::uint64_t, double> weights(const SufficientStats& stats, const WeightScheme& scheme) {
    if (stats.empty()) throw DomainError("weights of empty statistics");
    std::map<std::uint64_t, double> w;
    switch (scheme.kind) {
    case WeightKind::W1:
        for (const auto& [z, c] : stats.visits) w[z] = static_cast<double>(c) / static_cast<double>(stats.n_steps);
        break;
    case WeightKind::W2:
        for (const auto& [z, c] : stats.visits)
            w[z] = static_cast<double>(z) * static_cast<double>(c) / static_cast<double>(stats.total_parents);
        break;
    case WeightKind::Capped: {
        if (scheme.cap < 1) throw DomainError("weight cap z* must be at least 1");
        std::uint64_t mass = 0;
        for (const auto& [z, c] : stats.visits)
            if (z <= scheme.cap) mass += z * c;
        if (mass == 0) throw InsufficientDataError("no visited state lies at or below the weight cap");
        for (const auto& [z, c] : stats.visits)
            if (z <= scheme.cap) w[z] = static_cast<double>(z) * static_cast<double>(c) / static_cast<double>(mass);
        break;
    }
    }
    return w;
}

std::string target_name(TargetMode mode) { return mode == TargetMode::QProcess ? "qprocess" : "raw"; }

TargetMode parse_target(const std::string& s) {
    if (s == "qprocess" || s == "q" || s == "mup") return TargetMode::QProcess;
    if (s == "raw" || s == "m") return TargetMode::Raw;
    throw DomainError("unknown target '" + s + "' (expected qprocess or raw)");
}

std::size_t estimation_z_max(double K, std::uint64_t max_observed) {
    const double cap = 4.0 * static_cast<double>(max_observed);
    const auto from_k = static_cast<std::size_t>(std::ceil(std::min(4.0 * std::max(K, 0.0), cap)));
    return std::max({from_k, static_cast<std::size_t>(2 * max_observed), std::size_t{64}});
}

namespace {

// Objective along one optimizer path. Holds its own warm-started m_up
// evaluator, so separate instances never interact.
class ObjectiveFunction {
  public:
    ObjectiveFunction(const SufficientStats& stats, const WeightScheme& scheme, TargetMode mode,
                      const OffspringModel& model, std::optional<std::size_t> z_max)
        : mode_(mode), model_(model), z_max_(z_max), max_obs_(stats.max_state()), mup_(model) {
        for (const auto& [z, w] : weights(stats, scheme)) terms_.push_back({z, w, mle_m(stats, z)});
        if (z_max_ && *z_max_ < max_obs_) {
            throw DomainError("z_max " + std::to_string(*z_max_) + " is below the largest visited state " +
                              std::to_string(max_obs_));
        }
    }

    std::size_t z_max_at(const Theta& theta) const {
        return z_max_ ? *z_max_ : estimation_z_max(theta.K(), max_obs_);
    }

    /// Throws on invalid theta or solver failure.
    double evaluate(const Theta& theta) {
        validate(model_, theta);
        double sum = 0.0;
        if (mode_ == TargetMode::Raw) {
            for (const Term& t : terms_) {
                const double d = t.m_hat - offspring_mean(model_, static_cast<double>(t.z), theta);
                sum += t.w * d * d;
            }
            return sum;
        }
        const std::vector<double>& m = mup_(theta, z_max_at(theta));
        for (const Term& t : terms_) {
            const double d = t.m_hat - m[t.z - 1];
            sum += t.w * d * d;
        }
        return sum;
    }

    double operator()(const Theta& theta) {
        try {
            return evaluate(theta);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    }

  private:
    struct Term {
        std::uint64_t z;
        double w;
        double m_hat;
    };
    std::vector<Term> terms_;
    TargetMode mode_;
    OffspringModel model_;
    std::optional<std::size_t> z_max_;
    std::uint64_t max_obs_;
    MupEvaluator mup_;
};

Theta from_unit(std::span<const double> x, const ParameterBounds& b) {
    Theta t;
    t.values.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double u = std::clamp(x[j], 0.0, 1.0);
        t.values[j] = b.log_scale[j] ? std::exp(std::log(b.lo[j]) + u * (std::log(b.hi[j]) - std::log(b.lo[j])))
                                     : b.lo[j] + u * (b.hi[j] - b.lo[j]);
    }
    return t;
}

void check_bounds(const ParameterBounds& b, std::size_t d) {
    if (b.lo.size() != d || b.hi.size() != d || b.log_scale.size() != d)
        throw DomainError("bounds do not match the parameter dimension");
    for (std::size_t j = 0; j < d; ++j) {
        if (!(b.lo[j] < b.hi[j])) throw DomainError("empty parameter box");
        if (b.log_scale[j] && !(b.lo[j] > 0.0)) throw DomainError("log-scaled bound must be positive");
    }
}

} // namespace

double objective(const Theta& theta, const SufficientStats& stats, const WeightScheme& scheme, TargetMode mode,
                 const OffspringModel& model, std::size_t z_max) {
    ObjectiveFunction f(stats, scheme, mode, model, z_max);
    return f.evaluate(theta);
}

double objective(const Theta& theta, const SufficientStats& stats, const WeightScheme& scheme, TargetMode mode,
                 const OffspringModel& model) {
    ObjectiveFunction f(stats, scheme, mode, model, std::nullopt);
    return f.evaluate(theta);
}

ParameterBounds default_bounds(const OffspringModel& model, const SufficientStats& stats) {
    if (stats.empty()) throw DomainError("bounds need at least one visited state");
    ParameterBounds b;
    for (ParamKind k : parameter_kinds(model)) {
        switch (k) {
        case ParamKind::Capacity:
            b.lo.push_back(1.0);
            b.hi.push_back(std::max(20.0 * static_cast<double>(stats.max_state()), 2.0));
            b.log_scale.push_back(true);
            break;
        case ParamKind::Probability:
            b.lo.push_back(0.01);
            b.hi.push_back(0.99);
            b.log_scale.push_back(false);
            break;
        case ParamKind::Mean:
            b.lo.push_back(1.01);
            b.hi.push_back(50.0);
            b.log_scale.push_back(false);
            break;
        }
    }
    return b;
}

EstimateResult estimate(const SufficientStats& stats, const OffspringModel& model, const WeightScheme& scheme,
                        TargetMode mode, const EstimateOptions& options) {
    if (stats.empty()) throw DomainError("estimation needs at least one visited state");
    const std::size_t d = parameter_count(model);
    const ParameterBounds bounds = options.bounds ? *options.bounds : default_bounds(model, stats);
    check_bounds(bounds, d);
    if (options.grid_points < 1) throw DomainError("grid_points must be at least 1");
    const std::optional<std::size_t> fixed_z = mode == TargetMode::QProcess ? options.z_max : std::nullopt;
    // Construct once up front so bad inputs fail before any work.
    ObjectiveFunction probe(stats, scheme, mode, model, fixed_z);

    // Lattice of starts, first coordinate varying slowest.
    const std::size_t g = options.grid_points;
    std::size_t n_starts = 1;
    for (std::size_t j = 0; j < d; ++j) n_starts *= g;
    std::vector<std::vector<double>> starts(n_starts, std::vector<double>(d));
    for (std::size_t s = 0; s < n_starts; ++s) {
        std::size_t rem = s;
        for (std::size_t j = d; j-- > 0;) {
            starts[s][j] = (static_cast<double>(rem % g) + 0.5) / static_cast<double>(g);
            rem /= g;
        }
    }

    std::vector<MultistartEntry> log(n_starts);
    const auto ns = static_cast<std::ptrdiff_t>(n_starts);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t s = 0; s < ns; ++s) {
        ObjectiveFunction f(stats, scheme, mode, model, fixed_z);
        MultistartEntry& e = log[static_cast<std::size_t>(s)];
        e.start = from_unit(starts[static_cast<std::size_t>(s)], bounds);
        e.endpoint = e.start;
        e.start_value = f(e.start);
        e.value = e.start_value;
    }

    // Refine from the best grid points (ties: smaller K first).
    std::vector<std::size_t> order(n_starts);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (log[a].start_value != log[b].start_value) return log[a].start_value < log[b].start_value;
        return log[a].start.K() < log[b].start.K();
    });
    const std::size_t n_refine = options.refine_top == 0 ? n_starts : std::min(options.refine_top, n_starts);
    std::vector<std::size_t> evaluations(n_refine, 0);
    const auto nr = static_cast<std::ptrdiff_t>(n_refine);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < nr; ++r) {
        const std::size_t s = order[static_cast<std::size_t>(r)];
        ObjectiveFunction f(stats, scheme, mode, model, fixed_z);
        const NelderMeadResult nm = nelder_mead(
            [&](std::span<const double> x) { return f(from_unit(x, bounds)); }, starts[s], options.simplex);
        MultistartEntry& e = log[s];
        e.refined = true;
        e.converged = nm.converged;
        e.iterations = nm.iterations;
        if (nm.value <= e.start_value) {
            e.endpoint = from_unit(nm.x, bounds);
            e.value = nm.value;
        }
        evaluations[static_cast<std::size_t>(r)] = nm.evaluations;
    }

    std::size_t best = n_starts;
    for (std::size_t s = 0; s < n_starts; ++s) {
        if (!std::isfinite(log[s].value)) continue;
        if (best == n_starts) {
            best = s;
            continue;
        }
        const double fb = log[best].value;
        const double fs = log[s].value;
        const double tie = 1e-12 * std::max(std::abs(fb), std::abs(fs));
        if (fs < fb - tie || (std::abs(fs - fb) <= tie && log[s].endpoint.K() < log[best].endpoint.K())) best = s;
    }
    if (best == n_starts) {
        throw EstimationNonConvergence("the objective is not finite at any start", std::move(log));
    }
    const bool any_converged =
        std::any_of(log.begin(), log.end(), [](const MultistartEntry& e) { return e.refined && e.converged; });
    if (!any_converged) {
        throw EstimationNonConvergence("no simplex run met the tolerance within its iteration cap", std::move(log));
    }

    EstimateResult res;
    res.theta_hat = log[best].endpoint;
    res.mode = mode;
    res.scheme = scheme;
    res.iterations = log[best].iterations;
    res.converged = log[best].refined && log[best].converged;
    res.evaluations = n_starts + std::accumulate(evaluations.begin(), evaluations.end(), std::size_t{0});
    res.z_max = mode == TargetMode::QProcess ? probe.z_max_at(res.theta_hat) : 0;
    // Report the value of the plain (cold-start) objective at theta_hat.
    res.objective = probe.evaluate(res.theta_hat);
    res.multistart_log = std::move(log);
    return res;
}

} // namespace psdbp
