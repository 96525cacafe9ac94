#include "psdbp/offspring.hpp"

#include "band.hpp"
#include "psdbp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace psdbp {

namespace {

constexpr double kGeometricTail = 1e-14;

std::string fmt_theta(const Theta& theta) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << theta.values[i];
    os << ')';
    return os.str();
}

std::vector<double> normalized_empirical(const std::vector<double>& b) {
    if (b.empty()) throw ParameterDomainError("empirical base distribution is empty");
    double s = 0.0;
    for (double x : b) {
        if (!(x >= 0.0)) throw ParameterDomainError("empirical base has a negative entry");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-6) throw ParameterDomainError("empirical base does not sum to 1");
    std::vector<double> out(b);
    for (double& x : out) x /= s;
    return out;
}

double empirical_mean(const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 1; k < b.size(); ++k) m += static_cast<double>(k) * b[k];
    return m;
}

} // namespace

OffspringModel OffspringModel::zero_inflated(Family family, BaseKind base) {
    if (is_robin(family)) throw ParameterDomainError("zero_inflated() needs a BevertonHolt/Ricker family");
    OffspringModel m;
    m.family = family;
    m.base = base;
    return m;
}

OffspringModel OffspringModel::robin(Family family, BaseKind base) {
    if (!is_robin(family)) throw ParameterDomainError("robin() needs a robin family");
    if (base != BaseKind::Empirical && base != BaseKind::Binomial)
        throw ParameterDomainError("robin families use an empirical or binomial base");
    OffspringModel m;
    m.family = family;
    m.base = base;
    if (base == BaseKind::Empirical) m.empirical = kRobinEmpiricalBase;
    return m;
}

std::string family_name(Family f) {
    switch (f) {
    case Family::BevertonHolt: return "bh";
    case Family::Ricker: return "ricker";
    case Family::RobinBevertonHolt: return "robin-bh";
    case Family::RobinRicker: return "robin-ricker";
    }
    return "?";
}

std::string base_name(BaseKind b) {
    switch (b) {
    case BaseKind::Geometric: return "geometric";
    case BaseKind::BinarySplitting: return "binary";
    case BaseKind::Binomial: return "binomial";
    case BaseKind::Empirical: return "empirical";
    }
    return "?";
}

Family parse_family(const std::string& s) {
    if (s == "bh" || s == "beverton-holt") return Family::BevertonHolt;
    if (s == "ricker") return Family::Ricker;
    if (s == "robin-bh") return Family::RobinBevertonHolt;
    if (s == "robin-ricker") return Family::RobinRicker;
    throw ParameterDomainError("unknown family '" + s + "'");
}

BaseKind parse_base(const std::string& s) {
    if (s == "geometric") return BaseKind::Geometric;
    if (s == "binary" || s == "binary-splitting") return BaseKind::BinarySplitting;
    if (s == "binomial") return BaseKind::Binomial;
    if (s == "empirical") return BaseKind::Empirical;
    throw ParameterDomainError("unknown base distribution '" + s + "'");
}

std::vector<ParamKind> parameter_kinds(const OffspringModel& model) {
    if (is_robin(model.family)) return {ParamKind::Capacity, ParamKind::Probability};
    switch (model.base) {
    case BaseKind::Geometric: return {ParamKind::Capacity, ParamKind::Mean};
    case BaseKind::BinarySplitting:
    case BaseKind::Binomial: return {ParamKind::Capacity, ParamKind::Probability};
    case BaseKind::Empirical: return {ParamKind::Capacity};
    }
    return {ParamKind::Capacity};
}

std::size_t parameter_count(const OffspringModel& model) { return parameter_kinds(model).size(); }

std::vector<std::string> parameter_names(const OffspringModel& model) {
    if (is_robin(model.family)) return {"K", "v"};
    switch (model.base) {
    case BaseKind::Geometric: return {"K", "mu"};
    case BaseKind::BinarySplitting: return {"K", "v"};
    case BaseKind::Binomial: return {"K", "p"};
    case BaseKind::Empirical: return {"K"};
    }
    return {"K"};
}

void validate(const OffspringModel& model, const Theta& theta) {
    const auto kinds = parameter_kinds(model);
    if (theta.size() != kinds.size()) {
        throw ParameterDomainError("theta has " + std::to_string(theta.size()) + " components, " +
                                   family_name(model.family) + "/" + base_name(model.base) + " needs " +
                                   std::to_string(kinds.size()));
    }
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const double x = theta.values[i];
        const bool ok = (kinds[i] == ParamKind::Capacity && x > 0.0 && std::isfinite(x)) ||
                        (kinds[i] == ParamKind::Probability && x > 0.0 && x <= 1.0) ||
                        (kinds[i] == ParamKind::Mean && x > 1.0 && std::isfinite(x));
        if (!ok) throw ParameterDomainError("theta " + fmt_theta(theta) + " outside the parameter space");
    }
    if (is_robin(model.family)) {
        if (!(model.death > 0.0 && model.death < 1.0)) throw ParameterDomainError("robin death rate must lie in (0,1)");
        if (!(model.binomial_p > 0.0 && model.binomial_p <= 1.0) || model.binomial_trials < 1)
            throw ParameterDomainError("robin binomial constants invalid");
    }
    if (model.base == BaseKind::Binomial && model.binomial_trials < 1)
        throw ParameterDomainError("binomial base needs at least one trial");
    if (model.base == BaseKind::Empirical) {
        const auto b = normalized_empirical(model.empirical);
        if (!is_robin(model.family) && !(empirical_mean(b) > 1.0))
            throw ParameterDomainError("zero-inflated empirical base needs mean > 1");
    }
}

double growth_mean(const OffspringModel& model, const Theta& theta) {
    if (is_robin(model.family)) {
        return static_cast<double>(model.binomial_trials) * model.binomial_p * theta[1] / model.death;
    }
    switch (model.base) {
    case BaseKind::Geometric: return theta[1];
    case BaseKind::BinarySplitting: return 2.0 * theta[1];
    case BaseKind::Binomial: return static_cast<double>(model.binomial_trials) * theta[1];
    case BaseKind::Empirical: return empirical_mean(normalized_empirical(model.empirical));
    }
    return 0.0;
}

std::size_t default_base_k_max(const OffspringModel& model, const Theta& theta) {
    switch (model.base) {
    case BaseKind::Geometric: {
        const double q = theta[1] / (1.0 + theta[1]);
        // smallest k with q^(k+1) < 1e-14
        auto k = static_cast<std::size_t>(std::ceil(std::log(kGeometricTail) / std::log(q)));
        while (k > 0 && std::pow(q, static_cast<double>(k)) < kGeometricTail) --k;
        while (std::pow(q, static_cast<double>(k + 1)) >= kGeometricTail) ++k;
        return k;
    }
    case BaseKind::BinarySplitting: return 2;
    case BaseKind::Binomial: return static_cast<std::size_t>(model.binomial_trials);
    case BaseKind::Empirical: return model.empirical.size() - 1;
    }
    return 0;
}

OffspringPMF base_pmf(const OffspringModel& model, const Theta& theta, std::size_t k_max) {
    const std::size_t natural = default_base_k_max(model, theta);
    const std::size_t kk = std::max(k_max, natural);
    OffspringPMF b;
    switch (model.base) {
    case BaseKind::Geometric: {
        const double mu = theta[1];
        const double q = mu / (1.0 + mu);
        b.probabilities.resize(kk + 1);
        double w = 1.0 / (1.0 + mu);
        for (std::size_t k = 0; k <= kk; ++k) {
            b.probabilities[k] = w;
            w *= q;
        }
        b.tail_mass = std::pow(q, static_cast<double>(kk + 1));
        return b;
    }
    case BaseKind::BinarySplitting: {
        const double v = theta[1];
        b.probabilities.assign(kk + 1, 0.0);
        b.probabilities[0] = 1.0 - v;
        b.probabilities[2] = v;
        return b;
    }
    case BaseKind::Binomial: {
        const double p = is_robin(model.family) ? model.binomial_p : theta[1];
        const auto band = detail::binomial_band(static_cast<std::uint64_t>(model.binomial_trials), p, 0.0);
        b.probabilities.assign(kk + 1, 0.0);
        for (std::size_t i = 0; i < band.values.size(); ++i) b.probabilities[band.first + i] = band.values[i];
        return b;
    }
    case BaseKind::Empirical: {
        b.probabilities = normalized_empirical(model.empirical);
        b.probabilities.resize(kk + 1, 0.0);
        return b;
    }
    }
    return b;
}

double reproduction_probability(const OffspringModel& model, double z, const Theta& theta) {
    if (!(z > 0.0)) throw ParameterDomainError("population size must be positive");
    validate(model, theta);
    const double K = theta.K();
    const double mu = growth_mean(model, theta);
    double r = 0.0;
    switch (model.family) {
    case Family::BevertonHolt: {
        const double denom = K + (mu - 1.0) * z;
        r = denom > 0.0 ? K / denom : 1.0;
        break;
    }
    case Family::Ricker: r = std::exp(-(z / K) * std::log(mu)); break;
    case Family::RobinBevertonHolt: {
        const double denom = (mu - 1.0) * z + K;
        r = denom > 0.0 ? theta[1] * K / denom : 1.0;
        break;
    }
    case Family::RobinRicker: r = theta[1] * std::exp(-(z / K) * std::log(mu)); break;
    }
    return std::clamp(r, 0.0, 1.0);
}

OffspringPMF offspring_pmf(const OffspringModel& model, std::uint64_t z, const Theta& theta, std::size_t k_max) {
    const double r = reproduction_probability(model, static_cast<double>(z), theta);
    const bool robin = is_robin(model.family);
    const std::size_t base_k = (k_max > 0 && model.base == BaseKind::Geometric) ? k_max : 0;
    const OffspringPMF b = base_pmf(model, theta, base_k);

    OffspringPMF p;
    if (!robin) {
        p.probabilities.resize(b.probabilities.size());
        for (std::size_t k = 0; k < b.probabilities.size(); ++k) p.probabilities[k] = r * b.probabilities[k];
        p.probabilities[0] += 1.0 - r;
        p.tail_mass = r * b.tail_mass;
    } else {
        const double d = model.death;
        const std::size_t kb = b.k_max();
        p.probabilities.assign(kb + 2, 0.0);
        p.probabilities[0] = (1.0 - r) * d + r * b.probabilities[0] * d;
        p.probabilities[1] = (1.0 - r) * (1.0 - d) + r * (b.probabilities[0] * (1.0 - d) + b.at(1) * d);
        for (std::size_t k = 2; k <= kb + 1; ++k)
            p.probabilities[k] = r * (b.probabilities[k - 1] * (1.0 - d) + b.at(k) * d);
        p.tail_mass = r * b.tail_mass;
    }
    if (k_max == 0) return p;
    if (k_max < p.k_max()) return truncate(p, k_max);
    p.probabilities.resize(k_max + 1, 0.0);
    return p;
}

double offspring_mean(const OffspringModel& model, double z, const Theta& theta) {
    const double r = reproduction_probability(model, z, theta);
    if (!is_robin(model.family)) return r * growth_mean(model, theta);
    const OffspringPMF b = base_pmf(model, theta);
    return (1.0 - model.death) + r * b.mean();
}

double offspring_variance(const OffspringModel& model, double z, const Theta& theta) {
    const double r = reproduction_probability(model, z, theta);
    if (!is_robin(model.family)) {
        const double mu = growth_mean(model, theta);
        double var_b = 0.0;
        switch (model.base) {
        case BaseKind::Geometric: var_b = mu * (1.0 + mu); break;
        case BaseKind::BinarySplitting: var_b = 4.0 * theta[1] * (1.0 - theta[1]); break;
        case BaseKind::Binomial: var_b = mu * (1.0 - theta[1]); break;
        case BaseKind::Empirical: var_b = base_pmf(model, theta).variance(); break;
        }
        return r * (var_b + mu * mu) - (r * mu) * (r * mu);
    }
    // Robin: moments of the effective law, i.e. survival S ~ Bern(1-d) plus
    // R * B with R ~ Bern(r), independent.
    const OffspringPMF b = base_pmf(model, theta);
    const double d = model.death;
    const double mb = b.mean();
    const double var_rb = r * b.second_moment() - (r * mb) * (r * mb);
    return d * (1.0 - d) + var_rb;
}

double carrying_capacity_of(const OffspringModel& model, const Theta& theta) {
    validate(model, theta);
    const double K = theta.K();
    if (K < 1.0) throw ModelMisspecificationError("carrying capacity below 1: no population size lies under K");
    constexpr double slack = 1e-12;
    const double below = offspring_mean(model, std::floor(K), theta);
    const double above = offspring_mean(model, std::ceil(K) + 1.0, theta);
    if (!(below >= 1.0 - slack && above <= 1.0 + slack)) {
        std::ostringstream os;
        os << "mean offspring does not cross 1 at K=" << K << " (m(floor K)=" << below
           << ", m(ceil K + 1)=" << above << ")";
        throw ModelMisspecificationError(os.str());
    }
    return K;
}

PmfProvider make_provider(const OffspringModel& model, const Theta& theta, std::size_t k_max) {
    validate(model, theta);
    return [model, theta, k_max](std::uint64_t z) { return offspring_pmf(model, z, theta, k_max); };
}

} // namespace psdbp
