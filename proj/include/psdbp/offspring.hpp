#pragma once

#include "psdbp/pmf.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace psdbp {

/// Parameter vector. Component 0 is always the carrying capacity K; the
/// meaning of the remaining components depends on the model (see
/// parameter_names()).
struct Theta {
    std::vector<double> values;

    Theta() = default;
    Theta(std::initializer_list<double> v) : values(v) {}
    explicit Theta(std::vector<double> v) : values(std::move(v)) {}

    double K() const { return values.at(0); }
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values.at(i); }
    double& operator[](std::size_t i) { return values.at(i); }
    bool operator==(const Theta&) const = default;
};

enum class Family { BevertonHolt, Ricker, RobinBevertonHolt, RobinRicker };
enum class BaseKind { Geometric, BinarySplitting, Binomial, Empirical };
enum class ParamKind { Capacity, Probability, Mean };

inline bool is_robin(Family f) {
    return f == Family::RobinBevertonHolt || f == Family::RobinRicker;
}

// Constants estimated for the black robin population.
inline constexpr double kRobinDeath = 0.3139;
inline constexpr double kRobinBinomialP = 0.1988;
inline constexpr int kRobinBinomialTrials = 5;
inline const std::vector<double> kRobinEmpiricalBase{0.3130, 0.4544, 0.1758, 0.0431,
                                                      0.0106, 0.0024, 0.0006, 0.0001};

/// An offspring family together with any fixed (non-estimated) constants.
///
/// Zero-inflated families (BevertonHolt, Ricker): with probability 1 - r an
/// individual has no offspring, otherwise it draws from the base law. The
/// base's free parameter is theta[1] (geometric mean mu, binary-splitting
/// success v, binomial p); an empirical base has no free parameter.
///
/// Robin families: the base law is fixed (empirical or Binomial(trials, p)),
/// the parent survives with probability 1 - death, and theta = (K, v).
struct OffspringModel {
    Family family = Family::BevertonHolt;
    BaseKind base = BaseKind::Geometric;
    int binomial_trials = kRobinBinomialTrials;
    double binomial_p = kRobinBinomialP;
    std::vector<double> empirical;
    double death = kRobinDeath;

    static OffspringModel zero_inflated(Family family, BaseKind base);
    static OffspringModel robin(Family family, BaseKind base = BaseKind::Empirical);
};

std::string family_name(Family f);
std::string base_name(BaseKind b);
Family parse_family(const std::string& s);
BaseKind parse_base(const std::string& s);

std::size_t parameter_count(const OffspringModel& model);
std::vector<std::string> parameter_names(const OffspringModel& model);
std::vector<ParamKind> parameter_kinds(const OffspringModel& model);

/// Throws ParameterDomainError when theta is not a valid point for `model`.
void validate(const OffspringModel& model, const Theta& theta);

/// Mean mu that enters r(z, theta): the base mean for zero-inflated
/// families, 5 p v / d for the robin families.
double growth_mean(const OffspringModel& model, const Theta& theta);

/// Smallest k_max for the base law: exact support for bounded bases, tail
/// below 1e-14 for the geometric base.
std::size_t default_base_k_max(const OffspringModel& model, const Theta& theta);

/// Base law b. `k_max` of 0 selects default_base_k_max(); larger values
/// extend the geometric support (bounded laws are zero-padded).
OffspringPMF base_pmf(const OffspringModel& model, const Theta& theta, std::size_t k_max = 0);

/// r(z, theta), clamped to [0, 1]. z is real so the map can be
/// differentiated in z; z must be positive.
double reproduction_probability(const OffspringModel& model, double z, const Theta& theta);

/// Offspring law p(z, theta). `k_max` of 0 uses the natural support.
OffspringPMF offspring_pmf(const OffspringModel& model, std::uint64_t z, const Theta& theta,
                           std::size_t k_max = 0);

double offspring_mean(const OffspringModel& model, double z, const Theta& theta);
double offspring_variance(const OffspringModel& model, double z, const Theta& theta);

/// Returns K after checking m(floor K) >= 1 >= m(ceil K + 1) numerically.
double carrying_capacity_of(const OffspringModel& model, const Theta& theta);

using PmfProvider = std::function<OffspringPMF(std::uint64_t z)>;

PmfProvider make_provider(const OffspringModel& model, const Theta& theta, std::size_t k_max = 0);

} // namespace psdbp
