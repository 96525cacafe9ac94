#include "psdbp/simulator.hpp"

#include <algorithm>
#include <exception>
#include <sstream>

namespace psdbp {

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t j) {
    std::uint64_t x = master + (j + 1) * 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void validate(const SimConfig& c) {
    if (c.initial_size < 1) throw DomainError("initial size N must be at least 1");
    if (c.horizon < 1) throw DomainError("horizon n must be at least 1");
    if (c.replications < 1) throw DomainError("replication count must be at least 1");
    if (c.max_attempts < 1) throw DomainError("max_attempts must be at least 1");
    if (c.explosion_cap < 1) throw DomainError("explosion cap must be at least 1");
}

const std::vector<double>& OffspringSampler::table(std::uint64_t z) {
    auto it = cdf_.find(z);
    if (it != cdf_.end()) return it->second;
    const OffspringPMF pmf = provider_(z);
    std::vector<double> cdf(pmf.probabilities.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < cdf.size(); ++k) {
        acc += pmf.probabilities[k];
        cdf[k] = acc;
    }
    // Mass beyond the listed support is below the generator's resolution
    // for every built-in law; fold it into the last entry.
    if (!cdf.empty()) cdf.back() = std::max(cdf.back(), 1.0);
    return cdf_.emplace(z, std::move(cdf)).first->second;
}

std::uint64_t OffspringSampler::generation(std::uint64_t z, Rng& rng) {
    const std::vector<double>& cdf = table(z);
    const std::size_t last = cdf.size() - 1;
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < z; ++i) {
        const double u = uniform01(rng);
        std::size_t k = 0;
        while (k < last && u >= cdf[k]) ++k;
        total += k;
    }
    return total;
}

Trajectory simulate(OffspringSampler& sampler, std::uint64_t N, std::uint64_t n, Rng& rng,
                    std::uint64_t explosion_cap) {
    if (N < 1) throw DomainError("initial size N must be at least 1");
    Trajectory t;
    t.states.reserve(n + 1);
    t.states.push_back(N);
    std::uint64_t z = N;
    for (std::uint64_t step = 0; step < n; ++step) {
        if (z > 0) z = sampler.generation(z, rng);
        if (z > explosion_cap) {
            std::ostringstream os;
            os << "population reached " << z << " at step " << (step + 1) << ", above the cap " << explosion_cap;
            throw ExplosionError(os.str());
        }
        t.states.push_back(z);
    }
    return t;
}

Trajectory simulate(const OffspringModel& model, const Theta& theta, std::uint64_t N, std::uint64_t n, Rng& rng,
                    std::uint64_t explosion_cap) {
    OffspringSampler sampler(make_provider(model, theta));
    return simulate(sampler, N, n, rng, explosion_cap);
}

Trajectory simulate_surviving(OffspringSampler& sampler, std::uint64_t N, std::uint64_t n, Rng& rng,
                              std::uint64_t max_attempts, std::uint64_t explosion_cap) {
    if (max_attempts < 1) throw DomainError("max_attempts must be at least 1");
    for (std::uint64_t a = 1; a <= max_attempts; ++a) {
        Trajectory t = simulate(sampler, N, n, rng, explosion_cap);
        if (t.survived()) {
            t.attempts = a;
            return t;
        }
    }
    std::ostringstream os;
    os << "no trajectory survived to n=" << n << " in " << max_attempts << " attempts";
    throw SurvivalRejectionError(os.str(), 0.0, max_attempts);
}

Trajectory simulate_surviving(const OffspringModel& model, const Theta& theta, std::uint64_t N, std::uint64_t n,
                              Rng& rng, std::uint64_t max_attempts, std::uint64_t explosion_cap) {
    OffspringSampler sampler(make_provider(model, theta));
    return simulate_surviving(sampler, N, n, rng, max_attempts, explosion_cap);
}

std::vector<Trajectory> simulate_batch(const SimConfig& config, const PmfProvider& provider,
                                       const std::string& source) {
    validate(config);
    const auto reps = static_cast<std::ptrdiff_t>(config.replications);
    std::vector<Trajectory> out(config.replications);
    std::vector<std::exception_ptr> errors(config.replications);

#pragma omp parallel
    {
        OffspringSampler sampler(provider);
#pragma omp for schedule(dynamic, 1)
        for (std::ptrdiff_t j = 0; j < reps; ++j) {
            const std::uint64_t seed = stream_seed(config.seed, static_cast<std::uint64_t>(j));
            Rng rng(seed);
            try {
                Trajectory t = config.condition_on_survival
                                   ? simulate_surviving(sampler, config.initial_size, config.horizon, rng,
                                                        config.max_attempts, config.explosion_cap)
                                   : simulate(sampler, config.initial_size, config.horizon, rng, config.explosion_cap);
                t.seed = seed;
                t.source = source;
                out[static_cast<std::size_t>(j)] = std::move(t);
            } catch (...) {
                errors[static_cast<std::size_t>(j)] = std::current_exception();
            }
        }
    }

    for (std::size_t j = 0; j < errors.size(); ++j) {
        if (!errors[j]) continue;
        std::vector<Trajectory> partial;
        for (std::size_t k = 0; k < out.size(); ++k)
            if (!errors[k]) partial.push_back(std::move(out[k]));
        std::string reason;
        try {
            std::rethrow_exception(errors[j]);
        } catch (const std::exception& e) {
            reason = e.what();
        }
        std::ostringstream os;
        os << "replication " << j << " failed (" << reason << "); " << partial.size() << " of "
           << config.replications << " completed";
        throw BatchAbortedError(os.str(), std::move(partial), j);
    }
    return out;
}

std::vector<Trajectory> simulate_batch(const SimConfig& config, const OffspringModel& model, const Theta& theta) {
    std::ostringstream tag;
    tag << family_name(model.family) << '/' << base_name(model.base) << '(';
    for (std::size_t i = 0; i < theta.size(); ++i) tag << (i ? "," : "") << theta[i];
    tag << ')';
    return simulate_batch(config, make_provider(model, theta), tag.str());
}

} // namespace psdbp
