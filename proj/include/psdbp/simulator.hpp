#pragma once

#include "psdbp/errors.hpp"
#include "psdbp/offspring.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace psdbp {

using Rng = std::mt19937_64;

/// Seed of replication stream j derived from a master seed:
/// splitmix64(master + (j + 1) * 0x9E3779B97F4A7C15). Part of the output
/// contract: changing it changes every stochastic result.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t j);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Trajectory {
    std::vector<std::uint64_t> states;  // Z_0 .. Z_n
    std::uint64_t seed = 0;
    std::uint64_t attempts = 1;         // rejection attempts used
    std::string source;                 // model/theta tag

    std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }
    bool survived() const { return !states.empty() && states.back() > 0; }
};

inline constexpr std::uint64_t kDefaultExplosionCap = 1'000'000;

struct SimConfig {
    std::uint64_t initial_size = 1;       // N
    std::uint64_t horizon = 1;            // n
    std::uint64_t replications = 1;       // N_0
    bool condition_on_survival = false;
    std::uint64_t max_attempts = 1'000'000;
    std::uint64_t seed = 0;
    std::uint64_t explosion_cap = kDefaultExplosionCap;
};

void validate(const SimConfig& config);

/// Inverse-CDF sampler of the offspring law, with one cumulative table per
/// visited population size.
class OffspringSampler {
  public:
    explicit OffspringSampler(PmfProvider provider) : provider_(std::move(provider)) {}

    /// Total offspring of z independent individuals.
    std::uint64_t generation(std::uint64_t z, Rng& rng);

  private:
    const std::vector<double>& table(std::uint64_t z);

    PmfProvider provider_;
    std::unordered_map<std::uint64_t, std::vector<double>> cdf_;
};

Trajectory simulate(OffspringSampler& sampler, std::uint64_t N, std::uint64_t n, Rng& rng,
                    std::uint64_t explosion_cap = kDefaultExplosionCap);
Trajectory simulate(const OffspringModel& model, const Theta& theta, std::uint64_t N, std::uint64_t n, Rng& rng,
                    std::uint64_t explosion_cap = kDefaultExplosionCap);

/// Regenerates whole trajectories until Z_n > 0. Throws
/// SurvivalRejectionError after max_attempts failures.
Trajectory simulate_surviving(OffspringSampler& sampler, std::uint64_t N, std::uint64_t n, Rng& rng,
                              std::uint64_t max_attempts, std::uint64_t explosion_cap = kDefaultExplosionCap);
Trajectory simulate_surviving(const OffspringModel& model, const Theta& theta, std::uint64_t N, std::uint64_t n,
                              Rng& rng, std::uint64_t max_attempts,
                              std::uint64_t explosion_cap = kDefaultExplosionCap);

/// A replication failed; carries every trajectory that did complete.
class BatchAbortedError : public Error {
  public:
    BatchAbortedError(const std::string& what, std::vector<Trajectory> partial, std::uint64_t failed_replication)
        : Error("batch-aborted", what), partial_(std::move(partial)), failed_(failed_replication) {}

    const std::vector<Trajectory>& partial() const noexcept { return partial_; }
    std::uint64_t failed_replication() const noexcept { return failed_; }

  private:
    std::vector<Trajectory> partial_;
    std::uint64_t failed_;
};

/// N_0 replications; replication j draws from its own engine seeded with
/// stream_seed(config.seed, j), so the output does not depend on thread
/// count or scheduling.
std::vector<Trajectory> simulate_batch(const SimConfig& config, const OffspringModel& model, const Theta& theta);
std::vector<Trajectory> simulate_batch(const SimConfig& config, const PmfProvider& provider,
                                       const std::string& source = {});

} // namespace psdbp
