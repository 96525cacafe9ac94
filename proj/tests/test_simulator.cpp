#include "psdbp/errors.hpp"
#include "psdbp/kernel.hpp"
#include "psdbp/simulator.hpp"

#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace psdbp;

namespace {

PmfProvider constant_law(std::vector<double> p) {
    return [p](std::uint64_t) { return OffspringPMF{p, 0.0}; };
}

OffspringModel bh_bin() { return OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting); }

bool same(const std::vector<Trajectory>& a, const std::vector<Trajectory>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].states != b[i].states || a[i].seed != b[i].seed || a[i].attempts != b[i].attempts) return false;
    return true;
}

} // namespace

TEST_SUITE("simulator") {
    TEST_CASE("unit offspring keeps the population constant") {
        OffspringSampler s(constant_law({0.0, 1.0}));
        Rng rng(1);
        const auto t = simulate(s, 7, 20, rng);
        CHECK(t.states == std::vector<std::uint64_t>(21, 7));
        const auto u = simulate_surviving(s, 7, 20, rng, 5);
        CHECK(u.attempts == 1);
    }

    TEST_CASE("certain death empties the population at once") {
        OffspringSampler s(constant_law({1.0}));
        Rng rng(1);
        const auto t = simulate(s, 5, 4, rng);
        CHECK(t.states == std::vector<std::uint64_t>{5, 0, 0, 0, 0});
        CHECK_THROWS_AS(simulate_surviving(s, 5, 4, rng, 50), SurvivalRejectionError);
        try {
            simulate_surviving(s, 5, 4, rng, 50);
        } catch (const SurvivalRejectionError& e) {
            CHECK(e.attempts() == 50);
            CHECK(e.survival_fraction() == 0.0);
        }
    }

    TEST_CASE("absorption at zero") {
        Rng rng(3);
        for (int r = 0; r < 200; ++r) {
            const auto t = simulate(bh_bin(), Theta{10, 0.6}, 1, 50, rng);
            bool dead = false;
            for (auto z : t.states) {
                if (dead) CHECK(z == 0);
                dead = dead || z == 0;
            }
        }
    }

    TEST_CASE("explosion cap") {
        OffspringSampler s(constant_law({0.0, 0.0, 1.0}));
        Rng rng(1);
        CHECK_THROWS_AS(simulate(s, 1, 40, rng, 1000), ExplosionError);
    }

    TEST_CASE("fixed seed gives identical trajectories") {
        Rng a(42), b(42);
        const auto ta = simulate(bh_bin(), Theta{100, 0.6}, 2, 25, a);
        const auto tb = simulate(bh_bin(), Theta{100, 0.6}, 2, 25, b);
        CHECK(ta.states == tb.states);
    }

    TEST_CASE("batches are deterministic and independent of thread count") {
        SimConfig c;
        c.initial_size = 2;
        c.horizon = 25;
        c.replications = 40;
        c.condition_on_survival = true;
        c.seed = 2024;
        const int saved = omp_get_max_threads();
        omp_set_num_threads(1);
        const auto one = simulate_batch(c, bh_bin(), Theta{100, 0.6});
        omp_set_num_threads(4);
        const auto four = simulate_batch(c, bh_bin(), Theta{100, 0.6});
        omp_set_num_threads(saved);
        const auto again = simulate_batch(c, bh_bin(), Theta{100, 0.6});
        CHECK(same(one, four));
        CHECK(same(one, again));
        for (std::size_t j = 0; j < one.size(); ++j) {
            CHECK(one[j].seed == stream_seed(2024, j));
            CHECK(one[j].survived());
            CHECK(one[j].horizon() == 25);
        }
    }

    TEST_CASE("deterministic law in a batch") {
        SimConfig c;
        c.initial_size = 4;
        c.horizon = 6;
        c.replications = 3;
        c.seed = 1;
        const auto b = simulate_batch(c, constant_law({0.0, 1.0}));
        REQUIRE(b.size() == 3);
        for (const auto& t : b) CHECK(t.states == std::vector<std::uint64_t>(7, 4));
    }

    TEST_CASE("batch abort keeps the completed replications") {
        SimConfig c;
        c.initial_size = 1;
        c.horizon = 3;
        c.replications = 4;
        c.condition_on_survival = true;
        c.max_attempts = 3;
        CHECK_THROWS_AS(simulate_batch(c, constant_law({1.0})), BatchAbortedError);
        c.max_attempts = 0;
        CHECK_THROWS_AS(validate(c), DomainError);
    }

    TEST_CASE("stream seeds differ across replications") {
        CHECK(stream_seed(7, 0) != stream_seed(7, 1));
        CHECK(stream_seed(7, 0) != stream_seed(8, 0));
    }

    TEST_CASE("one-step mean matches z m(z)") {
        const auto model = bh_bin();
        const Theta t{50, 0.7};
        OffspringSampler s(make_provider(model, t));
        Rng rng(17);
        const std::uint64_t z = 30;
        const int reps = 20000;
        double sum = 0.0, sumsq = 0.0;
        for (int r = 0; r < reps; ++r) {
            const double x = static_cast<double>(s.generation(z, rng));
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / reps;
        const double se = std::sqrt((sumsq / reps - mean * mean) / reps);
        CHECK(std::abs(mean - 30.0 * offspring_mean(model, 30, t)) < 4 * se);
    }

    TEST_CASE("survival frequency matches the kernel") {
        // P(Z_n > 0 | Z_0 = N) = e_N^T Q^n 1 on a kernel wide enough to hold
        // every reachable state with negligible loss.
        const auto model = bh_bin();
        const Theta t{100, 0.6};
        const auto k = build_kernel(model, t, 800);
        std::vector<double> s(800, 1.0), y(800);
        for (int step = 0; step < 25; ++step) {
            k.q.multiply(s, y);
            s.swap(y);
        }
        const double exact = s[1];
        OffspringSampler sampler(make_provider(model, t));
        Rng rng(5);
        const int reps = 20000;
        int alive = 0;
        for (int r = 0; r < reps; ++r) alive += simulate(sampler, 2, 25, rng).survived();
        const double freq = static_cast<double>(alive) / reps;
        CHECK(std::abs(freq - exact) < 4 * std::sqrt(exact * (1 - exact) / reps));
    }

    TEST_CASE("growing populations stay below capacity at n = 25") {
        SimConfig c;
        c.initial_size = 2;
        c.horizon = 25;
        c.replications = 2000;
        c.condition_on_survival = true;
        c.seed = 31;
        const auto b = simulate_batch(c, bh_bin(), Theta{100, 0.6});
        double mean = 0.0, sq = 0.0;
        int max_below_k = 0;
        for (const auto& t : b) {
            const double z = static_cast<double>(t.states.back());
            mean += z / 2000.0;
            sq += z * z / 2000.0;
            max_below_k += *std::max_element(t.states.begin(), t.states.end()) < 100;
        }
        CHECK(mean < 80.0);
        CHECK(std::sqrt(sq - mean * mean) > 20.0);
        CHECK(max_below_k > 1000);
    }
}
