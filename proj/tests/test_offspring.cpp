#include "oracles.hpp"

#include "psdbp/errors.hpp"
#include "psdbp/offspring.hpp"
#include "psdbp/pmf.hpp"

#include <doctest.h>

#include <cmath>

using namespace psdbp;

namespace {

OffspringModel bh_geo() { return OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::Geometric); }
OffspringModel ricker_geo() { return OffspringModel::zero_inflated(Family::Ricker, BaseKind::Geometric); }
OffspringModel bh_bin() { return OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting); }

struct Case {
    OffspringModel model;
    Theta theta;
};

std::vector<Case> all_cases() {
    auto zb = OffspringModel::zero_inflated(Family::Ricker, BaseKind::Binomial);
    zb.binomial_trials = 4;
    auto ze = OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::Empirical);
    ze.empirical = {0.1, 0.2, 0.3, 0.4};
    return {{bh_geo(), {40, 2}},
            {ricker_geo(), {40, 2}},
            {bh_bin(), {100, 0.6}},
            {bh_bin(), {50, 0.54}},
            {OffspringModel::zero_inflated(Family::Ricker, BaseKind::BinarySplitting), {30, 0.8}},
            {zb, {25, 0.6}},
            {ze, {20}},
            {OffspringModel::robin(Family::RobinBevertonHolt), {109.2115, 0.6988}},
            {OffspringModel::robin(Family::RobinRicker), {80, 0.7}},
            {OffspringModel::robin(Family::RobinBevertonHolt, BaseKind::Binomial), {100, 0.65}}};
}

} // namespace

TEST_SUITE("pmf") {
    TEST_CASE("bernoulli self-convolution") {
        const OffspringPMF p{{0.5, 0.5}, 0.0};
        const auto c = convolve_power(p, 2, 10);
        REQUIRE(c.probabilities.size() >= 3);
        CHECK(c.at(0) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(c.at(1) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(c.at(2) == doctest::Approx(0.25).epsilon(1e-15));
    }

    TEST_CASE("first power is the identity") {
        const OffspringPMF p{{0.2, 0.3, 0.5}, 0.0};
        const auto c = convolve_power(p, 1, 10);
        for (std::size_t k = 0; k < 3; ++k) CHECK(c.at(k) == p.at(k));
        CHECK(c.tail_mass == 0.0);
    }

    TEST_CASE("tenth power of a fair coin is binomial") {
        const auto c = convolve_power(OffspringPMF{{0.5, 0.5}, 0.0}, 10, 10);
        for (int k = 0; k <= 10; ++k)
            CHECK(c.at(static_cast<std::size_t>(k)) == doctest::Approx(oracle::binomial_coefficient(10, k) / 1024.0).epsilon(1e-13));
        CHECK(std::abs(c.tail_mass) < 1e-15);
    }

    TEST_CASE("powers match plain repeated convolution and keep the mean") {
        const OffspringPMF p{{0.3, 0.1, 0.25, 0.35}, 0.0};
        for (std::uint64_t i : {2u, 3u, 7u, 16u, 23u}) {
            const auto fast = convolve_power(p, i, 200);
            const auto slow = oracle::naive_power(p.probabilities, i);
            for (std::size_t k = 0; k < slow.size(); ++k) CHECK(fast.at(k) == doctest::Approx(slow[k]).epsilon(1e-12));
            CHECK(fast.mean() == doctest::Approx(static_cast<double>(i) * p.mean()).epsilon(1e-12));
        }
    }

    TEST_CASE("truncation keeps the total") {
        const OffspringPMF p{{0.3, 0.1, 0.25, 0.35}, 0.0};
        const auto c = convolve_power(p, 9, 12);
        CHECK(c.total() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(c.tail_mass > 0.0);
        CHECK_THROWS_AS(convolve_power(p, 2, 0), DomainError);
    }
}

TEST_SUITE("offspring") {
    TEST_CASE("beverton-holt at capacity") {
        const Theta t{40, 2};
        CHECK(reproduction_probability(bh_geo(), 40, t) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(offspring_mean(bh_geo(), 40, t) == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("ricker at capacity") {
        for (double mu : {1.5, 2.0, 3.7}) {
            CHECK(reproduction_probability(ricker_geo(), 40, Theta{40, mu}) == doctest::Approx(1.0 / mu).epsilon(1e-14));
        }
    }

    TEST_CASE("robin beverton-holt tends to v as K grows") {
        const auto m = OffspringModel::robin(Family::RobinBevertonHolt);
        CHECK(reproduction_probability(m, 1, Theta{1e12, 0.7}) == doctest::Approx(0.7).epsilon(1e-9));
    }

    TEST_CASE("robin law collapses to survival when r vanishes") {
        const auto m = OffspringModel::robin(Family::RobinRicker);
        const Theta t{1, 0.9};
        REQUIRE(reproduction_probability(m, 2000, t) == 0.0);
        const auto p = offspring_pmf(m, 2000, t);
        CHECK(p.at(0) == doctest::Approx(kRobinDeath).epsilon(1e-15));
        CHECK(p.at(1) == doctest::Approx(0.6861).epsilon(1e-15));
        for (std::size_t k = 2; k < p.probabilities.size(); ++k) CHECK(p.at(k) == 0.0);
    }

    TEST_CASE("robin effective law matches its defining formula") {
        const auto m = OffspringModel::robin(Family::RobinBevertonHolt);
        const Theta t{109.2115, 0.6988};
        const double d = m.death;
        const auto& b = m.empirical;
        for (std::uint64_t z : {1u, 50u, 109u, 400u}) {
            const double r = reproduction_probability(m, static_cast<double>(z), t);
            const auto p = offspring_pmf(m, z, t);
            auto bk = [&](std::size_t k) { return k < b.size() ? b[k] : 0.0; };
            CHECK(p.at(0) == doctest::Approx((1 - r) * d + r * b[0] * d).epsilon(1e-14));
            CHECK(p.at(1) == doctest::Approx((1 - r) * (1 - d) + r * (b[0] * (1 - d) + b[1] * d)).epsilon(1e-14));
            for (std::size_t k = 2; k <= b.size(); ++k)
                CHECK(p.at(k) == doctest::Approx(r * (bk(k - 1) * (1 - d) + bk(k) * d)).epsilon(1e-13));
        }
    }

    TEST_CASE("robin growth mean") {
        const auto m = OffspringModel::robin(Family::RobinBevertonHolt);
        CHECK(growth_mean(m, Theta{100, 0.6}) == doctest::Approx(5 * 0.1988 * 0.6 / 0.3139).epsilon(1e-14));
    }

    TEST_CASE("zero inflation is a mixture with a point mass at zero") {
        const Theta t{40, 2};
        const auto b = base_pmf(bh_geo(), t);
        for (std::uint64_t z : {1u, 40u, 300u}) {
            const double r = reproduction_probability(bh_geo(), static_cast<double>(z), t);
            const auto p = offspring_pmf(bh_geo(), z, t);
            CHECK(p.at(0) == doctest::Approx(1 - r + r * b.at(0)).epsilon(1e-15));
            for (std::size_t k = 1; k < 20; ++k) CHECK(p.at(k) == doctest::Approx(r * b.at(k)).epsilon(1e-14));
        }
    }

    TEST_CASE("geometric base starts at zero with mean mu") {
        const double mu = 2.0;
        const auto b = base_pmf(bh_geo(), Theta{40, mu});
        for (std::size_t k = 0; k < 30; ++k)
            CHECK(b.at(k) == doctest::Approx(std::pow(mu / (1 + mu), static_cast<double>(k)) / (1 + mu)).epsilon(1e-13));
        CHECK(b.tail_mass < 1e-14);
        CHECK(b.mean() == doctest::Approx(mu).epsilon(1e-12));
    }

    TEST_CASE("pmf mean at capacity is one") {
        const auto p = offspring_pmf(bh_geo(), 40, Theta{40, 2});
        CHECK(std::abs(p.mean() - 1.0) < 1e-12);
        CHECK(p.mean() == doctest::Approx(offspring_mean(bh_geo(), 40, Theta{40, 2})).epsilon(1e-12));
    }

    TEST_CASE("no reproduction means no offspring") {
        const Theta t{1, 2};
        REQUIRE(reproduction_probability(ricker_geo(), 2000, t) == 0.0);
        CHECK(offspring_mean(ricker_geo(), 2000, t) == 0.0);
        CHECK(offspring_variance(ricker_geo(), 2000, t) == 0.0);
    }

    TEST_CASE("binary splitting mean") {
        const Theta t{100, 0.6};
        for (double z : {1.0, 37.0, 100.0, 250.0})
            CHECK(offspring_mean(bh_bin(), z, t) == doctest::Approx(2 * 0.6 * 100 / (100 + 0.2 * z)).epsilon(1e-14));
        CHECK(offspring_mean(bh_bin(), 100, t) == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("closed-form moments match the pmf for every family") {
        for (const auto& c : all_cases()) {
            for (std::uint64_t z : {1u, 5u, 20u, 77u, 250u}) {
                const auto p = offspring_pmf(c.model, z, c.theta);
                CHECK(p.total() + 0.0 == doctest::Approx(1.0).epsilon(1e-12));
                for (double x : p.probabilities) CHECK(x >= 0.0);
                if (p.tail_mass < 1e-12) {
                    CHECK(p.mean() == doctest::Approx(offspring_mean(c.model, static_cast<double>(z), c.theta)).epsilon(1e-9));
                    CHECK(p.variance() ==
                          doctest::Approx(offspring_variance(c.model, static_cast<double>(z), c.theta)).epsilon(1e-9));
                }
            }
        }
    }

    TEST_CASE("means fall below one far above capacity") {
        for (const auto& c : all_cases()) CHECK(offspring_mean(c.model, 100 * c.theta.K(), c.theta) < 1.0);
    }

    TEST_CASE("zero-inflated means decrease and cross one at K") {
        for (const auto& c : all_cases()) {
            if (is_robin(c.model.family)) continue;
            CHECK(offspring_mean(c.model, c.theta.K(), c.theta) == doctest::Approx(1.0).epsilon(1e-12));
            double prev = offspring_mean(c.model, 1, c.theta);
            for (int z = 2; z < 400; ++z) {
                const double m = offspring_mean(c.model, z, c.theta);
                CHECK(m < prev);
                prev = m;
            }
        }
    }

    TEST_CASE("carrying capacity") {
        CHECK(carrying_capacity_of(bh_bin(), Theta{100, 0.6}) == 100);
        CHECK(carrying_capacity_of(ricker_geo(), Theta{40, 2}) == 40);
        CHECK(carrying_capacity_of(OffspringModel::robin(Family::RobinBevertonHolt), Theta{109.2115, 0.6988}) ==
              doctest::Approx(109.2115));
        CHECK_THROWS_AS(carrying_capacity_of(bh_geo(), Theta{0.5, 2}), ModelMisspecificationError);
    }

    TEST_CASE("parameter validation") {
        CHECK_THROWS_AS(validate(bh_geo(), Theta{-1, 2}), ParameterDomainError);
        CHECK_THROWS_AS(validate(bh_geo(), Theta{40, 0.9}), ParameterDomainError);
        CHECK_THROWS_AS(validate(bh_bin(), Theta{40, 1.2}), ParameterDomainError);
        CHECK_THROWS_AS(validate(bh_bin(), Theta{40}), ParameterDomainError);
        CHECK_THROWS_AS(parse_family("logistic"), ParameterDomainError);
        CHECK_THROWS_AS(OffspringModel::robin(Family::RobinBevertonHolt, BaseKind::Geometric), ParameterDomainError);
        CHECK(parameter_names(bh_geo()) == std::vector<std::string>{"K", "mu"});
        CHECK(parameter_names(OffspringModel::robin(Family::RobinRicker)) == std::vector<std::string>{"K", "v"});
    }
}
