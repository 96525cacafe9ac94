#include "oracles.hpp"

#include "psdbp/errors.hpp"
#include "psdbp/kernel.hpp"
#include "psdbp/spectral.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace psdbp;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct Case {
    OffspringModel model;
    Theta theta;
    std::size_t z_max;
};

std::vector<Case> kernel_cases() {
    return {{OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::Geometric), {40, 2}, 120},
            {OffspringModel::zero_inflated(Family::Ricker, BaseKind::Geometric), {40, 2}, 120},
            {OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting), {50, 0.7}, 150},
            {OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting), {50, 0.54}, 150},
            {OffspringModel::robin(Family::RobinBevertonHolt), {60, 0.7}, 150},
            {OffspringModel::robin(Family::RobinRicker, BaseKind::Binomial), {60, 0.7}, 150}};
}

} // namespace

TEST_SUITE("kernel") {
    TEST_CASE("single-state kernel") {
        const PmfProvider p = [](std::uint64_t) { return OffspringPMF{{0.3, 0.7}, 0.0}; };
        const auto k = build_kernel_reference(p, 1);
        CHECK(k.q.size() == 1);
        CHECK(k.entry(1, 1) == doctest::Approx(0.7));
        CHECK(k.extinction[0] == doctest::Approx(0.3));
    }

    TEST_CASE("first row is the one-parent law without zero") {
        const auto m = OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::Geometric);
        const Theta t{40, 2};
        const auto k = build_kernel(m, t, 400);
        const auto p = offspring_pmf(m, 1, t);
        for (std::size_t j = 1; j < 60; ++j) CHECK(k.entry(1, j) == doctest::Approx(p.at(j)).epsilon(1e-14));
        CHECK(1.0 - k.q.row_sum(0) == doctest::Approx(p.at(0)).epsilon(1e-12));
        CHECK(k.extinction[0] == doctest::Approx(p.at(0)).epsilon(1e-14));
        for (std::size_t i = 0; i < 400; ++i) {
            const double s = k.q.row_sum(i);
            CHECK(s > 0.0);
            CHECK(s <= 1.0 + 1e-12);
            CHECK(s + k.extinction[i] == doctest::Approx(1.0).epsilon(1e-10));
        }
    }

    TEST_CASE("fast build matches the serial reference and a dense oracle") {
        for (const auto& c : kernel_cases()) {
            const auto fast = build_kernel(c.model, c.theta, c.z_max);
            const auto ref = build_kernel_reference(c.model, c.theta, c.z_max);
            double diff = 0.0;
            for (std::size_t i = 0; i < c.z_max; ++i)
                for (std::size_t j = 0; j < c.z_max; ++j) diff = std::max(diff, std::abs(fast.q.at(i, j) - ref.q.at(i, j)));
            CHECK(diff < 1e-12);
            CHECK(max_abs_diff(fast.extinction, ref.extinction) < 1e-12);
        }
        for (const auto& c : kernel_cases()) {
            const std::size_t small = 24;
            const auto fast = build_kernel(c.model, c.theta, small);
            const auto dense = oracle::dense_kernel(c.model, c.theta, small);
            double diff = 0.0;
            for (std::size_t i = 0; i < small; ++i)
                for (std::size_t j = 0; j < small; ++j) diff = std::max(diff, std::abs(fast.q.at(i, j) - dense[i][j]));
            CHECK(diff < 1e-12);
        }
    }

    TEST_CASE("kill policy records the dropped mass") {
        const auto m = OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::Geometric);
        const Theta t{40, 2};
        KernelOptions kill{BoundaryPolicy::Kill, 1.0};
        const auto lump = build_kernel(m, t, 60);
        const auto k = build_kernel(m, t, 60, kill);
        for (std::size_t i = 0; i < 60; ++i) {
            CHECK(k.q.row_sum(i) + k.lost_mass[i] == doctest::Approx(lump.q.row_sum(i)).epsilon(1e-12));
            CHECK(k.lost_mass[i] >= 0.0);
        }
        CHECK(k.lost_mass[59] > 0.0);
        CHECK_THROWS_AS(build_kernel(m, t, 60, KernelOptions{BoundaryPolicy::Kill, 1e-6}), TruncationError);
    }

    TEST_CASE("binary splitting leaves odd columns empty") {
        const auto k = build_kernel(OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting),
                                    Theta{50, 0.7}, 100);
        for (std::size_t i = 0; i < 100; ++i)
            for (std::size_t j = 0; j + 1 < 100; j += 2) CHECK(k.q.at(i, j) == 0.0);
    }

    TEST_CASE("default truncation rule") {
        CHECK(default_z_max(40) == 320);
        CHECK(default_z_max(2) == 64);
        CHECK(default_z_max(40, 200) == 800);
        CHECK(default_z_max(50.2) == 402);
    }

    TEST_CASE("kernel csv layout") {
        const PmfProvider p = [](std::uint64_t) { return OffspringPMF{{0.5, 0.25, 0.25}, 0.0}; };
        std::ostringstream os;
        write_kernel_csv(build_kernel_reference(p, 2), os);
        CHECK(os.str().substr(0, os.str().find('\n')) == "state,1,2");
    }
}

TEST_SUITE("spectral") {
    TEST_CASE("symmetric two-state chain") {
        const auto q = BandedMatrix::from_dense({{0.5, 0.25}, {0.25, 0.5}});
        for (const auto& s : {spectral(q), spectral_oracle(q)}) {
            CHECK(s.rho == doctest::Approx(0.75).epsilon(1e-12));
            CHECK(s.u[0] == doctest::Approx(0.5).epsilon(1e-12));
            CHECK(s.u[1] == doctest::Approx(0.5).epsilon(1e-12));
            CHECK(s.v[0] == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(s.v[1] == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    TEST_CASE("one-state kernel") {
        const auto q = BandedMatrix::from_dense({{0.37}});
        for (const auto& s : {spectral(q), spectral_oracle(q)}) {
            CHECK(s.rho == doctest::Approx(0.37).epsilon(1e-15));
            CHECK(s.u[0] == doctest::Approx(1.0));
            CHECK(s.v[0] == doctest::Approx(1.0));
        }
    }

    TEST_CASE("random 6x6 against a dense eigensolver") {
        std::mt19937_64 rng(11);
        for (int rep = 0; rep < 10; ++rep) {
            const auto d = oracle::random_substochastic(rng, 6);
            const auto q = BandedMatrix::from_dense(d);
            const auto ref = oracle::eigen_perron(d);
            const auto s = spectral(q);
            const auto o = spectral_oracle(q);
            CHECK(std::abs(s.rho - ref.rho) < 1e-10);
            CHECK(max_abs_diff(s.u, ref.u) < 1e-10);
            CHECK(max_abs_diff(s.v, ref.v) < 1e-10);
            CHECK(std::abs(o.rho - ref.rho) < 1e-10);
            CHECK(max_abs_diff(o.u, ref.u) < 1e-10);
            CHECK(max_abs_diff(o.v, ref.v) < 1e-10);
        }
    }

    TEST_CASE("sparse irreducible matrices agree with the oracle") {
        std::mt19937_64 rng(5);
        for (int rep = 0; rep < 20; ++rep) {
            const auto d = oracle::random_substochastic(rng, 8, 0.3);
            const auto q = BandedMatrix::from_dense(d);
            const auto s = spectral(q);
            const auto o = spectral_oracle(q);
            CHECK(std::abs(s.rho - o.rho) < 1e-8);
            CHECK(max_abs_diff(s.u, o.u) < 1e-8);
            CHECK(max_abs_diff(s.v, o.v) < 1e-8);
            CHECK(std::accumulate(s.u.begin(), s.u.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::inner_product(s.u.begin(), s.u.end(), s.v.begin(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(s.left_residual < 1e-12);
            CHECK(s.right_residual < 1e-12);
        }
    }

    TEST_CASE("errors") {
        CHECK_THROWS_AS(spectral(BandedMatrix::from_dense({{0.5, 0.2}, {0.0, 0.0}})), ReducibilityError);
        std::mt19937_64 rng(3);
        const auto q = BandedMatrix::from_dense(oracle::random_substochastic(rng, 6));
        CHECK_THROWS_AS(spectral(q, SpectralOptions{1e-12, 2}), NonConvergenceError);
        try {
            spectral(q, SpectralOptions{1e-12, 2});
        } catch (const NonConvergenceError& e) {
            CHECK(e.left_residual() > 0.0);
            CHECK(e.right_residual() > 0.0);
        }
        CHECK_THROWS_AS(spectral_oracle(BandedMatrix(65)), DomainError);
    }

    TEST_CASE("built kernels have a proper Perron triple") {
        for (const auto& c : kernel_cases()) {
            const auto k = build_kernel(c.model, c.theta, c.z_max);
            const auto s = spectral(k);
            CHECK(s.rho > 0.0);
            CHECK(s.rho < 1.0);
            CHECK(s.decay > 0.0);
            CHECK(s.decay == doctest::Approx(1.0 - s.rho).epsilon(1e-6));
            for (std::size_t i = 0; i < c.z_max; ++i) {
                CHECK(s.u[i] >= 0.0);
                CHECK(s.v[i] > 0.0);
            }
            // Support states of the quasi-stationary law below K carry mass.
            CHECK(s.u[static_cast<std::size_t>(c.theta.K()) - 1] > 0.0);
        }
    }

    TEST_CASE("rho is stable when the truncation is raised") {
        const auto m = OffspringModel::zero_inflated(Family::Ricker, BaseKind::Geometric);
        const Theta t{40, 2};
        const auto a = spectral(build_kernel(m, t, 320));
        const auto b = spectral(build_kernel(m, t, 640));
        CHECK(std::abs(a.rho - b.rho) < 2e-12);
    }

    TEST_CASE("right Perron solvers agree with the joint iteration") {
        const auto k = build_kernel(OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting),
                                    Theta{50, 0.54}, 200);
        const auto s = spectral(k);
        const double vmax = *std::max_element(s.v.begin(), s.v.end());
        const auto p = right_perron(k.q);
        const auto si = right_perron_shift_invert(k.q);
        CHECK(p.rho == doctest::Approx(s.rho).epsilon(1e-12));
        CHECK(si.rho == doctest::Approx(s.rho).epsilon(1e-12));
        for (std::size_t i = 0; i < 200; ++i) {
            CHECK(std::abs(p.v[i] - s.v[i] / vmax) < 1e-9);
            CHECK(std::abs(si.v[i] - s.v[i] / vmax) < 1e-9);
        }
    }
}
