#include "psdbp/errors.hpp"
#include "psdbp/io.hpp"
#include "psdbp/simulator.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

using namespace psdbp;
namespace fs = std::filesystem;

namespace {

OffspringModel bh_bin() { return OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting); }

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "psdbp_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

int run_cli(const std::string& args, const fs::path& err = scratch("stderr.txt")) {
    const std::string cmd = std::string(PSDBP_CLI_PATH) + " " + args + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

CensusSeries synthetic_census(const OffspringModel& model, const Theta& theta, std::uint64_t start, std::uint64_t steps,
                              std::uint64_t seed) {
    Rng rng(seed);
    const auto t = simulate_surviving(model, theta, start, steps, rng, 100000);
    CensusSeries c;
    for (std::size_t i = 0; i < t.states.size(); ++i) {
        c.years.push_back(1900 + static_cast<std::int64_t>(i));
        c.counts.push_back(t.states[i]);
    }
    return c;
}

} // namespace

TEST_SUITE("io") {
    TEST_CASE("shortest decimal round trip") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-1e6, 1e6);
        for (int i = 0; i < 1000; ++i) {
            const double x = u(rng) * std::pow(10.0, static_cast<double>(i % 40) - 20.0);
            const auto s = format_double(x);
            double y = 0.0;
            std::from_chars(s.data(), s.data() + s.size(), y);
            CHECK(x == y);
        }
        CHECK(format_double(0.1) == "0.1");
        CHECK(format_double(2.0) == "2");
    }

    TEST_CASE("digest is stable and sensitive") {
        CHECK(digest("") == "cbf29ce484222325");
        CHECK(digest("a") == "af63dc4c8601ec8c");
        CHECK(digest("ab") != digest("ba"));
    }

    TEST_CASE("trajectory csv round trip gives identical statistics") {
        SimConfig c;
        c.initial_size = 2;
        c.horizon = 40;
        c.replications = 5;
        c.condition_on_survival = true;
        c.seed = 3;
        const auto batch = simulate_batch(c, bh_bin(), Theta{30, 0.7});
        std::stringstream ss;
        write_batch_csv(batch, ss);
        const auto back = read_trajectories_csv(ss);
        REQUIRE(back.size() == 5);
        std::vector<std::vector<std::uint64_t>> orig;
        for (const auto& t : batch) orig.push_back(t.states);
        CHECK(back == orig);
        CHECK(sufficient_stats(back) == sufficient_stats(orig));

        std::stringstream single;
        write_trajectory_csv(batch[0], single);
        CHECK(read_trajectories_csv(single) == std::vector<std::vector<std::uint64_t>>{batch[0].states});
    }

    TEST_CASE("malformed trajectory files") {
        std::istringstream gap("t,z\n0,3\n2,4\n");
        CHECK_THROWS_AS(read_trajectories_csv(gap), IoError);
        std::istringstream header("time,size\n0,3\n");
        CHECK_THROWS_AS(read_trajectories_csv(header), IoError);
        std::istringstream neg("t,z\n0,-3\n");
        CHECK_THROWS_AS(read_trajectories_csv(neg), IoError);
    }

    TEST_CASE("census files") {
        std::istringstream ok("year,count\n1972,40\n1973,44\n1974,39\n");
        const auto c = read_census_csv(ok, "test");
        CHECK(c.years == std::vector<std::int64_t>{1972, 1973, 1974});
        CHECK(c.counts == std::vector<std::uint64_t>{40, 44, 39});
        std::ostringstream os;
        write_census_csv(c, os);
        std::istringstream again(os.str());
        CHECK(read_census_csv(again).counts == c.counts);

        std::istringstream gap("year,count\n1972,40\n1974,44\n");
        CHECK_THROWS_AS(read_census_csv(gap), IoError);
        std::istringstream zero("year,count\n1972,0\n1973,4\n");
        CHECK_THROWS_AS(read_census_csv(zero), IoError);
        std::istringstream header("yr,n\n1972,40\n");
        CHECK_THROWS_AS(read_census_csv(header), IoError);
    }

    TEST_CASE("model and theta json") {
        for (const auto& m : {bh_bin(), OffspringModel::zero_inflated(Family::Ricker, BaseKind::Geometric),
                              OffspringModel::robin(Family::RobinBevertonHolt),
                              OffspringModel::robin(Family::RobinRicker, BaseKind::Binomial)}) {
            const auto j = model_to_json(m);
            CHECK(model_to_json(model_from_json(j)) == j);
        }
        const auto t = theta_from_json(bh_bin(), Json{{"K", 50}, {"v", 0.7}});
        CHECK(t == Theta{50, 0.7});
        CHECK(theta_from_json(bh_bin(), theta_to_json(bh_bin(), t)) == t);
        CHECK_THROWS_AS(theta_from_json(bh_bin(), Json{{"K", 50}, {"mu", 2}}), Error);
        CHECK_THROWS_AS(model_from_json(Json{{"family", "logistic"}}), Error);
    }

    TEST_CASE("census fits need a robin family and enough data") {
        CensusSeries c{{1, 2}, {30, 31}, ""};
        CHECK_THROWS_AS(fit_census(c, OffspringModel::robin(Family::RobinBevertonHolt), WeightScheme::w2(),
                                   TargetMode::QProcess),
                        InsufficientDataError);
        c = CensusSeries{{1, 2, 3, 4}, {30, 31, 29, 30}, ""};
        CHECK_THROWS_AS(fit_census(c, bh_bin(), WeightScheme::w2(), TargetMode::QProcess), ParameterDomainError);
    }

    TEST_CASE("constant census is fitted exactly by the raw target") {
        const CensusSeries c{{1, 2, 3, 4, 5, 6}, {40, 40, 40, 40, 40, 40}, ""};
        const auto r = fit_census(c, OffspringModel::robin(Family::RobinBevertonHolt), WeightScheme::w2(), TargetMode::Raw);
        CHECK(r.objective < 1e-10);
        CHECK(std::isfinite(r.theta_hat[0]));
    }
}

TEST_SUITE("census") {
    TEST_CASE("synthetic robin census recovers its parameters") {
        const auto model = OffspringModel::robin(Family::RobinBevertonHolt);
        const Theta t0{109.2, 0.6988};
        const auto c = synthetic_census(model, t0, 100, 150, 21);
        EstimateOptions opt;
        opt.refine_top = 3;
        const auto r = fit_census(c, model, WeightScheme::w2(), TargetMode::QProcess, opt);
        CHECK(std::abs(r.theta_hat[0] / t0[0] - 1.0) < 0.1);
        CHECK(std::abs(r.theta_hat[1] / t0[1] - 1.0) < 0.1);

        // The binomial base is a close stand-in for the empirical one.
        const auto rb = fit_census(c, OffspringModel::robin(Family::RobinBevertonHolt, BaseKind::Binomial),
                                   WeightScheme::w2(), TargetMode::QProcess, opt);
        CHECK(std::abs(rb.theta_hat[0] / r.theta_hat[0] - 1.0) < 0.05);
        CHECK(std::abs(rb.theta_hat[1] / r.theta_hat[1] - 1.0) < 0.05);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("simulate is byte-identical under a fixed seed") {
        const std::string base = "simulate --family bh --base binary --K 50 --v 0.7 --N 2 --n 60 --reps 4 --survive --seed 9";
        CHECK(run_cli(base + " -o " + scratch("a.csv").string()) == 0);
        CHECK(run_cli(base + " -o " + scratch("b.csv").string()) == 0);
        const auto a = read_text(scratch("a.csv"));
        CHECK(!a.empty());
        CHECK(a == read_text(scratch("b.csv")));
        CHECK(run_cli("simulate --family bh --base binary --K 50 --v 0.7 --N 2 --n 60 --reps 4 --survive --seed 10 -o " +
                      scratch("c.csv").string()) == 0);
        CHECK(a != read_text(scratch("c.csv")));
    }

    TEST_CASE("estimate reads simulated output") {
        REQUIRE(run_cli("simulate --family bh --base binary --K 30 --v 0.7 --N 30 --n 400 --reps 2 --survive --seed 4 -o " +
                        scratch("sim.csv").string()) == 0);
        CHECK(run_cli("estimate --family bh --base binary --weights w2 --target raw -i " + scratch("sim.csv").string() +
                      " -o " + scratch("est.json").string()) == 0);
        const auto j = Json::parse(read_text(scratch("est.json")));
        CHECK(j.at("theta_hat").at("K").get<double>() > 20.0);
        CHECK(j.at("theta_hat").at("K").get<double>() < 40.0);
        CHECK(j.at("scheme") == "w2");
        CHECK(j.at("mode") == "raw");
    }

    TEST_CASE("dump-mup table") {
        CHECK(run_cli("dump-mup --family ricker --base geometric --K 40 --mu 2 -o " + scratch("mup.csv").string()) == 0);
        const auto text = read_text(scratch("mup.csv"));
        CHECK(text.substr(0, text.find('\n')) == "z,m,m_up,sigma2_up,stationary");
        std::istringstream is(text);
        std::string line;
        std::size_t rows = 0;
        while (std::getline(is, line)) ++rows;
        CHECK(rows == 321);
    }

    TEST_CASE("exit codes") {
        CHECK(run_cli("simulate --family bh --bogus", scratch("usage.txt")) == 2);
        const auto usage = Json::parse(read_text(scratch("usage.txt")));
        CHECK(usage.at("exit_code") == 2);
        CHECK(run_cli("dump-mup --family bh --base binary --K -5 --v 0.7", scratch("domain.txt")) == 1);
        const auto domain = Json::parse(read_text(scratch("domain.txt")));
        CHECK(domain.contains("error"));
        CHECK(run_cli("dump-mup --family bh --base binary --K 50 --mu 2", scratch("param.txt")) != 0);
    }
}
