#include "psdbp/asymptotics.hpp"
#include "psdbp/errors.hpp"
#include "psdbp/estimation.hpp"
#include "psdbp/experiments.hpp"
#include "psdbp/io.hpp"
#include "psdbp/kernel.hpp"
#include "psdbp/offspring.hpp"
#include "psdbp/simulator.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

namespace {

using psdbp::Json;

// Flags shared by every subcommand that names a model.
struct ModelFlags {
    std::string config;
    std::string family;
    std::string base;
    std::optional<double> K, v, mu, p;
    std::optional<double> death;
    std::optional<int> trials;
    std::optional<double> binomial_p;
    std::vector<double> empirical;

    void attach(CLI::App* app, bool with_theta) {
        app->add_option("--config", config, "JSON file with \"model\" and \"theta\" objects")->check(CLI::ExistingFile);
        app->add_option("--family", family, "bh, ricker, robin-bh or robin-ricker");
        app->add_option("--base", base, "geometric, binary, binomial or empirical");
        if (with_theta) {
            app->add_option("--K", K, "carrying capacity");
            app->add_option("--v", v, "binary-splitting success or robin breeding rate");
            app->add_option("--mu", mu, "geometric mean");
            app->add_option("--p", p, "binomial success probability");
        }
        app->add_option("--death", death, "robin adult death rate");
        app->add_option("--trials", trials, "binomial trials");
        app->add_option("--binomial-p", binomial_p, "robin binomial base probability");
        app->add_option("--empirical", empirical, "empirical base probabilities")->delimiter(',');
    }

    Json config_json() const {
        if (config.empty()) return Json::object();
        try {
            return Json::parse(psdbp::read_text(config));
        } catch (const Json::exception& e) {
            throw psdbp::IoError("bad config '" + config + "': " + e.what());
        }
    }

    psdbp::OffspringModel model() const {
        Json spec = config_json().value("model", Json::object());
        if (!family.empty()) {
            if (spec.contains("family") && spec["family"] != family) spec = Json::object();
            spec["family"] = family;
        }
        if (!base.empty()) spec["base"] = base;
        if (!spec.contains("family")) throw psdbp::ParameterDomainError("a model family is required (--family or --config)");
        if (death) spec["death"] = *death;
        if (trials) spec["binomial_trials"] = *trials;
        if (binomial_p) spec["binomial_p"] = *binomial_p;
        if (!empirical.empty()) spec["empirical"] = empirical;
        auto m = psdbp::model_from_json(spec);
        if (!is_robin(m.family) && m.base == psdbp::BaseKind::Empirical && m.empirical.empty())
            m.empirical = psdbp::kRobinEmpiricalBase;
        return m;
    }

    psdbp::Theta theta(const psdbp::OffspringModel& m) const {
        Json t = config_json().value("theta", Json::object());
        const std::pair<const char*, const std::optional<double>*> flags[] = {{"K", &K}, {"v", &v}, {"mu", &mu}, {"p", &p}};
        for (const auto& [name, value] : flags)
            if (value->has_value()) t[name] = **value;
        const auto names = psdbp::parameter_names(m);
        for (const auto& [name, value] : flags)
            if (value->has_value() && std::find(names.begin(), names.end(), name) == names.end())
                throw psdbp::ParameterDomainError(std::string("--") + name + " is not a parameter of this model");
        return psdbp::theta_from_json(m, t);
    }
};

struct EstimatorFlags {
    std::string weights = "w2";
    std::string target = "qprocess";
    std::size_t grid_points = 5;
    std::size_t refine_top = 0;
    std::optional<std::size_t> z_max;

    void attach(CLI::App* app) {
        app->add_option("--weights", weights, "w1, w2 or capped:<z*>")->capture_default_str();
        app->add_option("--target", target, "qprocess or raw")->capture_default_str();
        app->add_option("--grid-points", grid_points, "multistart lattice points per coordinate")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--refine-top", refine_top, "simplex runs from the best lattice points (0 = all)")->capture_default_str();
        app->add_option("--zmax", z_max, "fixed truncation level")->check(CLI::PositiveNumber);
    }

    psdbp::EstimateOptions options() const {
        psdbp::EstimateOptions o;
        o.grid_points = grid_points;
        o.refine_top = refine_top;
        o.z_max = z_max;
        return o;
    }
};

void print_error(const std::string& kind, const std::string& message, int code) {
    std::cerr << Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Population-size-dependent branching processes: simulation, Q-process curves and estimation"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate trajectories as a rep,t,z CSV");
    ModelFlags sim_model;
    sim_model.attach(sim, true);
    std::uint64_t sim_N = 1, sim_n = 1, sim_reps = 1, sim_attempts = 1'000'000;
    std::uint64_t sim_seed = 0;
    bool sim_survive = false;
    std::string sim_out = "-";
    sim->add_option("--N", sim_N, "initial population size")->capture_default_str();
    sim->add_option("--n", sim_n, "horizon")->capture_default_str();
    sim->add_option("--reps", sim_reps, "replications")->capture_default_str();
    sim->add_option("--seed", sim_seed, "master seed")->required();
    sim->add_flag("--survive", sim_survive, "condition on survival to the horizon");
    sim->add_option("--max-attempts", sim_attempts, "rejection attempts per replication")->capture_default_str();
    sim->add_option("--output,-o", sim_out, "output CSV (- for stdout)")->capture_default_str();

    // estimate
    auto* est = app.add_subcommand("estimate", "fit a model to trajectories read from CSV");
    ModelFlags est_model;
    est_model.attach(est, false);
    EstimatorFlags est_flags;
    est_flags.attach(est);
    std::string est_in, est_out = "-";
    est->add_option("--input,-i", est_in, "t,z or rep,t,z CSV; replications are pooled")->required()->check(CLI::ExistingFile);
    est->add_option("--output,-o", est_out, "report JSON (- for stdout)")->capture_default_str();

    // dump-mup
    auto* dump = app.add_subcommand("dump-mup", "tabulate m, m_up, sigma2_up and the stationary law");
    ModelFlags dump_model;
    dump_model.attach(dump, true);
    std::optional<std::size_t> dump_zmax;
    std::string dump_out = "-";
    dump->add_option("--zmax", dump_zmax, "truncation level (default max(8K, 64))")->check(CLI::PositiveNumber);
    dump->add_option("--output,-o", dump_out, "output CSV (- for stdout)")->capture_default_str();

    // asymptotics
    auto* asy = app.add_subcommand("asymptotics", "asymptotic covariance of the Q-target estimator");
    ModelFlags asy_model;
    asy_model.attach(asy, true);
    std::string asy_weights = "w2", asy_out = "-", asy_ellipse;
    std::optional<std::size_t> asy_zmax;
    std::optional<double> asy_n;
    double asy_level = 0.95;
    std::size_t asy_points = 200;
    asy->add_option("--weights", asy_weights, "w1, w2 or capped:<z*>")->capture_default_str();
    asy->add_option("--zmax", asy_zmax, "truncation level")->check(CLI::PositiveNumber);
    asy->add_option("--n", asy_n, "sample horizon for intervals and the ellipse")->check(CLI::PositiveNumber);
    asy->add_option("--level", asy_level, "confidence level")->capture_default_str();
    asy->add_option("--points", asy_points, "ellipse points")->capture_default_str();
    asy->add_option("--ellipse", asy_ellipse, "write the confidence ellipse as phi,x,y CSV");
    asy->add_option("--output,-o", asy_out, "report JSON (- for stdout)")->capture_default_str();

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a Monte Carlo study from a JSON config");
    std::string exp_config, exp_dir;
    std::optional<std::uint64_t> exp_seed;
    bool exp_verbose = false;
    exp->add_option("--config", exp_config, "study config JSON")->required()->check(CLI::ExistingFile);
    exp->add_option("--seed", exp_seed, "master seed (overrides the config)");
    exp->add_option("--output-dir", exp_dir, "output directory (overrides the config)");
    exp->add_flag("--verbose", exp_verbose, "progress on stderr");

    // fit-census
    auto* cen = app.add_subcommand("fit-census", "fit a robin model to a year,count census CSV");
    ModelFlags cen_model;
    cen_model.attach(cen, false);
    EstimatorFlags cen_flags;
    cen_flags.attach(cen);
    std::string cen_in, cen_out = "-";
    cen->add_option("--input,-i", cen_in, "census CSV")->required()->check(CLI::ExistingFile);
    cen->add_option("--output,-o", cen_out, "report JSON (- for stdout)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what(), 2);
        return 2;
    }

    try {
        if (*sim) {
            const auto model = sim_model.model();
            const auto theta = sim_model.theta(model);
            psdbp::SimConfig c;
            c.initial_size = sim_N;
            c.horizon = sim_n;
            c.replications = sim_reps;
            c.condition_on_survival = sim_survive;
            c.max_attempts = sim_attempts;
            c.seed = sim_seed;
            const auto batch = psdbp::simulate_batch(c, model, theta);
            std::ostringstream os;
            psdbp::write_batch_csv(batch, os);
            psdbp::write_text(sim_out, os.str());
        } else if (*est) {
            const auto model = est_model.model();
            const std::string bytes = psdbp::read_text(est_in);
            std::istringstream is(bytes);
            const auto stats = psdbp::sufficient_stats(psdbp::read_trajectories_csv(is));
            const auto res = psdbp::estimate(stats, model, psdbp::parse_weight_scheme(est_flags.weights),
                                             psdbp::parse_target(est_flags.target), est_flags.options());
            psdbp::write_text(est_out, psdbp::estimate_report(res, stats, model, psdbp::digest(bytes)).dump(2) + "\n");
        } else if (*dump) {
            const auto model = dump_model.model();
            const auto theta = dump_model.theta(model);
            std::ostringstream os;
            psdbp::write_mup_csv(model, theta, dump_zmax.value_or(psdbp::default_z_max(theta.K())), os);
            psdbp::write_text(dump_out, os.str());
        } else if (*asy) {
            const auto model = asy_model.model();
            const auto theta = asy_model.theta(model);
            const auto rep = psdbp::covariance(model, theta, psdbp::parse_weight_scheme(asy_weights),
                                               asy_zmax.value_or(psdbp::default_z_max(theta.K())));
            Json j = psdbp::covariance_report(rep, model);
            if (asy_n) {
                Json ci = Json::array();
                for (const auto& [lo, hi] : psdbp::confidence_interval(theta, rep.beta, *asy_n, asy_level)) ci.push_back({lo, hi});
                j["n"] = *asy_n;
                j["level"] = asy_level;
                j["intervals"] = ci;
            }
            if (!asy_ellipse.empty()) {
                if (!asy_n) throw psdbp::DomainError("--ellipse needs --n");
                const auto pts = psdbp::confidence_ellipse(theta, rep.beta, *asy_n, asy_level, asy_points);
                std::ostringstream os;
                psdbp::write_ellipse_csv(pts, os);
                psdbp::write_text(asy_ellipse, os.str());
            }
            psdbp::write_text(asy_out, j.dump(2) + "\n");
        } else if (*exp) {
            Json j;
            try {
                j = Json::parse(psdbp::read_text(exp_config));
            } catch (const Json::exception& e) {
                throw psdbp::IoError("bad config '" + exp_config + "': " + e.what());
            }
            if (exp_seed) j["seed"] = *exp_seed;
            if (!j.contains("seed")) throw psdbp::DomainError("a seed is required (--seed or \"seed\" in the config)");
            if (!exp_dir.empty()) j["output_dir"] = exp_dir;
            if (exp_verbose) j["verbose"] = true;
            const auto config = psdbp::experiment_config_from_json(j);
            if (config.output_dir.empty()) throw psdbp::DomainError("an output directory is required");
            const auto res = psdbp::run_study(config);
            psdbp::write_study_outputs(res, config.output_dir);
        } else if (*cen) {
            if (cen_model.family.empty() && cen_model.config.empty()) cen_model.family = "robin-bh";
            const auto model = cen_model.model();
            const std::string bytes = psdbp::read_text(cen_in);
            std::istringstream is(bytes);
            const auto series = psdbp::read_census_csv(is, cen_in);
            const auto res = psdbp::fit_census(series, model, psdbp::parse_weight_scheme(cen_flags.weights),
                                               psdbp::parse_target(cen_flags.target), cen_flags.options());
            const auto stats = psdbp::sufficient_stats(std::span<const std::uint64_t>(series.counts));
            Json r = psdbp::estimate_report(res, stats, model, psdbp::digest(bytes));
            r["years"] = {series.years.front(), series.years.back()};
            psdbp::write_text(cen_out, r.dump(2) + "\n");
        }
    } catch (const psdbp::Error& e) {
        print_error(e.kind(), e.what(), 1);
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what(), 1);
        return 1;
    }
    return 0;
}
