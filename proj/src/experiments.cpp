#include "psdbp/experiments.hpp"

#include "psdbp/kernel.hpp"
#include "psdbp/qprocess.hpp"
#include "psdbp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace psdbp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string csv_number(double x) { return std::isfinite(x) ? format_double(x) : (std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf")); }

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

double parse_double(const std::string& s) {
    if (s == "nan") return kNaN;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::logic_error&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty()) throw IoError("'" + s + "' is not a number");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::logic_error&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty() || s[0] == '-') throw IoError("'" + s + "' is not a non-negative integer");
    return v;
}

void log(const ExperimentConfig& c, const std::string& msg) {
    if (c.verbose) std::cerr << "[" << study_name(c.kind) << "] " << msg << std::endl;
}

std::vector<Trajectory> simulate_horizon(const ExperimentConfig& c, std::size_t h_index) {
    SimConfig sc;
    sc.initial_size = c.initial_size;
    sc.horizon = c.horizons[h_index];
    sc.replications = c.replications;
    sc.condition_on_survival = true;
    sc.max_attempts = c.max_attempts;
    sc.seed = stream_seed(c.seed, h_index);
    try {
        return simulate_batch(sc, c.model, c.theta0);
    } catch (const BatchAbortedError& e) {
        throw StudyAbortedError("simulation failed at horizon " + std::to_string(sc.horizon) + ": " + e.what());
    }
}

// Fits every estimator to every sample; records come back in (sample,
// estimator) order whatever the thread schedule.
std::vector<ReplicationRecord> fit_samples(const ExperimentConfig& c, std::uint64_t horizon,
                                           const std::vector<SufficientStats>& samples,
                                           const std::vector<std::uint64_t>& attempts) {
    const std::size_t d = parameter_count(c.model);
    const std::size_t ne = c.estimators.size();
    std::vector<ReplicationRecord> out(samples.size() * ne);
    EstimateOptions opts;
    opts.grid_points = c.grid_points;
    opts.refine_top = c.refine_top;

    const auto tasks = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t t = 0; t < tasks; ++t) {
        const std::size_t rep = static_cast<std::size_t>(t) / ne;
        const EstimatorSpec& spec = c.estimators[static_cast<std::size_t>(t) % ne];
        ReplicationRecord& r = out[static_cast<std::size_t>(t)];
        r.horizon = horizon;
        r.rep = rep;
        r.estimator = spec.name();
        r.attempts = attempts[rep];
        try {
            const auto res = estimate(samples[rep], c.model, spec.scheme, spec.mode, opts);
            r.theta = res.theta_hat.values;
            r.objective = res.objective;
            r.converged = res.converged;
        } catch (const Error& e) {
            r.ok = false;
            r.theta.assign(d, kNaN);
            r.objective = kNaN;
            r.message = e.kind() + ": " + e.what();
        }
    }
    return out;
}

// Shared core of the growing, stationary and coverage studies.
StudyResult run_fits(const ExperimentConfig& c) {
    validate(c);
    StudyResult res;
    res.config = c;
    res.parameter_names = parameter_names(c.model);

    for (std::size_t h = 0; h < c.horizons.size(); ++h) {
        const auto n = c.horizons[h];
        log(c, "horizon " + std::to_string(n) + ": simulating " + std::to_string(c.replications) + " trajectories");
        const auto batch = simulate_horizon(c, h);
        std::vector<SufficientStats> samples;
        std::vector<std::uint64_t> attempts;
        if (c.pooled) {
            samples.push_back(sufficient_stats(std::span<const Trajectory>(batch)));
            std::uint64_t total = 0;
            for (const auto& t : batch) total += t.attempts;
            attempts.push_back(total);
        } else {
            for (const auto& t : batch) {
                samples.push_back(sufficient_stats(std::span<const std::uint64_t>(t.states)));
                attempts.push_back(t.attempts);
            }
        }
        log(c, "horizon " + std::to_string(n) + ": fitting " + std::to_string(samples.size() * c.estimators.size()) +
                   " estimates");
        auto recs = fit_samples(c, n, samples, attempts);
        res.records.insert(res.records.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }

    if (!c.output_dir.empty()) {
        std::filesystem::create_directories(c.output_dir);
        std::ofstream os(c.output_dir / "estimates.csv", std::ios::binary);
        if (!os) throw IoError("cannot write estimates under '" + c.output_dir.string() + "'");
        write_estimates_csv(res.records, res.parameter_names, os);
    }

    res.failures = static_cast<std::size_t>(std::count_if(res.records.begin(), res.records.end(), [](const auto& r) { return !r.ok; }));
    if (static_cast<double>(res.failures) > c.max_failure_fraction * static_cast<double>(res.records.size())) {
        std::string first;
        for (const auto& r : res.records)
            if (!r.ok) {
                first = r.message;
                break;
            }
        throw StudyAbortedError(std::to_string(res.failures) + " of " + std::to_string(res.records.size()) +
                                " fits failed (first: " + first + ")");
    }

    res.summary = aggregate(res.records, res.parameter_names, c.theta0);
    res.differences = k_differences(res.records, EstimatorSpec{WeightScheme::w2(), TargetMode::QProcess}.name());
    return res;
}

void add_theory(StudyResult& res) {
    const auto& c = res.config;
    for (const auto& spec : c.estimators) {
        if (spec.mode != TargetMode::QProcess) continue;
        log(c, "asymptotic covariance for " + spec.name());
        res.theory.push_back({spec.name(), covariance(c.model, c.theta0, spec.scheme, default_z_max(c.theta0.K()))});
    }
}

const TheoryEntry* find_theory(const std::vector<TheoryEntry>& theory, const std::string& estimator) {
    for (const auto& t : theory)
        if (t.estimator == estimator) return &t;
    return nullptr;
}

void add_histograms(StudyResult& res) {
    const auto& c = res.config;
    const std::size_t d = res.parameter_names.size();
    for (const auto& spec : c.estimators) {
        const auto* th = find_theory(res.theory, spec.name());
        for (std::size_t j = 0; j < d; ++j) {
            for (auto n : c.horizons) {
                std::vector<double> x;
                for (const auto& r : res.records)
                    if (r.ok && r.horizon == n && r.estimator == spec.name()) x.push_back(r.theta[j]);
                if (x.empty()) continue;
                double lo = *std::min_element(x.begin(), x.end());
                double hi = *std::max_element(x.begin(), x.end());
                if (!(hi > lo)) {
                    const double pad = std::max(1e-9, 1e-6 * std::abs(lo));
                    lo -= pad;
                    hi += pad;
                }
                const std::size_t bins = c.histogram_bins;
                const double width = (hi - lo) / static_cast<double>(bins);
                std::vector<std::size_t> counts(bins, 0);
                for (double v : x) {
                    auto b = static_cast<std::size_t>((v - lo) / width);
                    counts[std::min(b, bins - 1)]++;
                }
                const double sd = th ? std::sqrt(th->report.beta[j][j] / static_cast<double>(n)) : kNaN;
                for (std::size_t b = 0; b < bins; ++b) {
                    HistogramBin hb;
                    hb.estimator = spec.name();
                    hb.parameter = res.parameter_names[j];
                    hb.horizon = n;
                    hb.lo = lo + width * static_cast<double>(b);
                    hb.hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
                    hb.count = counts[b];
                    hb.density = static_cast<double>(counts[b]) / (static_cast<double>(x.size()) * width);
                    if (th) {
                        const double zc = (0.5 * (hb.lo + hb.hi) - c.theta0[j]) / sd;
                        hb.normal_density = std::exp(-0.5 * zc * zc) / (sd * std::sqrt(2.0 * M_PI));
                    } else {
                        hb.normal_density = kNaN;
                    }
                    res.histograms.push_back(hb);
                }
            }
        }
    }
}

void add_ellipses(StudyResult& res) {
    const auto& c = res.config;
    if (res.parameter_names.size() != 2) return;
    for (const auto& t : res.theory)
        for (auto n : c.horizons)
            for (double level : c.ellipse_levels)
                for (const auto& p : confidence_ellipse(c.theta0, t.report.beta, static_cast<double>(n), level, c.ellipse_points))
                    res.ellipses.push_back({t.estimator, n, level, p});
}

void write_csv_file(const std::filesystem::path& path, const std::string& text) { write_text(path, text); }

} // namespace

// --- estimators and configs ---------------------------------------------

std::string EstimatorSpec::name() const { return scheme.name() + "/" + target_name(mode); }

EstimatorSpec parse_estimator(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) throw DomainError("estimator '" + s + "' must look like w2/qprocess");
    return {parse_weight_scheme(s.substr(0, slash)), parse_target(s.substr(slash + 1))};
}

std::vector<EstimatorSpec> default_estimators() {
    return {{WeightScheme::w2(), TargetMode::QProcess},
            {WeightScheme::w2(), TargetMode::Raw},
            {WeightScheme::w1(), TargetMode::QProcess},
            {WeightScheme::w1(), TargetMode::Raw}};
}

std::string study_name(StudyKind kind) {
    switch (kind) {
    case StudyKind::Growing: return "growing";
    case StudyKind::Stationary: return "stationary";
    case StudyKind::Coverage: return "coverage";
    case StudyKind::Motivation: return "motivation";
    }
    return "?";
}

StudyKind parse_study(const std::string& s) {
    for (auto k : {StudyKind::Growing, StudyKind::Stationary, StudyKind::Coverage, StudyKind::Motivation})
        if (study_name(k) == s) return k;
    throw DomainError("unknown study kind '" + s + "' (expected growing, stationary, coverage or motivation)");
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& m) { throw ParameterDomainError("experiment config: " + m); };
    validate(c.model, c.theta0);
    if (c.horizons.empty()) fail("horizons must be non-empty");
    for (std::size_t i = 0; i < c.horizons.size(); ++i) {
        if (c.horizons[i] < 1) fail("horizons must be positive");
        if (i > 0 && c.horizons[i] <= c.horizons[i - 1]) fail("horizons must be strictly increasing");
    }
    if (c.replications < 1) fail("replications must be at least 1");
    if (c.initial_size < 1) fail("initial_size must be at least 1");
    if (c.max_attempts < 1) fail("max_attempts must be at least 1");
    if (c.kind != StudyKind::Motivation) {
        if (c.estimators.empty()) fail("at least one estimator is required");
        std::set<std::string> names;
        for (const auto& e : c.estimators)
            if (!names.insert(e.name()).second) fail("duplicate estimator " + e.name());
    }
    if (c.grid_points < 1) fail("grid_points must be at least 1");
    if (!(c.level >= 0.0 && c.level <= 1.0)) fail("level must lie in [0, 1]");
    for (double l : c.ellipse_levels)
        if (!(l >= 0.0 && l < 1.0)) fail("ellipse levels must lie in [0, 1)");
    if (c.histogram_bins < 1) fail("histogram_bins must be at least 1");
    if (!(c.max_failure_fraction >= 0.0 && c.max_failure_fraction <= 1.0)) fail("max_failure_fraction must lie in [0, 1]");
    if ((c.kind == StudyKind::Coverage || c.kind == StudyKind::Stationary) && parameter_count(c.model) > 2)
        fail("coverage needs at most two parameters");
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    try {
        ExperimentConfig c;
        c.kind = parse_study(j.at("kind").get<std::string>());
        c.model = model_from_json(j.at("model"));
        c.theta0 = theta_from_json(c.model, j.at("theta0"));
        c.initial_size = j.value("initial_size", c.initial_size);
        c.horizons = j.at("horizons").get<std::vector<std::uint64_t>>();
        c.replications = j.at("replications").get<std::uint64_t>();
        c.max_attempts = j.value("max_attempts", c.max_attempts);
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("estimators")) {
            c.estimators.clear();
            for (const auto& e : j["estimators"]) c.estimators.push_back(parse_estimator(e.get<std::string>()));
        }
        c.pooled = j.value("pooled", c.pooled);
        c.grid_points = j.value("grid_points", c.grid_points);
        c.refine_top = j.value("refine_top", c.refine_top);
        c.level = j.value("level", c.level);
        c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
        if (j.contains("ellipse_levels")) c.ellipse_levels = j["ellipse_levels"].get<std::vector<double>>();
        c.ellipse_points = j.value("ellipse_points", c.ellipse_points);
        c.max_failure_fraction = j.value("max_failure_fraction", c.max_failure_fraction);
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        c.verbose = j.value("verbose", c.verbose);
        if (j.contains("notes")) c.notes = j["notes"];
        validate(c);
        return c;
    } catch (const Json::exception& e) {
        throw IoError(std::string("bad experiment config: ") + e.what());
    }
}

Json to_json(const ExperimentConfig& c) {
    Json est = Json::array();
    for (const auto& e : c.estimators) est.push_back(e.name());
    return Json{{"kind", study_name(c.kind)},
                {"model", model_to_json(c.model)},
                {"theta0", theta_to_json(c.model, c.theta0)},
                {"initial_size", c.initial_size},
                {"horizons", c.horizons},
                {"replications", c.replications},
                {"max_attempts", c.max_attempts},
                {"seed", c.seed},
                {"estimators", est},
                {"pooled", c.pooled},
                {"grid_points", c.grid_points},
                {"refine_top", c.refine_top},
                {"level", c.level},
                {"histogram_bins", c.histogram_bins},
                {"ellipse_levels", c.ellipse_levels},
                {"ellipse_points", c.ellipse_points},
                {"max_failure_fraction", c.max_failure_fraction},
                {"notes", c.notes}};
}

// --- statistics ---------------------------------------------------------

double sample_mean(std::span<const double> x) {
    if (x.empty()) return kNaN;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_median(std::span<const double> x) {
    if (x.empty()) return kNaN;
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const std::size_t m = s.size() / 2;
    return s.size() % 2 ? s[m] : 0.5 * (s[m - 1] + s[m]);
}

double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return x.empty() ? kNaN : 0.0;
    const double mu = sample_mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double rmse_rel(double mean, double sd, double theta0) {
    if (theta0 == 0.0) throw DomainError("relative error needs a nonzero true value");
    return ((mean - theta0) * (mean - theta0) + sd * sd) / (theta0 * theta0);
}

SummaryTable aggregate(const std::vector<ReplicationRecord>& records, const std::vector<std::string>& names,
                       const Theta& theta0) {
    std::vector<std::string> estimators;
    std::set<std::uint64_t> horizons;
    for (const auto& r : records) {
        if (std::find(estimators.begin(), estimators.end(), r.estimator) == estimators.end()) estimators.push_back(r.estimator);
        horizons.insert(r.horizon);
    }
    SummaryTable out;
    for (const auto& e : estimators)
        for (std::size_t j = 0; j < names.size(); ++j)
            for (auto n : horizons) {
                std::vector<double> x;
                for (const auto& r : records)
                    if (r.ok && r.estimator == e && r.horizon == n) x.push_back(r.theta.at(j));
                if (x.empty()) continue;
                SummaryRow row;
                row.estimator = e;
                row.parameter = names[j];
                row.horizon = n;
                row.count = x.size();
                row.theta0 = theta0[j];
                row.mean = sample_mean(x);
                row.median = sample_median(x);
                row.sd = sample_sd(x);
                row.rmse_rel = rmse_rel(row.mean, row.sd, row.theta0);
                out.push_back(row);
            }
    return out;
}

void write_estimates_csv(const std::vector<ReplicationRecord>& records, const std::vector<std::string>& names,
                         std::ostream& os) {
    os << "horizon,rep,estimator,status,converged,objective,attempts";
    for (const auto& n : names) os << ',' << n;
    os << ",message\n";
    for (const auto& r : records) {
        os << r.horizon << ',' << r.rep << ',' << r.estimator << ',' << (r.ok ? "ok" : "failed") << ','
           << (r.converged ? 1 : 0) << ',' << csv_number(r.objective) << ',' << r.attempts;
        for (std::size_t j = 0; j < names.size(); ++j) os << ',' << csv_number(j < r.theta.size() ? r.theta[j] : kNaN);
        os << ',' << sanitize(r.message) << '\n';
    }
}

std::vector<ReplicationRecord> read_estimates_csv(std::istream& is, std::vector<std::string>* names_out) {
    auto split = [](const std::string& line) {
        std::vector<std::string> f;
        std::string cur;
        std::istringstream ss(line);
        while (std::getline(ss, cur, ',')) f.push_back(cur);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        return f;
    };
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty estimates file");
    const auto header = split(line);
    const std::vector<std::string> fixed{"horizon", "rep", "estimator", "status", "converged", "objective", "attempts"};
    if (header.size() < fixed.size() + 1 || !std::equal(fixed.begin(), fixed.end(), header.begin()) ||
        header.back() != "message")
        throw IoError("unexpected estimates header");
    const std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(fixed.size()), header.end() - 1);
    if (names_out) *names_out = names;

    std::vector<ReplicationRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != header.size()) throw IoError("estimates row has " + std::to_string(f.size()) + " fields");
        ReplicationRecord r;
        r.horizon = parse_u64(f[0]);
        r.rep = parse_u64(f[1]);
        r.estimator = f[2];
        r.ok = f[3] == "ok";
        r.converged = f[4] == "1";
        r.objective = parse_double(f[5]);
        r.attempts = parse_u64(f[6]);
        for (std::size_t j = 0; j < names.size(); ++j) r.theta.push_back(parse_double(f[fixed.size() + j]));
        r.message = f.back();
        out.push_back(std::move(r));
    }
    return out;
}

void write_summary_csv(const SummaryTable& table, std::ostream& os) {
    os << "estimator,parameter,horizon,count,theta0,mean,median,sd,rmse_rel\n";
    for (const auto& r : table)
        os << r.estimator << ',' << r.parameter << ',' << r.horizon << ',' << r.count << ',' << csv_number(r.theta0) << ','
           << csv_number(r.mean) << ',' << csv_number(r.median) << ',' << csv_number(r.sd) << ',' << csv_number(r.rmse_rel)
           << '\n';
}

std::vector<DifferenceRow> k_differences(const std::vector<ReplicationRecord>& records, const std::string& minuend) {
    std::vector<DifferenceRow> out;
    for (const auto& a : records) {
        if (!a.ok || a.estimator != minuend) continue;
        for (const auto& b : records) {
            if (!b.ok || b.horizon != a.horizon || b.rep != a.rep || b.estimator == minuend) continue;
            if (b.estimator.size() < 4 || b.estimator.compare(b.estimator.size() - 4, 4, "/raw") != 0) continue;
            out.push_back({a.horizon, a.rep, minuend, b.estimator, a.theta.at(0) - b.theta.at(0)});
        }
    }
    return out;
}

std::vector<CoverageRow> coverage(const std::vector<ReplicationRecord>& records, const std::vector<TheoryEntry>& theory,
                                  const std::vector<std::string>& names, const Theta& theta0, double level) {
    if (!(level >= 0.0 && level <= 1.0)) throw DomainError("coverage level must lie in [0, 1]");
    const std::size_t d = names.size();
    std::vector<CoverageRow> out;
    std::set<std::uint64_t> horizons;
    for (const auto& r : records) horizons.insert(r.horizon);
    for (const auto& t : theory) {
        const auto& beta = t.report.beta;
        for (auto n : horizons) {
            std::vector<std::size_t> hits(d + 1, 0);
            std::size_t count = 0;
            const double nn = static_cast<double>(n);
            for (const auto& r : records) {
                if (!r.ok || r.estimator != t.estimator || r.horizon != n) continue;
                ++count;
                const auto ci = confidence_interval(Theta(r.theta), beta, nn, level);
                for (std::size_t j = 0; j < d; ++j)
                    if (ci[j].first <= theta0[j] && theta0[j] <= ci[j].second) hits[j]++;
                if (d == 2) {
                    const double det = beta[0][0] * beta[1][1] - beta[0][1] * beta[1][0];
                    const double a = r.theta[0] - theta0[0];
                    const double b = r.theta[1] - theta0[1];
                    const double q = nn * (beta[1][1] * a * a - 2.0 * beta[0][1] * a * b + beta[0][0] * b * b) / det;
                    if (q <= chi2_2_quantile(level)) hits[d]++;
                }
            }
            if (count == 0) continue;
            const auto frac = [&](std::size_t h) { return static_cast<double>(h) / static_cast<double>(count); };
            for (std::size_t j = 0; j < d; ++j) out.push_back({t.estimator, names[j], n, level, count, frac(hits[j])});
            if (d == 2) out.push_back({t.estimator, "joint", n, level, count, frac(hits[d])});
        }
    }
    return out;
}

// --- studies ------------------------------------------------------------

StudyResult run_growing_study(const ExperimentConfig& config) { return run_fits(config); }

StudyResult run_stationary_study(const ExperimentConfig& config) {
    StudyResult res = run_fits(config);
    add_theory(res);
    add_histograms(res);
    add_ellipses(res);
    res.coverage = coverage(res.records, res.theory, res.parameter_names, config.theta0, config.level);
    return res;
}

StudyResult run_coverage_study(const ExperimentConfig& config, double level) {
    StudyResult res = run_fits(config);
    add_theory(res);
    res.coverage = coverage(res.records, res.theory, res.parameter_names, config.theta0, level);
    return res;
}

StudyResult run_motivation_study(const ExperimentConfig& config) {
    validate(config);
    StudyResult res;
    res.config = config;
    res.parameter_names = parameter_names(config.model);
    const std::size_t h = config.horizons.size() - 1;
    log(config, "simulating " + std::to_string(config.replications) + " trajectories to " +
                    std::to_string(config.horizons[h]));
    const auto batch = simulate_horizon(config, h);

    std::vector<SufficientStats> per;
    SufficientStats pooled;
    for (const auto& t : batch) {
        per.push_back(sufficient_stats(std::span<const std::uint64_t>(t.states)));
        pooled.merge(per.back());
    }
    const auto z_max = default_z_max(config.theta0.K(), pooled.max_state());
    const auto mup = m_up_curve(config.model, config.theta0, z_max);
    for (const auto& [z, visits] : pooled.visits) {
        (void)visits;
        MotivationRow row;
        row.z = z;
        double sum = 0.0;
        for (const auto& s : per)
            if (s.visits.count(z)) {
                sum += mle_m(s, z);
                row.trajectories++;
            }
        row.mean_m_hat = sum / static_cast<double>(row.trajectories);
        row.pooled_m_hat = mle_m(pooled, z);
        row.m_up = mup[z - 1];
        row.m = offspring_mean(config.model, static_cast<double>(z), config.theta0);
        res.motivation.push_back(row);
    }
    return res;
}

StudyResult run_study(const ExperimentConfig& config) {
    switch (config.kind) {
    case StudyKind::Growing: return run_growing_study(config);
    case StudyKind::Stationary: return run_stationary_study(config);
    case StudyKind::Coverage: return run_coverage_study(config, config.level);
    case StudyKind::Motivation: return run_motivation_study(config);
    }
    throw DomainError("unknown study kind");
}

void write_study_outputs(const StudyResult& res, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.json", to_json(res.config).dump(2) + "\n");
    auto emit = [&](const std::string& file, auto&& body) {
        std::ostringstream os;
        body(os);
        write_csv_file(dir / file, os.str());
    };
    if (!res.records.empty()) {
        emit("estimates.csv", [&](std::ostream& os) { write_estimates_csv(res.records, res.parameter_names, os); });
        emit("summary.csv", [&](std::ostream& os) { write_summary_csv(res.summary, os); });
    }
    if (!res.differences.empty())
        emit("differences.csv", [&](std::ostream& os) {
            os << "horizon,rep,minuend,subtrahend,difference\n";
            for (const auto& d : res.differences)
                os << d.horizon << ',' << d.rep << ',' << d.minuend << ',' << d.subtrahend << ',' << csv_number(d.difference) << '\n';
        });
    if (!res.theory.empty()) {
        Json t = Json::array();
        for (const auto& e : res.theory) {
            Json r = covariance_report(e.report, res.config.model);
            r["estimator"] = e.estimator;
            t.push_back(std::move(r));
        }
        write_text(dir / "theory.json", t.dump(2) + "\n");
    }
    if (!res.histograms.empty())
        emit("histograms.csv", [&](std::ostream& os) {
            os << "estimator,parameter,horizon,lo,hi,count,density,normal_density\n";
            for (const auto& b : res.histograms)
                os << b.estimator << ',' << b.parameter << ',' << b.horizon << ',' << csv_number(b.lo) << ',' << csv_number(b.hi)
                   << ',' << b.count << ',' << csv_number(b.density) << ',' << csv_number(b.normal_density) << '\n';
        });
    if (!res.ellipses.empty())
        emit("ellipses.csv", [&](std::ostream& os) {
            os << "estimator,horizon,level,phi,x,y\n";
            for (const auto& e : res.ellipses)
                os << e.estimator << ',' << e.horizon << ',' << csv_number(e.level) << ',' << csv_number(e.point.phi) << ','
                   << csv_number(e.point.x) << ',' << csv_number(e.point.y) << '\n';
        });
    if (!res.coverage.empty())
        emit("coverage.csv", [&](std::ostream& os) {
            os << "estimator,parameter,horizon,level,count,coverage\n";
            for (const auto& c : res.coverage)
                os << c.estimator << ',' << c.parameter << ',' << c.horizon << ',' << csv_number(c.level) << ',' << c.count << ','
                   << csv_number(c.coverage) << '\n';
        });
    if (!res.motivation.empty())
        emit("motivation.csv", [&](std::ostream& os) {
            os << "z,trajectories,mean_m_hat,pooled_m_hat,m_up,m\n";
            for (const auto& m : res.motivation)
                os << m.z << ',' << m.trajectories << ',' << csv_number(m.mean_m_hat) << ',' << csv_number(m.pooled_m_hat) << ','
                   << csv_number(m.m_up) << ',' << csv_number(m.m) << '\n';
        });
}

} // namespace psdbp
