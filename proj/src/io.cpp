#include "psdbp/io.hpp"

#include "psdbp/qprocess.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

namespace psdbp {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
}

template <class T>
T parse_integer(const std::string& field, std::size_t line_no) {
    T v{};
    const std::string f = trim(field);
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw IoError("line " + std::to_string(line_no) + ": '" + f + "' is not a valid integer");
    }
    return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

} // namespace

void write_trajectory_csv(const Trajectory& t, std::ostream& os) {
    os << "t,z\n";
    for (std::size_t i = 0; i < t.states.size(); ++i) os << i << ',' << t.states[i] << '\n';
}

void write_batch_csv(std::span<const Trajectory> batch, std::ostream& os) {
    os << "rep,t,z\n";
    for (std::size_t r = 0; r < batch.size(); ++r)
        for (std::size_t i = 0; i < batch[r].states.size(); ++i) os << r << ',' << i << ',' << batch[r].states[i] << '\n';
}

std::vector<std::vector<std::uint64_t>> read_trajectories_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty trajectory file");
    const auto header = split(trim(line));
    bool long_format = false;
    if (header == std::vector<std::string>{"rep", "t", "z"}) long_format = true;
    else if (header != std::vector<std::string>{"t", "z"})
        throw IoError("trajectory header must be 't,z' or 'rep,t,z', got '" + trim(line) + "'");

    std::vector<std::vector<std::uint64_t>> out;
    std::uint64_t current_rep = 0;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != (long_format ? 3u : 2u)) throw IoError("line " + std::to_string(line_no) + ": wrong field count");
        const std::uint64_t rep = long_format ? parse_integer<std::uint64_t>(f[0], line_no) : 0;
        const auto t = parse_integer<std::uint64_t>(f[long_format ? 1 : 0], line_no);
        const auto z = parse_integer<std::uint64_t>(f[long_format ? 2 : 1], line_no);
        if (out.empty() || rep != current_rep) {
            if (!out.empty() && rep < current_rep) throw IoError("line " + std::to_string(line_no) + ": replications out of order");
            out.emplace_back();
            current_rep = rep;
        }
        if (t != out.back().size()) throw IoError("line " + std::to_string(line_no) + ": time index out of sequence");
        out.back().push_back(z);
    }
    if (out.empty()) throw IoError("trajectory file has no rows");
    return out;
}

std::vector<std::vector<std::uint64_t>> read_trajectories_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_trajectories_csv(in);
}

CensusSeries read_census_csv(std::istream& is, const std::string& source) {
    std::string line;
    if (!std::getline(is, line) || split(trim(line)) != std::vector<std::string>{"year", "count"})
        throw IoError("census header must be 'year,count'");
    CensusSeries s;
    s.source = source;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 2) throw IoError("line " + std::to_string(line_no) + ": expected year,count");
        const auto year = parse_integer<std::int64_t>(f[0], line_no);
        const auto count = parse_integer<std::uint64_t>(f[1], line_no);
        if (!s.years.empty() && year != s.years.back() + 1)
            throw IoError("line " + std::to_string(line_no) + ": years must increase by exactly 1");
        s.years.push_back(year);
        s.counts.push_back(count);
    }
    if (s.counts.empty()) throw IoError("census has no rows");
    if (s.counts.front() < 1) throw IoError("census must start from a positive count");
    return s;
}

CensusSeries read_census_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_census_csv(in, path.filename().string());
}

void write_census_csv(const CensusSeries& series, std::ostream& os) {
    os << "year,count\n";
    for (std::size_t i = 0; i < series.years.size(); ++i) os << series.years[i] << ',' << series.counts[i] << '\n';
}

EstimateResult fit_census(const CensusSeries& series, const OffspringModel& model, const WeightScheme& scheme,
                          TargetMode mode, const EstimateOptions& options) {
    if (!is_robin(model.family)) throw ParameterDomainError("census fits use a robin family");
    if (series.counts.size() < 3)
        throw InsufficientDataError("census has " + std::to_string(series.counts.size()) + " points; at least 3 needed");
    return estimate(sufficient_stats(std::span<const std::uint64_t>(series.counts)), model, scheme, mode, options);
}

Json model_to_json(const OffspringModel& model) {
    Json j{{"family", family_name(model.family)}, {"base", base_name(model.base)}};
    if (is_robin(model.family)) {
        j["death"] = model.death;
        if (model.base == BaseKind::Binomial) {
            j["binomial_trials"] = model.binomial_trials;
            j["binomial_p"] = model.binomial_p;
        }
    } else if (model.base == BaseKind::Binomial) {
        j["binomial_trials"] = model.binomial_trials;
    }
    if (model.base == BaseKind::Empirical) j["empirical"] = model.empirical;
    return j;
}

OffspringModel model_from_json(const Json& j) {
    try {
        const Family family = parse_family(j.at("family").get<std::string>());
        const std::string default_base = is_robin(family) ? "empirical" : "geometric";
        const BaseKind base = parse_base(j.value("base", default_base));
        OffspringModel m = is_robin(family) ? OffspringModel::robin(family, base) : OffspringModel::zero_inflated(family, base);
        if (j.contains("death")) m.death = j["death"].get<double>();
        if (j.contains("survival")) m.death = 1.0 - j["survival"].get<double>();
        if (j.contains("binomial_trials")) m.binomial_trials = j["binomial_trials"].get<int>();
        if (j.contains("binomial_p")) m.binomial_p = j["binomial_p"].get<double>();
        if (j.contains("empirical")) m.empirical = j["empirical"].get<std::vector<double>>();
        if (m.base == BaseKind::Empirical && m.empirical.empty())
            throw ParameterDomainError("an empirical base needs an 'empirical' probability vector");
        return m;
    } catch (const Json::exception& e) {
        throw IoError(std::string("bad model specification: ") + e.what());
    }
}

Json theta_to_json(const OffspringModel& model, const Theta& theta) {
    Json j = Json::object();
    const auto names = parameter_names(model);
    for (std::size_t i = 0; i < names.size() && i < theta.size(); ++i) j[names[i]] = theta[i];
    return j;
}

Theta theta_from_json(const OffspringModel& model, const Json& j) {
    try {
        Theta t;
        if (j.is_array()) {
            t.values = j.get<std::vector<double>>();
        } else {
            for (const auto& name : parameter_names(model)) {
                if (!j.contains(name)) throw ParameterDomainError("theta is missing '" + name + "'");
                t.values.push_back(j.at(name).get<double>());
            }
        }
        validate(model, t);
        return t;
    } catch (const Json::exception& e) {
        throw IoError(std::string("bad parameter vector: ") + e.what());
    }
}

Json estimate_report(const EstimateResult& r, const SufficientStats& stats, const OffspringModel& model,
                     const std::string& input_digest) {
    Json j;
    j["input_digest"] = input_digest;
    j["model"] = model_to_json(model);
    j["scheme"] = r.scheme.name();
    j["mode"] = target_name(r.mode);
    j["theta_hat"] = theta_to_json(model, r.theta_hat);
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["evaluations"] = r.evaluations;
    j["converged"] = r.converged;
    if (r.mode == TargetMode::QProcess) j["z_max"] = r.z_max;

    Json starts = Json::array();
    for (const auto& e : r.multistart_log) {
        starts.push_back({{"start", e.start.values},
                          {"start_value", e.start_value},
                          {"endpoint", e.endpoint.values},
                          {"value", e.value},
                          {"refined", e.refined},
                          {"converged", e.converged},
                          {"iterations", e.iterations}});
    }
    j["multistart"] = std::move(starts);

    const auto w = weights(stats, r.scheme);
    std::vector<double> mup;
    if (r.mode == TargetMode::QProcess) mup = m_up_curve(model, r.theta_hat, r.z_max);
    Json table = Json::array();
    for (const auto& [z, c] : stats.visits) {
        Json row{{"z", z},
                 {"visits", c},
                 {"m_hat", mle_m(stats, z)},
                 {"weight", w.count(z) ? w.at(z) : 0.0},
                 {"m", offspring_mean(model, static_cast<double>(z), r.theta_hat)}};
        if (!mup.empty()) row["m_up"] = mup[z - 1];
        table.push_back(std::move(row));
    }
    j["table"] = std::move(table);
    j["stats"] = {{"total_parents", stats.total_parents}, {"n_steps", stats.n_steps}, {"max_state", stats.max_state()}};
    return j;
}

Json covariance_report(const CovarianceReport& r, const OffspringModel& model) {
    auto finite_or_null = [](const std::vector<double>& v) {
        Json a = Json::array();
        for (double x : v) a.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
        return a;
    };
    Json j;
    j["model"] = model_to_json(model);
    j["theta"] = theta_to_json(model, r.theta);
    j["parameters"] = parameter_names(model);
    j["scheme"] = r.scheme.name();
    j["z_max"] = r.z_max;
    j["eta"] = r.eta;
    j["zeta"] = r.zeta;
    j["beta"] = r.beta;
    j["tail_bound"] = r.tail_bound;
    j["gamma"] = finite_or_null(r.gamma);
    j["weight_limit"] = r.weight_limit;
    j["grad_m_up"] = r.grad;
    return j;
}

void write_mup_csv(const OffspringModel& model, const Theta& theta, std::size_t z_max, std::ostream& os) {
    const auto c = conditioned_curves(model, theta, z_max);
    os << "z,m,m_up,sigma2_up,stationary\n";
    for (std::size_t z = 1; z <= z_max; ++z) {
        os << z << ',' << format_double(c->m[z - 1]) << ',' << format_double(c->m_up[z - 1]) << ','
           << format_double(c->sigma2_up[z - 1]) << ',' << format_double(c->stationary[z - 1]) << '\n';
    }
}

void write_ellipse_csv(std::span<const EllipsePoint> points, std::ostream& os) {
    os << "phi,x,y\n";
    for (const auto& p : points) os << format_double(p.phi) << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace psdbp
