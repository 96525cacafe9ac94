#include "psdbp/qprocess.hpp"

#include "psdbp/errors.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

namespace psdbp {

namespace {

// Sum over a row of f(state) * entry, states 1-based.
template <class F>
double row_moment(const BandedMatrix& m, std::size_t i, F f) {
    const auto& row = m.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < row.values.size(); ++k) s += f(static_cast<double>(row.first + k + 1)) * row.values[k];
    s += f(static_cast<double>(m.size())) * row.top;
    return s;
}

void require_positive(std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) {
            throw SpectralIntegrityError("right Perron vector is not positive at state " + std::to_string(i + 1));
        }
    }
}

} // namespace

QProcess q_transition(const SpectralTriple& triple, const BandedMatrix& q) {
    const std::size_t n = q.size();
    if (triple.v.size() != n || triple.u.size() != n) throw DomainError("spectral triple does not match the kernel");
    require_positive(triple.v);
    std::vector<double> qv(n);
    q.multiply(triple.v, qv);

    QProcess out;
    out.rho = triple.rho;
    out.u = triple.u;
    out.v = triple.v;
    out.q_up = BandedMatrix(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& src = q.row(i);
        auto& dst = out.q_up.row(i);
        const double scale = 1.0 / qv[i];
        dst.first = src.first;
        dst.values.resize(src.values.size());
        for (std::size_t k = 0; k < src.values.size(); ++k)
            dst.values[k] = src.values[k] * triple.v[src.first + k] * scale;
        dst.top = src.top * triple.v[n - 1] * scale;
    }
    out.stationary.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.stationary[i] = triple.u[i] * triple.v[i];
    return out;
}

QProcess q_transition(const SpectralTriple& triple, const TruncatedKernel& kernel) {
    return q_transition(triple, kernel.q);
}

double m_up(const QProcess& qp, std::size_t z) {
    if (z < 1 || z > qp.z_max()) throw DomainError("state outside 1..z_max");
    return row_moment(qp.q_up, z - 1, [](double k) { return k; }) / static_cast<double>(z);
}

double sigma2_up(const QProcess& qp, std::size_t z) {
    if (z < 1 || z > qp.z_max()) throw DomainError("state outside 1..z_max");
    const double zz = static_cast<double>(z);
    const double m = m_up(qp, z);
    return row_moment(qp.q_up, z - 1, [](double k) { return k * k; }) / (zz * zz) - m * m;
}

std::vector<double> m_up_from_right(const BandedMatrix& q, std::span<const double> v) {
    const std::size_t n = q.size();
    std::vector<double> out(n);
    const double v_top = v[n - 1];
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = q.row(i);
        double num = 0.0;
        double den = row.top * v_top;
        for (std::size_t k = 0; k < row.values.size(); ++k) {
            const double w = row.values[k] * v[row.first + k];
            den += w;
            num += static_cast<double>(row.first + k + 1) * w;
        }
        num += static_cast<double>(n) * row.top * v_top;
        out[i] = num / (den * static_cast<double>(i + 1));
    }
    return out;
}

ConditionedCurves conditioned_curves(const TruncatedKernel& kernel, const SpectralOptions& options) {
    const SpectralTriple t = spectral(kernel, options);
    if (!(t.decay > 0.0)) {
        throw ModelMisspecificationError("the truncated kernel has no route to extinction (rho = 1)");
    }
    const QProcess qp = q_transition(t, kernel);
    ConditionedCurves c;
    c.z_max = kernel.z_max;
    c.rho = t.rho;
    c.decay = t.decay;
    c.m.resize(c.z_max);
    c.m_up.resize(c.z_max);
    c.sigma2_up.resize(c.z_max);
    for (std::size_t z = 1; z <= c.z_max; ++z) {
        c.m[z - 1] = row_moment(kernel.q, z - 1, [](double k) { return k; }) / static_cast<double>(z);
        c.m_up[z - 1] = m_up(qp, z);
        c.sigma2_up[z - 1] = sigma2_up(qp, z);
    }
    c.u = t.u;
    c.v = t.v;
    c.stationary = qp.stationary;
    return c;
}

namespace {

std::string cache_key(const OffspringModel& model, const Theta& theta, std::size_t z_max) {
    std::string key = family_name(model.family) + '|' + base_name(model.base) + '|' +
                      std::to_string(model.binomial_trials) + '|';
    char buf[40];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.11e,", x);
        key += buf;
    };
    put(model.binomial_p);
    put(model.death);
    for (double b : model.empirical) put(b);
    key += '|';
    for (double x : theta.values) put(x);
    key += '|' + std::to_string(z_max);
    return key;
}

constexpr std::size_t kCacheLimit = 4096;

struct CurveCache {
    std::shared_mutex mutex;
    std::unordered_map<std::string, std::shared_ptr<const ConditionedCurves>> map;
};

CurveCache& cache() {
    static CurveCache c;
    return c;
}

} // namespace

std::shared_ptr<const ConditionedCurves> conditioned_curves(const OffspringModel& model, const Theta& theta,
                                                            std::size_t z_max) {
    validate(model, theta);
    const std::string key = cache_key(model, theta, z_max);
    CurveCache& c = cache();
    {
        std::shared_lock lock(c.mutex);
        if (auto it = c.map.find(key); it != c.map.end()) return it->second;
    }
    auto curves = std::make_shared<ConditionedCurves>(conditioned_curves(build_kernel(model, theta, z_max)));
    for (std::size_t z = 1; z <= z_max; ++z) curves->m[z - 1] = offspring_mean(model, static_cast<double>(z), theta);

    std::unique_lock lock(c.mutex);
    if (c.map.size() >= kCacheLimit) c.map.clear();
    auto [it, inserted] = c.map.emplace(key, std::move(curves));
    return it->second;
}

std::vector<double> m_up_curve(const OffspringModel& model, const Theta& theta, std::size_t z_max) {
    return conditioned_curves(model, theta, z_max)->m_up;
}

void clear_curve_cache() {
    std::unique_lock lock(cache().mutex);
    cache().map.clear();
}

std::size_t curve_cache_size() {
    std::shared_lock lock(cache().mutex);
    return cache().map.size();
}

std::vector<double> default_fd_steps(const Theta& theta) {
    std::vector<double> h(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) h[j] = std::max(1e-4 * std::abs(theta[j]), 1e-6);
    return h;
}

std::vector<std::vector<double>> grad_m_up(const OffspringModel& model, const Theta& theta, std::size_t z_max,
                                           std::span<const double> h) {
    validate(model, theta);
    const std::vector<double> steps = h.empty() ? default_fd_steps(theta) : std::vector<double>(h.begin(), h.end());
    if (steps.size() != theta.size()) throw DomainError("step vector length differs from theta");

    std::vector<std::vector<double>> grad(z_max, std::vector<double>(theta.size(), 0.0));
    for (std::size_t j = 0; j < theta.size(); ++j) {
        if (!(steps[j] > 0.0)) throw DomainError("finite-difference steps must be positive");
        Theta plus = theta;
        Theta minus = theta;
        plus[j] += steps[j];
        minus[j] -= steps[j];
        try {
            validate(model, plus);
            validate(model, minus);
        } catch (const ParameterDomainError& e) {
            throw DomainError(std::string("theta +/- h leaves the parameter space: ") + e.what());
        }
        const auto up = conditioned_curves(model, plus, z_max);
        const auto down = conditioned_curves(model, minus, z_max);
        for (std::size_t z = 0; z < z_max; ++z) grad[z][j] = (up->m_up[z] - down->m_up[z]) / (2.0 * steps[j]);
    }
    return grad;
}

const std::vector<double>& MupEvaluator::operator()(const Theta& theta, std::size_t z_max) {
    const TruncatedKernel k = build_kernel(model_, theta, z_max);
    if (!warm_.empty() && warm_.size() != z_max) warm_.resize(z_max, warm_.back());
    // A short warm power run settles well-separated spectra; otherwise one
    // dense LU beats hundreds of power steps.
    constexpr std::size_t kDenseLimit = 1500;
    RightPerron rp;
    try {
        rp = right_perron(k.q, SpectralOptions{1e-12, warm_.empty() ? std::size_t{100} : std::size_t{40}}, warm_);
    } catch (const NonConvergenceError&) {
        rp = z_max <= kDenseLimit ? right_perron_shift_invert(k.q, SpectralOptions{}, warm_)
                                  : right_perron(k.q, SpectralOptions{}, warm_);
    }
    out_ = m_up_from_right(k.q, rp.v);
    warm_ = rp.v;
    ++evaluations_;
    return out_;
}

} // namespace psdbp
