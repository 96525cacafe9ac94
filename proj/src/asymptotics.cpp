#include "psdbp/asymptotics.hpp"

#include "psdbp/qprocess.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace psdbp {

double normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0,1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double chi2_2_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0,1]");
    return -2.0 * std::log1p(-p);
}

std::vector<double> gamma_curve(const OffspringModel& model, const Theta& theta0, std::size_t z_max) {
    const auto c = conditioned_curves(model, theta0, z_max);
    std::vector<double> g(z_max);
    for (std::size_t z = 0; z < z_max; ++z) {
        const double uv = c->stationary[z];
        if (uv == 0.0) {
            g[z] = std::numeric_limits<double>::infinity();
            continue;
        }
        if (uv < 1e-300) {
            std::ostringstream os;
            os << "u_z v_z = " << uv << " at z=" << (z + 1) << " underflows; reduce z_max";
            throw TailTruncationError(os.str());
        }
        g[z] = c->sigma2_up[z] / uv;
    }
    return g;
}

namespace {

// w_z / (u_z v_z) for the chosen scheme, or 0 where w_z = 0.
std::vector<double> weight_ratio(std::span<const double> stationary, const WeightScheme& scheme) {
    const std::size_t n = stationary.size();
    std::vector<double> ratio(n, 0.0);
    if (scheme.kind == WeightKind::W1) {
        std::fill(ratio.begin(), ratio.end(), 1.0);
        return ratio;
    }
    const std::size_t top = scheme.kind == WeightKind::Capped ? std::min<std::size_t>(scheme.cap, n) : n;
    double mass = 0.0;
    for (std::size_t z = 1; z <= top; ++z) mass += static_cast<double>(z) * stationary[z - 1];
    if (!(mass > 0.0)) throw InsufficientDataError("limit weights vanish below the cap");
    for (std::size_t z = 1; z <= top; ++z) ratio[z - 1] = static_cast<double>(z) / mass;
    return ratio;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
    const auto r = static_cast<Eigen::Index>(m.size());
    const auto c = r ? static_cast<Eigen::Index>(m[0].size()) : 0;
    Eigen::MatrixXd e(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) e(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(static_cast<std::size_t>(e.rows()), std::vector<double>(static_cast<std::size_t>(e.cols())));
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = e(i, j);
    return m;
}

} // namespace

std::vector<double> limit_weights(std::span<const double> stationary, const WeightScheme& scheme) {
    const std::vector<double> ratio = weight_ratio(stationary, scheme);
    std::vector<double> w(stationary.size());
    for (std::size_t z = 0; z < w.size(); ++z) w[z] = ratio[z] * stationary[z];
    return w;
}

Sandwich sandwich(std::span<const double> w, std::span<const double> w2gamma, const Matrix& grad) {
    if (grad.empty() || grad.size() != w.size() || w2gamma.size() != w.size())
        throw DomainError("sandwich inputs have mismatched lengths");
    const auto d = static_cast<Eigen::Index>(grad[0].size());
    if (d == 0) throw DomainError("empty gradient rows");
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd zeta = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t z = 0; z < w.size(); ++z) {
        if (static_cast<Eigen::Index>(grad[z].size()) != d) throw DomainError("ragged gradient matrix");
        if (w[z] == 0.0 && w2gamma[z] == 0.0) continue;
        const Eigen::Map<const Eigen::VectorXd> g(grad[z].data(), d);
        const Eigen::MatrixXd ggt = g * g.transpose();
        eta += 2.0 * w[z] * ggt;
        zeta += 4.0 * w2gamma[z] * ggt;
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(eta, Eigen::EigenvaluesOnly);
    const double largest = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double smallest = eig.eigenvalues().minCoeff();
    if (!(largest > 0.0) || smallest <= 1e-10 * largest) {
        std::ostringstream os;
        os << "eta is singular (eigenvalues " << smallest << " .. " << largest
           << "); the parameters are not identifiable from these weights";
        throw IdentifiabilityError(os.str());
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(eta);
    const Eigen::MatrixXd left = ldlt.solve(zeta);                           // eta^-1 zeta
    Eigen::MatrixXd beta = ldlt.solve(left.transpose()).transpose();        // eta^-1 zeta eta^-1
    beta = 0.5 * (beta + beta.transpose());
    return {from_eigen(eta), from_eigen(zeta), from_eigen(beta)};
}

CovarianceReport covariance(const OffspringModel& model, const Theta& theta, const WeightScheme& scheme,
                            std::size_t z_max, std::span<const double> fd_steps) {
    const auto curves = conditioned_curves(model, theta, z_max);
    CovarianceReport r;
    r.theta = theta;
    r.scheme = scheme;
    r.z_max = z_max;
    r.gamma = gamma_curve(model, theta, z_max);
    const std::vector<double> ratio = weight_ratio(curves->stationary, scheme);
    r.weight_limit.resize(z_max);
    std::vector<double> w2gamma(z_max);
    for (std::size_t z = 0; z < z_max; ++z) {
        r.weight_limit[z] = ratio[z] * curves->stationary[z];
        // w^2 gamma = w (w / (u v)) sigma2_up: finite even where u v underflows.
        w2gamma[z] = r.weight_limit[z] == 0.0 ? 0.0 : r.weight_limit[z] * ratio[z] * curves->sigma2_up[z];
    }
    r.tail_bound = r.weight_limit.back();
    r.grad = grad_m_up(model, theta, z_max, fd_steps);
    Sandwich s = sandwich(r.weight_limit, w2gamma, r.grad);
    r.eta = std::move(s.eta);
    r.zeta = std::move(s.zeta);
    r.beta = std::move(s.beta);
    return r;
}

std::vector<std::pair<double, double>> confidence_interval(const Theta& theta_hat, const Matrix& beta, double n,
                                                           double level) {
    if (!(n >= 1.0)) throw DomainError("sample size n must be at least 1");
    if (!(level >= 0.0 && level <= 1.0)) throw DomainError("confidence level outside [0,1]");
    if (beta.size() != theta_hat.size()) throw DomainError("beta does not match theta");
    const double q = normal_quantile(0.5 * (1.0 + level));
    std::vector<std::pair<double, double>> out;
    for (std::size_t j = 0; j < theta_hat.size(); ++j) {
        double bjj = beta[j].at(j);
        if (bjj < -1e-12) {
            std::ostringstream os;
            os << "beta(" << j << "," << j << ") = " << bjj << " is negative";
            throw CovarianceIntegrityError(os.str());
        }
        bjj = std::max(bjj, 0.0);
        const double se = std::sqrt(bjj / n);
        const double half = (level == 0.0 || se == 0.0) ? 0.0 : q * se;
        out.emplace_back(theta_hat[j] - half, theta_hat[j] + half);
    }
    return out;
}

std::vector<EllipsePoint> confidence_ellipse(const Theta& theta_hat, const Matrix& beta, double n, double level,
                                             std::size_t points) {
    if (theta_hat.size() != 2 || beta.size() != 2 || beta[0].size() != 2 || beta[1].size() != 2)
        throw DomainError("confidence ellipses need two parameters");
    if (!(n >= 1.0)) throw DomainError("sample size n must be at least 1");
    if (!(level >= 0.0 && level < 1.0)) throw DomainError("ellipse level must lie in [0,1)");
    if (points < 1) throw DomainError("need at least one boundary point");
    Eigen::Matrix2d b = to_eigen(beta);
    const Eigen::LLT<Eigen::Matrix2d> llt(0.5 * (b + b.transpose()));
    if (llt.info() != Eigen::Success || !(llt.matrixL()(1, 1) > 0.0))
        throw CovarianceIntegrityError("beta is not positive definite");
    const Eigen::Matrix2d A = std::sqrt(chi2_2_quantile(level)) * Eigen::Matrix2d(llt.matrixL());
    const double scale = 1.0 / std::sqrt(n);
    std::vector<EllipsePoint> out;
    out.reserve(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(points);
        const Eigen::Vector2d p = A * Eigen::Vector2d(std::cos(phi), std::sin(phi)) * scale;
        out.push_back({phi, theta_hat[0] + p(0), theta_hat[1] + p(1)});
    }
    return out;
}

} // namespace psdbp
