#include "psdbp/spectral.hpp"

#include "psdbp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace psdbp {

namespace {

void require_nonzero_rows(const BandedMatrix& q) {
    if (q.size() == 0) throw DomainError("spectral: empty matrix");
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q.row_sum(i) > 0.0)) {
            throw ReducibilityError("state " + std::to_string(i + 1) +
                                    " has an all-zero row (extinction is certain from it)");
        }
    }
}

double max_abs_diff_scaled(std::span<const double> y, double rho, std::span<const double> x) {
    double r = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) r = std::max(r, std::abs(y[i] - rho * x[i]));
    return r;
}

} // namespace

RightPerron right_perron(const BandedMatrix& q, const SpectralOptions& options, std::span<const double> start) {
    require_nonzero_rows(q);
    const std::size_t n = q.size();
    std::vector<double> x(n, 1.0);
    if (start.size() == n && std::all_of(start.begin(), start.end(), [](double s) { return s > 0.0; })) {
        const double m = *std::max_element(start.begin(), start.end());
        for (std::size_t i = 0; i < n; ++i) x[i] = start[i] / m;
    }
    std::vector<double> y(n);
    double residual = 0.0;
    for (std::size_t it = 1; it <= options.max_iter; ++it) {
        q.multiply(x, y);
        const double rho = *std::max_element(y.begin(), y.end());
        if (!(rho > 0.0)) throw ReducibilityError("right power iteration collapsed to zero");
        residual = max_abs_diff_scaled(y, rho, x);
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / rho;
        if (residual < options.tol) return RightPerron{rho, std::move(x), residual, it};
    }
    throw NonConvergenceError("right power iteration did not converge", 0.0, residual);
}

SpectralTriple spectral(const BandedMatrix& q, const SpectralOptions& options) {
    require_nonzero_rows(q);
    const std::size_t n = q.size();
    std::vector<double> v(n, 1.0);
    std::vector<double> u(n, 1.0 / static_cast<double>(n));
    std::vector<double> y(n);
    double right_res = INFINITY;
    double left_res = INFINITY;
    std::size_t it = 0;
    bool right_done = false;
    bool left_done = false;
    SpectralTriple out;
    for (;;) {
        while (!(right_done && left_done)) {
            if (++it > options.max_iter) {
                std::ostringstream os;
                os << "power iteration did not converge in " << options.max_iter << " iterations (left residual "
                   << left_res << ", right residual " << right_res << ")";
                throw NonConvergenceError(os.str(), left_res, right_res);
            }
            if (!right_done) {
                q.multiply(v, y);
                const double rho = *std::max_element(y.begin(), y.end());
                if (!(rho > 0.0)) throw ReducibilityError("right power iteration collapsed to zero");
                right_res = max_abs_diff_scaled(y, rho, v);
                for (std::size_t i = 0; i < n; ++i) v[i] = y[i] / rho;
                right_done = right_res < options.tol;
            }
            if (!left_done) {
                q.multiply_transpose(u, y);
                const double rho = std::accumulate(y.begin(), y.end(), 0.0);
                if (!(rho > 0.0)) throw ReducibilityError("left power iteration collapsed to zero");
                left_res = max_abs_diff_scaled(y, rho, u);
                for (std::size_t i = 0; i < n; ++i) u[i] = y[i] / rho;
                left_done = left_res < options.tol;
            }
        }

        // Residuals are re-measured on the normalized pair; rescaling v can
        // lift them above tol, in which case iteration resumes.
        out.iterations = it;
        out.u = u;
        out.v = v;
        const double usum = std::accumulate(out.u.begin(), out.u.end(), 0.0);
        for (double& x : out.u) x /= usum;
        const double uv = std::inner_product(out.u.begin(), out.u.end(), out.v.begin(), 0.0);
        for (double& x : out.v) x /= uv;

        q.multiply(out.v, y);
        out.rho = std::inner_product(out.u.begin(), out.u.end(), y.begin(), 0.0);  // u^T Q v with u^T v = 1
        out.right_residual = max_abs_diff_scaled(y, out.rho, out.v);
        q.multiply_transpose(out.u, y);
        out.left_residual = max_abs_diff_scaled(y, out.rho, out.u);
        right_done = out.right_residual < options.tol;
        left_done = out.left_residual < options.tol;
        if (right_done && left_done) break;
    }
    out.decay = 1.0 - out.rho;
    return out;
}

SpectralTriple spectral(const TruncatedKernel& kernel, const SpectralOptions& options) {
    SpectralTriple out = spectral(kernel.q, options);
    double decay = 0.0;
    for (std::size_t i = 0; i < kernel.z_max; ++i) decay += out.u[i] * (kernel.extinction[i] + kernel.lost_mass[i]);
    out.decay = decay;
    return out;
}

SpectralTriple spectral_oracle(const BandedMatrix& q) {
    const std::size_t n = q.size();
    if (n == 0 || n > 64) throw DomainError("spectral_oracle handles 1..64 states");
    using Dense = std::vector<double>;
    const auto a = q.dense();
    Dense b(n * n);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            b[i * n + j] = a[i][j];
            norm = std::max(norm, a[i][j]);
        }
    if (!(norm > 0.0)) throw OracleFailure("zero matrix");
    for (double& x : b) x /= norm;
    double log_growth = std::log(norm);

    constexpr int kSquarings = 40;
    Dense c(n * n);
    for (int s = 1; s <= kSquarings; ++s) {
        std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const double bik = b[i * n + k];
                if (bik == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) c[i * n + j] += bik * b[k * n + j];
            }
        const double m = *std::max_element(c.begin(), c.end());
        if (!(m > 0.0) || !std::isfinite(m)) throw OracleFailure("matrix power under/overflowed before rank-one convergence");
        for (std::size_t t = 0; t < n * n; ++t) b[t] = c[t] / m;
        log_growth = 2.0 * log_growth + std::log(m);
    }

    SpectralTriple out;
    out.iterations = kSquarings;
    out.rho = std::exp(std::ldexp(log_growth, -kSquarings));
    out.decay = 1.0 - out.rho;

    std::size_t best_row = 0;
    std::size_t best_col = 0;
    double best_row_sum = -1.0;
    double best_col_sum = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double rs = 0.0;
        double cs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            rs += b[i * n + j];
            cs += b[j * n + i];
        }
        if (rs > best_row_sum) best_row_sum = rs, best_row = i;
        if (cs > best_col_sum) best_col_sum = cs, best_col = i;
    }
    out.u.resize(n);
    out.v.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.u[j] = b[best_row * n + j] / best_row_sum;
    for (std::size_t i = 0; i < n; ++i) out.v[i] = b[i * n + best_col];
    const double uv = std::inner_product(out.u.begin(), out.u.end(), out.v.begin(), 0.0);
    if (!(uv > 0.0)) throw OracleFailure("left and right limits are orthogonal");
    for (double& x : out.v) x /= uv;

    std::vector<double> y(n);
    q.multiply(out.v, y);
    out.right_residual = max_abs_diff_scaled(y, out.rho, out.v);
    q.multiply_transpose(out.u, y);
    out.left_residual = max_abs_diff_scaled(y, out.rho, out.u);
    return out;
}

RightPerron right_perron_shift_invert(const BandedMatrix& q, const SpectralOptions& options,
                                      std::span<const double> start) {
    require_nonzero_rows(q);
    const std::size_t n = q.size();
    std::vector<double> x(n, 1.0);
    std::vector<double> y(n);
    if (start.size() == n && std::all_of(start.begin(), start.end(), [](double s) { return s > 0.0; })) {
        const double m = *std::max_element(start.begin(), start.end());
        for (std::size_t i = 0; i < n; ++i) x[i] = start[i] / m;
    } else {
        for (int it = 0; it < 20; ++it) {
            q.multiply(x, y);
            const double m = *std::max_element(y.begin(), y.end());
            if (!(m > 0.0)) throw ReducibilityError("right power iteration collapsed to zero");
            for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / m;
        }
    }
    // Collatz-Wielandt: rho <= max_i (Q x)_i / x_i for any positive x.
    q.multiply(x, y);
    double upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0)) {
            upper = INFINITY;
            break;
        }
        upper = std::max(upper, y[i] / x[i]);
    }
    if (!std::isfinite(upper)) return right_perron(q, options, x);
    const double sigma = upper * (1.0 + 1e-9) + 1e-300;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = q.row(i);
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < row.values.size(); ++k) a(r, static_cast<Eigen::Index>(row.first + k)) -= row.values[k];
        a(r, static_cast<Eigen::Index>(n - 1)) -= row.top;
        a(r, r) += sigma;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));

    double residual = INFINITY;
    for (std::size_t it = 1; it <= 60; ++it) {
        xv = lu.solve(xv);
        const double m = xv.maxCoeff();
        if (!(m > 0.0) || !std::isfinite(m)) break;
        xv /= m;
        std::copy(xv.data(), xv.data() + n, x.begin());
        if (std::any_of(x.begin(), x.end(), [](double s) { return !(s > 0.0); })) {
            // Rounding can leave tiny negatives on nearly disconnected states.
            for (double& s : x) s = std::max(s, 0.0);
        }
        q.multiply(x, y);
        const double rho = *std::max_element(y.begin(), y.end());
        residual = max_abs_diff_scaled(y, rho, x);
        if (residual < options.tol) {
            for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / rho;
            return RightPerron{rho, std::move(x), residual, it};
        }
    }
    return right_perron(q, options, x);
}

} // namespace psdbp
