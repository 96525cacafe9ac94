#include "psdbp/kernel.hpp"

#include "band.hpp"
#include "psdbp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace psdbp {

using detail::Band;

BandedMatrix BandedMatrix::from_dense(const std::vector<std::vector<double>>& a) {
    BandedMatrix m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != a.size()) throw DomainError("from_dense: matrix is not square");
        m.rows_[i].first = 0;
        m.rows_[i].values = a[i];
    }
    return m;
}

double BandedMatrix::at(std::size_t i, std::size_t j) const {
    const Row& r = rows_.at(i);
    double v = (j >= r.first && j < r.first + r.values.size()) ? r.values[j - r.first] : 0.0;
    if (j + 1 == rows_.size()) v += r.top;
    return v;
}

double BandedMatrix::row_sum(std::size_t i) const {
    const Row& r = rows_.at(i);
    double s = r.top;
    for (double v : r.values) s += v;
    return s;
}

std::size_t BandedMatrix::nonzeros() const {
    std::size_t n = 0;
    for (const Row& r : rows_) n += r.values.size() + (r.top != 0.0 ? 1 : 0);
    return n;
}

void BandedMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = rows_.size();
    const double last = n ? x[n - 1] : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Row& r = rows_[i];
        const double* xs = x.data() + r.first;
        double s = r.top * last;
        for (std::size_t k = 0; k < r.values.size(); ++k) s += r.values[k] * xs[k];
        y[i] = s;
    }
}

void BandedMatrix::multiply_transpose(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = rows_.size();
    std::fill(y.begin(), y.end(), 0.0);
    double top = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Row& r = rows_[i];
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* ys = y.data() + r.first;
        for (std::size_t k = 0; k < r.values.size(); ++k) ys[k] += r.values[k] * xi;
        top += r.top * xi;
    }
    if (n) y[n - 1] += top;
}

std::vector<std::vector<double>> BandedMatrix::dense() const {
    const std::size_t n = rows_.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const Row& r = rows_[i];
        for (std::size_t k = 0; k < r.values.size(); ++k) a[i][r.first + k] = r.values[k];
        a[i][n - 1] += r.top;
    }
    return a;
}

std::size_t default_z_max(double K, std::size_t max_observed) {
    const auto from_k = static_cast<std::size_t>(std::ceil(8.0 * std::max(K, 0.0)));
    return std::max({from_k, 4 * max_observed, std::size_t{64}});
}

namespace {

// Moves a 0..z_max PMF (with 0 = extinction) into kernel row `i`.
void store_row(TruncatedKernel& k, std::size_t i, const Band& pmf) {
    BandedMatrix::Row& row = k.q.row(i);
    k.extinction[i] = pmf.at(0);
    if (!pmf.empty()) {
        const std::size_t skip = pmf.first == 0 ? 1 : 0;
        if (pmf.values.size() > skip) {
            row.first = pmf.first + skip - 1;
            row.values.assign(pmf.values.begin() + static_cast<std::ptrdiff_t>(skip), pmf.values.end());
        }
    }
    if (k.policy == BoundaryPolicy::LumpTop) {
        row.top = pmf.tail;
        k.lost_mass[i] = 0.0;
    } else {
        k.lost_mass[i] = pmf.tail;
    }
}

Band to_band(const OffspringPMF& pmf, std::size_t limit) {
    const OffspringPMF t = truncate(pmf, limit);
    Band b;
    b.first = 0;
    b.values = t.probabilities;
    b.tail = t.tail_mass;
    detail::trim_band(b, 0.0);
    return b;
}

void check_kill_bound(const TruncatedKernel& k, const KernelOptions& options) {
    if (options.policy != BoundaryPolicy::Kill) return;
    for (std::size_t i = 0; i < k.z_max; ++i) {
        if (k.lost_mass[i] > options.kill_tail_bound) {
            std::ostringstream os;
            os << "row " << (i + 1) << " loses " << k.lost_mass[i] << " above z_max=" << k.z_max
               << " (bound " << options.kill_tail_bound << ")";
            throw TruncationError(os.str());
        }
    }
}

TruncatedKernel empty_kernel(std::size_t z_max, const KernelOptions& options) {
    if (z_max == 0) throw DomainError("z_max must be positive");
    TruncatedKernel k;
    k.z_max = z_max;
    k.policy = options.policy;
    k.q = BandedMatrix(z_max);
    k.extinction.assign(z_max, 0.0);
    k.lost_mass.assign(z_max, 0.0);
    return k;
}

} // namespace

TruncatedKernel build_kernel(const OffspringModel& model, const Theta& theta, std::size_t z_max,
                             const KernelOptions& options) {
    validate(model, theta);
    TruncatedKernel k = empty_kernel(z_max, options);
    const std::size_t L = z_max;
    const bool robin = is_robin(model.family);

    const Band base = to_band(base_pmf(model, theta, L), L);

    std::vector<Band> weights(L);
    std::size_t j_max = 0;
    for (std::size_t i = 1; i <= L; ++i) {
        const double r = reproduction_probability(model, static_cast<double>(i), theta);
        weights[i - 1] = detail::binomial_band(i, r);
        j_max = std::max(j_max, weights[i - 1].last());
    }

    // powers[j] = B^{*j} restricted to 0..L
    std::vector<Band> powers(j_max + 1);
    powers[0].first = 0;
    powers[0].values = {1.0};
    for (std::size_t j = 1; j <= j_max; ++j) powers[j] = detail::convolve_band(powers[j - 1], base, L);

    const double survive = 1.0 - model.death;
    const auto rows = static_cast<std::ptrdiff_t>(L);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const Band& w = weights[i];
        Band mix;
        for (std::size_t t = 0; t < w.values.size(); ++t) detail::axpy_band(mix, w.values[t], powers[w.first + t]);
        detail::trim_band(mix);
        if (robin) {
            const Band parents = detail::binomial_band(i + 1, survive);
            store_row(k, i, detail::convolve_band(parents, mix, L));
        } else {
            store_row(k, i, mix);
        }
    }
    check_kill_bound(k, options);
    return k;
}

TruncatedKernel build_kernel_reference(const PmfProvider& offspring, std::size_t z_max,
                                       const KernelOptions& options) {
    TruncatedKernel k = empty_kernel(z_max, options);
    for (std::size_t i = 1; i <= z_max; ++i) {
        const OffspringPMF row = convolve_power(offspring(i), i, z_max);
        Band b;
        b.first = 0;
        b.values = row.probabilities;
        b.tail = row.tail_mass;
        store_row(k, i - 1, b);
    }
    check_kill_bound(k, options);
    return k;
}

TruncatedKernel build_kernel_reference(const OffspringModel& model, const Theta& theta, std::size_t z_max,
                                       const KernelOptions& options) {
    return build_kernel_reference(make_provider(model, theta, z_max), z_max, options);
}

void write_kernel_csv(const TruncatedKernel& kernel, std::ostream& os) {
    const auto dense = kernel.q.dense();
    os << "state";
    for (std::size_t j = 1; j <= kernel.z_max; ++j) os << ',' << j;
    os << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < kernel.z_max; ++i) {
        os << (i + 1);
        for (double v : dense[i]) os << ',' << v;
        os << '\n';
    }
}

} // namespace psdbp
