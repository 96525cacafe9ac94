#pragma once

#include "psdbp/offspring.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace psdbp {

/// Square non-negative matrix over states 1..n stored row by row as a
/// contiguous band plus an optional extra entry in the last column.
/// Indices in this interface are 0-based: row/column i holds state i + 1.
class BandedMatrix {
  public:
    struct Row {
        std::size_t first = 0;       // column of values[0]
        std::vector<double> values;
        double top = 0.0;            // added to column n - 1
    };

    BandedMatrix() = default;
    explicit BandedMatrix(std::size_t n) : rows_(n) {}

    static BandedMatrix from_dense(const std::vector<std::vector<double>>& a);

    std::size_t size() const { return rows_.size(); }
    const Row& row(std::size_t i) const { return rows_[i]; }
    Row& row(std::size_t i) { return rows_[i]; }

    double at(std::size_t i, std::size_t j) const;
    double row_sum(std::size_t i) const;
    std::size_t nonzeros() const;

    /// y = A x
    void multiply(std::span<const double> x, std::span<double> y) const;
    /// y = A^T x
    void multiply_transpose(std::span<const double> x, std::span<double> y) const;

    std::vector<std::vector<double>> dense() const;

  private:
    std::vector<Row> rows_;
};

enum class BoundaryPolicy { LumpTop, Kill };

struct KernelOptions {
    BoundaryPolicy policy = BoundaryPolicy::LumpTop;
    /// Kill policy only: largest tolerated per-row mass above z_max.
    double kill_tail_bound = 1e-6;
};

/// Sub-stochastic one-step kernel of the process restricted to 1..z_max.
struct TruncatedKernel {
    std::size_t z_max = 0;
    BoundaryPolicy policy = BoundaryPolicy::LumpTop;
    BandedMatrix q;
    std::vector<double> extinction;   // P(i -> 0), index i - 1
    std::vector<double> lost_mass;    // mass above z_max dropped under Kill

    /// Q_{ij} for states i, j in 1..z_max.
    double entry(std::size_t i, std::size_t j) const { return q.at(i - 1, j - 1); }
};

/// max(ceil(8 K), 4 * max observed state, 64).
std::size_t default_z_max(double K, std::size_t max_observed = 0);

/// Kernel for a built-in family. Rows are assembled from the mixture form
/// p(z)^{*i} = A^{*i} * sum_j Binomial(i, r)(j) B^{*j} (A: the parent's own
/// survival law, B: the base law) and built in parallel.
TruncatedKernel build_kernel(const OffspringModel& model, const Theta& theta, std::size_t z_max,
                             const KernelOptions& options = {});

/// Serial reference: every row is convolve_power(p(i), i) computed from
/// scratch. Works for any per-state offspring law.
TruncatedKernel build_kernel_reference(const PmfProvider& offspring, std::size_t z_max,
                                       const KernelOptions& options = {});
TruncatedKernel build_kernel_reference(const OffspringModel& model, const Theta& theta, std::size_t z_max,
                                       const KernelOptions& options = {});

/// Dense CSV: header `state,1,...,z_max`, then one line per row.
void write_kernel_csv(const TruncatedKernel& kernel, std::ostream& os);

} // namespace psdbp
