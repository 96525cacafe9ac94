#pragma once

#include "psdbp/asymptotics.hpp"
#include "psdbp/estimation.hpp"
#include "psdbp/io.hpp"
#include "psdbp/offspring.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace psdbp {

/// One weight scheme paired with one target; named like "w2/qprocess".
struct EstimatorSpec {
    WeightScheme scheme;
    TargetMode mode = TargetMode::QProcess;
    std::string name() const;
    bool operator==(const EstimatorSpec&) const = default;
};

EstimatorSpec parse_estimator(const std::string& s);
/// w2/qprocess, w2/raw, w1/qprocess, w1/raw.
std::vector<EstimatorSpec> default_estimators();

enum class StudyKind { Growing, Stationary, Coverage, Motivation };
std::string study_name(StudyKind kind);
StudyKind parse_study(const std::string& s);

struct ExperimentConfig {
    StudyKind kind = StudyKind::Growing;
    OffspringModel model;
    Theta theta0;
    std::uint64_t initial_size = 2;
    std::vector<std::uint64_t> horizons;      // increasing
    std::uint64_t replications = 1;           // N_0 trajectories per horizon
    std::uint64_t max_attempts = 1'000'000;
    std::uint64_t seed = 0;
    std::vector<EstimatorSpec> estimators = default_estimators();
    bool pooled = false;                      // one fit on the accumulated sample
    std::size_t grid_points = 5;
    std::size_t refine_top = 3;
    double level = 0.95;                      // CI level for coverage
    std::size_t histogram_bins = 30;
    std::vector<double> ellipse_levels{0.95};
    std::size_t ellipse_points = 200;
    double max_failure_fraction = 0.01;
    std::filesystem::path output_dir;         // empty: nothing written
    bool verbose = false;
    Json notes = Json::object();              // free-form, copied to outputs
};

/// Throws ParameterDomainError on an inconsistent config.
void validate(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const Json& j);
/// Omits output_dir, which locates a run rather than defining it.
Json to_json(const ExperimentConfig& config);

struct ReplicationRecord {
    std::uint64_t horizon = 0;
    std::uint64_t rep = 0;
    std::string estimator;
    std::vector<double> theta;    // NaN when the fit failed
    double objective = 0.0;
    bool converged = false;
    std::uint64_t attempts = 0;   // rejection attempts behind this sample
    bool ok = true;
    std::string message;
};

struct SummaryRow {
    std::string estimator;
    std::string parameter;
    std::uint64_t horizon = 0;
    std::size_t count = 0;
    double theta0 = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double rmse_rel = 0.0;
};

using SummaryTable = std::vector<SummaryRow>;

double sample_mean(std::span<const double> x);
double sample_median(std::span<const double> x);
/// Divisor size - 1; 0 for a single value.
double sample_sd(std::span<const double> x);
/// ((mean - theta0)^2 + sd^2) / theta0^2.
double rmse_rel(double mean, double sd, double theta0);

/// Rows ordered by estimator (config order of first appearance), then
/// parameter, then horizon. Failed records are skipped.
SummaryTable aggregate(const std::vector<ReplicationRecord>& records, const std::vector<std::string>& parameter_names,
                       const Theta& theta0);

void write_estimates_csv(const std::vector<ReplicationRecord>& records, const std::vector<std::string>& parameter_names,
                         std::ostream& os);
std::vector<ReplicationRecord> read_estimates_csv(std::istream& is, std::vector<std::string>* parameter_names = nullptr);
void write_summary_csv(const SummaryTable& table, std::ostream& os);

struct DifferenceRow {
    std::uint64_t horizon = 0;
    std::uint64_t rep = 0;
    std::string minuend;      // e.g. w2/qprocess
    std::string subtrahend;   // e.g. w1/raw
    double difference = 0.0;  // K difference
};

/// K from `minuend` minus K from every raw-target estimator, per
/// replication.
std::vector<DifferenceRow> k_differences(const std::vector<ReplicationRecord>& records, const std::string& minuend);

struct TheoryEntry {
    std::string estimator;
    CovarianceReport report;
};

struct HistogramBin {
    std::string estimator;
    std::string parameter;
    std::uint64_t horizon = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double density = 0.0;          // count / (total width)
    double normal_density = 0.0;   // N(theta0, beta_jj / n) at the bin centre
};

struct EllipseRow {
    std::string estimator;
    std::uint64_t horizon = 0;
    double level = 0.0;
    EllipsePoint point;
};

struct CoverageRow {
    std::string estimator;
    std::string parameter;   // "joint" for the chi-square ellipse
    std::uint64_t horizon = 0;
    double level = 0.0;
    std::size_t count = 0;
    double coverage = 0.0;
};

/// Fraction of successful QProcess-target fits whose interval at `level`
/// contains theta0, using beta(theta0) from `theory`. Joint coverage is
/// added for d = 2.
std::vector<CoverageRow> coverage(const std::vector<ReplicationRecord>& records, const std::vector<TheoryEntry>& theory,
                                  const std::vector<std::string>& parameter_names, const Theta& theta0, double level);

struct MotivationRow {
    std::uint64_t z = 0;
    std::size_t trajectories = 0;   // trajectories that visited z
    double mean_m_hat = 0.0;        // average of per-trajectory m-hat(z)
    double pooled_m_hat = 0.0;
    double m_up = 0.0;
    double m = 0.0;
};

struct StudyResult {
    ExperimentConfig config;
    std::vector<std::string> parameter_names;
    std::vector<ReplicationRecord> records;
    SummaryTable summary;
    std::vector<DifferenceRow> differences;
    std::vector<TheoryEntry> theory;
    std::vector<HistogramBin> histograms;
    std::vector<EllipseRow> ellipses;
    std::vector<CoverageRow> coverage;
    std::vector<MotivationRow> motivation;
    std::size_t failures = 0;
};

/// Per horizon: N_0 trajectories conditioned on survival to that horizon,
/// every estimator fitted per trajectory (or once on the pooled sample).
StudyResult run_growing_study(const ExperimentConfig& config);
/// As the growing study, plus histograms, theoretical ellipses and coverage.
StudyResult run_stationary_study(const ExperimentConfig& config);
StudyResult run_coverage_study(const ExperimentConfig& config, double level);
/// Mean per-trajectory m-hat(z) against m_up(z) and m(z).
StudyResult run_motivation_study(const ExperimentConfig& config);
/// Dispatches on config.kind.
StudyResult run_study(const ExperimentConfig& config);

/// Writes every non-empty table of `result` under `dir`.
void write_study_outputs(const StudyResult& result, const std::filesystem::path& dir);

} // namespace psdbp
