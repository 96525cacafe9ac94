#pragma once

#include "psdbp/asymptotics.hpp"
#include "psdbp/estimation.hpp"
#include "psdbp/offspring.hpp"
#include "psdbp/simulator.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace psdbp {

using Json = nlohmann::json;

/// Shortest decimal string that reads back to the same double.
std::string format_double(double x);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string digest(std::string_view bytes);

// --- trajectories -----------------------------------------------------

/// `t,z` with header.
void write_trajectory_csv(const Trajectory& t, std::ostream& os);
/// Long format `rep,t,z` with header, replications numbered from 0.
void write_batch_csv(std::span<const Trajectory> batch, std::ostream& os);
/// Reads either layout; returns one state vector per replication.
std::vector<std::vector<std::uint64_t>> read_trajectories_csv(std::istream& is);
std::vector<std::vector<std::uint64_t>> read_trajectories_csv(const std::filesystem::path& path);

// --- census -----------------------------------------------------------

struct CensusSeries {
    std::vector<std::int64_t> years;
    std::vector<std::uint64_t> counts;
    std::string source;
};

/// Throws IoError on malformed input (header `year,count`, consecutive
/// years, first count >= 1).
CensusSeries read_census_csv(std::istream& is, const std::string& source = {});
CensusSeries read_census_csv(const std::filesystem::path& path);
void write_census_csv(const CensusSeries& series, std::ostream& os);

/// Treats the series as one trajectory and estimates (K, v) for a robin
/// family. Throws InsufficientDataError below three points.
EstimateResult fit_census(const CensusSeries& series, const OffspringModel& model, const WeightScheme& scheme,
                          TargetMode mode, const EstimateOptions& options = {});

// --- model and parameter specs ------------------------------------------

/// {"family": "bh", "base": "binary", ...constants}
Json model_to_json(const OffspringModel& model);
OffspringModel model_from_json(const Json& j);
/// {"K": 50, "v": 0.7} keyed by parameter_names(model); arrays accepted on
/// input.
Json theta_to_json(const OffspringModel& model, const Theta& theta);
Theta theta_from_json(const OffspringModel& model, const Json& j);

// --- reports ----------------------------------------------------------

Json estimate_report(const EstimateResult& result, const SufficientStats& stats, const OffspringModel& model,
                     const std::string& input_digest);
Json covariance_report(const CovarianceReport& report, const OffspringModel& model);

/// `z,m,m_up,sigma2_up,stationary`.
void write_mup_csv(const OffspringModel& model, const Theta& theta, std::size_t z_max, std::ostream& os);
/// `phi,x,y`.
void write_ellipse_csv(std::span<const EllipsePoint> points, std::ostream& os);

/// Writes `text` to `path` (creating parent directories), or to stdout
/// when path is "-" or empty.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace psdbp
