#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace psdbp {

/// Root of every failure raised by the library. `kind()` is a stable,
/// machine-readable tag; the CLI writes it into its error record.
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

  private:
    std::string kind_;
};

#define PSDBP_DEFINE_ERROR(Name, tag)                                          \
    class Name : public Error {                                                \
      public:                                                                  \
        explicit Name(const std::string& what) : Error(tag, what) {}           \
    }

PSDBP_DEFINE_ERROR(DomainError, "domain");
PSDBP_DEFINE_ERROR(ParameterDomainError, "parameter-domain");
PSDBP_DEFINE_ERROR(ModelMisspecificationError, "model-misspecification");
PSDBP_DEFINE_ERROR(TruncationError, "truncation");
PSDBP_DEFINE_ERROR(ReducibilityError, "reducibility");
PSDBP_DEFINE_ERROR(SpectralIntegrityError, "spectral-integrity");
PSDBP_DEFINE_ERROR(OracleFailure, "oracle-failure");
PSDBP_DEFINE_ERROR(ExplosionError, "explosion");
PSDBP_DEFINE_ERROR(IdentifiabilityError, "identifiability");
PSDBP_DEFINE_ERROR(CovarianceIntegrityError, "covariance-integrity");
PSDBP_DEFINE_ERROR(TailTruncationError, "tail-truncation");
PSDBP_DEFINE_ERROR(InsufficientDataError, "insufficient-data");
PSDBP_DEFINE_ERROR(IoError, "io");
PSDBP_DEFINE_ERROR(StudyAbortedError, "study-aborted");

#undef PSDBP_DEFINE_ERROR

/// Power iteration hit its iteration cap. Carries the last residuals.
class NonConvergenceError : public Error {
  public:
    NonConvergenceError(const std::string& what, double left_residual,
                        double right_residual)
        : Error("non-convergence", what), left_residual_(left_residual),
          right_residual_(right_residual) {}

    double left_residual() const noexcept { return left_residual_; }
    double right_residual() const noexcept { return right_residual_; }

  private:
    double left_residual_;
    double right_residual_;
};

/// Rejection sampling ran out of attempts.
class SurvivalRejectionError : public Error {
  public:
    SurvivalRejectionError(const std::string& what, double survival_fraction,
                           std::uint64_t attempts)
        : Error("survival-rejection", what),
          survival_fraction_(survival_fraction), attempts_(attempts) {}

    double survival_fraction() const noexcept { return survival_fraction_; }
    std::uint64_t attempts() const noexcept { return attempts_; }

  private:
    double survival_fraction_;
    std::uint64_t attempts_;
};

} // namespace psdbp
