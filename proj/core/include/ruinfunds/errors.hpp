#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ruinfunds {

/// Process exit status the driver maps an error to.  Grouping errors by
/// recovery action (fix the input file vs. adjust solver settings) keeps the
/// CLI free of a per-type switch.
enum class ErrorKind { config = 2, numerical = 3, verification = 4 };

/// Base of all library exceptions.  `code()` is a stable machine-readable
/// identifier; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail, ErrorKind kind)
        : std::runtime_error(detail), code_(std::move(code)), kind_(kind) {}

    const std::string& code() const noexcept { return code_; }
    ErrorKind kind() const noexcept { return kind_; }

private:
    std::string code_;
    ErrorKind kind_;
};

#define RUINFUNDS_DEFINE_ERROR(Name, Kind)                                   \
    struct Name : Error {                                                    \
        explicit Name(const std::string& detail)                             \
            : Error(#Name, detail, ErrorKind::Kind) {}                       \
    }

// Input/model problems: the scenario file or the model it describes is bad.
RUINFUNDS_DEFINE_ERROR(ConfigError, config);
RUINFUNDS_DEFINE_ERROR(DimensionMismatch, config);
RUINFUNDS_DEFINE_ERROR(NotPositiveDefinite, config);
RUINFUNDS_DEFINE_ERROR(CorrelationOutOfRange, config);
RUINFUNDS_DEFINE_ERROR(UnsupportedModel, config);

// Numerical problems: the computation could not be carried out as requested.
RUINFUNDS_DEFINE_ERROR(NonConvergence, numerical);
RUINFUNDS_DEFINE_ERROR(InstabilityDetected, numerical);
RUINFUNDS_DEFINE_ERROR(DegenerateNormalizer, numerical);
RUINFUNDS_DEFINE_ERROR(DegenerateSecondDerivative, numerical);
RUINFUNDS_DEFINE_ERROR(OutOfDomain, numerical);
RUINFUNDS_DEFINE_ERROR(NegativeWealth, numerical);
RUINFUNDS_DEFINE_ERROR(InvalidStrategy, numerical);

// Cross-checks between independent computations disagreed beyond tolerance.
RUINFUNDS_DEFINE_ERROR(VerificationFailure, verification);

#undef RUINFUNDS_DEFINE_ERROR

} // namespace ruinfunds
