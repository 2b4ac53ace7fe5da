#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace coxsub {

/// Base class for all library errors.  Data/usage errors and numerical
/// errors are separated so callers (notably the CLI) can map them to
/// distinct exit codes.
struct CoxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input data or schema problems: unreadable files, bad columns, invalid
/// intervals, records that violate dataset invariants.
struct DataError : CoxError {
    using CoxError::CoxError;
};

/// Numerical failures while fitting or resampling.
struct NumericError : CoxError {
    using CoxError::CoxError;
};

// ---- data errors -----------------------------------------------------------

struct MissingColumn : DataError {
    explicit MissingColumn(const std::string& col)
        : DataError("missing required column '" + col + "'"), column(col) {}
    std::string column;
};

struct NonNumericValue : DataError {
    NonNumericValue(std::int64_t row_, const std::string& col, const std::string& value)
        : DataError("row " + std::to_string(row_) + ", column '" + col +
                    "': cannot parse value '" + value + "'"),
          row(row_), column(col) {}
    std::int64_t row;
    std::string column;
};

struct InvalidInterval : DataError {
    explicit InvalidInterval(std::int64_t row_, const std::string& why = "requires 0 <= entry < exit")
        : DataError("row " + std::to_string(row_) + ": invalid time interval (" + why + ")"),
          row(row_) {}
    std::int64_t row;
};

/// A pseudo-record spans more than one event time of its stratum; the data
/// must be split at event times before applying a time transform.
struct NotSplit : DataError {
    explicit NotSplit(std::int64_t row_)
        : DataError("row " + std::to_string(row_) +
                    " spans more than one event time; split the data at event times first"),
          row(row_) {}
    std::int64_t row;
};

struct NoCensored : DataError {
    NoCensored() : DataError("dataset has no censored records to sample from") {}
};

// ---- numerical errors ------------------------------------------------------

struct EmptyRiskSet : NumericError {
    explicit EmptyRiskSet(double time)
        : NumericError("empty (zero-weight) risk set at event time " + std::to_string(time)),
          event_time(time) {}
    double event_time;
};

struct SingularInformation : NumericError {
    SingularInformation() : NumericError("information matrix is singular or not positive definite") {}
};

/// Divergence guard: coefficients run away while the gradient stays large,
/// the classic signature of monotone (separable) partial likelihood.
struct MonotoneLikelihood : NumericError {
    MonotoneLikelihood()
        : NumericError("coefficients diverging; partial likelihood appears monotone (separation)") {}
};

struct AllZeroResiduals : NumericError {
    AllZeroResiduals()
        : NumericError("all censored score residuals are zero; cannot form sampling probabilities") {}
};

struct PilotDegenerate : NumericError {
    explicit PilotDegenerate(const std::string& why)
        : NumericError("pilot estimate unusable: " + why) {}
};

struct ZeroProbPositiveResidual : NumericError {
    explicit ZeroProbPositiveResidual(std::int64_t record)
        : NumericError("record " + std::to_string(record) +
                       " has zero sampling probability but a nonzero score residual"),
          record_id(record) {}
    std::int64_t record_id;
};

}  // namespace coxsub
