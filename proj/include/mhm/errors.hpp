#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mhm {

// Raised when a raw identifier was never densified at ingestion time,
// or a dense index is out of range for the log it is used with.
class UnknownIdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file header or row layout.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A pipeline stage produced a log with no events left.
class EmptyDatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite intensity or likelihood value.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Prediction requested for a user or item with no training history.
class ColdStartError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Optimizer produced non-finite objective values repeatedly; carries the
// ELBO trace recorded up to the failure.
class FitDivergedError : public std::runtime_error {
public:
    FitDivergedError(const std::string& msg, std::vector<std::pair<int, double>> trace)
        : std::runtime_error(msg), trace_(std::move(trace)) {}

    const std::vector<std::pair<int, double>>& trace() const { return trace_; }

private:
    std::vector<std::pair<int, double>> trace_;
};

} // namespace mhm
