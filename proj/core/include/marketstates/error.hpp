#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace marketstates {

enum class ErrorCode {
    Io,
    Parse,
    MalformedDate,
    NonPositivePrice,
    NonMonotonicDates,
    DuplicateTicker,
    DuplicateDate,
    EmptyUniverse,
    MissingValues,
    UnmappedTicker,
    DegenerateColumn,
    ParameterRange,
    DimensionMismatch,
    InsufficientData,
    InsufficientSequence,
    NonErgodic,
    InvalidRegime,
    AxisOutOfRange,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by bad input or configuration, as opposed to
/// failures that arise during computation on valid input.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Error raised while reading a text table; carries a 1-based row and column.
/// Column 0 means the whole row.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t row, std::size_t column, const std::string& detail);

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Non-fatal condition reported alongside a result.
struct Warning {
    std::string code;
    std::string message;
};

using Warnings = std::vector<Warning>;

inline void warn(Warnings* sink, std::string code, std::string message)
{
    if (sink != nullptr) {
        sink->push_back({std::move(code), std::move(message)});
    }
}

}  // namespace marketstates
