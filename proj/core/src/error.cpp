#include "marketstates/error.hpp"

namespace marketstates {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::MalformedDate: return "MalformedDate";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::NonMonotonicDates: return "NonMonotonicDates";
    case ErrorCode::DuplicateTicker: return "DuplicateTicker";
    case ErrorCode::DuplicateDate: return "DuplicateDate";
    case ErrorCode::EmptyUniverse: return "EmptyUniverse";
    case ErrorCode::MissingValues: return "MissingValues";
    case ErrorCode::UnmappedTicker: return "UnmappedTicker";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::ParameterRange: return "ParameterRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InsufficientSequence: return "InsufficientSequence";
    case ErrorCode::NonErgodic: return "NonErgodic";
    case ErrorCode::InvalidRegime: return "InvalidRegime";
    case ErrorCode::AxisOutOfRange: return "AxisOutOfRange";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::DegenerateColumn:
    case ErrorCode::NonErgodic:
    case ErrorCode::InsufficientData:
    case ErrorCode::InsufficientSequence:
        return false;
    default:
        return true;
    }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

ParseError::ParseError(ErrorCode code, std::size_t row, std::size_t column,
                       const std::string& detail)
    : Error(code, "row " + std::to_string(row) +
                      (column > 0 ? ", column " + std::to_string(column) : std::string()) + ": " +
                      detail),
      row_(row),
      column_(column)
{
}

}  // namespace marketstates
