#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alphacast {

/// Error taxonomy shared across the whole pipeline. Every failure mode named
/// by a module contract maps onto one kind so callers can branch on it.
enum class ErrorKind {
    invalid_argument,
    range_too_short,
    non_monotonic_timestamps,
    irregular_spacing,
    split_overflow,
    unknown_column,
    parse_error,
    missing_covariate,
    model_unavailable,
    all_models_unavailable,
    stale_library,
    format_error,
    duplicate_id,
    malformed_interval,
    assembly_mismatch,
    missing_block,
    wrong_count,
    non_numeric,
    transport,
    io_error,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::range_too_short: return "range_too_short";
    case ErrorKind::non_monotonic_timestamps: return "non_monotonic_timestamps";
    case ErrorKind::irregular_spacing: return "irregular_spacing";
    case ErrorKind::split_overflow: return "split_overflow";
    case ErrorKind::unknown_column: return "unknown_column";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::missing_covariate: return "missing_covariate";
    case ErrorKind::model_unavailable: return "model_unavailable";
    case ErrorKind::all_models_unavailable: return "all_models_unavailable";
    case ErrorKind::stale_library: return "stale_library";
    case ErrorKind::format_error: return "format_error";
    case ErrorKind::duplicate_id: return "duplicate_id";
    case ErrorKind::malformed_interval: return "malformed_interval";
    case ErrorKind::assembly_mismatch: return "assembly_mismatch";
    case ErrorKind::missing_block: return "missing_block";
    case ErrorKind::wrong_count: return "wrong_count";
    case ErrorKind::non_numeric: return "non_numeric";
    case ErrorKind::transport: return "transport";
    case ErrorKind::io_error: return "io_error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace alphacast
