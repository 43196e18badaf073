#include "lse/error.hpp"

namespace lse {

const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::no_sign_change: return "NoSignChange";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::empty_sample: return "EmptySample";
    case ErrorCode::non_positive_alpha: return "NonPositiveAlpha";
    case ErrorCode::invalid_state: return "InvalidState";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::not_achievable: return "NotAchievable";
    case ErrorCode::out_of_support: return "OutOfSupport";
    case ErrorCode::singular_system: return "SingularSystem";
    case ErrorCode::degenerate_column: return "DegenerateColumn";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::schema_error: return "SchemaError";
    case ErrorCode::io_error: return "IOError";
    }
    return "Unknown";
}

} // namespace lse
