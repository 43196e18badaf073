#pragma once

#include <stdexcept>
#include <string>

namespace lse {

enum class ErrorCode {
    invalid_argument,
    no_sign_change,
    non_finite,
    empty_sample,
    non_positive_alpha,
    invalid_state,
    no_convergence,
    not_achievable,
    out_of_support,
    singular_system,
    degenerate_column,
    config_error,
    schema_error,
    io_error,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace lse
