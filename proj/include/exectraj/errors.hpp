#pragma once

#include <stdexcept>
#include <string>

namespace exectraj {

enum class ErrorCode {
    invalid_argument,
    unknown_family,
    overflow,
    singular_derivative,
    degenerate_lagrangian,
    bracket,
    ode_blowup,
    non_convergence,
    quadrature,
    boundary_violation,
    grid_mismatch,
    config,
    io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a code so callers (the CLI in
/// particular) can triage it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// True for failures of the numerics rather than of the inputs.
    bool is_numerical() const noexcept;

private:
    ErrorCode code_;
};

}  // namespace exectraj
