#include "exectraj/errors.hpp"

namespace exectraj {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid argument";
        case ErrorCode::unknown_family: return "unknown impact family";
        case ErrorCode::overflow: return "exponent overflow";
        case ErrorCode::singular_derivative: return "singular derivative";
        case ErrorCode::degenerate_lagrangian: return "degenerate Lagrangian";
        case ErrorCode::bracket: return "bracket does not straddle target";
        case ErrorCode::ode_blowup: return "ODE blow-up";
        case ErrorCode::non_convergence: return "non-convergence";
        case ErrorCode::quadrature: return "quadrature failure";
        case ErrorCode::boundary_violation: return "boundary violation";
        case ErrorCode::grid_mismatch: return "grid mismatch";
        case ErrorCode::config: return "configuration error";
        case ErrorCode::io: return "I/O error";
    }
    return "unknown error";
}

bool Error::is_numerical() const noexcept {
    switch (code_) {
        case ErrorCode::overflow:
        case ErrorCode::singular_derivative:
        case ErrorCode::degenerate_lagrangian:
        case ErrorCode::bracket:
        case ErrorCode::ode_blowup:
        case ErrorCode::non_convergence:
        case ErrorCode::quadrature:
            return true;
        default:
            return false;
    }
}

}  // namespace exectraj
