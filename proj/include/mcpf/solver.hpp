#pragma once

// Damped Newton root finder for the unified power-flow system. Steps solve
// J dx = -F by dense LU with partial pivoting; a backtracking line search
// halves the step until the residual infinity norm decreases.

#include <optional>
#include <string>

#include "mcpf/formulation.hpp"
#include "mcpf/network.hpp"

namespace mcpf {

struct SolverOptions {
    double tol_inf = 1e-8;          // convergence threshold on ||F||_inf
    int max_iter = 50;
    double min_step = 1.0 / 1024.0; // smallest damping factor before giving up
    bool fd_check = false;          // verify the Jacobian against finite differences
    // shuffles the unknown ordering; results must not depend on it
    std::optional<std::uint32_t> variable_order_seed;
};

enum class SolveStatus {
    Converged,
    NoConvergence,    // iteration budget exhausted; best iterate returned
    SingularJacobian, // an LU pivot fell below 1e-12
    LineSearchStall,  // damping underflowed without residual decrease
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::NoConvergence: return "no convergence";
        case SolveStatus::SingularJacobian: return "singular Jacobian";
        case SolveStatus::LineSearchStall: return "line search stall";
    }
    return "?";
}

struct Solution {
    SolveStatus status = SolveStatus::NoConvergence;
    bool converged = false;
    int iterations = 0;
    double final_residual = 0.0;     // ||F||_inf at the returned state
    std::string worst_equation;      // label of the worst residual row
    double fd_max_rel_error = 0.0;   // populated when fd_check is enabled
    StateVector state;
    VariableRegistry registry;
    DerivedResults derived;
};

// Nominal-voltage initialization: unit AC magnitudes and zero angles,
// +1 / -1 / 0 pu DC terminals, converter powers at their control
// setpoints, DC currents consistent with those powers.
StateVector flat_start(const NetworkCase& net, const VariableRegistry& registry);

// Carries a previous solution onto a modified case: shared variables copy
// over, new variables take flat-start values, removed variables drop.
// Throws IncompatibleCase when the bus sets differ beyond status changes.
StateVector warm_start(const Solution& previous, const NetworkCase& new_case,
                       const VariableRegistry& new_registry);

Solution solve(const NetworkCase& net, const SolverOptions& options = {},
               std::optional<StateVector> start = std::nullopt);

// Max relative deviation between the analytic Jacobian and a central
// finite-difference Jacobian (step h) at state x.
double jacobian_fd_error(const ResidualSystem& system, const StateVector& x, double h = 1e-6);

} // namespace mcpf
