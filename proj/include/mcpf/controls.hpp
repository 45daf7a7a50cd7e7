#pragma once

// Residual forms of the converter outer-control characteristics and of the
// neutral grounding condition. All functions are pure; the formulation
// stacks them into the unified system and reuses them for post-solve
// certificates.
//
// Sign conventions: P and Q are the PCC flows from the AC bus into the
// converter transformer (withdrawn from the grid positive). DC voltages
// are terminal-to-ground values; a pole setpoint for a negative terminal
// is itself negative.

#include "mcpf/network.hpp"

namespace mcpf {

// d-axis: DC voltage, active power, or DC voltage-power droop.
//
//   Udc:      (U_pole - U_neutral) - U*
//   Pac:      P - P*
//   DC droop: (P - P*) + (1/k)((U_pole - U_neutral) - U*)   positive pole
//             (P - P*) - (1/k)((U_pole - U_neutral) - U*)   negative pole
double d_axis_residual(const DAxisControl& spec, Polarity polarity, double p_ac,
                       double u_dc_pole, double u_dc_neutral);

// q-axis: AC voltage magnitude, reactive power, or AC droop
//
//   Uac:      U_pcc - U*
//   Q:        Q - Q*
//   AC droop: (Q - Q*) - (1/k)(U_pcc - U*)
double q_axis_residual(const QAxisControl& spec, double q, double u_mag_pcc);

// Ideal grounding pins the neutral to zero; nonzero values flag a
// violation at a grounded terminal.
double grounding_residual(double u_dc_neutral);

// Partial derivatives used by the analytic Jacobian.
struct DAxisGradient {
    double dp = 0.0;       // d residual / d P
    double du_pole = 0.0;  // d residual / d U_pole
    double du_neutral = 0.0;
};
DAxisGradient d_axis_gradient(const DAxisControl& spec, Polarity polarity);

struct QAxisGradient {
    double dq = 0.0;
    double du_mag = 0.0;
};
QAxisGradient q_axis_gradient(const QAxisControl& spec);

} // namespace mcpf
