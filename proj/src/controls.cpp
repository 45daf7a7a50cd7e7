#include "mcpf/controls.hpp"

namespace mcpf {

double d_axis_residual(const DAxisControl& spec, Polarity polarity, double p_ac,
                       double u_dc_pole, double u_dc_neutral) {
    const double du = u_dc_pole - u_dc_neutral;
    if (const auto* udc = std::get_if<UdcControl>(&spec)) return du - udc->u_dc_ref;
    if (const auto* pac = std::get_if<PacControl>(&spec)) return p_ac - pac->p_ac_ref;
    const auto& droop = std::get<DcDroop>(spec);
    const double sign = polarity == Polarity::Positive ? +1.0 : -1.0;
    return (p_ac - droop.p_ac_ref) + sign * (du - droop.u_dc_ref) / droop.k;
}

double q_axis_residual(const QAxisControl& spec, double q, double u_mag_pcc) {
    if (const auto* uac = std::get_if<UacControl>(&spec)) return u_mag_pcc - uac->u_mag_ref;
    if (const auto* qc = std::get_if<QControl>(&spec)) return q - qc->q_ref;
    const auto& droop = std::get<AcDroop>(spec);
    return (q - droop.q_ref) - (u_mag_pcc - droop.u_mag_ref) / droop.k;
}

double grounding_residual(double u_dc_neutral) {
    return u_dc_neutral;
}

DAxisGradient d_axis_gradient(const DAxisControl& spec, Polarity polarity) {
    DAxisGradient g;
    if (std::holds_alternative<UdcControl>(spec)) {
        g.du_pole = 1.0;
        g.du_neutral = -1.0;
    } else if (std::holds_alternative<PacControl>(spec)) {
        g.dp = 1.0;
    } else {
        const auto& droop = std::get<DcDroop>(spec);
        const double sign = polarity == Polarity::Positive ? +1.0 : -1.0;
        g.dp = 1.0;
        g.du_pole = sign / droop.k;
        g.du_neutral = -sign / droop.k;
    }
    return g;
}

QAxisGradient q_axis_gradient(const QAxisControl& spec) {
    QAxisGradient g;
    if (std::holds_alternative<UacControl>(spec)) {
        g.du_mag = 1.0;
    } else if (std::holds_alternative<QControl>(spec)) {
        g.dq = 1.0;
    } else {
        const auto& droop = std::get<AcDroop>(spec);
        g.dq = 1.0;
        g.du_mag = -1.0 / droop.k;
    }
    return g;
}

} // namespace mcpf
