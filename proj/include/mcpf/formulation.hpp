#pragma once

// Assembly of the unified power-flow system F(x) = 0 for hybrid AC/DC
// networks: variable registry, residual stack, analytic dense Jacobian,
// and per-element flow evaluation.
//
// Counting rules (the registry is square by construction):
//   - every AC bus contributes a P and a Q balance row;
//   - its angle is an unknown unless the bus is the island reference
//     (angle fixed to the reference angle), and its magnitude is an
//     unknown unless a generator holds it;
//   - every generator contributes a reactive-power unknown, and the
//     generator at a reference bus contributes a slack active-power
//     unknown in place of its fixed setpoint;
//   - every in-service converter pole contributes nine unknowns
//     (filter and converter node voltages and angles, converter P, Q,
//     current magnitude, pole-side and neutral-side DC currents) and
//     nine rows (filter node P/Q, converter node P/Q, loss coupling,
//     current-magnitude consistency, DC current loop, d-axis control,
//     q-axis control);
//   - every DC terminal contributes a current-balance row and a voltage
//     unknown, except grounded neutrals whose voltage is pinned to zero
//     structurally and whose unknown is the ground current instead.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcpf/network.hpp"

namespace mcpf {

using StateVector = Eigen::VectorXd;

// --- element flow primitives ---------------------------------------------

struct SeriesPowers {
    double p_ij, q_ij, p_ji, q_ji;
};

// Power flows of a series admittance g + jb with an off-nominal tap on the
// i side (AC lines call with tap = 1). Direction ij is evaluated at the i
// side, ji at the j side.
SeriesPowers series_element_flow(double g, double b, double tap, double u_i, double theta_i,
                                 double u_j, double theta_j);

// Reactive power consumed by the filter capacitor: -b_f * U_f^2.
double filter_reactive(double b_f, double u_f_mag);

// Conductor current out of terminal e: (U_e - U_f) / r. Throws
// ZeroResistance for r <= 0.
double dc_branch_current(double r, double u_e, double u_f);

// Converter loss a + b*I + c*I^2 at current magnitude I.
double converter_loss(double a, double b, double c, double i_mag);

// Squared current-magnitude consistency: P^2 + Q^2 - U^2 I^2.
double converter_current_residual(double p, double q, double u_cv_mag, double i_mag);

// Flows plus all partial derivatives, used by the Jacobian assembly.
struct SeriesFlowGrad {
    SeriesPowers flow;
    // rows: p_ij, q_ij, p_ji, q_ji; cols: u_i, theta_i, u_j, theta_j
    double d[4][4];
};
SeriesFlowGrad series_flow_grad(double g, double b, double tap, double u_i, double theta_i,
                                double u_j, double theta_j);

// --- variable registry ----------------------------------------------------

enum class VarKind : std::uint8_t {
    AcTheta,     // id = AC bus
    AcVmag,      // id = AC bus
    GenQ,        // id = generator
    GenPSlack,   // id = generator at reference bus
    PoleThetaF,  // id = converter pole
    PoleVmagF,
    PoleThetaCv,
    PoleVmagCv,
    PolePacCv,   // power into the converter bridge, AC side
    PoleQacCv,
    PoleImagCv,
    PoleIdc,     // DC current, pole terminal into converter
    PoleIdc0,    // DC current, neutral terminal into converter
    DcVoltage,   // id = DC bus, sub = terminal
    GroundI,     // id = grounded DC bus
};

struct VarKey {
    VarKind kind;
    std::string id;
    Terminal sub = Terminal::Positive;  // used by DcVoltage only

    bool operator==(const VarKey&) const = default;
    bool operator<(const VarKey& o) const {
        if (kind != o.kind) return kind < o.kind;
        if (id != o.id) return id < o.id;
        return sub < o.sub;
    }
};

std::string to_string(const VarKey& key);

enum class EqKind : std::uint8_t {
    AcBalanceP,   // id = AC bus
    AcBalanceQ,
    FilterP,      // id = converter pole
    FilterQ,
    CvNodeP,
    CvNodeQ,
    LossCoupling,
    CurrentMag,
    CurrentLoop,
    DAxisControl,
    QAxisControl,
    DcBalance,    // id = DC bus, sub = terminal
};

struct EqKey {
    EqKind kind;
    std::string id;
    Terminal sub = Terminal::Positive;
};

std::string to_string(const EqKey& key);

class VariableRegistry {
public:
    int size() const { return static_cast<int>(keys_.size()); }
    int index_of(const VarKey& key) const;                   // -1 if absent
    std::optional<double> fixed_value(const VarKey& key) const;
    const VarKey& key_at(int index) const { return keys_.at(index); }
    const std::vector<VarKey>& keys() const { return keys_; }

private:
    friend VariableRegistry build_registry(const NetworkCase&, std::optional<std::uint32_t>);
    std::vector<VarKey> keys_;
    std::map<VarKey, int> index_;
    std::map<VarKey, double> fixed_;  // eliminated quantities and their values
};

// Enumerates unknowns in a fixed documented order (optionally shuffled by
// a seed, for order-invariance testing). Throws DimensionMismatch when the
// case cannot form a square system (e.g. a pole without both control
// axes), with per-category counts in the message.
VariableRegistry build_registry(const NetworkCase& net,
                                std::optional<std::uint32_t> shuffle_seed = std::nullopt);

// --- residual system --------------------------------------------------

class ResidualSystem {
public:
    ResidualSystem(NetworkCase net, VariableRegistry registry);

    int size() const { return registry_.size(); }
    const VariableRegistry& registry() const { return registry_; }
    const NetworkCase& network() const { return net_; }
    const std::vector<EqKey>& equation_keys() const { return equations_; }

    Eigen::VectorXd evaluate(const StateVector& x) const;
    Eigen::MatrixXd jacobian(const StateVector& x) const;

    // Index of the largest-magnitude residual entry, for diagnostics.
    int worst_equation(const Eigen::VectorXd& f) const;

private:
    void assemble(const StateVector& x, Eigen::VectorXd* f, Eigen::MatrixXd* jac) const;

    NetworkCase net_;
    VariableRegistry registry_;
    std::vector<EqKey> equations_;
    std::map<std::string, int> eq_row_;  // serialized EqKey -> row
};

// --- derived quantities -------------------------------------------------

struct AcBusResult {
    std::string id;
    double u_mag, theta;
};
struct AcBranchFlowResult {
    std::string id;
    double p_from, q_from, p_to, q_to, loss;
    bool in_service;
};
struct GeneratorResult {
    std::string id;
    double p, q;
};
struct DcTerminalResult {
    std::string bus;
    Terminal terminal;
    double u;
    bool grounded;
};
struct DcConductorFlowResult {
    std::string branch;
    Terminal conductor;
    double i_from_to, loss;
    bool in_service;
};
struct ConverterResult {
    std::string id;
    bool in_service;
    // all zero when out of service
    double p_pcc = 0.0, q_pcc = 0.0;          // PCC flows, into converter
    double u_f = 0.0, theta_f = 0.0;
    double u_cv = 0.0, theta_cv = 0.0;
    double p_cv_ac = 0.0, q_cv_ac = 0.0;
    double i_cv_mag = 0.0;
    double p_cv_dc = 0.0, p_cv_dc0 = 0.0;
    double i_dc = 0.0, i_dc0 = 0.0;           // terminal-into-converter
    double p_loss = 0.0;                      // bridge loss
    double transformer_loss = 0.0, reactor_loss = 0.0;
    double q_filter = 0.0;
};
struct GroundResult {
    std::string bus;
    double i_ground;  // out of the neutral terminal into earth
};

struct DerivedResults {
    std::vector<AcBusResult> ac_buses;
    std::vector<AcBranchFlowResult> ac_branches;
    std::vector<GeneratorResult> generators;
    std::vector<DcTerminalResult> dc_terminals;
    std::vector<DcConductorFlowResult> dc_conductors;
    std::vector<ConverterResult> converters;
    std::vector<GroundResult> grounds;

    double total_generation = 0.0;
    double total_ac_load = 0.0;
    double total_dc_load = 0.0;
    double total_shunt_loss = 0.0;
    double total_branch_loss = 0.0;       // AC branches
    double total_converter_loss = 0.0;    // transformer + reactor + bridge
    double total_dc_conductor_loss = 0.0;

    // Sum of generation minus loads minus all losses; ~0 at a solution.
    double power_mismatch() const;
};

DerivedResults compute_derived(const NetworkCase& net, const VariableRegistry& registry,
                               const StateVector& x);

} // namespace mcpf
