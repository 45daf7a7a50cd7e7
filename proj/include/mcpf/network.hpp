#pragma once

// Domain model for hybrid AC/DC networks with multiconductor (bipolar or
// mixed monopolar) DC grids. Every converter pole, every DC conductor
// (positive / negative / neutral) and every neutral grounding point is an
// explicit element, so unbalanced operation is representable directly.
//
// All electrical quantities are per-unit on a common system base.

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mcpf {

// DC terminal polarity. A DC bus exposes a subset of these.
enum class Terminal { Positive, Negative, Neutral };

// Converter pole polarity: which non-neutral terminal the pole connects to.
enum class Polarity { Positive, Negative };

inline Terminal terminal_of(Polarity p) {
    return p == Polarity::Positive ? Terminal::Positive : Terminal::Negative;
}

inline const char* to_string(Terminal t) {
    switch (t) {
        case Terminal::Positive: return "positive";
        case Terminal::Negative: return "negative";
        case Terminal::Neutral: return "neutral";
    }
    return "?";
}

inline const char* to_string(Polarity p) {
    return p == Polarity::Positive ? "positive" : "negative";
}

struct AcBus {
    std::string id;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    double base_kv = 0.0;          // metadata only
    bool is_reference = false;
    double reference_angle = 0.0;  // rad, normally 0
};

struct AcBranch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    double g = 0.0;  // series conductance
    double b = 0.0;  // series susceptance
    bool status = true;
};

struct Generator {
    std::string id;
    std::string bus;
    double p_set = 0.0;      // ignored when the bus is the island reference
    double u_mag_set = 1.0;  // held at the bus
};

struct AcLoad {
    std::string id;
    std::string bus;
    double p_set = 0.0;
    double q_set = 0.0;
};

// Constant-power DC load connected between a pole terminal and neutral.
struct DcLoad {
    std::string id;
    std::string dc_bus;
    Polarity terminal = Polarity::Positive;
    double p_set = 0.0;
};

struct DcBus {
    std::string id;
    std::vector<Terminal> terminals;  // only physically present terminals
    bool grounded = false;            // ideal ground on the neutral terminal

    bool has_terminal(Terminal t) const {
        for (auto present : terminals)
            if (present == t) return true;
        return false;
    }
};

struct DcConductor {
    double r = 0.0;  // > 0
    bool status = true;
};

struct DcBranch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    // Only conductors physically present appear in the map.
    std::map<Terminal, DcConductor> conductors;
};

// --- converter control -------------------------------------------------

struct UdcControl {
    double u_dc_ref = 0.0;  // pole-to-neutral voltage; negative for negative poles
};
struct PacControl {
    double p_ac_ref = 0.0;  // PCC active power, into the converter positive
};
struct DcDroop {
    double k = 0.0;  // > 0
    double u_dc_ref = 0.0;
    double p_ac_ref = 0.0;
};
using DAxisControl = std::variant<UdcControl, PacControl, DcDroop>;

struct UacControl {
    double u_mag_ref = 1.0;
};
struct QControl {
    double q_ref = 0.0;  // PCC reactive power, withdrawn positive
};
struct AcDroop {
    double k = 0.0;  // > 0
    double u_mag_ref = 1.0;
    double q_ref = 0.0;
};
using QAxisControl = std::variant<UacControl, QControl, AcDroop>;

// Both axes must be set before the case can be formulated; they are
// optional here so half-built cases are representable and diagnosable.
struct ControlSpec {
    std::optional<DAxisControl> d_axis;
    std::optional<QAxisControl> q_axis;
};

struct TransformerParams {
    double r = 0.0;
    double x = 0.0;
    double tap = 1.0;  // > 0
};

struct ReactorParams {
    double r = 0.0;
    double x = 0.0;
};

// One converter pole: AC bus -- transformer -- filter node -- phase
// reactor -- converter bridge -- (pole terminal, neutral terminal) of the
// DC bus.
struct ConverterPole {
    std::string id;
    std::string ac_bus;
    std::string dc_bus;
    Polarity polarity = Polarity::Positive;
    TransformerParams transformer;
    double filter_b = 0.0;
    ReactorParams reactor;
    double loss_a = 0.0;  // constant loss term
    double loss_b = 0.0;  // linear in converter current magnitude
    double loss_c = 0.0;  // quadratic
    bool status = true;
    ControlSpec control;
};

struct PerUnitBase {
    double s_base_mva = 100.0;
};

// Immutable once validated; all engine operations take it by const
// reference and never mutate it.
struct NetworkCase {
    std::string name;
    PerUnitBase base;
    std::vector<AcBus> ac_buses;
    std::vector<AcBranch> ac_branches;
    std::vector<Generator> generators;
    std::vector<AcLoad> ac_loads;
    std::vector<DcLoad> dc_loads;
    std::vector<DcBus> dc_buses;
    std::vector<DcBranch> dc_branches;
    std::vector<ConverterPole> converters;
};

// --- validation ---------------------------------------------------------

enum class ValidationCode {
    MissingReferenceBus,
    UngroundedDcComponent,
    LayerWithoutVoltageReference,
    DuplicateUacControl,
    DanglingReference,
    DuplicateId,
    InvalidParameter,
};

inline const char* to_string(ValidationCode c) {
    switch (c) {
        case ValidationCode::MissingReferenceBus: return "MissingReferenceBus";
        case ValidationCode::UngroundedDcComponent: return "UngroundedDcComponent";
        case ValidationCode::LayerWithoutVoltageReference: return "LayerWithoutVoltageReference";
        case ValidationCode::DuplicateUacControl: return "DuplicateUacControl";
        case ValidationCode::DanglingReference: return "DanglingReference";
        case ValidationCode::DuplicateId: return "DuplicateId";
        case ValidationCode::InvalidParameter: return "InvalidParameter";
    }
    return "Unknown";
}

struct ValidationError {
    ValidationCode code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationError> errors;

    bool ok() const { return errors.empty(); }
    bool has(ValidationCode code) const {
        for (const auto& e : errors)
            if (e.code == code) return true;
        return false;
    }
    std::string summary() const;
};

// Zero errors iff the case is solvable by construction: every synchronous
// AC island has exactly one reference bus (hosting a generator), every
// connected DC component has a grounded neutral, every DC layer touched by
// an in-service converter has a voltage-controlling converter, at most one
// AC-voltage controller per AC bus, and all cross-references resolve.
ValidationReport validate_case(const NetworkCase& net);

// --- connectivity -------------------------------------------------------

struct TerminalRef {
    std::string bus;
    Terminal terminal;

    bool operator==(const TerminalRef&) const = default;
    bool operator<(const TerminalRef& o) const;
};

struct DcComponent {
    std::vector<TerminalRef> terminals;  // sorted by (bus id, terminal)
};

// Connected components of the DC terminal graph over in-service conductors
// and in-service converter pole connections (a pole ties its pole terminal
// to the neutral of its DC bus). Ordered by smallest contained bus id.
std::vector<DcComponent> dc_components(const NetworkCase& net);

struct AcIsland {
    std::vector<std::string> bus_ids;  // sorted
};

// Synchronous areas: connected components over in-service AC branches.
// Converters never merge islands.
std::vector<AcIsland> ac_islands(const NetworkCase& net);

// --- id lookup helper ---------------------------------------------------

// Index over a case for O(1) id resolution. Built on demand; does not own
// the case.
class CaseIndex {
public:
    explicit CaseIndex(const NetworkCase& net);

    const AcBus* ac_bus(const std::string& id) const;
    const DcBus* dc_bus(const std::string& id) const;
    const AcBranch* ac_branch(const std::string& id) const;
    const DcBranch* dc_branch(const std::string& id) const;
    const ConverterPole* converter(const std::string& id) const;
    const Generator* generator(const std::string& id) const;

private:
    std::map<std::string, const AcBus*> ac_buses_;
    std::map<std::string, const DcBus*> dc_buses_;
    std::map<std::string, const AcBranch*> ac_branches_;
    std::map<std::string, const DcBranch*> dc_branches_;
    std::map<std::string, const ConverterPole*> converters_;
    std::map<std::string, const Generator*> generators_;
};

} // namespace mcpf
