#pragma once

// Single-element outage workflow: take an element out of service, re-solve
// warm-started from the base solution, and report deviations (after minus
// before) for the quantities the operator watches.

#include <string>
#include <variant>
#include <vector>

#include "mcpf/network.hpp"
#include "mcpf/solver.hpp"

namespace mcpf {

struct ConverterPoleOutage {
    std::string id;
};
struct DcConductorOutage {
    std::string branch_id;
    Terminal conductor;
};
struct AcBranchOutage {
    std::string id;
};
using Outage = std::variant<ConverterPoleOutage, DcConductorOutage, AcBranchOutage>;

std::string to_string(const Outage& outage);

// Copy of the case with the element switched out. A converter-pole outage
// removes the entire pole chain (transformer, filter, bridge) from the
// formulation. Throws UnknownElement, ElementOutOfService, or
// PostOutageInfeasible (when the reduced case fails validation, e.g. the
// pole was its layer's only voltage reference).
NetworkCase apply_outage(const NetworkCase& net, const Outage& outage);

struct Deviation {
    double before = 0.0;
    double after = 0.0;
    double delta = 0.0;  // after - before
};

struct ContingencyReport {
    Outage outage;
    Solution base;
    Solution post;

    struct PoleDeviation {
        std::string id;
        Deviation p_pcc, q_pcc;
    };
    struct TerminalDeviation {
        std::string bus;
        Terminal terminal;
        Deviation u;
    };
    struct AcBusDeviation {
        std::string id;
        Deviation u_mag;
    };
    std::vector<PoleDeviation> poles;
    std::vector<TerminalDeviation> dc_terminals;
    std::vector<AcBusDeviation> ac_buses;
};

// Solves the post-outage case (warm start from base, flat-start fallback)
// and assembles the deviation report. The outaged pole reports zero
// post-outage values.
ContingencyReport run_contingency(const NetworkCase& net, const Solution& base,
                                  const Outage& outage, const SolverOptions& options = {});

} // namespace mcpf
