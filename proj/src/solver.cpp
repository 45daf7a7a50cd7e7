#include "mcpf/solver.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <set>

#include "mcpf/errors.hpp"

namespace mcpf {

namespace {

double control_p_setpoint(const ConverterPole& pole) {
    if (!pole.control.d_axis) return 0.0;
    if (const auto* pac = std::get_if<PacControl>(&*pole.control.d_axis)) return pac->p_ac_ref;
    if (const auto* droop = std::get_if<DcDroop>(&*pole.control.d_axis)) return droop->p_ac_ref;
    return 0.0;
}

double control_q_setpoint(const ConverterPole& pole) {
    if (!pole.control.q_axis) return 0.0;
    if (const auto* q = std::get_if<QControl>(&*pole.control.q_axis)) return q->q_ref;
    if (const auto* droop = std::get_if<AcDroop>(&*pole.control.q_axis)) return droop->q_ref;
    return 0.0;
}

} // namespace

StateVector flat_start(const NetworkCase& net, const VariableRegistry& registry) {
    StateVector x = StateVector::Zero(registry.size());
    CaseIndex index(net);

    for (int i = 0; i < registry.size(); ++i) {
        const VarKey& key = registry.key_at(i);
        switch (key.kind) {
            case VarKind::AcVmag:
            case VarKind::PoleVmagF:
            case VarKind::PoleVmagCv:
                x[i] = 1.0;
                break;
            case VarKind::DcVoltage:
                x[i] = key.sub == Terminal::Positive ? 1.0
                     : key.sub == Terminal::Negative ? -1.0
                                                     : 0.0;
                break;
            case VarKind::PolePacCv:
                x[i] = control_p_setpoint(*index.converter(key.id));
                break;
            case VarKind::PoleQacCv:
                x[i] = control_q_setpoint(*index.converter(key.id));
                break;
            case VarKind::PoleImagCv: {
                const ConverterPole& pole = *index.converter(key.id);
                const double p = control_p_setpoint(pole);
                const double q = control_q_setpoint(pole);
                x[i] = std::hypot(p, q);
                break;
            }
            case VarKind::PoleIdc: {
                const ConverterPole& pole = *index.converter(key.id);
                const double u_nominal = pole.polarity == Polarity::Positive ? 1.0 : -1.0;
                // lossless estimate: P into converter leaves on the DC side
                x[i] = -control_p_setpoint(pole) / u_nominal;
                break;
            }
            case VarKind::PoleIdc0: {
                const ConverterPole& pole = *index.converter(key.id);
                const double u_nominal = pole.polarity == Polarity::Positive ? 1.0 : -1.0;
                x[i] = control_p_setpoint(pole) / u_nominal;
                break;
            }
            default:
                break;  // angles, gen powers, ground currents start at zero
        }
    }
    return x;
}

StateVector warm_start(const Solution& previous, const NetworkCase& new_case,
                       const VariableRegistry& new_registry) {
    auto bus_ids = [](const NetworkCase& net) {
        std::set<std::string> ids;
        for (const auto& b : net.ac_buses) ids.insert("ac:" + b.id);
        for (const auto& b : net.dc_buses) ids.insert("dc:" + b.id);
        return ids;
    };
    // The previous case is not retained; compare through the registries'
    // bus-level keys instead of the full element sets.
    std::set<std::string> prev_buses, new_buses = bus_ids(new_case);
    for (const auto& key : previous.registry.keys()) {
        if (key.kind == VarKind::AcTheta || key.kind == VarKind::AcVmag)
            prev_buses.insert("ac:" + key.id);
        if (key.kind == VarKind::DcVoltage) prev_buses.insert("dc:" + key.id);
    }
    for (const auto& id : prev_buses)
        if (!new_buses.count(id))
            throw Error(ErrorCode::IncompatibleCase,
                        "warm start: bus " + id + " of the previous solution is gone");

    StateVector x = flat_start(new_case, new_registry);
    for (int i = 0; i < new_registry.size(); ++i) {
        const int prev = previous.registry.index_of(new_registry.key_at(i));
        if (prev >= 0) x[i] = previous.state[prev];
    }
    return x;
}

double jacobian_fd_error(const ResidualSystem& system, const StateVector& x, double h) {
    const Eigen::MatrixXd analytic = system.jacobian(x);
    const int n = system.size();
    double worst = 0.0;
    StateVector xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        const Eigen::VectorXd fp = system.evaluate(xp);
        const Eigen::VectorXd fm = system.evaluate(xm);
        xp[j] = x[j];
        xm[j] = x[j];
        for (int i = 0; i < n; ++i) {
            const double fd = (fp[i] - fm[i]) / (2.0 * h);
            const double scale = std::max({1.0, std::abs(analytic(i, j)), std::abs(fd)});
            worst = std::max(worst, std::abs(analytic(i, j) - fd) / scale);
        }
    }
    return worst;
}

Solution solve(const NetworkCase& net, const SolverOptions& options,
               std::optional<StateVector> start) {
    VariableRegistry registry = build_registry(net, options.variable_order_seed);
    ResidualSystem system(net, registry);

    Solution sol;
    sol.registry = registry;
    sol.state = start ? std::move(*start) : flat_start(net, registry);
    if (sol.state.size() != registry.size())
        throw Error(ErrorCode::DimensionMismatch, "start vector does not match the registry");

    Eigen::VectorXd f = system.evaluate(sol.state);
    double norm = f.lpNorm<Eigen::Infinity>();

    auto finish = [&](SolveStatus status) {
        sol.status = status;
        sol.converged = status == SolveStatus::Converged;
        // independent residual certificate at the returned state
        const Eigen::VectorXd check = system.evaluate(sol.state);
        sol.final_residual = check.lpNorm<Eigen::Infinity>();
        sol.worst_equation = to_string(system.equation_keys()[system.worst_equation(check)]);
        sol.derived = compute_derived(net, registry, sol.state);
        return sol;
    };

    if (options.fd_check)
        sol.fd_max_rel_error = std::max(sol.fd_max_rel_error, jacobian_fd_error(system, sol.state));

    while (true) {
        if (norm <= options.tol_inf) return finish(SolveStatus::Converged);
        if (sol.iterations >= options.max_iter) return finish(SolveStatus::NoConvergence);

        const Eigen::MatrixXd jac = system.jacobian(sol.state);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        if (min_pivot < 1e-12) return finish(SolveStatus::SingularJacobian);

        const Eigen::VectorXd dx = lu.solve(-f);

        // backtracking: accept the first step that strictly reduces ||F||
        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= options.min_step) {
            const StateVector candidate = sol.state + alpha * dx;
            Eigen::VectorXd f_candidate;
            try {
                f_candidate = system.evaluate(candidate);
            } catch (const Error&) {
                alpha *= 0.5;  // stepped into a non-finite region
                continue;
            }
            const double candidate_norm = f_candidate.lpNorm<Eigen::Infinity>();
            if (candidate_norm < norm) {
                sol.state = candidate;
                f = std::move(f_candidate);
                norm = candidate_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return finish(SolveStatus::LineSearchStall);
        sol.iterations += 1;

        if (options.fd_check)
            sol.fd_max_rel_error =
                std::max(sol.fd_max_rel_error, jacobian_fd_error(system, sol.state));
    }
}

} // namespace mcpf
