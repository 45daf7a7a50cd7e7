#include "mcpf/contingency.hpp"

#include <algorithm>

#include "mcpf/errors.hpp"

namespace mcpf {

std::string to_string(const Outage& outage) {
    if (const auto* cv = std::get_if<ConverterPoleOutage>(&outage))
        return "converter pole '" + cv->id + "'";
    if (const auto* dc = std::get_if<DcConductorOutage>(&outage))
        return "DC conductor '" + dc->branch_id + "/" + to_string(dc->conductor) + "'";
    return "AC branch '" + std::get<AcBranchOutage>(outage).id + "'";
}

NetworkCase apply_outage(const NetworkCase& net, const Outage& outage) {
    NetworkCase post = net;

    if (const auto* cv = std::get_if<ConverterPoleOutage>(&outage)) {
        auto it = std::find_if(post.converters.begin(), post.converters.end(),
                               [&](const ConverterPole& p) { return p.id == cv->id; });
        if (it == post.converters.end())
            throw Error(ErrorCode::UnknownElement, "no converter pole '" + cv->id + "'");
        if (!it->status)
            throw Error(ErrorCode::ElementOutOfService,
                        "converter pole '" + cv->id + "' is already out of service");
        it->status = false;
    } else if (const auto* dc = std::get_if<DcConductorOutage>(&outage)) {
        auto it = std::find_if(post.dc_branches.begin(), post.dc_branches.end(),
                               [&](const DcBranch& b) { return b.id == dc->branch_id; });
        if (it == post.dc_branches.end())
            throw Error(ErrorCode::UnknownElement, "no DC branch '" + dc->branch_id + "'");
        auto cond = it->conductors.find(dc->conductor);
        if (cond == it->conductors.end())
            throw Error(ErrorCode::UnknownElement,
                        "DC branch '" + dc->branch_id + "' has no " +
                            std::string(to_string(dc->conductor)) + " conductor");
        if (!cond->second.status)
            throw Error(ErrorCode::ElementOutOfService,
                        "conductor '" + dc->branch_id + "/" + to_string(dc->conductor) +
                            "' is already out of service");
        cond->second.status = false;
    } else {
        const auto& ac = std::get<AcBranchOutage>(outage);
        auto it = std::find_if(post.ac_branches.begin(), post.ac_branches.end(),
                               [&](const AcBranch& b) { return b.id == ac.id; });
        if (it == post.ac_branches.end())
            throw Error(ErrorCode::UnknownElement, "no AC branch '" + ac.id + "'");
        if (!it->status)
            throw Error(ErrorCode::ElementOutOfService,
                        "AC branch '" + ac.id + "' is already out of service");
        it->status = false;
    }

    const ValidationReport report = validate_case(post);
    if (!report.ok())
        throw Error(ErrorCode::PostOutageInfeasible,
                    "case is infeasible after outage of " + to_string(outage) + ": " +
                        report.summary());
    return post;
}

namespace {

template <typename T, typename Id, typename Get>
Deviation deviation_of(const std::vector<T>& base, const std::vector<T>& post, const Id& matches,
                       const Get& get) {
    Deviation d;
    for (const auto& item : base)
        if (matches(item)) d.before = get(item);
    for (const auto& item : post)
        if (matches(item)) d.after = get(item);
    d.delta = d.after - d.before;
    return d;
}

} // namespace

ContingencyReport run_contingency(const NetworkCase& net, const Solution& base,
                                  const Outage& outage, const SolverOptions& options) {
    const NetworkCase post_case = apply_outage(net, outage);

    Solution post;
    bool solved = false;
    try {
        const VariableRegistry registry = build_registry(post_case);
        post = solve(post_case, options, warm_start(base, post_case, registry));
        solved = post.converged;
    } catch (const Error&) {
        solved = false;
    }
    if (!solved) post = solve(post_case, options);  // flat-start fallback

    ContingencyReport report;
    report.outage = outage;
    report.base = base;
    report.post = std::move(post);

    const auto& bd = report.base.derived;
    const auto& pd = report.post.derived;

    for (const auto& cv : bd.converters) {
        ContingencyReport::PoleDeviation dev;
        dev.id = cv.id;
        auto match = [&](const ConverterResult& r) { return r.id == cv.id; };
        dev.p_pcc = deviation_of(bd.converters, pd.converters, match,
                                 [](const ConverterResult& r) { return r.p_pcc; });
        dev.q_pcc = deviation_of(bd.converters, pd.converters, match,
                                 [](const ConverterResult& r) { return r.q_pcc; });
        report.poles.push_back(std::move(dev));
    }
    for (const auto& term : bd.dc_terminals) {
        ContingencyReport::TerminalDeviation dev;
        dev.bus = term.bus;
        dev.terminal = term.terminal;
        auto match = [&](const DcTerminalResult& r) {
            return r.bus == term.bus && r.terminal == term.terminal;
        };
        dev.u = deviation_of(bd.dc_terminals, pd.dc_terminals, match,
                             [](const DcTerminalResult& r) { return r.u; });
        report.dc_terminals.push_back(std::move(dev));
    }
    for (const auto& bus : bd.ac_buses) {
        ContingencyReport::AcBusDeviation dev;
        dev.id = bus.id;
        auto match = [&](const AcBusResult& r) { return r.id == bus.id; };
        dev.u_mag = deviation_of(bd.ac_buses, pd.ac_buses, match,
                                 [](const AcBusResult& r) { return r.u_mag; });
        report.ac_buses.push_back(std::move(dev));
    }
    return report;
}

} // namespace mcpf
