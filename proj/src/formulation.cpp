#include "mcpf/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mcpf/controls.hpp"
#include "mcpf/errors.hpp"

namespace mcpf {

SeriesPowers series_element_flow(double g, double b, double tap, double u_i, double theta_i,
                                 double u_j, double theta_j) {
    const double v1 = u_i / tap;
    const double c = std::cos(theta_i - theta_j);
    const double s = std::sin(theta_i - theta_j);
    SeriesPowers out;
    out.p_ij = g * v1 * v1 - g * v1 * u_j * c - b * v1 * u_j * s;
    out.q_ij = -b * v1 * v1 + b * v1 * u_j * c - g * v1 * u_j * s;
    out.p_ji = g * u_j * u_j - g * u_j * v1 * c + b * u_j * v1 * s;
    out.q_ji = -b * u_j * u_j + b * u_j * v1 * c + g * u_j * v1 * s;
    return out;
}

double filter_reactive(double b_f, double u_f_mag) {
    return -b_f * u_f_mag * u_f_mag;
}

double dc_branch_current(double r, double u_e, double u_f) {
    if (r <= 0.0)
        throw Error(ErrorCode::ZeroResistance,
                    "DC conductor resistance must be positive, got " + std::to_string(r));
    return (u_e - u_f) / r;
}

double converter_loss(double a, double b, double c, double i_mag) {
    return a + b * i_mag + c * i_mag * i_mag;
}

double converter_current_residual(double p, double q, double u_cv_mag, double i_mag) {
    return p * p + q * q - u_cv_mag * u_cv_mag * i_mag * i_mag;
}

SeriesFlowGrad series_flow_grad(double g, double b, double tap, double u_i, double theta_i,
                                double u_j, double theta_j) {
    const double v1 = u_i / tap;
    const double c = std::cos(theta_i - theta_j);
    const double s = std::sin(theta_i - theta_j);

    SeriesFlowGrad out;
    out.flow = series_element_flow(g, b, tap, u_i, theta_i, u_j, theta_j);

    enum { PIJ = 0, QIJ = 1, PJI = 2, QJI = 3 };
    enum { DU1 = 0, DTH1 = 1, DU2 = 2, DTH2 = 3 };
    auto& d = out.d;

    d[PIJ][DU1] = (2.0 * g * v1 - g * u_j * c - b * u_j * s) / tap;
    d[PIJ][DU2] = -g * v1 * c - b * v1 * s;
    d[PIJ][DTH1] = g * v1 * u_j * s - b * v1 * u_j * c;
    d[PIJ][DTH2] = -d[PIJ][DTH1];

    d[QIJ][DU1] = (-2.0 * b * v1 + b * u_j * c - g * u_j * s) / tap;
    d[QIJ][DU2] = b * v1 * c - g * v1 * s;
    d[QIJ][DTH1] = -b * v1 * u_j * s - g * v1 * u_j * c;
    d[QIJ][DTH2] = -d[QIJ][DTH1];

    d[PJI][DU1] = (-g * u_j * c + b * u_j * s) / tap;
    d[PJI][DU2] = 2.0 * g * u_j - g * v1 * c + b * v1 * s;
    d[PJI][DTH1] = g * u_j * v1 * s + b * u_j * v1 * c;
    d[PJI][DTH2] = -d[PJI][DTH1];

    d[QJI][DU1] = (b * u_j * c + g * u_j * s) / tap;
    d[QJI][DU2] = -2.0 * b * u_j + b * v1 * c + g * v1 * s;
    d[QJI][DTH1] = -b * u_j * v1 * s + g * u_j * v1 * c;
    d[QJI][DTH2] = -d[QJI][DTH1];

    return out;
}

std::string to_string(const VarKey& key) {
    switch (key.kind) {
        case VarKind::AcTheta: return "theta(" + key.id + ")";
        case VarKind::AcVmag: return "u_mag(" + key.id + ")";
        case VarKind::GenQ: return "q_gen(" + key.id + ")";
        case VarKind::GenPSlack: return "p_slack(" + key.id + ")";
        case VarKind::PoleThetaF: return "theta_f(" + key.id + ")";
        case VarKind::PoleVmagF: return "u_f(" + key.id + ")";
        case VarKind::PoleThetaCv: return "theta_cv(" + key.id + ")";
        case VarKind::PoleVmagCv: return "u_cv(" + key.id + ")";
        case VarKind::PolePacCv: return "p_cv_ac(" + key.id + ")";
        case VarKind::PoleQacCv: return "q_cv_ac(" + key.id + ")";
        case VarKind::PoleImagCv: return "i_cv_mag(" + key.id + ")";
        case VarKind::PoleIdc: return "i_cv_dc(" + key.id + ")";
        case VarKind::PoleIdc0: return "i_cv_dc0(" + key.id + ")";
        case VarKind::DcVoltage:
            return "u_dc(" + key.id + "," + to_string(key.sub) + ")";
        case VarKind::GroundI: return "i_ground(" + key.id + ")";
    }
    return "?";
}

std::string to_string(const EqKey& key) {
    switch (key.kind) {
        case EqKind::AcBalanceP: return "ac_p_balance(" + key.id + ")";
        case EqKind::AcBalanceQ: return "ac_q_balance(" + key.id + ")";
        case EqKind::FilterP: return "filter_p_balance(" + key.id + ")";
        case EqKind::FilterQ: return "filter_q_balance(" + key.id + ")";
        case EqKind::CvNodeP: return "cv_node_p_balance(" + key.id + ")";
        case EqKind::CvNodeQ: return "cv_node_q_balance(" + key.id + ")";
        case EqKind::LossCoupling: return "loss_coupling(" + key.id + ")";
        case EqKind::CurrentMag: return "current_magnitude(" + key.id + ")";
        case EqKind::CurrentLoop: return "current_loop(" + key.id + ")";
        case EqKind::DAxisControl: return "d_axis_control(" + key.id + ")";
        case EqKind::QAxisControl: return "q_axis_control(" + key.id + ")";
        case EqKind::DcBalance:
            return "dc_current_balance(" + key.id + "," + to_string(key.sub) + ")";
    }
    return "?";
}

int VariableRegistry::index_of(const VarKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? -1 : it->second;
}

std::optional<double> VariableRegistry::fixed_value(const VarKey& key) const {
    auto it = fixed_.find(key);
    if (it == fixed_.end()) return std::nullopt;
    return it->second;
}

namespace {

template <typename T>
std::vector<const T*> sorted_by_id(const std::vector<T>& items) {
    std::vector<const T*> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(&item);
    std::sort(out.begin(), out.end(), [](const T* a, const T* b) { return a->id < b->id; });
    return out;
}

const std::array<Terminal, 3> kTerminalOrder = {Terminal::Positive, Terminal::Negative,
                                                Terminal::Neutral};

// Buses whose voltage magnitude is held by a generator, and reference
// buses with their slack generator.
struct BusRoles {
    std::map<std::string, const Generator*> gen_at_bus;
    std::map<std::string, bool> is_reference;

    explicit BusRoles(const NetworkCase& net) {
        for (const auto& g : net.generators) gen_at_bus[g.bus] = &g;
        for (const auto& b : net.ac_buses) is_reference[b.id] = b.is_reference;
    }
};

} // namespace

VariableRegistry build_registry(const NetworkCase& net, std::optional<std::uint32_t> shuffle_seed) {
    VariableRegistry reg;
    BusRoles roles(net);

    int n_ac_rows = 0, n_pole_rows = 0, n_dc_rows = 0;

    for (const AcBus* bus : sorted_by_id(net.ac_buses)) {
        n_ac_rows += 2;
        if (bus->is_reference)
            reg.fixed_[{VarKind::AcTheta, bus->id}] = bus->reference_angle;
        else
            reg.keys_.push_back({VarKind::AcTheta, bus->id});
        auto gen_it = roles.gen_at_bus.find(bus->id);
        if (gen_it != roles.gen_at_bus.end())
            reg.fixed_[{VarKind::AcVmag, bus->id}] = gen_it->second->u_mag_set;
        else
            reg.keys_.push_back({VarKind::AcVmag, bus->id});
    }

    for (const Generator* gen : sorted_by_id(net.generators)) {
        auto ref_it = roles.is_reference.find(gen->bus);
        if (ref_it != roles.is_reference.end() && ref_it->second)
            reg.keys_.push_back({VarKind::GenPSlack, gen->id});
        reg.keys_.push_back({VarKind::GenQ, gen->id});
    }

    std::ostringstream missing;
    for (const ConverterPole* pole : sorted_by_id(net.converters)) {
        if (!pole->status) continue;
        for (VarKind kind : {VarKind::PoleThetaF, VarKind::PoleVmagF, VarKind::PoleThetaCv,
                             VarKind::PoleVmagCv, VarKind::PolePacCv, VarKind::PoleQacCv,
                             VarKind::PoleImagCv, VarKind::PoleIdc, VarKind::PoleIdc0})
            reg.keys_.push_back({kind, pole->id});
        n_pole_rows += 7;
        if (pole->control.d_axis)
            n_pole_rows += 1;
        else
            missing << " d_axis(" << pole->id << ")";
        if (pole->control.q_axis)
            n_pole_rows += 1;
        else
            missing << " q_axis(" << pole->id << ")";
    }

    for (const DcBus* bus : sorted_by_id(net.dc_buses)) {
        for (Terminal t : kTerminalOrder) {
            if (!bus->has_terminal(t)) continue;
            n_dc_rows += 1;
            if (t == Terminal::Neutral && bus->grounded) {
                reg.fixed_[{VarKind::DcVoltage, bus->id, t}] = 0.0;
                reg.keys_.push_back({VarKind::GroundI, bus->id});
            } else {
                reg.keys_.push_back({VarKind::DcVoltage, bus->id, t});
            }
        }
    }

    const int n_rows = n_ac_rows + n_pole_rows + n_dc_rows;
    if (n_rows != static_cast<int>(reg.keys_.size())) {
        std::ostringstream os;
        os << "system is not square: " << reg.keys_.size() << " unknowns vs " << n_rows
           << " equations (ac=" << n_ac_rows << ", converter=" << n_pole_rows
           << ", dc=" << n_dc_rows << ")";
        if (!missing.str().empty()) os << "; missing controls:" << missing.str();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }

    if (shuffle_seed) {
        std::mt19937 rng(*shuffle_seed);
        std::shuffle(reg.keys_.begin(), reg.keys_.end(), rng);
    }
    for (int i = 0; i < static_cast<int>(reg.keys_.size()); ++i) reg.index_.emplace(reg.keys_[i], i);
    return reg;
}

// ---------------------------------------------------------------------------
// Resolved assembly structure
// ---------------------------------------------------------------------------

namespace {

// A quantity that is either a state-vector entry or an eliminated constant.
struct Quant {
    int col = -1;
    double value = 0.0;

    double get(const StateVector& x) const { return col >= 0 ? x[col] : value; }
};

struct GenRef {
    const Generator* gen;
    Quant p;  // slack column at a reference bus, fixed setpoint otherwise
    int q_col;
};

struct BusRef {
    const AcBus* bus;
    Quant u, theta;
    int row_p = -1, row_q = -1;
    std::vector<GenRef> gens;
    double p_load = 0.0, q_load = 0.0;
};

struct BranchRef {
    const AcBranch* branch;
    const BusRef* from;
    const BusRef* to;
};

struct TermRef {
    const DcBus* bus;
    Terminal terminal;
    Quant u;
    int row = -1;
    int ground_col = -1;  // set on grounded neutrals
};

struct PoleRef {
    const ConverterPole* pole;
    BusRef* pcc;
    TermRef* dc_pole;
    TermRef* dc_neutral;
    double g_tf, b_tf, g_pr, b_pr;
    int c_theta_f, c_u_f, c_theta_cv, c_u_cv, c_p, c_q, c_imag, c_id, c_id0;
    int row_filter_p, row_filter_q, row_cv_p, row_cv_q;
    int row_loss, row_imag, row_loop, row_dctrl, row_qctrl;
};

struct DcLoadRef {
    const DcLoad* load;
    TermRef* pole_term;
    TermRef* neutral_term;
};

struct ConductorRef {
    const DcBranch* branch;
    Terminal terminal;
    double r;
    TermRef* from;
    TermRef* to;
};

void series_admittance(double r, double x, double& g, double& b) {
    const double z2 = r * r + x * x;
    g = z2 > 0.0 ? r / z2 : 0.0;
    b = z2 > 0.0 ? -x / z2 : 0.0;
}

struct Assembly {
    std::vector<BusRef> buses;
    std::vector<BranchRef> branches;
    std::vector<PoleRef> poles;
    std::map<std::pair<std::string, Terminal>, int> term_index;
    std::vector<TermRef> terminals;
    std::vector<DcLoadRef> dc_loads;
    std::vector<ConductorRef> conductors;
    std::vector<EqKey> equations;

    TermRef* terminal(const std::string& bus, Terminal t) {
        auto it = term_index.find({bus, t});
        return it == term_index.end() ? nullptr : &terminals[it->second];
    }
};

Assembly build_structure(const NetworkCase& net, const VariableRegistry& reg) {
    Assembly a;
    BusRoles roles(net);

    auto quant = [&reg](const VarKey& key) {
        Quant q;
        q.col = reg.index_of(key);
        if (q.col < 0) {
            auto fixed = reg.fixed_value(key);
            if (!fixed)
                throw Error(ErrorCode::DimensionMismatch,
                            "registry lacks variable " + to_string(key) +
                                "; rebuild the registry for this case");
            q.value = *fixed;
        }
        return q;
    };

    std::map<std::string, int> bus_pos;
    for (const AcBus* bus : sorted_by_id(net.ac_buses)) {
        BusRef ref;
        ref.bus = bus;
        ref.theta = quant({VarKind::AcTheta, bus->id});
        ref.u = quant({VarKind::AcVmag, bus->id});
        ref.row_p = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::AcBalanceP, bus->id});
        ref.row_q = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::AcBalanceQ, bus->id});
        bus_pos[bus->id] = static_cast<int>(a.buses.size());
        a.buses.push_back(std::move(ref));
    }
    for (const Generator* gen : sorted_by_id(net.generators)) {
        GenRef g;
        g.gen = gen;
        if (roles.is_reference.at(gen->bus))
            g.p = Quant{reg.index_of({VarKind::GenPSlack, gen->id}), 0.0};
        else
            g.p = Quant{-1, gen->p_set};
        g.q_col = reg.index_of({VarKind::GenQ, gen->id});
        a.buses[bus_pos.at(gen->bus)].gens.push_back(g);
    }
    for (const auto& load : net.ac_loads) {
        auto& bus = a.buses[bus_pos.at(load.bus)];
        bus.p_load += load.p_set;
        bus.q_load += load.q_set;
    }
    for (const AcBranch* br : sorted_by_id(net.ac_branches)) {
        if (!br->status) continue;
        a.branches.push_back(
            {br, &a.buses[bus_pos.at(br->from_bus)], &a.buses[bus_pos.at(br->to_bus)]});
    }

    // Converter rows are enumerated before DC rows; terminal refs are
    // created first so poles can point at them.
    for (const DcBus* bus : sorted_by_id(net.dc_buses)) {
        for (Terminal t : kTerminalOrder) {
            if (!bus->has_terminal(t)) continue;
            TermRef ref;
            ref.bus = bus;
            ref.terminal = t;
            ref.u = quant({VarKind::DcVoltage, bus->id, t});
            if (t == Terminal::Neutral && bus->grounded)
                ref.ground_col = reg.index_of({VarKind::GroundI, bus->id});
            a.term_index[{bus->id, t}] = static_cast<int>(a.terminals.size());
            a.terminals.push_back(std::move(ref));
        }
    }

    for (const ConverterPole* pole : sorted_by_id(net.converters)) {
        if (!pole->status) continue;
        if (!pole->control.d_axis || !pole->control.q_axis)
            throw Error(ErrorCode::DimensionMismatch,
                        "converter '" + pole->id + "' lacks a control axis");
        PoleRef ref;
        ref.pole = pole;
        ref.pcc = &a.buses[bus_pos.at(pole->ac_bus)];
        ref.dc_pole = a.terminal(pole->dc_bus, terminal_of(pole->polarity));
        ref.dc_neutral = a.terminal(pole->dc_bus, Terminal::Neutral);
        if (!ref.dc_pole || !ref.dc_neutral)
            throw Error(ErrorCode::UnknownElement,
                        "converter '" + pole->id + "' references missing DC terminals on bus '" +
                            pole->dc_bus + "'");
        series_admittance(pole->transformer.r, pole->transformer.x, ref.g_tf, ref.b_tf);
        series_admittance(pole->reactor.r, pole->reactor.x, ref.g_pr, ref.b_pr);
        ref.c_theta_f = reg.index_of({VarKind::PoleThetaF, pole->id});
        ref.c_u_f = reg.index_of({VarKind::PoleVmagF, pole->id});
        ref.c_theta_cv = reg.index_of({VarKind::PoleThetaCv, pole->id});
        ref.c_u_cv = reg.index_of({VarKind::PoleVmagCv, pole->id});
        ref.c_p = reg.index_of({VarKind::PolePacCv, pole->id});
        ref.c_q = reg.index_of({VarKind::PoleQacCv, pole->id});
        ref.c_imag = reg.index_of({VarKind::PoleImagCv, pole->id});
        ref.c_id = reg.index_of({VarKind::PoleIdc, pole->id});
        ref.c_id0 = reg.index_of({VarKind::PoleIdc0, pole->id});

        ref.row_filter_p = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::FilterP, pole->id});
        ref.row_filter_q = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::FilterQ, pole->id});
        ref.row_cv_p = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::CvNodeP, pole->id});
        ref.row_cv_q = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::CvNodeQ, pole->id});
        ref.row_loss = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::LossCoupling, pole->id});
        ref.row_imag = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::CurrentMag, pole->id});
        ref.row_loop = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::CurrentLoop, pole->id});
        ref.row_dctrl = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::DAxisControl, pole->id});
        ref.row_qctrl = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::QAxisControl, pole->id});
        a.poles.push_back(std::move(ref));
    }

    for (auto& term : a.terminals) {
        term.row = static_cast<int>(a.equations.size());
        a.equations.push_back({EqKind::DcBalance, term.bus->id, term.terminal});
    }

    for (const auto& load : net.dc_loads) {
        DcLoadRef ref;
        ref.load = &load;
        ref.pole_term = a.terminal(load.dc_bus, terminal_of(load.terminal));
        ref.neutral_term = a.terminal(load.dc_bus, Terminal::Neutral);
        if (!ref.pole_term || !ref.neutral_term)
            throw Error(ErrorCode::UnknownElement,
                        "DC load '" + load.id + "' references missing terminals on bus '" +
                            load.dc_bus + "'");
        a.dc_loads.push_back(ref);
    }
    for (const DcBranch* br : sorted_by_id(net.dc_branches)) {
        for (const auto& [phi, cond] : br->conductors) {
            if (!cond.status) continue;
            a.conductors.push_back(
                {br, phi, cond.r, a.terminal(br->from_bus, phi), a.terminal(br->to_bus, phi)});
        }
    }
    return a;
}

} // namespace

// ---------------------------------------------------------------------------
// ResidualSystem
// ---------------------------------------------------------------------------

ResidualSystem::ResidualSystem(NetworkCase net, VariableRegistry registry)
    : net_(std::move(net)), registry_(std::move(registry)) {
    Assembly a = build_structure(net_, registry_);
    equations_ = a.equations;
    if (static_cast<int>(equations_.size()) != registry_.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "equation count " + std::to_string(equations_.size()) +
                        " does not match variable count " + std::to_string(registry_.size()));
    for (int i = 0; i < static_cast<int>(equations_.size()); ++i)
        eq_row_.emplace(to_string(equations_[i]), i);
}

Eigen::VectorXd ResidualSystem::evaluate(const StateVector& x) const {
    Eigen::VectorXd f;
    assemble(x, &f, nullptr);
    return f;
}

Eigen::MatrixXd ResidualSystem::jacobian(const StateVector& x) const {
    Eigen::VectorXd f;
    Eigen::MatrixXd jac;
    assemble(x, &f, &jac);
    return jac;
}

int ResidualSystem::worst_equation(const Eigen::VectorXd& f) const {
    int worst = 0;
    f.cwiseAbs().maxCoeff(&worst);
    return worst;
}

void ResidualSystem::assemble(const StateVector& x, Eigen::VectorXd* f, Eigen::MatrixXd* jac) const {
    const int n = registry_.size();
    if (x.size() != n)
        throw Error(ErrorCode::DimensionMismatch,
                    "state has " + std::to_string(x.size()) + " entries, registry expects " +
                        std::to_string(n));
    if (!x.allFinite())
        throw Error(ErrorCode::NonFiniteState, "state vector contains non-finite entries");

    Assembly a = build_structure(net_, registry_);

    f->setZero(n);
    if (jac) jac->setZero(n, n);

    auto add = [jac](int row, int col, double value) {
        if (jac && col >= 0) (*jac)(row, col) += value;
    };
    // Scatter one series-flow direction into a balance row.
    auto add_series = [&add](int row, const SeriesFlowGrad& sf, int which, const Quant& u1,
                             const Quant& th1, const Quant& u2, const Quant& th2) {
        add(row, u1.col, sf.d[which][0]);
        add(row, th1.col, sf.d[which][1]);
        add(row, u2.col, sf.d[which][2]);
        add(row, th2.col, sf.d[which][3]);
    };

    // AC bus shunts, generators, loads
    for (const auto& bus : a.buses) {
        const double u = bus.u.get(x);
        (*f)[bus.row_p] += bus.bus->g_shunt * u * u + bus.p_load;
        (*f)[bus.row_q] += -bus.bus->b_shunt * u * u + bus.q_load;
        add(bus.row_p, bus.u.col, 2.0 * bus.bus->g_shunt * u);
        add(bus.row_q, bus.u.col, -2.0 * bus.bus->b_shunt * u);
        for (const auto& gen : bus.gens) {
            (*f)[bus.row_p] -= gen.p.get(x);
            add(bus.row_p, gen.p.col, -1.0);
            (*f)[bus.row_q] -= x[gen.q_col];
            add(bus.row_q, gen.q_col, -1.0);
        }
    }

    // AC branch flows
    for (const auto& br : a.branches) {
        const auto sf = series_flow_grad(br.branch->g, br.branch->b, 1.0, br.from->u.get(x),
                                         br.from->theta.get(x), br.to->u.get(x), br.to->theta.get(x));
        (*f)[br.from->row_p] += sf.flow.p_ij;
        (*f)[br.from->row_q] += sf.flow.q_ij;
        (*f)[br.to->row_p] += sf.flow.p_ji;
        (*f)[br.to->row_q] += sf.flow.q_ji;
        add_series(br.from->row_p, sf, 0, br.from->u, br.from->theta, br.to->u, br.to->theta);
        add_series(br.from->row_q, sf, 1, br.from->u, br.from->theta, br.to->u, br.to->theta);
        add_series(br.to->row_p, sf, 2, br.from->u, br.from->theta, br.to->u, br.to->theta);
        add_series(br.to->row_q, sf, 3, br.from->u, br.from->theta, br.to->u, br.to->theta);
    }

    // Converter poles
    for (const auto& pole : a.poles) {
        const auto& cv = *pole.pole;
        const Quant uf{pole.c_u_f, 0.0}, thf{pole.c_theta_f, 0.0};
        const Quant ucv{pole.c_u_cv, 0.0}, thcv{pole.c_theta_cv, 0.0};

        // transformer: PCC bus -> filter node, tap on the bus side
        const auto tf = series_flow_grad(pole.g_tf, pole.b_tf, cv.transformer.tap,
                                         pole.pcc->u.get(x), pole.pcc->theta.get(x), uf.get(x),
                                         thf.get(x));
        // phase reactor: filter node -> converter node
        const auto pr =
            series_flow_grad(pole.g_pr, pole.b_pr, 1.0, uf.get(x), thf.get(x), ucv.get(x), thcv.get(x));

        // PCC balance contribution
        (*f)[pole.pcc->row_p] += tf.flow.p_ij;
        (*f)[pole.pcc->row_q] += tf.flow.q_ij;
        add_series(pole.pcc->row_p, tf, 0, pole.pcc->u, pole.pcc->theta, uf, thf);
        add_series(pole.pcc->row_q, tf, 1, pole.pcc->u, pole.pcc->theta, uf, thf);

        // filter node balances (transformer reverse flow + reactor forward
        // flow + capacitor)
        const double u_f = uf.get(x);
        (*f)[pole.row_filter_p] = pr.flow.p_ij + tf.flow.p_ji;
        (*f)[pole.row_filter_q] = pr.flow.q_ij + tf.flow.q_ji + filter_reactive(cv.filter_b, u_f);
        add_series(pole.row_filter_p, tf, 2, pole.pcc->u, pole.pcc->theta, uf, thf);
        add_series(pole.row_filter_p, pr, 0, uf, thf, ucv, thcv);
        add_series(pole.row_filter_q, tf, 3, pole.pcc->u, pole.pcc->theta, uf, thf);
        add_series(pole.row_filter_q, pr, 1, uf, thf, ucv, thcv);
        add(pole.row_filter_q, uf.col, -2.0 * cv.filter_b * u_f);

        // converter node balances define the bridge AC-side injection
        const double p_cv = x[pole.c_p];
        const double q_cv = x[pole.c_q];
        (*f)[pole.row_cv_p] = p_cv + pr.flow.p_ji;
        (*f)[pole.row_cv_q] = q_cv + pr.flow.q_ji;
        add(pole.row_cv_p, pole.c_p, 1.0);
        add(pole.row_cv_q, pole.c_q, 1.0);
        add_series(pole.row_cv_p, pr, 2, uf, thf, ucv, thcv);
        add_series(pole.row_cv_q, pr, 3, uf, thf, ucv, thcv);

        // loss coupling: AC-side + DC-side + neutral-side inflows equal loss
        const double i_mag = x[pole.c_imag];
        const double i_dc = x[pole.c_id];
        const double i_dc0 = x[pole.c_id0];
        const double u_pole = pole.dc_pole->u.get(x);
        const double u_neutral = pole.dc_neutral->u.get(x);
        (*f)[pole.row_loss] = p_cv + u_pole * i_dc + u_neutral * i_dc0 -
                              converter_loss(cv.loss_a, cv.loss_b, cv.loss_c, i_mag);
        add(pole.row_loss, pole.c_p, 1.0);
        add(pole.row_loss, pole.dc_pole->u.col, i_dc);
        add(pole.row_loss, pole.c_id, u_pole);
        add(pole.row_loss, pole.dc_neutral->u.col, i_dc0);
        add(pole.row_loss, pole.c_id0, u_neutral);
        add(pole.row_loss, pole.c_imag, -(cv.loss_b + 2.0 * cv.loss_c * i_mag));

        // current magnitude consistency, squared form
        const double u_cv = ucv.get(x);
        (*f)[pole.row_imag] = converter_current_residual(p_cv, q_cv, u_cv, i_mag);
        // floor keeps the row nonsingular as U -> 0; inactive at physical states
        const double u_cv_floored = std::max(u_cv, 1e-6);
        add(pole.row_imag, pole.c_p, 2.0 * p_cv);
        add(pole.row_imag, pole.c_q, 2.0 * q_cv);
        add(pole.row_imag, ucv.col, -2.0 * u_cv_floored * i_mag * i_mag);
        add(pole.row_imag, pole.c_imag, -2.0 * u_cv_floored * u_cv_floored * i_mag);

        // DC current loop through the pole
        (*f)[pole.row_loop] = i_dc + i_dc0;
        add(pole.row_loop, pole.c_id, 1.0);
        add(pole.row_loop, pole.c_id0, 1.0);

        // DC terminal balances
        (*f)[pole.dc_pole->row] += i_dc;
        add(pole.dc_pole->row, pole.c_id, 1.0);
        (*f)[pole.dc_neutral->row] += i_dc0;
        add(pole.dc_neutral->row, pole.c_id0, 1.0);

        // controls act on the PCC flows
        (*f)[pole.row_dctrl] =
            d_axis_residual(*cv.control.d_axis, cv.polarity, tf.flow.p_ij, u_pole, u_neutral);
        const auto dgrad = d_axis_gradient(*cv.control.d_axis, cv.polarity);
        if (dgrad.dp != 0.0) {
            add(pole.row_dctrl, pole.pcc->u.col, dgrad.dp * tf.d[0][0]);
            add(pole.row_dctrl, pole.pcc->theta.col, dgrad.dp * tf.d[0][1]);
            add(pole.row_dctrl, uf.col, dgrad.dp * tf.d[0][2]);
            add(pole.row_dctrl, thf.col, dgrad.dp * tf.d[0][3]);
        }
        add(pole.row_dctrl, pole.dc_pole->u.col, dgrad.du_pole);
        add(pole.row_dctrl, pole.dc_neutral->u.col, dgrad.du_neutral);

        (*f)[pole.row_qctrl] = q_axis_residual(*cv.control.q_axis, tf.flow.q_ij, pole.pcc->u.get(x));
        const auto qgrad = q_axis_gradient(*cv.control.q_axis);
        if (qgrad.dq != 0.0) {
            add(pole.row_qctrl, pole.pcc->u.col, qgrad.dq * tf.d[1][0]);
            add(pole.row_qctrl, pole.pcc->theta.col, qgrad.dq * tf.d[1][1]);
            add(pole.row_qctrl, uf.col, qgrad.dq * tf.d[1][2]);
            add(pole.row_qctrl, thf.col, qgrad.dq * tf.d[1][3]);
        }
        add(pole.row_qctrl, pole.pcc->u.col, qgrad.du_mag);
    }

    // DC conductors
    for (const auto& cond : a.conductors) {
        const double i = dc_branch_current(cond.r, cond.from->u.get(x), cond.to->u.get(x));
        (*f)[cond.from->row] += i;
        (*f)[cond.to->row] -= i;
        add(cond.from->row, cond.from->u.col, 1.0 / cond.r);
        add(cond.from->row, cond.to->u.col, -1.0 / cond.r);
        add(cond.to->row, cond.from->u.col, -1.0 / cond.r);
        add(cond.to->row, cond.to->u.col, 1.0 / cond.r);
    }

    // constant-power DC loads: current p / (U_pole - U_neutral) leaves the
    // pole terminal and returns into the neutral
    for (const auto& load : a.dc_loads) {
        const double du = load.pole_term->u.get(x) - load.neutral_term->u.get(x);
        const double p = load.load->p_set;
        const double i = p / du;
        (*f)[load.pole_term->row] += i;
        (*f)[load.neutral_term->row] -= i;
        const double di_du = -p / (du * du);
        add(load.pole_term->row, load.pole_term->u.col, di_du);
        add(load.pole_term->row, load.neutral_term->u.col, -di_du);
        add(load.neutral_term->row, load.pole_term->u.col, -di_du);
        add(load.neutral_term->row, load.neutral_term->u.col, di_du);
    }

    // ground currents at grounded neutrals
    for (const auto& term : a.terminals) {
        if (term.ground_col < 0) continue;
        (*f)[term.row] += x[term.ground_col];
        add(term.row, term.ground_col, 1.0);
    }
}

// ---------------------------------------------------------------------------
// Derived quantities
// ---------------------------------------------------------------------------

double DerivedResults::power_mismatch() const {
    return total_generation - total_ac_load - total_dc_load - total_shunt_loss -
           total_branch_loss - total_converter_loss - total_dc_conductor_loss;
}

DerivedResults compute_derived(const NetworkCase& net, const VariableRegistry& registry,
                               const StateVector& x) {
    Assembly a = build_structure(net, registry);
    DerivedResults out;

    for (const auto& bus : a.buses) {
        out.ac_buses.push_back({bus.bus->id, bus.u.get(x), bus.theta.get(x)});
        out.total_shunt_loss += bus.bus->g_shunt * bus.u.get(x) * bus.u.get(x);
        out.total_ac_load += bus.p_load;
        for (const auto& gen : bus.gens) {
            out.generators.push_back({gen.gen->id, gen.p.get(x), x[gen.q_col]});
            out.total_generation += gen.p.get(x);
        }
    }
    std::sort(out.generators.begin(), out.generators.end(),
              [](const GeneratorResult& l, const GeneratorResult& r) { return l.id < r.id; });

    for (const AcBranch* br : sorted_by_id(net.ac_branches)) {
        if (!br->status) {
            out.ac_branches.push_back({br->id, 0.0, 0.0, 0.0, 0.0, 0.0, false});
            continue;
        }
        const BusRef* from = nullptr;
        const BusRef* to = nullptr;
        for (const auto& bus : a.buses) {
            if (bus.bus->id == br->from_bus) from = &bus;
            if (bus.bus->id == br->to_bus) to = &bus;
        }
        const auto flow = series_element_flow(br->g, br->b, 1.0, from->u.get(x), from->theta.get(x),
                                              to->u.get(x), to->theta.get(x));
        const double loss = flow.p_ij + flow.p_ji;
        out.ac_branches.push_back({br->id, flow.p_ij, flow.q_ij, flow.p_ji, flow.q_ji, loss, true});
        out.total_branch_loss += loss;
    }

    for (const auto& term : a.terminals) {
        out.dc_terminals.push_back(
            {term.bus->id, term.terminal, term.u.get(x), term.ground_col >= 0});
        if (term.ground_col >= 0) out.grounds.push_back({term.bus->id, x[term.ground_col]});
    }

    for (const DcBranch* br : sorted_by_id(net.dc_branches)) {
        for (const auto& [phi, cond] : br->conductors) {
            if (!cond.status) {
                out.dc_conductors.push_back({br->id, phi, 0.0, 0.0, false});
                continue;
            }
            const auto* from = a.terminal(br->from_bus, phi);
            const auto* to = a.terminal(br->to_bus, phi);
            const double i = dc_branch_current(cond.r, from->u.get(x), to->u.get(x));
            const double loss = i * (from->u.get(x) - to->u.get(x));
            out.dc_conductors.push_back({br->id, phi, i, loss, true});
            out.total_dc_conductor_loss += loss;
        }
    }

    for (const auto& load : net.dc_loads) out.total_dc_load += load.p_set;

    std::map<std::string, const PoleRef*> live;
    for (const auto& pole : a.poles) live[pole.pole->id] = &pole;
    for (const ConverterPole* cv : sorted_by_id(net.converters)) {
        auto it = live.find(cv->id);
        if (it == live.end()) {
            ConverterResult res;
            res.id = cv->id;
            res.in_service = false;
            out.converters.push_back(res);
            continue;
        }
        const PoleRef& pole = *it->second;
        ConverterResult res;
        res.id = cv->id;
        res.in_service = true;
        const double u_f = x[pole.c_u_f], th_f = x[pole.c_theta_f];
        const double u_cv = x[pole.c_u_cv], th_cv = x[pole.c_theta_cv];
        const auto tf = series_element_flow(pole.g_tf, pole.b_tf, cv->transformer.tap,
                                            pole.pcc->u.get(x), pole.pcc->theta.get(x), u_f, th_f);
        const auto pr = series_element_flow(pole.g_pr, pole.b_pr, 1.0, u_f, th_f, u_cv, th_cv);
        res.p_pcc = tf.p_ij;
        res.q_pcc = tf.q_ij;
        res.u_f = u_f;
        res.theta_f = th_f;
        res.u_cv = u_cv;
        res.theta_cv = th_cv;
        res.p_cv_ac = x[pole.c_p];
        res.q_cv_ac = x[pole.c_q];
        res.i_cv_mag = x[pole.c_imag];
        res.i_dc = x[pole.c_id];
        res.i_dc0 = x[pole.c_id0];
        res.p_cv_dc = pole.dc_pole->u.get(x) * res.i_dc;
        res.p_cv_dc0 = pole.dc_neutral->u.get(x) * res.i_dc0;
        res.p_loss = converter_loss(cv->loss_a, cv->loss_b, cv->loss_c, res.i_cv_mag);
        res.transformer_loss = tf.p_ij + tf.p_ji;
        res.reactor_loss = pr.p_ij + pr.p_ji;
        res.q_filter = filter_reactive(cv->filter_b, u_f);
        out.converters.push_back(res);
        out.total_converter_loss += res.p_loss + res.transformer_loss + res.reactor_loss;
    }

    return out;
}

} // namespace mcpf
