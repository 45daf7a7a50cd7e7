#include "mcpf/network.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mcpf {

bool TerminalRef::operator<(const TerminalRef& o) const {
    if (bus != o.bus) return bus < o.bus;
    return static_cast<int>(terminal) < static_cast<int>(o.terminal);
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    if (errors.empty()) {
        os << "ok";
        return os.str();
    }
    os << errors.size() << " error(s):";
    for (const auto& e : errors)
        os << "\n  [" << to_string(e.code) << "] " << e.message;
    return os.str();
}

CaseIndex::CaseIndex(const NetworkCase& net) {
    for (const auto& b : net.ac_buses) ac_buses_.emplace(b.id, &b);
    for (const auto& b : net.dc_buses) dc_buses_.emplace(b.id, &b);
    for (const auto& b : net.ac_branches) ac_branches_.emplace(b.id, &b);
    for (const auto& b : net.dc_branches) dc_branches_.emplace(b.id, &b);
    for (const auto& c : net.converters) converters_.emplace(c.id, &c);
    for (const auto& g : net.generators) generators_.emplace(g.id, &g);
}

const AcBus* CaseIndex::ac_bus(const std::string& id) const {
    auto it = ac_buses_.find(id);
    return it == ac_buses_.end() ? nullptr : it->second;
}
const DcBus* CaseIndex::dc_bus(const std::string& id) const {
    auto it = dc_buses_.find(id);
    return it == dc_buses_.end() ? nullptr : it->second;
}
const AcBranch* CaseIndex::ac_branch(const std::string& id) const {
    auto it = ac_branches_.find(id);
    return it == ac_branches_.end() ? nullptr : it->second;
}
const DcBranch* CaseIndex::dc_branch(const std::string& id) const {
    auto it = dc_branches_.find(id);
    return it == dc_branches_.end() ? nullptr : it->second;
}
const ConverterPole* CaseIndex::converter(const std::string& id) const {
    auto it = converters_.find(id);
    return it == converters_.end() ? nullptr : it->second;
}
const Generator* CaseIndex::generator(const std::string& id) const {
    auto it = generators_.find(id);
    return it == generators_.end() ? nullptr : it->second;
}

namespace {

// Union-find over a fixed universe of keys.
template <typename Key>
class DisjointSets {
public:
    void add(const Key& k) { parent_.emplace(k, k); }
    bool contains(const Key& k) const { return parent_.count(k) > 0; }

    Key find(const Key& k) {
        Key root = k;
        while (parent_.at(root) != root) root = parent_.at(root);
        Key cur = k;
        while (parent_.at(cur) != root) {
            Key next = parent_.at(cur);
            parent_.at(cur) = root;
            cur = next;
        }
        return root;
    }

    void unite(const Key& a, const Key& b) {
        Key ra = find(a), rb = find(b);
        if (ra != rb) parent_.at(rb) = ra;
    }

    std::map<Key, std::vector<Key>> groups() {
        std::map<Key, std::vector<Key>> out;
        for (const auto& [k, _] : parent_) out[find(k)].push_back(k);
        return out;
    }

private:
    std::map<Key, Key> parent_;
};

} // namespace

std::vector<DcComponent> dc_components(const NetworkCase& net) {
    DisjointSets<TerminalRef> sets;
    for (const auto& bus : net.dc_buses)
        for (auto t : bus.terminals) sets.add({bus.id, t});

    for (const auto& br : net.dc_branches) {
        for (const auto& [phi, cond] : br.conductors) {
            if (!cond.status) continue;
            TerminalRef a{br.from_bus, phi}, b{br.to_bus, phi};
            if (sets.contains(a) && sets.contains(b)) sets.unite(a, b);
        }
    }
    for (const auto& cv : net.converters) {
        if (!cv.status) continue;
        TerminalRef pole{cv.dc_bus, terminal_of(cv.polarity)};
        TerminalRef neutral{cv.dc_bus, Terminal::Neutral};
        if (sets.contains(pole) && sets.contains(neutral)) sets.unite(pole, neutral);
    }

    std::vector<DcComponent> out;
    for (auto& [root, members] : sets.groups()) {
        std::sort(members.begin(), members.end());
        out.push_back(DcComponent{std::move(members)});
    }
    std::sort(out.begin(), out.end(), [](const DcComponent& a, const DcComponent& b) {
        return a.terminals.front() < b.terminals.front();
    });
    return out;
}

std::vector<AcIsland> ac_islands(const NetworkCase& net) {
    DisjointSets<std::string> sets;
    for (const auto& bus : net.ac_buses) sets.add(bus.id);
    for (const auto& br : net.ac_branches) {
        if (!br.status) continue;
        if (sets.contains(br.from_bus) && sets.contains(br.to_bus))
            sets.unite(br.from_bus, br.to_bus);
    }
    std::vector<AcIsland> out;
    for (auto& [root, members] : sets.groups()) {
        std::sort(members.begin(), members.end());
        out.push_back(AcIsland{std::move(members)});
    }
    std::sort(out.begin(), out.end(), [](const AcIsland& a, const AcIsland& b) {
        return a.bus_ids.front() < b.bus_ids.front();
    });
    return out;
}

namespace {

void check_unique_ids(const NetworkCase& net, ValidationReport& report) {
    auto check = [&report](const char* kind, const std::set<std::string>& seen,
                           const std::string& id) {
        if (seen.count(id))
            report.errors.push_back({ValidationCode::DuplicateId,
                                     std::string(kind) + " id '" + id + "' appears more than once"});
    };
    std::set<std::string> ids;
    for (const auto& b : net.ac_buses) { check("AC bus", ids, b.id); ids.insert(b.id); }
    ids.clear();
    for (const auto& b : net.dc_buses) { check("DC bus", ids, b.id); ids.insert(b.id); }
    ids.clear();
    for (const auto& b : net.ac_branches) { check("AC branch", ids, b.id); ids.insert(b.id); }
    ids.clear();
    for (const auto& b : net.dc_branches) { check("DC branch", ids, b.id); ids.insert(b.id); }
    ids.clear();
    for (const auto& c : net.converters) { check("converter", ids, c.id); ids.insert(c.id); }
    ids.clear();
    for (const auto& g : net.generators) { check("generator", ids, g.id); ids.insert(g.id); }
}

void check_references(const NetworkCase& net, const CaseIndex& index, ValidationReport& report) {
    auto dangling = [&report](const std::string& what) {
        report.errors.push_back({ValidationCode::DanglingReference, what});
    };

    for (const auto& br : net.ac_branches) {
        if (!index.ac_bus(br.from_bus))
            dangling("AC branch '" + br.id + "' references unknown bus '" + br.from_bus + "'");
        if (!index.ac_bus(br.to_bus))
            dangling("AC branch '" + br.id + "' references unknown bus '" + br.to_bus + "'");
        if (br.from_bus == br.to_bus)
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "AC branch '" + br.id + "' connects a bus to itself"});
        if (br.g == 0.0 && br.b == 0.0)
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "AC branch '" + br.id + "' has zero admittance"});
    }
    for (const auto& g : net.generators) {
        if (!index.ac_bus(g.bus))
            dangling("generator '" + g.id + "' references unknown bus '" + g.bus + "'");
        if (!(g.u_mag_set > 0.0))
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "generator '" + g.id + "' voltage setpoint must be positive"});
    }
    for (const auto& m : net.ac_loads) {
        if (!index.ac_bus(m.bus))
            dangling("AC load '" + m.id + "' references unknown bus '" + m.bus + "'");
    }
    for (const auto& m : net.dc_loads) {
        const DcBus* bus = index.dc_bus(m.dc_bus);
        if (!bus) {
            dangling("DC load '" + m.id + "' references unknown DC bus '" + m.dc_bus + "'");
            continue;
        }
        if (!bus->has_terminal(terminal_of(m.terminal)) || !bus->has_terminal(Terminal::Neutral))
            dangling("DC load '" + m.id + "' needs terminals (" +
                     std::string(to_string(m.terminal)) + ", neutral) on DC bus '" + m.dc_bus + "'");
    }
    for (const auto& bus : net.dc_buses) {
        if (bus.grounded && !bus.has_terminal(Terminal::Neutral))
            dangling("DC bus '" + bus.id + "' is grounded but has no neutral terminal");
    }
    for (const auto& br : net.dc_branches) {
        const DcBus* from = index.dc_bus(br.from_bus);
        const DcBus* to = index.dc_bus(br.to_bus);
        if (!from)
            dangling("DC branch '" + br.id + "' references unknown DC bus '" + br.from_bus + "'");
        if (!to)
            dangling("DC branch '" + br.id + "' references unknown DC bus '" + br.to_bus + "'");
        if (br.from_bus == br.to_bus)
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "DC branch '" + br.id + "' connects a bus to itself"});
        for (const auto& [phi, cond] : br.conductors) {
            if (!(cond.r > 0.0))
                report.errors.push_back({ValidationCode::InvalidParameter,
                                         "DC branch '" + br.id + "' conductor " + to_string(phi) +
                                             " must have positive resistance"});
            if (from && !from->has_terminal(phi))
                dangling("DC branch '" + br.id + "' conductor " + to_string(phi) +
                         " has no matching terminal on bus '" + br.from_bus + "'");
            if (to && !to->has_terminal(phi))
                dangling("DC branch '" + br.id + "' conductor " + to_string(phi) +
                         " has no matching terminal on bus '" + br.to_bus + "'");
        }
    }
    for (const auto& cv : net.converters) {
        if (!index.ac_bus(cv.ac_bus))
            dangling("converter '" + cv.id + "' references unknown AC bus '" + cv.ac_bus + "'");
        const DcBus* bus = index.dc_bus(cv.dc_bus);
        if (!bus) {
            dangling("converter '" + cv.id + "' references unknown DC bus '" + cv.dc_bus + "'");
        } else if (!bus->has_terminal(terminal_of(cv.polarity)) ||
                   !bus->has_terminal(Terminal::Neutral)) {
            dangling("converter '" + cv.id + "' needs terminals (" +
                     std::string(to_string(cv.polarity)) + ", neutral) on DC bus '" + cv.dc_bus + "'");
        }
        if (!(cv.transformer.tap > 0.0))
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "converter '" + cv.id + "' transformer tap must be positive"});
        if (cv.loss_a < 0.0 || cv.loss_b < 0.0 || cv.loss_c < 0.0)
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "converter '" + cv.id + "' loss coefficients must be nonnegative"});
        if (cv.control.d_axis) {
            if (const auto* droop = std::get_if<DcDroop>(&*cv.control.d_axis); droop && !(droop->k > 0.0))
                report.errors.push_back({ValidationCode::InvalidParameter,
                                         "converter '" + cv.id + "' DC-droop gain must be positive"});
        }
        if (cv.control.q_axis) {
            if (const auto* droop = std::get_if<AcDroop>(&*cv.control.q_axis); droop && !(droop->k > 0.0))
                report.errors.push_back({ValidationCode::InvalidParameter,
                                         "converter '" + cv.id + "' AC-droop gain must be positive"});
        }
    }
}

void check_ac_islands(const NetworkCase& net, const CaseIndex& index, ValidationReport& report) {
    std::map<std::string, int> gens_per_bus;
    for (const auto& g : net.generators)
        if (index.ac_bus(g.bus)) gens_per_bus[g.bus] += 1;

    for (const auto& [bus, count] : gens_per_bus) {
        if (count > 1)
            report.errors.push_back({ValidationCode::InvalidParameter,
                                     "AC bus '" + bus + "' hosts " + std::to_string(count) +
                                         " generators (at most one supported)"});
    }

    for (const auto& island : ac_islands(net)) {
        std::vector<std::string> refs;
        for (const auto& id : island.bus_ids) {
            const AcBus* bus = index.ac_bus(id);
            if (bus && bus->is_reference) refs.push_back(id);
        }
        if (refs.size() != 1) {
            report.errors.push_back({ValidationCode::MissingReferenceBus,
                                     "AC island containing bus '" + island.bus_ids.front() + "' has " +
                                         std::to_string(refs.size()) + " reference buses (need exactly 1)"});
            continue;
        }
        if (gens_per_bus.find(refs.front()) == gens_per_bus.end())
            report.errors.push_back({ValidationCode::MissingReferenceBus,
                                     "reference bus '" + refs.front() + "' has no generator to act as slack"});
    }
}

void check_dc_rules(const NetworkCase& net, ValidationReport& report) {
    auto components = dc_components(net);

    std::map<TerminalRef, int> component_of;
    for (size_t k = 0; k < components.size(); ++k)
        for (const auto& t : components[k].terminals) component_of[t] = static_cast<int>(k);

    std::set<std::string> grounded;
    for (const auto& bus : net.dc_buses)
        if (bus.grounded && bus.has_terminal(Terminal::Neutral)) grounded.insert(bus.id);

    std::vector<bool> has_ground(components.size(), false);
    for (size_t k = 0; k < components.size(); ++k)
        for (const auto& t : components[k].terminals)
            if (t.terminal == Terminal::Neutral && grounded.count(t.bus)) has_ground[k] = true;

    for (size_t k = 0; k < components.size(); ++k) {
        if (!has_ground[k])
            report.errors.push_back({ValidationCode::UngroundedDcComponent,
                                     "DC component containing terminal ('" +
                                         components[k].terminals.front().bus + "', " +
                                         to_string(components[k].terminals.front().terminal) +
                                         ") has no grounded neutral"});
    }

    // Per component and per polarity layer: if any in-service converter
    // touches the layer, one of them must control DC voltage.
    struct LayerState {
        int converters = 0;
        int voltage_controlling = 0;
    };
    std::map<std::pair<int, Polarity>, LayerState> layers;
    for (const auto& cv : net.converters) {
        if (!cv.status || !cv.control.d_axis) continue;
        auto it = component_of.find({cv.dc_bus, terminal_of(cv.polarity)});
        if (it == component_of.end()) continue;
        auto& layer = layers[{it->second, cv.polarity}];
        layer.converters += 1;
        if (std::holds_alternative<UdcControl>(*cv.control.d_axis) ||
            std::holds_alternative<DcDroop>(*cv.control.d_axis))
            layer.voltage_controlling += 1;
    }
    for (const auto& [key, layer] : layers) {
        if (layer.converters > 0 && layer.voltage_controlling == 0)
            report.errors.push_back(
                {ValidationCode::LayerWithoutVoltageReference,
                 std::string("the ") + to_string(key.second) + " layer of DC component " +
                     std::to_string(key.first + 1) +
                     " has converters but none in DC-voltage or DC-droop control"});
    }
}

void check_uac_controls(const NetworkCase& net, const CaseIndex& index, ValidationReport& report) {
    std::set<std::string> voltage_fixed;
    for (const auto& g : net.generators)
        if (index.ac_bus(g.bus)) voltage_fixed.insert(g.bus);

    std::map<std::string, std::vector<std::string>> uac_by_bus;
    for (const auto& cv : net.converters) {
        if (!cv.status || !cv.control.q_axis) continue;
        if (std::holds_alternative<UacControl>(*cv.control.q_axis))
            uac_by_bus[cv.ac_bus].push_back(cv.id);
    }
    for (const auto& [bus, ids] : uac_by_bus) {
        if (ids.size() > 1)
            report.errors.push_back({ValidationCode::DuplicateUacControl,
                                     "AC bus '" + bus + "' has " + std::to_string(ids.size()) +
                                         " converters in AC-voltage control"});
        if (voltage_fixed.count(bus))
            report.errors.push_back({ValidationCode::DuplicateUacControl,
                                     "converter '" + ids.front() + "' controls AC voltage at bus '" + bus +
                                         "' whose voltage is already fixed by a generator"});
    }
}

} // namespace

ValidationReport validate_case(const NetworkCase& net) {
    ValidationReport report;
    check_unique_ids(net, report);
    CaseIndex index(net);
    check_references(net, index, report);
    // Topology rules assume resolvable references.
    if (report.ok()) {
        check_ac_islands(net, index, report);
        check_dc_rules(net, report);
        check_uac_controls(net, index, report);
    }
    return report;
}

} // namespace mcpf
