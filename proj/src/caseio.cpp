#include "mcpf/caseio.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "mcpf/errors.hpp"

namespace mcpf {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::SchemaError, where + ": " + what);
}

void reject_unknown_keys(const ordered_json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const char* name : allowed)
            if (key == name) known = true;
        if (!known) schema_error(where, "unknown field '" + key + "'");
    }
}

double require_number(const ordered_json& obj, const std::string& where, const char* field) {
    if (!obj.contains(field)) schema_error(where, std::string("missing field '") + field + "'");
    if (!obj[field].is_number()) schema_error(where, std::string("field '") + field + "' must be a number");
    return obj[field].get<double>();
}

double number_or(const ordered_json& obj, const std::string& where, const char* field,
                 double fallback) {
    if (!obj.contains(field)) return fallback;
    if (!obj[field].is_number()) schema_error(where, std::string("field '") + field + "' must be a number");
    return obj[field].get<double>();
}

bool flag_or(const ordered_json& obj, const std::string& where, const char* field, bool fallback) {
    if (!obj.contains(field)) return fallback;
    if (!obj[field].is_boolean()) schema_error(where, std::string("field '") + field + "' must be a boolean");
    return obj[field].get<bool>();
}

std::string require_string(const ordered_json& obj, const std::string& where, const char* field) {
    if (!obj.contains(field)) schema_error(where, std::string("missing field '") + field + "'");
    if (!obj[field].is_string()) schema_error(where, std::string("field '") + field + "' must be a string");
    return obj[field].get<std::string>();
}

Terminal parse_terminal(const std::string& name, const std::string& where) {
    if (name == "positive") return Terminal::Positive;
    if (name == "negative") return Terminal::Negative;
    if (name == "neutral") return Terminal::Neutral;
    schema_error(where, "unknown terminal '" + name + "'");
}

Polarity parse_polarity(const std::string& name, const std::string& where) {
    if (name == "positive") return Polarity::Positive;
    if (name == "negative") return Polarity::Negative;
    schema_error(where, "polarity must be 'positive' or 'negative', got '" + name + "'");
}

DAxisControl parse_d_axis(const ordered_json& obj, const std::string& where) {
    reject_unknown_keys(obj, where, {"mode", "u_dc_ref", "p_ac_ref", "k"});
    const std::string mode = require_string(obj, where, "mode");
    if (mode == "udc") return UdcControl{require_number(obj, where, "u_dc_ref")};
    if (mode == "pac") return PacControl{require_number(obj, where, "p_ac_ref")};
    if (mode == "dc_droop")
        return DcDroop{require_number(obj, where, "k"), require_number(obj, where, "u_dc_ref"),
                       require_number(obj, where, "p_ac_ref")};
    schema_error(where, "unknown d-axis mode '" + mode + "'");
}

QAxisControl parse_q_axis(const ordered_json& obj, const std::string& where) {
    reject_unknown_keys(obj, where, {"mode", "u_mag_ref", "q_ref", "k"});
    const std::string mode = require_string(obj, where, "mode");
    if (mode == "uac") return UacControl{require_number(obj, where, "u_mag_ref")};
    if (mode == "q") return QControl{require_number(obj, where, "q_ref")};
    if (mode == "ac_droop")
        return AcDroop{require_number(obj, where, "k"), require_number(obj, where, "u_mag_ref"),
                       require_number(obj, where, "q_ref")};
    schema_error(where, "unknown q-axis mode '" + mode + "'");
}

} // namespace

NetworkCase parse_case_document(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // convert the byte offset into line/column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line) + ", column " +
                                                std::to_string(col) + ": " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::SchemaError, "top level must be an object");

    reject_unknown_keys(doc, "document",
                        {"name", "base", "ac_buses", "ac_branches", "generators", "loads_ac",
                         "loads_dc", "dc_buses", "dc_branches", "converters"});

    NetworkCase net;
    if (doc.contains("name")) net.name = require_string(doc, "document", "name");
    if (doc.contains("base")) {
        const auto& base = doc["base"];
        reject_unknown_keys(base, "base", {"s_base_mva"});
        net.base.s_base_mva = number_or(base, "base", "s_base_mva", 100.0);
    }

    auto section = [&doc](const char* name) {
        std::vector<ordered_json> items;
        if (!doc.contains(name)) return items;
        if (!doc[name].is_array())
            schema_error(name, "must be an array");
        for (const auto& item : doc[name]) items.push_back(item);
        return items;
    };

    for (const auto& item : section("ac_buses")) {
        const std::string where = "ac_buses[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where,
                            {"id", "g_shunt", "b_shunt", "base_kv", "is_reference", "reference_angle"});
        AcBus bus;
        bus.id = require_string(item, where, "id");
        bus.g_shunt = number_or(item, where, "g_shunt", 0.0);
        bus.b_shunt = number_or(item, where, "b_shunt", 0.0);
        bus.base_kv = number_or(item, where, "base_kv", 0.0);
        bus.is_reference = flag_or(item, where, "is_reference", false);
        bus.reference_angle = number_or(item, where, "reference_angle", 0.0);
        net.ac_buses.push_back(std::move(bus));
    }
    for (const auto& item : section("ac_branches")) {
        const std::string where = "ac_branches[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where, {"id", "from", "to", "g", "b", "status"});
        AcBranch br;
        br.id = require_string(item, where, "id");
        br.from_bus = require_string(item, where, "from");
        br.to_bus = require_string(item, where, "to");
        br.g = require_number(item, where, "g");
        br.b = require_number(item, where, "b");
        br.status = flag_or(item, where, "status", true);
        net.ac_branches.push_back(std::move(br));
    }
    for (const auto& item : section("generators")) {
        const std::string where = "generators[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where, {"id", "bus", "p_set", "u_mag_set"});
        Generator gen;
        gen.id = require_string(item, where, "id");
        gen.bus = require_string(item, where, "bus");
        gen.p_set = number_or(item, where, "p_set", 0.0);
        gen.u_mag_set = number_or(item, where, "u_mag_set", 1.0);
        net.generators.push_back(std::move(gen));
    }
    for (const auto& item : section("loads_ac")) {
        const std::string where = "loads_ac[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where, {"id", "bus", "p_set", "q_set"});
        AcLoad load;
        load.id = require_string(item, where, "id");
        load.bus = require_string(item, where, "bus");
        load.p_set = number_or(item, where, "p_set", 0.0);
        load.q_set = number_or(item, where, "q_set", 0.0);
        net.ac_loads.push_back(std::move(load));
    }
    for (const auto& item : section("loads_dc")) {
        const std::string where = "loads_dc[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where, {"id", "dc_bus", "terminal", "p_set"});
        DcLoad load;
        load.id = require_string(item, where, "id");
        load.dc_bus = require_string(item, where, "dc_bus");
        load.terminal = parse_polarity(require_string(item, where, "terminal"), where);
        load.p_set = require_number(item, where, "p_set");
        net.dc_loads.push_back(std::move(load));
    }
    for (const auto& item : section("dc_buses")) {
        const std::string where = "dc_buses[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where, {"id", "terminals", "grounded"});
        DcBus bus;
        bus.id = require_string(item, where, "id");
        if (!item.contains("terminals") || !item["terminals"].is_array())
            schema_error(where, "missing 'terminals' array");
        for (const auto& t : item["terminals"]) {
            if (!t.is_string()) schema_error(where, "terminals must be strings");
            const Terminal terminal = parse_terminal(t.get<std::string>(), where);
            if (bus.has_terminal(terminal))
                schema_error(where, std::string("terminal '") + to_string(terminal) + "' repeated");
            bus.terminals.push_back(terminal);
        }
        bus.grounded = flag_or(item, where, "grounded", false);
        net.dc_buses.push_back(std::move(bus));
    }
    for (const auto& item : section("dc_branches")) {
        const std::string where = "dc_branches[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where, {"id", "from", "to", "conductors"});
        DcBranch br;
        br.id = require_string(item, where, "id");
        br.from_bus = require_string(item, where, "from");
        br.to_bus = require_string(item, where, "to");
        if (!item.contains("conductors") || !item["conductors"].is_object())
            schema_error(where, "missing 'conductors' object");
        for (const auto& [name, spec] : item["conductors"].items()) {
            const Terminal terminal = parse_terminal(name, where);
            reject_unknown_keys(spec, where + "." + name, {"r", "status"});
            DcConductor cond;
            cond.r = require_number(spec, where + "." + name, "r");
            cond.status = flag_or(spec, where + "." + name, "status", true);
            br.conductors[terminal] = cond;
        }
        net.dc_branches.push_back(std::move(br));
    }
    for (const auto& item : section("converters")) {
        const std::string where = "converters[" + item.value("id", "?") + "]";
        reject_unknown_keys(item, where,
                            {"id", "ac_bus", "dc_bus", "polarity", "transformer", "filter_b",
                             "reactor", "loss", "status", "control"});
        ConverterPole cv;
        cv.id = require_string(item, where, "id");
        cv.ac_bus = require_string(item, where, "ac_bus");
        cv.dc_bus = require_string(item, where, "dc_bus");
        cv.polarity = parse_polarity(require_string(item, where, "polarity"), where);
        if (!item.contains("transformer")) schema_error(where, "missing 'transformer'");
        {
            const auto& tf = item["transformer"];
            reject_unknown_keys(tf, where + ".transformer", {"r", "x", "tap"});
            cv.transformer.r = require_number(tf, where + ".transformer", "r");
            cv.transformer.x = require_number(tf, where + ".transformer", "x");
            cv.transformer.tap = number_or(tf, where + ".transformer", "tap", 1.0);
        }
        cv.filter_b = number_or(item, where, "filter_b", 0.0);
        if (!item.contains("reactor")) schema_error(where, "missing 'reactor'");
        {
            const auto& pr = item["reactor"];
            reject_unknown_keys(pr, where + ".reactor", {"r", "x"});
            cv.reactor.r = require_number(pr, where + ".reactor", "r");
            cv.reactor.x = require_number(pr, where + ".reactor", "x");
        }
        if (item.contains("loss")) {
            const auto& loss = item["loss"];
            reject_unknown_keys(loss, where + ".loss", {"a", "b", "c"});
            cv.loss_a = number_or(loss, where + ".loss", "a", 0.0);
            cv.loss_b = number_or(loss, where + ".loss", "b", 0.0);
            cv.loss_c = number_or(loss, where + ".loss", "c", 0.0);
        }
        cv.status = flag_or(item, where, "status", true);
        if (!item.contains("control") || !item["control"].is_object())
            schema_error(where, "missing 'control' object");
        {
            const auto& ctrl = item["control"];
            reject_unknown_keys(ctrl, where + ".control", {"d_axis", "q_axis"});
            if (!ctrl.contains("d_axis")) schema_error(where + ".control", "missing 'd_axis'");
            if (!ctrl.contains("q_axis")) schema_error(where + ".control", "missing 'q_axis'");
            cv.control.d_axis = parse_d_axis(ctrl["d_axis"], where + ".control.d_axis");
            cv.control.q_axis = parse_q_axis(ctrl["q_axis"], where + ".control.q_axis");
        }
        net.converters.push_back(std::move(cv));
    }
    return net;
}

NetworkCase parse_case(const std::string& text) {
    NetworkCase net = parse_case_document(text);
    const ValidationReport report = validate_case(net);
    if (!report.ok())
        throw Error(ErrorCode::SchemaError, "case fails validation: " + report.summary());
    return net;
}

NetworkCase load_case_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::SyntaxError, "cannot open case file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_case(buffer.str());
}

// ---------------------------------------------------------------------------
// case serialization
// ---------------------------------------------------------------------------

std::string write_case(const NetworkCase& net) {
    ordered_json doc;
    if (!net.name.empty()) doc["name"] = net.name;
    doc["base"] = {{"s_base_mva", net.base.s_base_mva}};

    doc["ac_buses"] = ordered_json::array();
    for (const auto& bus : net.ac_buses) {
        ordered_json j{{"id", bus.id}};
        if (bus.g_shunt != 0.0) j["g_shunt"] = bus.g_shunt;
        if (bus.b_shunt != 0.0) j["b_shunt"] = bus.b_shunt;
        if (bus.base_kv != 0.0) j["base_kv"] = bus.base_kv;
        if (bus.is_reference) j["is_reference"] = true;
        if (bus.reference_angle != 0.0) j["reference_angle"] = bus.reference_angle;
        doc["ac_buses"].push_back(std::move(j));
    }
    if (!net.ac_branches.empty()) {
        doc["ac_branches"] = ordered_json::array();
        for (const auto& br : net.ac_branches) {
            ordered_json j{{"id", br.id}, {"from", br.from_bus}, {"to", br.to_bus},
                           {"g", br.g},   {"b", br.b}};
            if (!br.status) j["status"] = false;
            doc["ac_branches"].push_back(std::move(j));
        }
    }
    if (!net.generators.empty()) {
        doc["generators"] = ordered_json::array();
        for (const auto& gen : net.generators)
            doc["generators"].push_back({{"id", gen.id},
                                         {"bus", gen.bus},
                                         {"p_set", gen.p_set},
                                         {"u_mag_set", gen.u_mag_set}});
    }
    if (!net.ac_loads.empty()) {
        doc["loads_ac"] = ordered_json::array();
        for (const auto& load : net.ac_loads)
            doc["loads_ac"].push_back(
                {{"id", load.id}, {"bus", load.bus}, {"p_set", load.p_set}, {"q_set", load.q_set}});
    }
    if (!net.dc_loads.empty()) {
        doc["loads_dc"] = ordered_json::array();
        for (const auto& load : net.dc_loads)
            doc["loads_dc"].push_back({{"id", load.id},
                                       {"dc_bus", load.dc_bus},
                                       {"terminal", to_string(load.terminal)},
                                       {"p_set", load.p_set}});
    }
    if (!net.dc_buses.empty()) {
        doc["dc_buses"] = ordered_json::array();
        for (const auto& bus : net.dc_buses) {
            ordered_json terminals = ordered_json::array();
            for (auto t : bus.terminals) terminals.push_back(to_string(t));
            ordered_json j{{"id", bus.id}, {"terminals", std::move(terminals)}};
            if (bus.grounded) j["grounded"] = true;
            doc["dc_buses"].push_back(std::move(j));
        }
    }
    if (!net.dc_branches.empty()) {
        doc["dc_branches"] = ordered_json::array();
        for (const auto& br : net.dc_branches) {
            ordered_json conductors;
            for (const auto& [terminal, cond] : br.conductors) {
                ordered_json j{{"r", cond.r}};
                if (!cond.status) j["status"] = false;
                conductors[to_string(terminal)] = std::move(j);
            }
            doc["dc_branches"].push_back({{"id", br.id},
                                          {"from", br.from_bus},
                                          {"to", br.to_bus},
                                          {"conductors", std::move(conductors)}});
        }
    }
    if (!net.converters.empty()) {
        doc["converters"] = ordered_json::array();
        for (const auto& cv : net.converters) {
            ordered_json control;
            if (cv.control.d_axis) {
                if (const auto* udc = std::get_if<UdcControl>(&*cv.control.d_axis))
                    control["d_axis"] = {{"mode", "udc"}, {"u_dc_ref", udc->u_dc_ref}};
                else if (const auto* pac = std::get_if<PacControl>(&*cv.control.d_axis))
                    control["d_axis"] = {{"mode", "pac"}, {"p_ac_ref", pac->p_ac_ref}};
                else if (const auto* droop = std::get_if<DcDroop>(&*cv.control.d_axis))
                    control["d_axis"] = {{"mode", "dc_droop"},
                                         {"k", droop->k},
                                         {"u_dc_ref", droop->u_dc_ref},
                                         {"p_ac_ref", droop->p_ac_ref}};
            }
            if (cv.control.q_axis) {
                if (const auto* uac = std::get_if<UacControl>(&*cv.control.q_axis))
                    control["q_axis"] = {{"mode", "uac"}, {"u_mag_ref", uac->u_mag_ref}};
                else if (const auto* q = std::get_if<QControl>(&*cv.control.q_axis))
                    control["q_axis"] = {{"mode", "q"}, {"q_ref", q->q_ref}};
                else if (const auto* droop = std::get_if<AcDroop>(&*cv.control.q_axis))
                    control["q_axis"] = {{"mode", "ac_droop"},
                                         {"k", droop->k},
                                         {"u_mag_ref", droop->u_mag_ref},
                                         {"q_ref", droop->q_ref}};
            }
            ordered_json j{{"id", cv.id},
                           {"ac_bus", cv.ac_bus},
                           {"dc_bus", cv.dc_bus},
                           {"polarity", to_string(cv.polarity)},
                           {"transformer",
                            {{"r", cv.transformer.r}, {"x", cv.transformer.x}, {"tap", cv.transformer.tap}}},
                           {"filter_b", cv.filter_b},
                           {"reactor", {{"r", cv.reactor.r}, {"x", cv.reactor.x}}},
                           {"loss", {{"a", cv.loss_a}, {"b", cv.loss_b}, {"c", cv.loss_c}}}};
            if (!cv.status) j["status"] = false;
            j["control"] = std::move(control);
            doc["converters"].push_back(std::move(j));
        }
    }
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// results
// ---------------------------------------------------------------------------

OutputFormat parse_format(const std::string& name) {
    if (name == "table") return OutputFormat::Table;
    if (name == "csv") return OutputFormat::Csv;
    if (name == "json") return OutputFormat::Json;
    throw Error(ErrorCode::SchemaError, "unknown output format '" + name + "'");
}

namespace {

std::string fixed6(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

std::string full(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void solver_summary_table(std::ostream& os, const Solution& sol) {
    os << "solver: " << to_string(sol.status) << " in " << sol.iterations
       << " iterations, ||F||_inf = " << std::scientific << std::setprecision(3)
       << sol.final_residual << std::defaultfloat;
    if (!sol.converged) os << " (worst: " << sol.worst_equation << ")";
    os << "\n";
}

ordered_json derived_to_json(const Solution& sol) {
    ordered_json j;
    j["solver"] = {{"status", to_string(sol.status)},
                   {"converged", sol.converged},
                   {"iterations", sol.iterations},
                   {"final_residual", sol.final_residual},
                   {"worst_equation", sol.worst_equation}};
    const auto& d = sol.derived;
    j["ac_buses"] = ordered_json::array();
    for (const auto& bus : d.ac_buses)
        j["ac_buses"].push_back({{"id", bus.id}, {"u_mag", bus.u_mag}, {"theta", bus.theta}});
    j["generators"] = ordered_json::array();
    for (const auto& gen : d.generators)
        j["generators"].push_back({{"id", gen.id}, {"p", gen.p}, {"q", gen.q}});
    j["ac_branches"] = ordered_json::array();
    for (const auto& br : d.ac_branches)
        j["ac_branches"].push_back({{"id", br.id},
                                    {"in_service", br.in_service},
                                    {"p_from", br.p_from},
                                    {"q_from", br.q_from},
                                    {"p_to", br.p_to},
                                    {"q_to", br.q_to},
                                    {"loss", br.loss}});
    if (!d.dc_terminals.empty()) {
        j["dc_terminals"] = ordered_json::array();
        for (const auto& t : d.dc_terminals)
            j["dc_terminals"].push_back({{"bus", t.bus},
                                         {"terminal", to_string(t.terminal)},
                                         {"u", t.u},
                                         {"grounded", t.grounded}});
        j["dc_conductors"] = ordered_json::array();
        for (const auto& c : d.dc_conductors)
            j["dc_conductors"].push_back({{"branch", c.branch},
                                          {"conductor", to_string(c.conductor)},
                                          {"in_service", c.in_service},
                                          {"i", c.i_from_to},
                                          {"loss", c.loss}});
    }
    if (!d.converters.empty()) {
        j["converters"] = ordered_json::array();
        for (const auto& cv : d.converters)
            j["converters"].push_back({{"id", cv.id},
                                       {"in_service", cv.in_service},
                                       {"p_pcc", cv.p_pcc},
                                       {"q_pcc", cv.q_pcc},
                                       {"p_cv_ac", cv.p_cv_ac},
                                       {"q_cv_ac", cv.q_cv_ac},
                                       {"i_cv_mag", cv.i_cv_mag},
                                       {"p_cv_dc", cv.p_cv_dc},
                                       {"p_cv_dc0", cv.p_cv_dc0},
                                       {"i_dc", cv.i_dc},
                                       {"i_dc0", cv.i_dc0},
                                       {"p_loss", cv.p_loss},
                                       {"u_f", cv.u_f},
                                       {"theta_f", cv.theta_f},
                                       {"u_cv", cv.u_cv},
                                       {"theta_cv", cv.theta_cv}});
    }
    if (!d.grounds.empty()) {
        j["grounds"] = ordered_json::array();
        for (const auto& g : d.grounds)
            j["grounds"].push_back({{"bus", g.bus}, {"i_ground", g.i_ground}});
    }
    j["totals"] = {{"generation", d.total_generation},
                   {"ac_load", d.total_ac_load},
                   {"dc_load", d.total_dc_load},
                   {"shunt_loss", d.total_shunt_loss},
                   {"ac_branch_loss", d.total_branch_loss},
                   {"converter_loss", d.total_converter_loss},
                   {"dc_conductor_loss", d.total_dc_conductor_loss},
                   {"mismatch", d.power_mismatch()}};
    return j;
}

std::string results_table(const Solution& sol) {
    std::ostringstream os;
    const auto& d = sol.derived;
    solver_summary_table(os, sol);

    os << "\nAC buses\n";
    os << "  " << std::left << std::setw(12) << "bus" << std::right << std::setw(12) << "U_mag"
       << std::setw(12) << "theta" << "\n";
    for (const auto& bus : d.ac_buses)
        os << "  " << std::left << std::setw(12) << bus.id << std::right << std::setw(12)
           << fixed6(bus.u_mag) << std::setw(12) << fixed6(bus.theta) << "\n";

    if (!d.generators.empty()) {
        os << "\nGenerators\n";
        os << "  " << std::left << std::setw(12) << "gen" << std::right << std::setw(12) << "P"
           << std::setw(12) << "Q" << "\n";
        for (const auto& gen : d.generators)
            os << "  " << std::left << std::setw(12) << gen.id << std::right << std::setw(12)
               << fixed6(gen.p) << std::setw(12) << fixed6(gen.q) << "\n";
    }

    if (!d.ac_branches.empty()) {
        os << "\nAC branches\n";
        os << "  " << std::left << std::setw(12) << "branch" << std::right << std::setw(12)
           << "P_from" << std::setw(12) << "Q_from" << std::setw(12) << "P_to" << std::setw(12)
           << "Q_to" << std::setw(12) << "loss" << "\n";
        for (const auto& br : d.ac_branches) {
            if (!br.in_service) {
                os << "  " << std::left << std::setw(12) << br.id << "  (out of service)\n";
                continue;
            }
            os << "  " << std::left << std::setw(12) << br.id << std::right << std::setw(12)
               << fixed6(br.p_from) << std::setw(12) << fixed6(br.q_from) << std::setw(12)
               << fixed6(br.p_to) << std::setw(12) << fixed6(br.q_to) << std::setw(12)
               << fixed6(br.loss) << "\n";
        }
    }

    if (!d.dc_terminals.empty()) {
        os << "\nDC bus voltages\n";
        os << "  " << std::left << std::setw(12) << "bus" << std::right << std::setw(12)
           << "Positive" << std::setw(12) << "Negative" << std::setw(12) << "Neutral" << "\n";
        std::string current;
        std::map<std::string, std::map<Terminal, double>> by_bus;
        std::vector<std::string> order;
        for (const auto& t : d.dc_terminals) {
            if (!by_bus.count(t.bus)) order.push_back(t.bus);
            by_bus[t.bus][t.terminal] = t.u;
        }
        std::sort(order.begin(), order.end());
        for (const auto& bus : order) {
            os << "  " << std::left << std::setw(12) << bus << std::right;
            for (Terminal t : {Terminal::Positive, Terminal::Negative, Terminal::Neutral}) {
                auto it = by_bus[bus].find(t);
                os << std::setw(12) << (it == by_bus[bus].end() ? std::string("-") : fixed6(it->second));
            }
            os << "\n";
        }
    }

    if (!d.converters.empty()) {
        os << "\nConverters\n";
        os << "  " << std::left << std::setw(12) << "pole" << std::right << std::setw(12) << "P_pcc"
           << std::setw(12) << "Q_pcc" << std::setw(12) << "P_cv_dc" << std::setw(12) << "P_loss"
           << std::setw(12) << "I_cv_dc" << "\n";
        for (const auto& cv : d.converters) {
            os << "  " << std::left << std::setw(12) << cv.id << std::right << std::setw(12)
               << fixed6(cv.p_pcc) << std::setw(12) << fixed6(cv.q_pcc) << std::setw(12)
               << fixed6(cv.p_cv_dc) << std::setw(12) << fixed6(cv.p_loss) << std::setw(12)
               << fixed6(cv.i_dc);
            if (!cv.in_service) os << "  (out of service)";
            os << "\n";
        }
    }

    if (!d.dc_conductors.empty()) {
        os << "\nDC conductors\n";
        os << "  " << std::left << std::setw(12) << "branch" << std::left << std::setw(10)
           << "phase" << std::right << std::setw(12) << "I" << std::setw(12) << "loss" << "\n";
        for (const auto& c : d.dc_conductors) {
            os << "  " << std::left << std::setw(12) << c.branch << std::setw(10)
               << to_string(c.conductor) << std::right;
            if (c.in_service)
                os << std::setw(12) << fixed6(c.i_from_to) << std::setw(12) << fixed6(c.loss);
            else
                os << "  (out of service)";
            os << "\n";
        }
    }

    if (!d.grounds.empty()) {
        os << "\nGround currents\n";
        for (const auto& g : d.grounds)
            os << "  " << std::left << std::setw(12) << g.bus << std::right << std::setw(12)
               << fixed6(g.i_ground) << "\n";
    }

    os << "\nTotals\n";
    os << "  generation        " << fixed6(d.total_generation) << "\n";
    os << "  ac load           " << fixed6(d.total_ac_load) << "\n";
    os << "  dc load           " << fixed6(d.total_dc_load) << "\n";
    os << "  shunt loss        " << fixed6(d.total_shunt_loss) << "\n";
    os << "  ac branch loss    " << fixed6(d.total_branch_loss) << "\n";
    os << "  converter loss    " << fixed6(d.total_converter_loss) << "\n";
    os << "  dc conductor loss " << fixed6(d.total_dc_conductor_loss) << "\n";
    os << "  mismatch          " << std::scientific << std::setprecision(3) << d.power_mismatch()
       << std::defaultfloat << "\n";
    return os.str();
}

std::string results_csv(const Solution& sol) {
    std::ostringstream os;
    os << "section,id,field,value\n";
    os << "solver,,status," << to_string(sol.status) << "\n";
    os << "solver,,iterations," << sol.iterations << "\n";
    os << "solver,,final_residual," << full(sol.final_residual) << "\n";
    const auto& d = sol.derived;
    for (const auto& bus : d.ac_buses) {
        os << "ac_bus," << bus.id << ",u_mag," << full(bus.u_mag) << "\n";
        os << "ac_bus," << bus.id << ",theta," << full(bus.theta) << "\n";
    }
    for (const auto& gen : d.generators) {
        os << "generator," << gen.id << ",p," << full(gen.p) << "\n";
        os << "generator," << gen.id << ",q," << full(gen.q) << "\n";
    }
    for (const auto& br : d.ac_branches) {
        if (!br.in_service) continue;
        os << "ac_branch," << br.id << ",p_from," << full(br.p_from) << "\n";
        os << "ac_branch," << br.id << ",q_from," << full(br.q_from) << "\n";
        os << "ac_branch," << br.id << ",p_to," << full(br.p_to) << "\n";
        os << "ac_branch," << br.id << ",q_to," << full(br.q_to) << "\n";
        os << "ac_branch," << br.id << ",loss," << full(br.loss) << "\n";
    }
    for (const auto& t : d.dc_terminals)
        os << "dc_terminal," << t.bus << ",u_" << to_string(t.terminal) << "," << full(t.u) << "\n";
    for (const auto& c : d.dc_conductors) {
        if (!c.in_service) continue;
        os << "dc_conductor," << c.branch << ",i_" << to_string(c.conductor) << ","
           << full(c.i_from_to) << "\n";
    }
    for (const auto& cv : d.converters) {
        os << "converter," << cv.id << ",p_pcc," << full(cv.p_pcc) << "\n";
        os << "converter," << cv.id << ",q_pcc," << full(cv.q_pcc) << "\n";
        os << "converter," << cv.id << ",p_cv_dc," << full(cv.p_cv_dc) << "\n";
        os << "converter," << cv.id << ",p_loss," << full(cv.p_loss) << "\n";
        os << "converter," << cv.id << ",i_dc," << full(cv.i_dc) << "\n";
    }
    for (const auto& g : d.grounds)
        os << "ground," << g.bus << ",i_ground," << full(g.i_ground) << "\n";
    os << "totals,,generation," << full(d.total_generation) << "\n";
    os << "totals,,mismatch," << full(d.power_mismatch()) << "\n";
    return os.str();
}

} // namespace

std::string write_results(const Solution& solution, OutputFormat format) {
    switch (format) {
        case OutputFormat::Table: return results_table(solution);
        case OutputFormat::Csv: return results_csv(solution);
        case OutputFormat::Json: return derived_to_json(solution).dump(2) + "\n";
    }
    return {};
}

namespace {

std::string contingency_table(const ContingencyReport& report) {
    std::ostringstream os;
    os << "outage: " << to_string(report.outage) << "\n";
    os << "base ";
    solver_summary_table(os, report.base);
    os << "post ";
    solver_summary_table(os, report.post);

    os << "\nConverter PCC flows (before / after / deviation)\n";
    os << "  " << std::left << std::setw(12) << "pole" << std::right << std::setw(12) << "P_before"
       << std::setw(12) << "P_after" << std::setw(12) << "dP" << std::setw(12) << "Q_before"
       << std::setw(12) << "Q_after" << std::setw(12) << "dQ" << "\n";
    for (const auto& p : report.poles)
        os << "  " << std::left << std::setw(12) << p.id << std::right << std::setw(12)
           << fixed6(p.p_pcc.before) << std::setw(12) << fixed6(p.p_pcc.after) << std::setw(12)
           << fixed6(p.p_pcc.delta) << std::setw(12) << fixed6(p.q_pcc.before) << std::setw(12)
           << fixed6(p.q_pcc.after) << std::setw(12) << fixed6(p.q_pcc.delta) << "\n";

    if (!report.dc_terminals.empty()) {
        os << "\nDC terminal voltages (before / after / deviation)\n";
        os << "  " << std::left << std::setw(12) << "bus" << std::setw(10) << "terminal"
           << std::right << std::setw(12) << "before" << std::setw(12) << "after" << std::setw(12)
           << "dev" << "\n";
        for (const auto& t : report.dc_terminals)
            os << "  " << std::left << std::setw(12) << t.bus << std::setw(10)
               << to_string(t.terminal) << std::right << std::setw(12) << fixed6(t.u.before)
               << std::setw(12) << fixed6(t.u.after) << std::setw(12) << fixed6(t.u.delta) << "\n";
    }

    os << "\nAC bus voltages (before / after / deviation)\n";
    for (const auto& b : report.ac_buses)
        os << "  " << std::left << std::setw(12) << b.id << std::right << std::setw(12)
           << fixed6(b.u_mag.before) << std::setw(12) << fixed6(b.u_mag.after) << std::setw(12)
           << fixed6(b.u_mag.delta) << "\n";
    return os.str();
}

std::string contingency_csv(const ContingencyReport& report) {
    std::ostringstream os;
    os << "section,id,field,before,after,deviation\n";
    for (const auto& p : report.poles) {
        os << "converter," << p.id << ",p_pcc," << full(p.p_pcc.before) << "," << full(p.p_pcc.after)
           << "," << full(p.p_pcc.delta) << "\n";
        os << "converter," << p.id << ",q_pcc," << full(p.q_pcc.before) << "," << full(p.q_pcc.after)
           << "," << full(p.q_pcc.delta) << "\n";
    }
    for (const auto& t : report.dc_terminals)
        os << "dc_terminal," << t.bus << ",u_" << to_string(t.terminal) << ","
           << full(t.u.before) << "," << full(t.u.after) << "," << full(t.u.delta) << "\n";
    for (const auto& b : report.ac_buses)
        os << "ac_bus," << b.id << ",u_mag," << full(b.u_mag.before) << "," << full(b.u_mag.after)
           << "," << full(b.u_mag.delta) << "\n";
    return os.str();
}

ordered_json contingency_json(const ContingencyReport& report) {
    ordered_json j;
    j["outage"] = to_string(report.outage);
    j["base"] = derived_to_json(report.base);
    j["post"] = derived_to_json(report.post);
    j["deviations"] = ordered_json::object();
    j["deviations"]["converters"] = ordered_json::array();
    for (const auto& p : report.poles)
        j["deviations"]["converters"].push_back(
            {{"id", p.id},
             {"p_pcc", {{"before", p.p_pcc.before}, {"after", p.p_pcc.after}, {"deviation", p.p_pcc.delta}}},
             {"q_pcc", {{"before", p.q_pcc.before}, {"after", p.q_pcc.after}, {"deviation", p.q_pcc.delta}}}});
    j["deviations"]["dc_terminals"] = ordered_json::array();
    for (const auto& t : report.dc_terminals)
        j["deviations"]["dc_terminals"].push_back(
            {{"bus", t.bus},
             {"terminal", to_string(t.terminal)},
             {"u", {{"before", t.u.before}, {"after", t.u.after}, {"deviation", t.u.delta}}}});
    j["deviations"]["ac_buses"] = ordered_json::array();
    for (const auto& b : report.ac_buses)
        j["deviations"]["ac_buses"].push_back(
            {{"id", b.id},
             {"u_mag",
              {{"before", b.u_mag.before}, {"after", b.u_mag.after}, {"deviation", b.u_mag.delta}}}});
    return j;
}

} // namespace

std::string write_results(const ContingencyReport& report, OutputFormat format) {
    switch (format) {
        case OutputFormat::Table: return contingency_table(report);
        case OutputFormat::Csv: return contingency_csv(report);
        case OutputFormat::Json: return contingency_json(report).dump(2) + "\n";
    }
    return {};
}

} // namespace mcpf
