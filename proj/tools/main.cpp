// Command-line front end: validate and solve case files, run single-element
// contingencies, and check the analytic Jacobian against finite differences.
//
// Exit codes: 0 success, 1 validation failure, 2 solver non-convergence,
// 3 I/O or schema error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "mcpf/caseio.hpp"
#include "mcpf/contingency.hpp"
#include "mcpf/errors.hpp"
#include "mcpf/network.hpp"
#include "mcpf/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mcpf::Error(mcpf::ErrorCode::SyntaxError, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw mcpf::Error(mcpf::ErrorCode::SyntaxError, "cannot write '" + out_path + "'");
    out << text;
}

mcpf::Outage parse_outage_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw mcpf::Error(mcpf::ErrorCode::SchemaError,
                          "outage must be conv:<id> or dcline:<id>:<pos|neg|neutral>");
    const std::string kind = spec.substr(0, colon);
    const std::string rest = spec.substr(colon + 1);
    if (kind == "conv") {
        if (rest.empty())
            throw mcpf::Error(mcpf::ErrorCode::SchemaError, "conv outage needs a converter id");
        return mcpf::ConverterPoleOutage{rest};
    }
    if (kind == "dcline") {
        const auto second = rest.rfind(':');
        if (second == std::string::npos)
            throw mcpf::Error(mcpf::ErrorCode::SchemaError,
                              "dcline outage needs <branch id>:<pos|neg|neutral>");
        const std::string id = rest.substr(0, second);
        const std::string phase = rest.substr(second + 1);
        mcpf::Terminal terminal;
        if (phase == "pos")
            terminal = mcpf::Terminal::Positive;
        else if (phase == "neg")
            terminal = mcpf::Terminal::Negative;
        else if (phase == "neutral")
            terminal = mcpf::Terminal::Neutral;
        else
            throw mcpf::Error(mcpf::ErrorCode::SchemaError,
                              "conductor must be pos, neg or neutral, got '" + phase + "'");
        return mcpf::DcConductorOutage{id, terminal};
    }
    throw mcpf::Error(mcpf::ErrorCode::SchemaError, "unknown outage kind '" + kind + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"power flow for hybrid AC/DC grids with bipolar HVDC", "mcpf"};
    app.require_subcommand(1);

    std::string case_path, out_path, format_name = "table", outage_spec;
    double tol = 1e-8;
    int max_iter = 50;

    auto add_solver_options = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_path, "write output to a file instead of stdout");
        cmd->add_option("--format", format_name, "table, csv or json")->capture_default_str();
        cmd->add_option("--tol", tol, "residual infinity-norm tolerance")->capture_default_str();
        cmd->add_option("--max-iter", max_iter, "Newton iteration limit")->capture_default_str();
    };

    CLI::App* validate = app.add_subcommand("validate", "check a case file");
    validate->add_option("case", case_path, "case file")->required();

    CLI::App* solve = app.add_subcommand("solve", "solve the power flow");
    solve->add_option("case", case_path, "case file")->required();
    add_solver_options(solve);

    CLI::App* contingency = app.add_subcommand("contingency", "solve base and post-outage states");
    contingency->add_option("case", case_path, "case file")->required();
    contingency->add_option("--outage", outage_spec, "conv:<id> or dcline:<id>:<pos|neg|neutral>")
        ->required();
    add_solver_options(contingency);

    CLI::App* check = app.add_subcommand("check-jacobian", "compare analytic and FD Jacobians");
    check->add_option("case", case_path, "case file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            const mcpf::NetworkCase net = mcpf::parse_case_document(read_file(case_path));
            const mcpf::ValidationReport report = mcpf::validate_case(net);
            std::cout << report.summary() << "\n";
            return report.ok() ? kExitOk : kExitValidation;
        }

        const mcpf::NetworkCase net = mcpf::parse_case_document(read_file(case_path));
        const mcpf::ValidationReport report = mcpf::validate_case(net);
        if (!report.ok()) {
            std::cerr << "validation failed: " << report.summary() << "\n";
            return kExitValidation;
        }

        if (check->parsed()) {
            const mcpf::VariableRegistry registry = mcpf::build_registry(net);
            const mcpf::ResidualSystem system(net, registry);
            mcpf::StateVector x = mcpf::flat_start(net, registry);
            double worst = mcpf::jacobian_fd_error(system, x);
            std::mt19937 rng(7);
            std::uniform_real_distribution<double> jitter(-0.02, 0.02);
            for (int trial = 0; trial < 3; ++trial) {
                mcpf::StateVector perturbed = x;
                for (int i = 0; i < perturbed.size(); ++i) perturbed[i] += jitter(rng);
                worst = std::max(worst, mcpf::jacobian_fd_error(system, perturbed));
            }
            std::cout << "max relative Jacobian error vs central differences: " << std::scientific
                      << worst << "\n";
            return worst <= 1e-6 ? kExitOk : kExitSolver;
        }

        mcpf::SolverOptions options;
        options.tol_inf = tol;
        options.max_iter = max_iter;
        const mcpf::OutputFormat format = mcpf::parse_format(format_name);

        if (solve->parsed()) {
            const mcpf::Solution solution = mcpf::solve(net, options);
            emit(mcpf::write_results(solution, format), out_path);
            if (!solution.converged) {
                std::cerr << "solver: " << to_string(solution.status) << " after "
                          << solution.iterations << " iterations, worst residual "
                          << solution.final_residual << " at " << solution.worst_equation << "\n";
                return kExitSolver;
            }
            return kExitOk;
        }

        // contingency
        const mcpf::Outage outage = parse_outage_spec(outage_spec);
        const mcpf::Solution base = mcpf::solve(net, options);
        if (!base.converged) {
            std::cerr << "base case did not converge: " << to_string(base.status) << "\n";
            return kExitSolver;
        }
        const mcpf::ContingencyReport rep = mcpf::run_contingency(net, base, outage, options);
        emit(mcpf::write_results(rep, format), out_path);
        return rep.post.converged ? kExitOk : kExitSolver;
    } catch (const mcpf::Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        switch (e.code()) {
            case mcpf::ErrorCode::PostOutageInfeasible:
                return kExitValidation;
            case mcpf::ErrorCode::SyntaxError:
            case mcpf::ErrorCode::SchemaError:
            case mcpf::ErrorCode::UnknownElement:
            case mcpf::ErrorCode::ElementOutOfService:
                return kExitIo;
            default:
                return kExitSolver;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
