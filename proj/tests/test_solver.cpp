#include <doctest.h>

#include <cmath>

#include "mcpf/errors.hpp"
#include "mcpf/solver.hpp"
#include "oracle.hpp"
#include "testcases.hpp"

using namespace mcpf;

namespace {

double derived_u(const Solution& sol, const std::string& bus) {
    for (const auto& b : sol.derived.ac_buses)
        if (b.id == bus) return b.u_mag;
    FAIL("no bus " << bus);
    return 0.0;
}

double derived_theta(const Solution& sol, const std::string& bus) {
    for (const auto& b : sol.derived.ac_buses)
        if (b.id == bus) return b.theta;
    FAIL("no bus " << bus);
    return 0.0;
}

} // namespace

TEST_CASE("flat start values") {
    const NetworkCase net = testcases::load_bundled("paper_bipolar.json");
    const VariableRegistry reg = build_registry(net);
    const StateVector x = flat_start(net, reg);
    CHECK(x[reg.index_of({VarKind::AcTheta, "ac2"})] == 0.0);
    CHECK(x[reg.index_of({VarKind::AcVmag, "ac2"})] == 1.0);
    CHECK(x[reg.index_of({VarKind::DcVoltage, "dc1", Terminal::Positive})] == 1.0);
    CHECK(x[reg.index_of({VarKind::DcVoltage, "dc3", Terminal::Negative})] == -1.0);
    CHECK(x[reg.index_of({VarKind::DcVoltage, "dc1", Terminal::Neutral})] == 0.0);
    // Pac poles start on their setpoint, with consistent DC currents
    CHECK(x[reg.index_of({VarKind::PolePacCv, "2P"})] == doctest::Approx(-0.7607));
    CHECK(x[reg.index_of({VarKind::PoleIdc, "2P"})] == doctest::Approx(0.7607));
    CHECK(x[reg.index_of({VarKind::PoleIdc, "1N"})] == doctest::Approx(0.87193));
    // Udc poles have no power setpoint
    CHECK(x[reg.index_of({VarKind::PolePacCv, "1P"})] == 0.0);
}

TEST_CASE("oracle reproduces the frozen two-bus point") {
    // independently derived: pure-susceptance line, P = 0.5 withdrawal
    const auto sol = oracle::solve_two_bus_ac(0.0, -10.0, 1.0, 0.5, 0.0);
    CHECK(sol.u_load == doctest::Approx(0.998746073110).epsilon(1e-10));
    CHECK(sol.theta_load == doctest::Approx(-0.050083710581).epsilon(1e-9));
}

TEST_CASE("oracle edge cases") {
    const auto unloaded = oracle::solve_two_bus_ac(0.5, -10.0, 1.0, 0.0, 0.0);
    CHECK(unloaded.u_load == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(unloaded.theta_load == doctest::Approx(0.0));
    CHECK_THROWS_AS(oracle::solve_two_bus_ac(0.0, -10.0, 1.0, 6.0, 0.0),
                    oracle::InfeasibleLoading);
}

TEST_CASE("Newton agrees with the two-bus oracle") {
    for (const auto& [g, b, p, q] :
         std::vector<std::tuple<double, double, double, double>>{
             {0.0, -10.0, 0.5, 0.0}, {0.5, -10.0, 0.5, 0.1}, {2.0, -20.0, 0.8, -0.2}}) {
        const NetworkCase net = testcases::two_bus_case(g, b, 1.0, p, q);
        SolverOptions options;
        options.tol_inf = 1e-12;
        const Solution sol = solve(net, options);
        REQUIRE(sol.converged);
        const auto expect = oracle::solve_two_bus_ac(g, b, 1.0, p, q);
        CHECK(derived_u(sol, "bus2") == doctest::Approx(expect.u_load).epsilon(1e-9));
        CHECK(derived_theta(sol, "bus2") == doctest::Approx(expect.theta_load).epsilon(1e-9));
    }
}

TEST_CASE("symmetric bipolar case collapses to balanced operation") {
    const NetworkCase net = testcases::load_bundled("symmetric_bipolar.json");
    SolverOptions options;
    options.tol_inf = 1e-12;
    const Solution sol = solve(net, options);
    REQUIRE(sol.converged);

    double u_pos = 0.0, u_neg = 0.0;
    for (const auto& t : sol.derived.dc_terminals) {
        if (t.terminal == Terminal::Neutral) CHECK(std::abs(t.u) <= 1e-10);
        if (t.bus == "dcB" && t.terminal == Terminal::Positive) u_pos = t.u;
        if (t.bus == "dcB" && t.terminal == Terminal::Negative) u_neg = t.u;
    }
    CHECK(std::abs(u_pos + u_neg) <= 1e-10);
    for (const auto& c : sol.derived.dc_conductors)
        if (c.conductor == Terminal::Neutral) CHECK(std::abs(c.i_from_to) <= 1e-10);
    for (const auto& g : sol.derived.grounds) CHECK(std::abs(g.i_ground) <= 1e-10);
}

TEST_CASE("all five control combinations converge from flat start") {
    using testcases::Combo;
    for (Combo combo :
         {Combo::Case1, Combo::Case2, Combo::Case3, Combo::Case4, Combo::Case5}) {
        const NetworkCase net = testcases::paper_case(combo);
        const Solution sol = solve(net);
        CHECK(sol.converged);
        CHECK(sol.iterations <= 20);
    }
}

TEST_CASE("line search only accepts strict residual decreases") {
    const NetworkCase net = testcases::load_bundled("paper_bipolar.json");
    double previous = std::numeric_limits<double>::infinity();
    for (int budget = 0; budget <= 6; ++budget) {
        SolverOptions options;
        options.max_iter = budget;
        options.tol_inf = 1e-300;  // never converges; runs exactly `budget` steps
        const Solution sol = solve(net, options);
        if (sol.iterations < budget) break;  // stalled at machine precision
        CHECK(sol.final_residual < previous);
        previous = sol.final_residual;
    }
}

TEST_CASE("identical inputs give bit-identical iterates") {
    const NetworkCase net = testcases::load_bundled("paper_bipolar.json");
    const Solution a = solve(net);
    const Solution b = solve(net);
    REQUIRE(a.state.size() == b.state.size());
    for (int i = 0; i < a.state.size(); ++i) CHECK(a.state[i] == b.state[i]);
}

TEST_CASE("converged solutions re-certify below tolerance") {
    const NetworkCase net = testcases::paper_case(testcases::Combo::Case3);
    const Solution sol = solve(net);
    REQUIRE(sol.converged);
    const VariableRegistry reg = build_registry(net);
    const ResidualSystem system(net, reg);
    CHECK(system.evaluate(sol.state).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("derived results are invariant to variable ordering") {
    const NetworkCase net = testcases::load_bundled("paper_bipolar.json");
    const Solution plain = solve(net);
    SolverOptions shuffled;
    shuffled.variable_order_seed = 20240u;
    const Solution permuted = solve(net, shuffled);
    REQUIRE(plain.converged);
    REQUIRE(permuted.converged);
    for (std::size_t i = 0; i < plain.derived.dc_terminals.size(); ++i)
        CHECK(plain.derived.dc_terminals[i].u ==
              doctest::Approx(permuted.derived.dc_terminals[i].u).epsilon(1e-10));
    for (std::size_t i = 0; i < plain.derived.converters.size(); ++i)
        CHECK(plain.derived.converters[i].p_pcc ==
              doctest::Approx(permuted.derived.converters[i].p_pcc).epsilon(1e-10));
}

TEST_CASE("redundant voltage controllers surface as a singular Jacobian") {
    NetworkCase net = testcases::mini_hybrid_case();
    ConverterPole duplicate = net.converters[0];
    duplicate.id = "cv2";
    net.converters.push_back(std::move(duplicate));
    REQUIRE(validate_case(net).ok());  // passes the structural rules
    const Solution sol = solve(net);
    CHECK_FALSE(sol.converged);
    CHECK(sol.status == SolveStatus::SingularJacobian);
}

TEST_CASE("infeasible loading fails without converging") {
    const NetworkCase net = testcases::two_bus_case(0.0, -10.0, 1.0, 6.0, 0.0);
    const Solution sol = solve(net);
    CHECK_FALSE(sol.converged);
    CHECK(sol.status != SolveStatus::Converged);
    CHECK(!sol.worst_equation.empty());
}

TEST_CASE("warm start maps shared variables and drops removed ones") {
    const NetworkCase net = testcases::load_bundled("paper_bipolar.json");
    const Solution base = solve(net);
    REQUIRE(base.converged);

    SUBCASE("identical case reproduces the state") {
        const VariableRegistry reg = build_registry(net);
        const StateVector x = warm_start(base, net, reg);
        REQUIRE(x.size() == base.state.size());
        for (int i = 0; i < x.size(); ++i)
            CHECK(x[i] == base.state[reg.index_of(base.registry.key_at(i))]);
    }
    SUBCASE("pole outage drops that pole's variables") {
        NetworkCase post = net;
        for (auto& cv : post.converters)
            if (cv.id == "1N") cv.status = false;
        const VariableRegistry reg = build_registry(post);
        CHECK(reg.index_of({VarKind::PolePacCv, "1N"}) == -1);
        const StateVector x = warm_start(base, post, reg);
        CHECK(x.size() == base.state.size() - 9);
        const int idx = reg.index_of({VarKind::DcVoltage, "dc1", Terminal::Positive});
        CHECK(x[idx] == base.state[base.registry.index_of(
                            {VarKind::DcVoltage, "dc1", Terminal::Positive})]);
    }
    SUBCASE("setpoint-only changes keep the vector") {
        NetworkCase variant = net;
        testcases::set_d_axis(variant, "2P", PacControl{-0.5});
        const VariableRegistry reg = build_registry(variant);
        const StateVector x = warm_start(base, variant, reg);
        REQUIRE(x.size() == base.state.size());
        for (int i = 0; i < x.size(); ++i)
            CHECK(x[i] == base.state[reg.index_of(base.registry.key_at(i))]);
    }
    SUBCASE("removed buses are rejected") {
        NetworkCase other = testcases::two_bus_case(0.5, -10.0, 1.0, 0.3, 0.1);
        const VariableRegistry reg = build_registry(other);
        CHECK_THROWS_AS(warm_start(base, other, reg), Error);
    }
}

TEST_CASE("fd_check records the Jacobian agreement") {
    const NetworkCase net = testcases::two_bus_case(0.5, -10.0, 1.0, 0.3, 0.1);
    SolverOptions options;
    options.fd_check = true;
    const Solution sol = solve(net, options);
    REQUIRE(sol.converged);
    CHECK(sol.fd_max_rel_error > 0.0);
    CHECK(sol.fd_max_rel_error <= 1e-6);
}

TEST_CASE("a small chain case converges") {
    const NetworkCase net = testcases::chain_case(5, 4, 2);
    REQUIRE(validate_case(net).ok());
    const Solution sol = solve(net);
    CHECK(sol.converged);
    CHECK(std::abs(sol.derived.power_mismatch()) <= 1e-6);
}
