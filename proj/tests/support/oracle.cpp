#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace mcpf::oracle {

TerminalVoltages solve_dc_linear(const NetworkCase& net, const std::vector<Injection>& injections,
                                 const std::vector<SlackVoltage>& slacks) {
    std::vector<std::pair<std::string, Terminal>> terminals;
    for (const auto& bus : net.dc_buses)
        for (auto t : bus.terminals) terminals.emplace_back(bus.id, t);
    std::sort(terminals.begin(), terminals.end());

    auto index_of = [&terminals](const std::string& bus, Terminal t) {
        const auto it = std::find(terminals.begin(), terminals.end(), std::make_pair(bus, t));
        if (it == terminals.end()) throw SingularNetwork("unknown terminal " + bus);
        return static_cast<int>(it - terminals.begin());
    };

    const int n = static_cast<int>(terminals.size());
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));

    for (const auto& branch : net.dc_branches) {
        for (const auto& [phi, cond] : branch.conductors) {
            if (!cond.status) continue;
            const int i = index_of(branch.from_bus, phi);
            const int j = index_of(branch.to_bus, phi);
            const double y = 1.0 / cond.r;
            a[i][i] += y;
            a[j][j] += y;
            a[i][j] -= y;
            a[j][i] -= y;
        }
    }
    for (const auto& inj : injections) a[index_of(inj.bus, inj.terminal)][n] += inj.current;
    for (const auto& slack : slacks) {
        const int i = index_of(slack.bus, slack.terminal);
        for (int j = 0; j < n; ++j) a[i][j] = 0.0;
        a[i][i] = 1.0;
        a[i][n] = slack.voltage;
    }

    // Gauss-Jordan with partial pivoting
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int row = col + 1; row < n; ++row)
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
        if (std::abs(a[pivot][col]) < 1e-12)
            throw SingularNetwork("no voltage reference reaches terminal " +
                                  terminals[col].first);
        std::swap(a[col], a[pivot]);
        const double d = a[col][col];
        for (int j = col; j <= n; ++j) a[col][j] /= d;
        for (int row = 0; row < n; ++row) {
            if (row == col || a[row][col] == 0.0) continue;
            const double factor = a[row][col];
            for (int j = col; j <= n; ++j) a[row][j] -= factor * a[col][j];
        }
    }

    TerminalVoltages out;
    for (int i = 0; i < n; ++i) out[terminals[i]] = a[i][n];
    return out;
}

TwoBusSolution solve_two_bus_ac(double g, double b, double u_gen, double p_load, double q_load) {
    // Eliminate the angle. With C = U_l * U_g * cos(d), S = U_l * U_g * sin(d),
    // the two balance equations are linear in (C, S):
    //   C = U_l^2 + (g*P - b*Q) / (g^2 + b^2)
    //   S = (b*P + g*Q) / (g^2 + b^2)
    // and consistency requires C^2 + S^2 = U_l^2 * U_g^2, a quadratic in
    // y = U_l^2 whose upper root is the operable branch.
    const double y2 = g * g + b * b;
    if (y2 <= 0.0) throw InfeasibleLoading("branch admittance is zero");
    const double alpha = (g * p_load - b * q_load) / y2;
    const double beta = (b * p_load + g * q_load) / y2;

    auto h = [&](double y) {
        const double c = y + alpha;
        return c * c + beta * beta - y * u_gen * u_gen;
    };

    // h is upward quadratic in y; the upper root lies right of the vertex
    double lo = std::max(0.0, (u_gen * u_gen - 2.0 * alpha) / 2.0);
    if (h(lo) > 0.0) throw InfeasibleLoading("loading beyond the nose point");
    double hi = u_gen * u_gen + 2.0 * std::abs(alpha) + 2.0 * std::abs(beta) + 1.0;
    while (h(hi) <= 0.0) hi *= 2.0;

    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) <= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double y = 0.5 * (lo + hi);
    const double u_load = std::sqrt(y);
    const double c = y + alpha;
    return {u_load, std::atan2(beta, c)};
}

} // namespace mcpf::oracle
