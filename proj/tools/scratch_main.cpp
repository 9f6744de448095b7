// Scratch: arc-psi vs oracle restriction, separable and coupled (2,2) arc 3.
#include <cmath>
#include <cstdio>
#include <vector>

#include "caustiq/arc1d.hpp"
#include "caustiq/eigensolver.hpp"
#include "caustiq/model.hpp"
#include "caustiq/oracle.hpp"

using namespace caustiq;

static void compare(const model::HamiltonianModel& m, int mq, int nq,
                    const char* tag) {
    eigensolver::PipelineOptions opt;
    const double ex = m.hbar * m.omega_x * (mq + 0.5);
    const double ey = m.hbar * m.omega_y * (nq + 0.5);
    const double x0 = std::sqrt(2.0 * ex / m.mass) / m.omega_x;
    const double y0 = std::sqrt(2.0 * ey / m.mass) / m.omega_y;
    const auto entry = eigensolver::find_state(
        m, ex + ey, std::atan2(y0, x0), std::make_pair(mq, nq), opt);
    const auto& arc = entry.caustic.arcs[2];
    auto prob = arc1d::build_arc_problem(m, arc, entry.energy, opt.n_grid);
    auto sol = arc1d::solve_arc(prob);

    const auto basis = oracle::basis_for(m, 30);
    const auto orc = oracle::diagonalize(oracle::build_matrix(m, basis), basis);
    std::size_t idx = 0;
    double best = 1e9;
    for (std::size_t k = 0; k < orc.eigenvalues.size(); ++k)
        if (orc.labels[k] == std::make_pair(mq, nq) &&
            std::abs(orc.eigenvalues[k] - entry.energy) < best) {
            best = std::abs(orc.eigenvalues[k] - entry.energy);
            idx = k;
        }
    const auto po = oracle::restrict_to_arc(orc, idx, arc, prob.grid);

    // correlation over the inter-vertex span
    double sp = 0, so = 0, x = 0;
    for (std::size_t i = prob.i_dom_lo; i <= prob.i_dom_hi; ++i) {
        sp += sol.psi[i] * sol.psi[i];
        so += po[i] * po[i];
        x += sol.psi[i] * po[i];
    }
    std::printf("%s: E=%.8f corr=%.6f\n", tag, entry.energy,
                x / std::sqrt(sp * so));
    // antinode envelopes
    for (std::size_t i = prob.i1 + 2; i + 2 < prob.i2; ++i) {
        const double v = std::abs(sol.psi[i]);
        bool peak = v > 0.05;
        for (int d = -2; d <= 2 && peak; ++d)
            if (std::abs(sol.psi[i + d]) > v) peak = false;
        if (peak)
            std::printf("  t=%+.3f |psi|=%.4f |psi_o|=%.4f ratio=%.4f\n",
                        prob.grid[i], v, std::abs(po[i]),
                        std::abs(po[i]) / v);
    }
}

int main() {
    model::HamiltonianModel m;
    m.omega_x = 1.1;
    m.omega_y = 1.0;
    for (double lam : {0.0, -0.055, -0.11}) {
        m.lambda = lam;
        std::printf("lambda = %.3f
", lam);
        compare(m, 0, 0, "  (0,0)");
        compare(m, 1, 1, "  (1,1)");
        compare(m, 2, 2, "  (2,2)");
    }
    return 0;
}
