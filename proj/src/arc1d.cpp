#include "caustiq/arc1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "caustiq/numeric.hpp"

namespace caustiq::arc1d {
namespace {

constexpr double PI = 3.14159265358979323846;
constexpr double SHOOT_EPS = 1e-20;
constexpr double RENORM_LIMIT = 1e250;

double arc_g(const caustic::ArcFit& arc, double t) {
    return arc.scale_factor(t);
}

// g' and g'' from the chain rule on g = sqrt(1 + f'^2)
double arc_g_prime(const caustic::ArcFit& arc, double t) {
    const double fp = arc.deriv(t);
    const double fpp = arc.second_deriv(t);
    return fp * fpp / std::hypot(1.0, fp);
}

double arc_g_second(const caustic::ArcFit& arc, double t) {
    const double fp = arc.deriv(t);
    const double fpp = arc.second_deriv(t);
    const double fppp = arc.third_deriv(t);
    const double g = std::hypot(1.0, fp);
    const double gp = fp * fpp / g;
    return (fpp * fpp + fp * fppp) / g - fp * fpp * gp / (g * g);
}

struct Coeffs {
    const ArcProblem* prob;
    // squared local wavenumber (negative in forbidden regions)
    double k2(double t) const {
        const double g = arc_g(prob->arc, t);
        const double h = prob->energy - caustic::arc_potential(prob->m, prob->arc, t);
        return 2.0 * prob->m.mass / (prob->m.hbar * prob->m.hbar) * h * g * g;
    }
    double gamma(double t) const {
        return arc_g_prime(prob->arc, t) / arc_g(prob->arc, t);
    }
};

struct Branch {
    std::vector<double> psi, phi;
};

/* RK4 over the grid nodes in the given direction.  The grid places nodes on
 * the extension joints, so every RK4 substep sees smooth coefficients. */
Branch shoot(const ArcProblem& prob, bool from_left) {
    const Coeffs co{&prob};
    const std::size_t n = prob.grid.size();
    Branch b;
    b.psi.assign(n, 0.0);
    b.phi.assign(n, 0.0);

    const std::size_t start = from_left ? 0 : n - 1;
    const double t0 = prob.grid[start];
    const double kap2 = -co.k2(t0);
    if (kap2 <= 0.0)
        throw ExtensionTooShortError(
            "extension end at t = " + std::to_string(t0) +
            " is not classically forbidden; grow the arc extension");
    const double kappa = std::sqrt(kap2);

    double psi = SHOOT_EPS;
    double phi = (from_left ? 1.0 : -1.0) * SHOOT_EPS * kappa;
    b.psi[start] = psi;
    b.phi[start] = phi;

    auto rhs = [&](double t, double y0, double y1, double& d0, double& d1) {
        d0 = y1;
        d1 = co.gamma(t) * y1 - co.k2(t) * y0;
    };

    for (std::size_t s = 1; s < n; ++s) {
        const std::size_t i = from_left ? s - 1 : n - s;
        const std::size_t j = from_left ? i + 1 : i - 1;
        const double t = prob.grid[i];
        const double h = prob.grid[j] - t;

        double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
        rhs(t, psi, phi, k1a, k1b);
        rhs(t + 0.5 * h, psi + 0.5 * h * k1a, phi + 0.5 * h * k1b, k2a, k2b);
        rhs(t + 0.5 * h, psi + 0.5 * h * k2a, phi + 0.5 * h * k2b, k3a, k3b);
        rhs(t + h, psi + h * k3a, phi + h * k3b, k4a, k4b);
        psi += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        phi += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);

        if (std::abs(psi) > RENORM_LIMIT || std::abs(phi) > RENORM_LIMIT) {
            const double f = 1.0 / RENORM_LIMIT;
            psi *= f;
            phi *= f;
            for (double& v : b.psi) v *= f;
            for (double& v : b.phi) v *= f;
        }
        b.psi[j] = psi;
        b.phi[j] = phi;
    }
    return b;
}

std::size_t nearest_node(const std::vector<double>& grid, double t,
                         std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i <= hi; ++i) {
        const double d = std::abs(grid[i] - t);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

double interp_at(const std::vector<double>& grid, const std::vector<double>& y,
                 double t) {
    auto it = std::lower_bound(grid.begin(), grid.end(), t);
    std::size_t j = std::size_t(it - grid.begin());
    if (j == 0) j = 1;
    if (j >= grid.size()) j = grid.size() - 1;
    const double w = (t - grid[j - 1]) / (grid[j] - grid[j - 1]);
    return y[j - 1] + w * (y[j] - y[j - 1]);
}

/* Phase construction shared by quantum_action and left_branch_phase.
 * u must solve the arc equation; uprime is its derivative on the grid. */
PhaseData build_phase(const std::vector<double>& u,
                      const std::vector<double>& uprime,
                      const ArcProblem& prob, bool pin_both) {
    const Coeffs co{&prob};
    const std::size_t n = prob.grid.size();
    const double hbar = prob.m.hbar;
    PhaseData out;

    // launch the auxiliary basis solution where |u| peaks (never a node)
    std::size_t i_w = prob.i1;
    double amp = 0.0;
    for (std::size_t i = prob.i1; i <= prob.i2; ++i) {
        if (std::abs(u[i]) > amp) {
            amp = std::abs(u[i]);
            i_w = i;
        }
    }
    const double t_w = prob.grid[i_w];
    const double k_w = std::sqrt(std::max(co.k2(t_w), 1e-300));

    std::vector<double> w(n, 0.0), wprime(n, 0.0);
    w[i_w] = 0.0;
    wprime[i_w] = k_w * amp;
    auto rhs = [&](double t, double y0, double y1, double& d0, double& d1) {
        d0 = y1;
        d1 = co.gamma(t) * y1 - co.k2(t) * y0;
    };
    for (int dir = -1; dir <= 1; dir += 2) {
        double y0 = w[i_w], y1 = wprime[i_w];
        for (std::size_t i = i_w; dir > 0 ? i + 1 < n : i > 0;) {
            const std::size_t j = dir > 0 ? i + 1 : i - 1;
            const double t = prob.grid[i];
            const double h = prob.grid[j] - t;
            double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
            rhs(t, y0, y1, k1a, k1b);
            rhs(t + 0.5 * h, y0 + 0.5 * h * k1a, y1 + 0.5 * h * k1b, k2a, k2b);
            rhs(t + 0.5 * h, y0 + 0.5 * h * k2a, y1 + 0.5 * h * k2b, k3a, k3b);
            rhs(t + h, y0 + h * k3a, y1 + h * k3b, k4a, k4b);
            y0 += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            y1 += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            w[j] = y0;
            wprime[j] = y1;
            i = j;
        }
    }

    // invariant Wronskian of the basis pair, exact at the launch node
    const double W_uw = u[i_w] * wprime[i_w] / arc_g(prob.arc, t_w);

    const double u_t1 = interp_at(prob.grid, u, prob.t1);
    const double u_t2 = interp_at(prob.grid, u, prob.t2);
    const double w_t1 = interp_at(prob.grid, w, prob.t1);
    const double w_t2 = interp_at(prob.grid, w, prob.t2);

    double a = 0.0, b = 0.0;
    bool pinned = false;
    if (pin_both) {
        const double det = u_t1 * w_t2 - u_t2 * w_t1;
        if (std::abs(det) > 1e-12 * amp * amp) {
            a = (-u_t1 * w_t2 - u_t2 * w_t1) / det;
            b = (u_t1 * u_t2 + u_t2 * u_t1) / det;
            // forward winding requires w0 = b W_uw > 0
            pinned = b * W_uw > 0.0 && std::abs(a) < 1e8 && std::abs(b) < 1e8;
        }
    }
    if (!pinned) {
        // pin t1 only; amplitude from an RMS match over the oscillatory part
        double su = 0.0, sw = 0.0;
        for (std::size_t i = prob.i1; i <= prob.i2; ++i) {
            su += u[i] * u[i];
            sw += w[i] * w[i];
        }
        b = std::sqrt(su / std::max(sw, 1e-300));
        if (b * W_uw < 0.0) b = -b;
        a = std::abs(u_t1) > 1e-14 * amp ? (-u_t1 - b * w_t1) / u_t1 : 0.0;
    }

    std::vector<double> v(n), vprime(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = a * u[i] + b * w[i];
        vprime[i] = a * uprime[i] + b * wprime[i];
    }
    const double w0 =
        (u[i_w] * vprime[i_w] - v[i_w] * uprime[i_w]) / arc_g(prob.arc, t_w);

    // unwrapped phase of u + iv; the grid resolves every oscillation
    std::vector<double> phase(n);
    phase[0] = std::atan2(v[0], u[0]);
    for (std::size_t i = 1; i < n; ++i) {
        double p = std::atan2(v[i], u[i]);
        const double prev = phase[i - 1];
        p += 2.0 * PI * std::round((prev - p) / (2.0 * PI));
        phase[i] = p;
    }
    auto branch_aligned = [&](double t, double uu, double vv) {
        const double near = interp_at(prob.grid, phase, t);
        double p = std::atan2(vv, uu);
        p += 2.0 * PI * std::round((near - p) / (2.0 * PI));
        return p;
    };
    const double v_t1 = interp_at(prob.grid, v, prob.t1);
    const double v_t2 = interp_at(prob.grid, v, prob.t2);
    const double phase_t1 = branch_aligned(prob.t1, u_t1, v_t1);
    const double phase_t2 = branch_aligned(prob.t2, u_t2, v_t2);

    out.X.resize(n);
    out.Y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.X[i] = hbar * (phase[i] - phase_t1);
        const double xp = hbar * arc_g(prob.arc, prob.grid[i]) * w0 /
                          (u[i] * u[i] + v[i] * v[i]);
        out.Y[i] = hbar * std::log(std::sqrt(
                       xp / arc_g(prob.arc, prob.grid[i])));
    }
    out.aux = std::move(v);
    out.deltaX = hbar * (phase_t2 - phase_t1);
    out.w0 = w0;
    out.pinned = pinned;
    return out;
}

}  // namespace

ArcProblem build_arc_problem(const model::HamiltonianModel& m,
                             const caustic::ArcFit& arc, double E,
                             int n_grid) {
    if (n_grid < 200)
        throw std::invalid_argument("build_arc_problem: n_grid must be >= 200");
    if (!(arc.ext_lo <= arc.dom_lo && arc.dom_hi <= arc.ext_hi))
        throw std::invalid_argument("build_arc_problem: malformed arc spans");

    ArcProblem prob;
    prob.arc = arc;
    prob.m = m;
    prob.energy = E;

    // piecewise-uniform grid with nodes on the extension joints
    const double La = arc.dom_lo - arc.ext_lo;
    const double Lb = arc.dom_hi - arc.dom_lo;
    const double Lc = arc.ext_hi - arc.dom_hi;
    const double L = La + Lb + Lc;
    if (!(Lb > 0.0))
        throw std::invalid_argument("build_arc_problem: empty arc domain");
    auto seg_count = [&](double len) {
        if (len <= 0.0) return 0;
        return std::max(32, static_cast<int>(std::lround(n_grid * len / L)));
    };
    const int na = seg_count(La), nc = seg_count(Lc);
    const int nb = std::max(64, n_grid - na - nc);

    prob.grid.reserve(std::size_t(na + nb + nc) + 1);
    if (na > 0) {
        auto s = numeric::linspace(arc.ext_lo, arc.dom_lo, std::size_t(na) + 1);
        prob.grid.insert(prob.grid.end(), s.begin(), s.end() - 1);
    }
    auto sb = numeric::linspace(arc.dom_lo, arc.dom_hi, std::size_t(nb) + 1);
    prob.grid.insert(prob.grid.end(), sb.begin(), sb.end() - 1);
    if (nc > 0) {
        auto s = numeric::linspace(arc.dom_hi, arc.ext_hi, std::size_t(nc) + 1);
        prob.grid.insert(prob.grid.end(), s.begin(), s.end());
    } else {
        prob.grid.push_back(arc.dom_hi);
    }
    prob.i_dom_lo = std::size_t(na);
    prob.i_dom_hi = std::size_t(na + nb);

    const std::size_t n = prob.grid.size();
    prob.g.resize(n);
    prob.u_k.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        prob.g[i] = arc_g(arc, prob.grid[i]);
        prob.u_k[i] = caustic::arc_potential(m, arc, prob.grid[i]);
    }

    // turning points around the deepest interior point
    auto h = [&](double t) { return E - caustic::arc_potential(m, arc, t); };
    std::size_t i_max = 0;
    double hmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = E - prob.u_k[i];
        if (v > hmax) {
            hmax = v;
            i_max = i;
        }
    }
    if (hmax <= 1e-12 * std::max(1.0, std::abs(E)))
        throw NoOscillatoryRegionError(
            "U_k >= E over the whole arc (no oscillatory region) at E = " +
            std::to_string(E));
    std::size_t lo = i_max, hi = i_max;
    while (lo > 0 && E - prob.u_k[lo - 1] > 0.0) --lo;
    while (hi + 1 < n && E - prob.u_k[hi + 1] > 0.0) ++hi;
    if (lo == 0 && h(prob.grid.front()) > 0.0)
        throw NoOscillatoryRegionError(
            "left turning point lies outside the extended arc span");
    if (hi + 1 == n && h(prob.grid.back()) > 0.0)
        throw NoOscillatoryRegionError(
            "right turning point lies outside the extended arc span");
    prob.t1 = lo == 0 ? prob.grid.front()
                      : numeric::bisect(h, prob.grid[lo - 1], prob.grid[lo],
                                        1e-14 * std::max(1.0, L));
    prob.t2 = hi + 1 == n
                  ? prob.grid.back()
                  : numeric::bisect(h, prob.grid[hi], prob.grid[hi + 1],
                                    1e-14 * std::max(1.0, L));

    // first/last nodes strictly inside the turning interval
    std::size_t i1 = lo, i2 = hi;
    while (i1 < n && prob.grid[i1] <= prob.t1) ++i1;
    while (i2 > 0 && prob.grid[i2] >= prob.t2) --i2;
    if (i1 + 5 > i2)
        throw NoOscillatoryRegionError(
            "oscillatory segment resolved by fewer than 5 grid nodes");
    prob.i1 = i1;
    prob.i2 = i2;
    return prob;
}

ArcSolution solve_arc(const ArcProblem& prob) {
    const Coeffs co{&prob};
    const Branch left = shoot(prob, true);
    const Branch right = shoot(prob, false);

    ArcSolution sol;
    const std::size_t i_m = std::clamp(
        nearest_node(prob.grid, 0.5 * (prob.t1 + prob.t2), prob.i1, prob.i2),
        prob.i1, prob.i2);
    sol.i_match = i_m;

    const double k_m = std::sqrt(std::max(co.k2(prob.grid[i_m]), 1e-300));
    const double nl = std::hypot(left.psi[i_m], left.phi[i_m] / k_m);
    const double nr = std::hypot(right.psi[i_m], right.phi[i_m] / k_m);
    sol.defect = (left.psi[i_m] * right.phi[i_m] -
                  right.psi[i_m] * left.phi[i_m]) /
                 (k_m * nl * nr);

    // least-squares phase-space match of the right branch onto the left
    const double r = (left.psi[i_m] * right.psi[i_m] +
                      left.phi[i_m] * right.phi[i_m] / (k_m * k_m)) /
                     (nr * nr);

    const std::size_t n = prob.grid.size();
    sol.psi.resize(n);
    sol.psi_prime.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i <= i_m) {
            sol.psi[i] = left.psi[i];
            sol.psi_prime[i] = left.phi[i];
        } else {
            sol.psi[i] = r * right.psi[i];
            sol.psi_prime[i] = r * right.phi[i];
        }
    }

    // Count nodes on the left branch alone: the glued psi carries a value
    // jump of relative size ~|defect| at i_match, right where odd states put
    // their central node, so its sign changes can miscount off-eigenvalue.
    sol.nodes = 0;
    for (std::size_t i = prob.i1; i < prob.i2; ++i) {
        if (left.psi[i] * left.psi[i + 1] < 0.0) ++sol.nodes;
        else if (left.psi[i] == 0.0 && i > prob.i1) ++sol.nodes;
    }

    double s = 0.0;
    for (std::size_t i = prob.i1; i < prob.i2; ++i) {
        const double h = prob.grid[i + 1] - prob.grid[i];
        s += 0.5 * h *
             (sol.psi[i] * sol.psi[i] * prob.g[i] +
              sol.psi[i + 1] * sol.psi[i + 1] * prob.g[i + 1]);
    }
    sol.norm = std::sqrt(s);
    if (sol.norm > 0.0) {
        const double inv = 1.0 / sol.norm;
        for (double& v : sol.psi) v *= inv;
        for (double& v : sol.psi_prime) v *= inv;
    }
    return sol;
}

void quantum_action(ArcSolution& sol, const ArcProblem& prob) {
    if (sol.psi.size() != prob.grid.size())
        throw std::invalid_argument("quantum_action: solve the arc first");
    // fix the overall sign so psi(t1) > 0 (phase pin convention)
    if (interp_at(prob.grid, sol.psi, prob.t1) < 0.0) {
        for (double& v : sol.psi) v = -v;
        for (double& v : sol.psi_prime) v = -v;
    }
    PhaseData ph = build_phase(sol.psi, sol.psi_prime, prob, true);
    sol.X = std::move(ph.X);
    sol.Y = std::move(ph.Y);
    sol.psi_aux = std::move(ph.aux);
    sol.deltaX = ph.deltaX;
    sol.w0 = ph.w0;
    sol.phase_pinned = ph.pinned;
}

PhaseData left_branch_phase(const ArcProblem& prob) {
    Branch left = shoot(prob, true);
    // normalise to O(1) amplitude and positive value at t1
    double amp = 0.0;
    for (std::size_t i = prob.i1; i <= prob.i2; ++i)
        amp = std::max(amp, std::abs(left.psi[i]));
    double f = amp > 0.0 ? 1.0 / amp : 1.0;
    if (interp_at(prob.grid, left.psi, prob.t1) < 0.0) f = -f;
    for (double& v : left.psi) v *= f;
    for (double& v : left.phi) v *= f;
    return build_phase(left.psi, left.phi, prob, false);
}

double qhje_residual_at(const ArcProblem& prob, double t, double Xp,
                        double Xpp, double Xppp, double hbar) {
    const double g = arc_g(prob.arc, t);
    const double gp = arc_g_prime(prob.arc, t);
    const double gpp = arc_g_second(prob.arc, t);
    const double uk = caustic::arc_potential(prob.m, prob.arc, t);
    const double h2 = hbar * hbar;
    const double lhs = 3.0 * h2 * gp * gp * Xp * Xp +
                       4.0 * g * g * Xp * Xp * Xp * Xp -
                       3.0 * h2 * g * g * Xpp * Xpp +
                       2.0 * h2 * g * g * Xp * Xppp -
                       2.0 * h2 * g * gpp * Xp * Xp;
    const double rhs = 8.0 * prob.m.mass * (prob.energy - uk) *
                       g * g * g * g * Xp * Xp;
    return std::abs(lhs - rhs) /
           std::max(std::abs(rhs), 1e-30);
}

double qhje_residual(const std::vector<double>& X, const ArcProblem& prob) {
    if (X.size() != prob.grid.size())
        throw std::invalid_argument("qhje_residual: sample/grid size mismatch");
    // uniform-spacing stencils are only valid inside the domain piece
    const double tc = 0.5 * (prob.t1 + prob.t2);
    const double half = 0.3 * (prob.t2 - prob.t1);
    double worst = 0.0;
    for (std::size_t i = std::max(prob.i_dom_lo + 2, std::size_t(2));
         i + 2 <= prob.i_dom_hi && i + 2 < X.size(); ++i) {
        const double t = prob.grid[i];
        if (std::abs(t - tc) > half) continue;
        const double h = prob.grid[i + 1] - prob.grid[i];
        const double xp = (X[i + 1] - X[i - 1]) / (2.0 * h);
        const double xpp = (X[i + 1] - 2.0 * X[i] + X[i - 1]) / (h * h);
        const double xppp = (X[i + 2] - 2.0 * X[i + 1] + 2.0 * X[i - 1] -
                             X[i - 2]) /
                            (2.0 * h * h * h);
        worst = std::max(worst,
                         qhje_residual_at(prob, t, xp, xpp, xppp, prob.m.hbar));
    }
    return worst;
}

double wkb_form_check(const ArcSolution& sol, const ArcProblem& prob) {
    if (sol.X.empty())
        throw std::invalid_argument("wkb_form_check: quantum action missing");
    const double hbar = prob.m.hbar;
    double num = 0.0, den = 0.0, peak = 0.0;
    std::vector<double> shape(prob.i2 - prob.i1 + 1);
    for (std::size_t i = prob.i1; i <= prob.i2; ++i) {
        const double xp = hbar * prob.g[i] * sol.w0 /
                          (sol.psi[i] * sol.psi[i] +
                           sol.psi_aux[i] * sol.psi_aux[i]);
        const double s = std::sin(sol.X[i] / hbar + 0.25 * PI) /
                         std::sqrt(xp / prob.g[i]);
        shape[i - prob.i1] = s;
        num += sol.psi[i] * s;
        den += s * s;
        peak = std::max(peak, std::abs(sol.psi[i]));
    }
    const double A = num / std::max(den, 1e-300);
    double worst = 0.0;
    for (std::size_t i = prob.i1; i <= prob.i2; ++i)
        worst = std::max(worst,
                         std::abs(A * shape[i - prob.i1] - sol.psi[i]));
    return worst / std::max(peak, 1e-300);
}

double classical_action(const ArcProblem& prob, double t) {
    const double t_hi = std::min(t, prob.t2);
    if (t_hi <= prob.t1) return 0.0;
    const double mid = 0.5 * (prob.t1 + prob.t2);
    const double hw = 0.5 * (prob.t2 - prob.t1);
    const double th_hi = std::acos(std::clamp((mid - t_hi) / hw, -1.0, 1.0));
    double w = numeric::adaptive_simpson(
        [&](double th) {
            const double tt = mid - hw * std::cos(th);
            const double h =
                prob.energy - caustic::arc_potential(prob.m, prob.arc, tt);
            return std::sqrt(2.0 * prob.m.mass * std::max(h, 0.0)) *
                   arc_g(prob.arc, tt) * hw * std::sin(th);
        },
        0.0, th_hi, 1e-11);
    return w;
}

}  // namespace caustiq::arc1d
