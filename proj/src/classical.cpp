#include "caustiq/classical.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "caustiq/numeric.hpp"

namespace caustiq::classical {
namespace {

constexpr double DRIFT_TOL_SCALE = 1e-9;

// Fourth-order symplectic composition (three second-order kicks with
// coefficients w1, w0, w1 interleaved with four drifts).
struct Composition {
    double c[4];
    double d[3];
};

Composition yoshida4() {
    const double cbrt2 = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - cbrt2);
    const double w0 = -cbrt2 * w1;
    return {{0.5 * w1, 0.5 * (w0 + w1), 0.5 * (w0 + w1), 0.5 * w1},
            {w1, w0, w1}};
}

double hamiltonian_drift_bound(double energy) {
    return DRIFT_TOL_SCALE * std::max(1.0, std::abs(energy));
}

// Clamp t to the sampled range and return i with times[i] <= t <= times[i+1].
std::size_t bracket_sample(const Trajectory& traj, double& t) {
    t = std::clamp(t, traj.times.front(), traj.times.back());
    auto i = static_cast<std::size_t>((t - traj.times.front()) / traj.step);
    if (i + 2 > traj.times.size()) i = traj.times.size() - 2;
    while (i > 0 && traj.times[i] > t) --i;
    return i;
}

/* Single pass over the orbit; deviation fields ride along when requested so
 * the Hessian is evaluated at exactly the points used for the kicks. */
void run(const model::HamiltonianModel& m, const model::PhasePoint& start,
         double t_max, double step, double escape_radius, Trajectory& traj,
         JacobiBundle* jac) {
    if (step <= 0.0 || t_max <= 0.0)
        throw std::invalid_argument("integrate: step and t_max must be positive");
    const Composition comp = yoshida4();
    const auto n_steps = static_cast<std::size_t>(std::ceil(t_max / step - 1e-9));

    traj.energy = model::hamiltonian(m, start);
    traj.step = step;
    traj.mass = m.mass;
    traj.times.clear();
    traj.states.clear();
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);
    if (jac) {
        jac->dq1.clear();
        jac->dv1.clear();
        jac->dq2.clear();
        jac->dv2.clear();
        jac->wronskian.clear();
        jac->dq1.reserve(n_steps + 1);
        jac->dv1.reserve(n_steps + 1);
        jac->dq2.reserve(n_steps + 1);
        jac->dv2.reserve(n_steps + 1);
        jac->wronskian.reserve(n_steps + 1);
    }

    Vec2 q = start.q;
    Vec2 p = start.p;
    Vec2 dq1{0.0, 0.0}, dv1{1.0, 0.0};
    Vec2 dq2{0.0, 0.0}, dv2{0.0, 1.0};

    const double drift_tol = hamiltonian_drift_bound(traj.energy);
    const double inv_m = 1.0 / m.mass;

    auto record = [&](std::size_t i) {
        traj.times.push_back(static_cast<double>(i) * step);
        traj.states.push_back({q, p});
        if (jac) {
            jac->dq1.push_back(dq1);
            jac->dv1.push_back(dv1);
            jac->dq2.push_back(dq2);
            jac->dv2.push_back(dv2);
            jac->wronskian.push_back(cross(dq1, dq2));
        }
    };
    record(0);

    for (std::size_t i = 1; i <= n_steps; ++i) {
        for (int stage = 0; stage < 3; ++stage) {
            const double ct = comp.c[stage] * step;
            q += p * (ct * inv_m);
            if (jac) {
                dq1 += dv1 * ct;
                dq2 += dv2 * ct;
            }
            const double dt = comp.d[stage] * step;
            p -= model::gradient(m, q) * dt;
            if (jac) {
                const SymMat2 h = model::hessian(m, q);
                dv1 -= h.apply(dq1) * (dt * inv_m);
                dv2 -= h.apply(dq2) * (dt * inv_m);
            }
        }
        const double ct = comp.c[3] * step;
        q += p * (ct * inv_m);
        if (jac) {
            dq1 += dv1 * ct;
            dq2 += dv2 * ct;
        }

        if (std::abs(q.x) > escape_radius || std::abs(q.y) > escape_radius)
            throw EscapeError("orbit escaped |q| > " +
                              std::to_string(escape_radius) + " at t = " +
                              std::to_string(static_cast<double>(i) * step));
        const double drift =
            std::abs(model::hamiltonian(m, {q, p}) - traj.energy);
        if (drift > drift_tol)
            throw StepTooLargeError(
                "energy drift " + std::to_string(drift) + " exceeds " +
                std::to_string(drift_tol) + " at t = " +
                std::to_string(static_cast<double>(i) * step) +
                "; reduce the step");
        record(i);
    }
}

}  // namespace

Trajectory integrate_trajectory(const model::HamiltonianModel& m,
                                const model::PhasePoint& start, double t_max,
                                double step, double escape_radius) {
    Trajectory traj;
    run(m, start, t_max, step, escape_radius, traj, nullptr);
    return traj;
}

JacobiBundle integrate_jacobi(const model::HamiltonianModel& m,
                              const Trajectory& traj) {
    if (traj.states.empty())
        throw std::invalid_argument("integrate_jacobi: empty trajectory");
    Trajectory scratch;
    JacobiBundle jac;
    const double t_max = traj.times.back();
    run(m, traj.states.front(), t_max, traj.step,
        std::numeric_limits<double>::infinity(), scratch, &jac);
    return jac;
}

void integrate_with_jacobi(const model::HamiltonianModel& m,
                           const model::PhasePoint& start, double t_max,
                           double step, double escape_radius, Trajectory& traj,
                           JacobiBundle& jac) {
    run(m, start, t_max, step, escape_radius, traj, &jac);
}

CausticPointCloud detect_caustic_points(const JacobiBundle& jac,
                                        const Trajectory& traj) {
    const std::size_t n = traj.states.size();
    if (jac.wronskian.size() != n)
        throw std::invalid_argument(
            "detect_caustic_points: bundle/trajectory size mismatch");
    if (n < 3)
        throw InsufficientIntegrationTimeError(
            "trajectory too short for caustic detection");

    CausticPointCloud cloud;
    cloud.energy = traj.energy;

    // dW/dt follows from the product rule; both factors are stored.
    auto wdot = [&](std::size_t i) {
        return cross(jac.dv1[i], jac.dq2[i]) + cross(jac.dq1[i], jac.dv2[i]);
    };

    const double inv_m = 1.0 / traj.mass;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double w0 = jac.wronskian[i];
        const double w1 = jac.wronskian[i + 1];
        bool hit_exact = (w1 == 0.0);
        if (!(w0 * w1 < 0.0) && !hit_exact) continue;

        const double t0 = traj.times[i];
        const double t1 = traj.times[i + 1];
        double t_star = t1;
        if (!hit_exact) {
            // Bisection on the cubic Hermite model of W over [t0, t1].
            const double m0 = wdot(i);
            const double m1 = wdot(i + 1);
            double lo = t0, hi = t1;
            double f_lo = w0;
            for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double f_mid =
                    numeric::cubic_hermite(t0, t1, w0, m0, w1, m1, mid);
                if (f_mid == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((f_lo < 0.0) != (f_mid < 0.0)) {
                    hi = mid;
                } else {
                    lo = mid;
                    f_lo = f_mid;
                }
            }
            t_star = 0.5 * (lo + hi);
        }

        const model::PhasePoint& a = traj.states[i];
        const model::PhasePoint& b = traj.states[i + 1];
        CausticPoint cp;
        cp.t = t_star;
        // q interpolated with its exact slopes p/m; p through three samples.
        cp.position.x = numeric::cubic_hermite(t0, t1, a.q.x, a.p.x * inv_m,
                                               b.q.x, b.p.x * inv_m, t_star);
        cp.position.y = numeric::cubic_hermite(t0, t1, a.q.y, a.p.y * inv_m,
                                               b.q.y, b.p.y * inv_m, t_star);
        {
            const double tm = traj.times[i - 1];
            const model::PhasePoint& c = traj.states[i - 1];
            const double l0 = (t_star - t0) * (t_star - t1) /
                              ((tm - t0) * (tm - t1));
            const double l1 = (t_star - tm) * (t_star - t1) /
                              ((t0 - tm) * (t0 - t1));
            const double l2 = (t_star - tm) * (t_star - t0) /
                              ((t1 - tm) * (t1 - t0));
            cp.momentum.x = l0 * c.p.x + l1 * a.p.x + l2 * b.p.x;
            cp.momentum.y = l0 * c.p.y + l1 * a.p.y + l2 * b.p.y;
        }
        cloud.points.push_back(cp);
    }

    if (cloud.points.empty())
        throw InsufficientIntegrationTimeError(
            "no conjugate points within the integrated time span");
    return cloud;
}

Vec2 position_at(const Trajectory& traj, double t) {
    if (traj.states.size() < 2)
        throw std::invalid_argument("position_at: trajectory too short");
    const std::size_t i = bracket_sample(traj, t);
    const double t0 = traj.times[i], t1 = traj.times[i + 1];
    const model::PhasePoint& a = traj.states[i];
    const model::PhasePoint& b = traj.states[i + 1];
    const double inv_m = 1.0 / traj.mass;
    return {numeric::cubic_hermite(t0, t1, a.q.x, a.p.x * inv_m, b.q.x,
                                   b.p.x * inv_m, t),
            numeric::cubic_hermite(t0, t1, a.q.y, a.p.y * inv_m, b.q.y,
                                   b.p.y * inv_m, t)};
}

Vec2 momentum_at(const Trajectory& traj, double t) {
    if (traj.states.size() < 3)
        throw std::invalid_argument("momentum_at: trajectory too short");
    std::size_t i = bracket_sample(traj, t);
    const std::size_t j = (i == 0) ? 0 : i - 1;
    const double ta = traj.times[j], tb = traj.times[j + 1],
                 tc = traj.times[j + 2];
    const Vec2& pa = traj.states[j].p;
    const Vec2& pb = traj.states[j + 1].p;
    const Vec2& pc = traj.states[j + 2].p;
    const double l0 = (t - tb) * (t - tc) / ((ta - tb) * (ta - tc));
    const double l1 = (t - ta) * (t - tc) / ((tb - ta) * (tb - tc));
    const double l2 = (t - ta) * (t - tb) / ((tc - ta) * (tc - tb));
    return pa * l0 + pb * l1 + pc * l2;
}

EnvelopeBoundary envelope_oracle(const Trajectory& traj, int resolution) {
    if (resolution < 8)
        throw std::invalid_argument("envelope_oracle: resolution too small");
    if (traj.states.empty())
        throw std::invalid_argument("envelope_oracle: empty trajectory");

    double xmin = traj.states[0].q.x, xmax = xmin;
    double ymin = traj.states[0].q.y, ymax = ymin;
    for (const auto& s : traj.states) {
        xmin = std::min(xmin, s.q.x);
        xmax = std::max(xmax, s.q.x);
        ymin = std::min(ymin, s.q.y);
        ymax = std::max(ymax, s.q.y);
    }
    const double span = std::max(xmax - xmin, ymax - ymin);
    const double cell = span / (resolution - 2);  // one-cell pad on each side
    const double ox = xmin - cell;
    const double oy = ymin - cell;
    const int nx = resolution, ny = resolution;

    std::vector<char> hit(static_cast<std::size_t>(nx) * ny, 0);
    auto mark = [&](double x, double y) {
        const int ix = static_cast<int>((x - ox) / cell);
        const int iy = static_cast<int>((y - oy) / cell);
        if (ix >= 0 && ix < nx && iy >= 0 && iy < ny)
            hit[static_cast<std::size_t>(iy) * nx + ix] = 1;
    };
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const Vec2& q = traj.states[i].q;
        mark(q.x, q.y);
        if (i + 1 < traj.states.size()) {
            const Vec2& r = traj.states[i + 1].q;
            mark(0.5 * (q.x + r.x), 0.5 * (q.y + r.y));
        }
    }

    EnvelopeBoundary out;
    out.cell = cell;
    std::size_t visited = 0, pinholes = 0;
    auto at = [&](int ix, int iy) -> char {
        if (ix < 0 || ix >= nx || iy < 0 || iy >= ny) return 0;
        return hit[static_cast<std::size_t>(iy) * nx + ix];
    };
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            if (at(ix, iy)) {
                ++visited;
                const bool boundary = !at(ix - 1, iy) || !at(ix + 1, iy) ||
                                      !at(ix, iy - 1) || !at(ix, iy + 1);
                if (boundary)
                    out.points.push_back({ox + (ix + 0.5) * cell,
                                          oy + (iy + 0.5) * cell});
            } else if (at(ix - 1, iy) && at(ix + 1, iy) && at(ix, iy - 1) &&
                       at(ix, iy + 1)) {
                ++pinholes;  // unvisited cell surrounded by visited ones
            }
        }
    }
    out.undercovered = visited > 0 && pinholes * 200 > visited;
    return out;
}

double hausdorff_distance(const std::vector<Vec2>& a,
                          const std::vector<Vec2>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff_distance: empty point set");
    auto directed = [](const std::vector<Vec2>& from,
                       const std::vector<Vec2>& to) {
        double worst = 0.0;
        for (const Vec2& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec2& q : to) {
                const double dx = p.x - q.x, dy = p.y - q.y;
                best = std::min(best, dx * dx + dy * dy);
                if (best == 0.0) break;
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, b), directed(b, a));
}

}  // namespace caustiq::classical
