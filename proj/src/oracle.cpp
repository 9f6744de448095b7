#include "caustiq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "caustiq/arc1d.hpp"

namespace caustiq::oracle {
namespace {

constexpr double PI = 3.14159265358979323846;

// Quanta blocks of constant i + j, ascending; within a block ascending i.
std::size_t pack(int i, int j) {
    const int s = i + j;
    return std::size_t(s) * (s + 1) / 2 + std::size_t(i);
}

std::pair<int, int> unpack(std::size_t k) {
    const int s = int((std::sqrt(8.0 * double(k) + 1.0) - 1.0) / 2.0);
    const std::size_t base = std::size_t(s) * (s + 1) / 2;
    const int i = int(k - base);
    return {i, s - i};
}

/* Normalized Hermite functions h_0..h_n at xi = q sqrt(m w / hbar); the
 * three-term recurrence on the normalized functions stays O(1) at any order
 * (no factorials appear). */
void hermite_row(double q, double omega, double mass, double hbar, int n,
                 std::vector<double>& h) {
    const double a = mass * omega / hbar;
    const double xi = q * std::sqrt(a);
    h.resize(std::size_t(n) + 1);
    h[0] = std::pow(a / PI, 0.25) * std::exp(-0.5 * xi * xi);
    if (n >= 1) h[1] = std::sqrt(2.0) * xi * h[0];
    for (int k = 2; k <= n; ++k)
        h[std::size_t(k)] = xi * std::sqrt(2.0 / k) * h[std::size_t(k) - 1] -
                            std::sqrt((k - 1.0) / k) * h[std::size_t(k) - 2];
}

// One-sided closed-form harmonic action from the left turning point -a.
double harmonic_action(double q, double a, double mass, double omega) {
    const double x = std::clamp(q, -a, a);
    return mass * omega *
           (0.5 * x * std::sqrt(std::max(a * a - x * x, 0.0)) +
            0.5 * a * a * (std::asin(std::clamp(x / a, -1.0, 1.0)) + 0.5 * PI));
}

struct AxisPhase {
    std::vector<double> t, X;
    double t1 = 0.0, t2 = 0.0;

    double at(double q) const {
        const double tc = std::clamp(q, t1, t2);
        auto it = std::lower_bound(t.begin(), t.end(), tc);
        std::size_t j = std::size_t(it - t.begin());
        if (j == 0) j = 1;
        if (j >= t.size()) j = t.size() - 1;
        const double w = (tc - t[j - 1]) / (t[j] - t[j - 1]);
        return X[j - 1] + w * (X[j] - X[j - 1]);
    }
};

// 1-D quantum phase along a coordinate axis, zeroed at the left turning point.
AxisPhase axis_phase(const model::HamiltonianModel& m, caustic::Axis axis,
                     double E, double a, int n_grid) {
    const auto arc = caustic::line_arc(axis, 0.0, -a, a, E, 0.75);
    const auto prob = arc1d::build_arc_problem(m, arc, E, n_grid);
    auto ph = arc1d::left_branch_phase(prob);
    AxisPhase out;
    out.t = prob.grid;
    out.X = std::move(ph.X);
    out.t1 = prob.t1;
    out.t2 = prob.t2;
    const double base = out.at(prob.t1);  // phase origin at the left turning point
    for (double& v : out.X) v -= base;
    return out;
}

}  // namespace

BasisSpec basis_for(const model::HamiltonianModel& m, int n_max) {
    BasisSpec s;
    s.n_max = n_max;
    s.omega_x = m.omega_x;
    s.omega_y = m.omega_y;
    s.mass = m.mass;
    s.hbar = m.hbar;
    return s;
}

std::size_t basis_size(const BasisSpec& spec) {
    return std::size_t(spec.n_max + 1) * std::size_t(spec.n_max + 2) / 2;
}

SymMatrix build_matrix(const model::HamiltonianModel& m,
                       const BasisSpec& spec) {
    if (spec.n_max < 0)
        throw std::invalid_argument("build_matrix: n_max must be >= 0");
    const std::size_t n = basis_size(spec);
    SymMatrix h;
    h.n = n;
    h.a.assign(n * n, 0.0);

    const double sx = spec.hbar / (2.0 * spec.mass * spec.omega_x);
    const double sy = std::sqrt(spec.hbar / (2.0 * spec.mass * spec.omega_y));

    // <i'|x^2|i>, nonzero for i' = i, i+-2
    auto x2 = [&](int ip, int i) {
        if (ip == i) return sx * (2.0 * i + 1.0);
        if (ip == i + 2) return sx * std::sqrt((i + 1.0) * (i + 2.0));
        if (ip == i - 2) return sx * std::sqrt(i * (i - 1.0));
        return 0.0;
    };
    // <j'|y|j>, nonzero for j' = j+-1
    auto y1 = [&](int jp, int j) {
        if (jp == j + 1) return sy * std::sqrt(j + 1.0);
        if (jp == j - 1) return sy * std::sqrt(double(j));
        return 0.0;
    };

    for (std::size_t r = 0; r < n; ++r) {
        const auto [i, j] = unpack(r);
        h.at(r, r) = spec.hbar * (spec.omega_x * (i + 0.5) +
                                  spec.omega_y * (j + 0.5));
        for (int di : {-2, 0, 2}) {
            for (int dj : {-1, 1}) {
                const int ip = i + di, jp = j + dj;
                if (ip < 0 || jp < 0 || ip + jp > spec.n_max) continue;
                const std::size_t c = pack(ip, jp);
                h.at(r, c) = m.lambda * x2(ip, i) * y1(jp, j);
            }
        }
    }
    return h;
}

OracleResult diagonalize(SymMatrix h, const BasisSpec& spec) {
    const std::size_t n = h.n;
    if (n == 0 || h.a.size() != n * n)
        throw std::invalid_argument("diagonalize: malformed matrix");

    std::vector<double> v(n * n, 0.0);  // accumulated rotations, row-major
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double norm = 0.0;
    for (double x : h.a) norm += x * x;
    norm = std::sqrt(norm);
    const double target = 1e-14 * std::max(norm, 1e-300);

    bool converged = false;
    for (int sweep = 0; sweep < 40 && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += h.at(p, q) * h.at(p, q);
        if (std::sqrt(2.0 * off) <= target) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = h.at(p, q);
                if (apq == 0.0) continue;
                const double app = h.at(p, p), aqq = h.at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double hkp = h.at(k, p), hkq = h.at(k, q);
                    h.at(k, p) = c * hkp - s * hkq;
                    h.at(k, q) = s * hkp + c * hkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double hpk = h.at(p, k), hqk = h.at(q, k);
                    h.at(p, k) = c * hpk - s * hqk;
                    h.at(q, k) = s * hpk + c * hqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += h.at(p, q) * h.at(p, q);
        if (std::sqrt(2.0 * off) > target)
            throw DiagonalizationError(
                "diagonalize: 40 sweeps without convergence");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return h.at(a, a) < h.at(b, b);
    });

    OracleResult r;
    r.spec = spec;
    r.eigenvalues.resize(n);
    r.vectors.assign(n, std::vector<double>(n));
    r.labels.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t col = order[k];
        r.eigenvalues[k] = h.at(col, col);
        std::size_t dom = 0;
        double best = -1.0;
        for (std::size_t b = 0; b < n; ++b) {
            r.vectors[k][b] = v[b * n + col];
            if (std::abs(r.vectors[k][b]) > best) {
                best = std::abs(r.vectors[k][b]);
                dom = b;
            }
        }
        if (r.vectors[k][dom] < 0.0)
            for (double& x : r.vectors[k]) x = -x;
        r.labels[k] = unpack(dom);
    }
    return r;
}

double eigenstate_value(const OracleResult& r, std::size_t state,
                        const Vec2& q) {
    if (state >= r.vectors.size())
        throw std::invalid_argument("eigenstate_value: state out of range");
    const BasisSpec& s = r.spec;
    std::vector<double> hx, hy;
    hermite_row(q.x, s.omega_x, s.mass, s.hbar, s.n_max, hx);
    hermite_row(q.y, s.omega_y, s.mass, s.hbar, s.n_max, hy);
    const std::vector<double>& c = r.vectors[state];
    double sum = 0.0;
    for (std::size_t b = 0; b < c.size(); ++b) {
        const auto [i, j] = unpack(b);
        sum += c[b] * hx[std::size_t(i)] * hy[std::size_t(j)];
    }
    return sum;
}

std::vector<double> restrict_to_arc(const OracleResult& r, std::size_t state,
                                    const caustic::ArcFit& arc,
                                    const std::vector<double>& params) {
    std::vector<double> out(params.size());
    double peak = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        out[k] = eigenstate_value(r, state, arc.point(params[k]));
        peak = std::max(peak, std::abs(out[k]));
    }
    if (peak > 0.0)
        for (double& x : out) x /= peak;
    return out;
}

ActionSurface separable_action_surface(const model::HamiltonianModel& m,
                                       double Ex, double Ey, int nx, int ny,
                                       int n_grid) {
    if (m.lambda != 0.0)
        throw std::invalid_argument(
            "separable_action_surface: requires lambda == 0");
    if (!(Ex > 0.0) || !(Ey > 0.0))
        throw std::invalid_argument(
            "separable_action_surface: axis energies must be positive");
    if (nx < 2 || ny < 2)
        throw std::invalid_argument("separable_action_surface: grid too small");

    ActionSurface s;
    s.ax = std::sqrt(2.0 * Ex / m.mass) / m.omega_x;
    s.ay = std::sqrt(2.0 * Ey / m.mass) / m.omega_y;

    const AxisPhase px =
        axis_phase(m, caustic::Axis::y_of_x, Ex, s.ax, n_grid);
    const AxisPhase py =
        axis_phase(m, caustic::Axis::x_of_y, Ey, s.ay, n_grid);

    s.xs.resize(std::size_t(nx));
    s.ys.resize(std::size_t(ny));
    for (int i = 0; i < nx; ++i)
        s.xs[std::size_t(i)] = -s.ax + 2.0 * s.ax * i / (nx - 1);
    for (int i = 0; i < ny; ++i)
        s.ys[std::size_t(i)] = -s.ay + 2.0 * s.ay * i / (ny - 1);

    s.X.resize(std::size_t(nx) * std::size_t(ny));
    s.Wc.resize(std::size_t(nx) * std::size_t(ny));
    const auto nxs = std::size_t(nx);
    std::vector<double> Xx(nxs), Wx(nxs);
    for (int i = 0; i < nx; ++i) {
        Xx[std::size_t(i)] = px.at(s.xs[std::size_t(i)]);
        Wx[std::size_t(i)] =
            harmonic_action(s.xs[std::size_t(i)], s.ax, m.mass, m.omega_x);
    }
    for (int iy = 0; iy < ny; ++iy) {
        const double Xy = py.at(s.ys[std::size_t(iy)]);
        const double Wy =
            harmonic_action(s.ys[std::size_t(iy)], s.ay, m.mass, m.omega_y);
        for (int ix = 0; ix < nx; ++ix) {
            const std::size_t k =
                std::size_t(iy) * std::size_t(nx) + std::size_t(ix);
            s.X[k] = Xx[std::size_t(ix)] + Xy;
            s.Wc[k] = Wx[std::size_t(ix)] + Wy;
        }
    }
    return s;
}

ActionSurface separable_action_surface(const model::HamiltonianModel& m,
                                       int mq, int nq, int nx, int ny,
                                       int n_grid) {
    if (mq < 0 || nq < 0)
        throw std::invalid_argument(
            "separable_action_surface: negative quantum number");
    return separable_action_surface(m, m.hbar * m.omega_x * (mq + 0.5),
                                    m.hbar * m.omega_y * (nq + 0.5), nx, ny,
                                    n_grid);
}

}  // namespace caustiq::oracle
