#include "caustiq/model.hpp"

#include <cmath>
#include <string>

namespace caustiq::model {

namespace {
// relative accuracy of the level-set bisection
const double EQUIPOTENTIAL_TOL = 1e-12;
// rays are abandoned past this radius
const double RAY_MAX = 1e3;
}  // namespace

void HamiltonianModel::validate() const {
    if (!(omega_x > 0.0) || !(omega_y > 0.0))
        throw std::invalid_argument("model: frequencies must be positive");
    if (!(mass > 0.0))
        throw std::invalid_argument("model: mass must be positive");
    if (!(hbar > 0.0))
        throw std::invalid_argument("model: hbar must be positive");
    if (!std::isfinite(lambda))
        throw std::invalid_argument("model: coupling must be finite");
}

double potential(const HamiltonianModel& m, const Vec2& q) {
    return 0.5 * m.mass * m.omega_x * m.omega_x * q.x * q.x +
           0.5 * m.mass * m.omega_y * m.omega_y * q.y * q.y +
           m.lambda * q.x * q.x * q.y;
}

Vec2 gradient(const HamiltonianModel& m, const Vec2& q) {
    return {m.mass * m.omega_x * m.omega_x * q.x + 2.0 * m.lambda * q.x * q.y,
            m.mass * m.omega_y * m.omega_y * q.y + m.lambda * q.x * q.x};
}

SymMat2 hessian(const HamiltonianModel& m, const Vec2& q) {
    SymMat2 h;
    h.xx = m.mass * m.omega_x * m.omega_x + 2.0 * m.lambda * q.y;
    h.xy = 2.0 * m.lambda * q.x;
    h.yy = m.mass * m.omega_y * m.omega_y;
    return h;
}

double hamiltonian(const HamiltonianModel& m, const PhasePoint& s) {
    return dot(s.p, s.p) / (2.0 * m.mass) + potential(m, s.q);
}

double separable_spectrum(const HamiltonianModel& model, int m, int n) {
    if (model.lambda != 0.0)
        throw std::invalid_argument(
            "separable_spectrum: only defined for the uncoupled model");
    if (m < 0 || n < 0)
        throw std::invalid_argument(
            "separable_spectrum: quantum numbers must be non-negative");
    model.validate();
    return model.hbar * model.omega_x * (m + 0.5) +
           model.hbar * model.omega_y * (n + 0.5);
}

Vec2 equipotential_point(const HamiltonianModel& m, double E,
                         const Vec2& direction) {
    m.validate();
    if (!(E > 0.0))
        throw std::invalid_argument("equipotential_point: energy must be positive");
    const double dn = norm(direction);
    if (!(dn > 0.0))
        throw std::invalid_argument("equipotential_point: direction must be nonzero");
    const Vec2 dir = direction * (1.0 / dn);

    double r_lo = 0.0, r_hi = 1.0;
    while (potential(m, dir * r_hi) < E) {
        r_lo = r_hi;
        r_hi *= 1.5;
        if (r_hi > RAY_MAX)
            throw UnboundedDirectionError(
                "equipotential_point: no U = E crossing on ray within r = " +
                std::to_string(RAY_MAX));
    }
    double r = r_hi;
    for (int i = 0; i < 200; ++i) {
        r = 0.5 * (r_lo + r_hi);
        const double u = potential(m, dir * r);
        if (std::fabs(u - E) <= EQUIPOTENTIAL_TOL * E)
            break;
        (u < E ? r_lo : r_hi) = r;
    }
    return dir * r;
}

}  // namespace caustiq::model
