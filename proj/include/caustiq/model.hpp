#pragma once

#include <stdexcept>

#include "caustiq/geometry.hpp"

namespace caustiq::model {

/** Parameters of the coupled-oscillator Hamiltonian
 *
 *      H = (p_x^2 + p_y^2) / (2 m)
 *        + m w_x^2 x^2 / 2 + m w_y^2 y^2 / 2 + lambda x^2 y,
 *
 *  a pair of harmonic modes with a cubic coupling that preserves the
 *  x -> -x symmetry.  lambda = 0 is the exactly separable limit used for
 *  cross checks throughout.  omega_x and omega_y are angular frequencies. */
struct HamiltonianModel {
    double omega_x = 1.0;
    double omega_y = 1.0;
    double lambda = 0.0;
    double mass = 1.0;
    double hbar = 1.0;

    void validate() const;  // throws std::invalid_argument
};

struct PhasePoint {
    Vec2 q;
    Vec2 p;
};

double potential(const HamiltonianModel& m, const Vec2& q);
Vec2 gradient(const HamiltonianModel& m, const Vec2& q);
SymMat2 hessian(const HamiltonianModel& m, const Vec2& q);
double hamiltonian(const HamiltonianModel& m, const PhasePoint& s);

/** Exact eigenvalue of the lambda = 0 limit,
 *  hbar w_x (m + 1/2) + hbar w_y (n + 1/2).  Rejects lambda != 0. */
double separable_spectrum(const HamiltonianModel& model, int m, int n);

struct UnboundedDirectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** First point with U = E on the ray from the origin along `direction`.
 *  Bisected until |U - E| <= 1e-12 E; throws UnboundedDirectionError when
 *  the ray leaves the well without crossing the level set. */
Vec2 equipotential_point(const HamiltonianModel& m, double E,
                         const Vec2& direction);

}  // namespace caustiq::model
