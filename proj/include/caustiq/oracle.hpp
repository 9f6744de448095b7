#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "caustiq/caustic.hpp"
#include "caustiq/geometry.hpp"
#include "caustiq/model.hpp"

namespace caustiq::oracle {

/** Product harmonic-oscillator basis |i,j> truncated by total quanta
 *  i + j <= n_max.  With the oscillator frequencies equal to the model's own
 *  the quadratic part of the Hamiltonian is diagonal and only the cubic
 *  coupling contributes off-diagonal elements. */
struct BasisSpec {
    int n_max = 30;
    double omega_x = 1.0;
    double omega_y = 1.0;
    double mass = 1.0;
    double hbar = 1.0;
};

/// Basis matched to the model's frequencies, mass and hbar.
BasisSpec basis_for(const model::HamiltonianModel& m, int n_max = 30);

std::size_t basis_size(const BasisSpec& spec);  // (n_max+1)(n_max+2)/2

/// Dense symmetric matrix, full row-major storage.
struct SymMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    double& at(std::size_t r, std::size_t c) { return a[r * n + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * n + c]; }
};

/** Hamiltonian over the truncated basis.  Diagonal
 *  hbar w_x (i+1/2) + hbar w_y (j+1/2); the x^2 y coupling links (i,j) to
 *  (i, j+-1) and (i+-2, j+-1) through the tridiagonal-in-quanta ladder
 *  elements of x^2 and y.  Exactly symmetric by construction. */
SymMatrix build_matrix(const model::HamiltonianModel& m, const BasisSpec& spec);

struct DiagonalizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Full spectrum over the basis: `eigenvalues` ascending, `vectors[k]` the
 *  orthonormal coefficients of state k, `labels[k]` the (i,j) quanta of its
 *  dominant component (sign-fixed positive). */
struct OracleResult {
    BasisSpec spec;
    std::vector<double> eigenvalues;
    std::vector<std::vector<double>> vectors;
    std::vector<std::pair<int, int>> labels;
};

/** Cyclic Jacobi rotations, deterministic sweep order, until the
 *  off-diagonal Frobenius norm drops below 1e-14 of the matrix norm.
 *  Throws DiagonalizationError when 40 sweeps do not suffice. */
OracleResult diagonalize(SymMatrix h, const BasisSpec& spec);

/// psi_k(q) summed from normalized product Hermite functions.
double eigenstate_value(const OracleResult& r, std::size_t state,
                        const Vec2& q);

/** Eigenstate sampled along a fitted arc at the given parameter values,
 *  normalized to unit peak |amplitude| (all-zero profiles returned as-is). */
std::vector<double> restrict_to_arc(const OracleResult& r, std::size_t state,
                                    const caustic::ArcFit& arc,
                                    const std::vector<double>& params);

/** Separable-limit action sheets on the classical rectangle
 *  [-ax, ax] x [-ay, ay] for axis energies (Ex, Ey): X from the 1-D phase
 *  construction on unit-scale-factor line arcs, W_C the closed-form harmonic
 *  actions; both vanish at the lower-left corner.  Row-major iy*nx + ix. */
struct ActionSurface {
    std::vector<double> xs, ys;
    std::vector<double> X, Wc;
    double ax = 0.0, ay = 0.0;
};

ActionSurface separable_action_surface(const model::HamiltonianModel& m,
                                       double Ex, double Ey, int nx, int ny,
                                       int n_grid = 4000);

/// Same surface for the separable eigenstate (mq, nq) at the model's hbar.
ActionSurface separable_action_surface(const model::HamiltonianModel& m,
                                       int mq, int nq, int nx, int ny,
                                       int n_grid = 4000);

}  // namespace caustiq::oracle
