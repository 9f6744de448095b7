#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "caustiq/caustic.hpp"
#include "caustiq/model.hpp"

namespace caustiq::arc1d {

/** Discretised 1-D problem on one (extended) arc:
 *
 *      psi'' - (g'/g) psi' + (2m/hbar^2)(E - U_k) g^2 psi = 0,
 *
 *  with g the arc scale factor sqrt(1 + f'^2) and U_k the potential along
 *  the arc.  The grid is uniform within each of the three pieces (left
 *  extension, domain, right extension) with nodes exactly on the joints,
 *  where the straight continuation kinks g'. */
struct ArcProblem {
    caustic::ArcFit arc;
    model::HamiltonianModel m;
    double energy = 0.0;
    std::vector<double> grid;
    std::vector<double> g;    // scale factor at grid nodes
    std::vector<double> u_k;  // arc potential at grid nodes
    double t1 = 0.0, t2 = 0.0;          // turning points, U_k = E
    std::size_t i1 = 0, i2 = 0;         // grid nodes strictly inside (t1,t2)
    std::size_t i_dom_lo = 0, i_dom_hi = 0;  // joint node indices
};

/** Two-sided shooting result.  `psi` joins the left- and right-decaying
 *  branches at grid node `i_match` (least-squares phase-space match, valid
 *  off eigenvalues too) and is L2-normalised with weight g over the
 *  oscillatory segment.  `defect` is the sine of the phase-space angle
 *  between the two branches at the match point: zero exactly when they fuse
 *  into one regular solution, sign usable for bracketing in E.
 *
 *  X, Y, psi_aux, deltaX, w0 and phase_pinned are filled by
 *  quantum_action(). */
struct ArcSolution {
    std::vector<double> psi;
    std::vector<double> psi_prime;
    std::vector<double> psi_aux;
    std::vector<double> X, Y;
    int nodes = 0;
    double deltaX = 0.0;  // X(t2) - X(t1)
    double defect = 0.0;
    double norm = 0.0;  // L2 norm absorbed into psi
    double w0 = 0.0;    // (u v' - v u')/g invariant of the phase pair
    bool phase_pinned = false;
    std::size_t i_match = 0;
};

/// Phase construction output for a caller-chosen branch (see left_branch_phase).
struct PhaseData {
    std::vector<double> X, Y, aux;
    double deltaX = 0.0;
    double w0 = 0.0;
    bool pinned = false;
};

struct NoOscillatoryRegionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExtensionTooShortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Samples g and U_k over domain plus extensions (n_grid >= 200 total nodes)
 *  and locates the two turning points by bisection.  Throws
 *  NoOscillatoryRegionError when U_k < E has no interior segment or a
 *  turning point falls outside the extended span. */
ArcProblem build_arc_problem(const model::HamiltonianModel& m,
                             const caustic::ArcFit& arc, double E,
                             int n_grid);

/** Fixed-step RK4 shooting from both extension ends with locally decaying
 *  initial data psi = eps, psi' = +-kappa eps, kappa = g sqrt(2m(U_k-E))/hbar;
 *  overflow is renormalised away.  Throws ExtensionTooShortError when an
 *  extension end is not classically forbidden. */
ArcSolution solve_arc(const ArcProblem& prob);

/** Reconstructs the complex phase from the solved wavefunction: an auxiliary
 *  solution v is pinned to v = -psi at t1 and v = +psi at t2, which makes
 *  X = hbar arg(psi + i v) satisfy psi = R sin(X/hbar + pi/4) identically
 *  and deltaX = hbar pi (windings + 1/2) exactly.  If the two-point pinning
 *  is inconsistent with a forward-winding phase (off eigenvalues), only t1
 *  is pinned and phase_pinned is left false.  Fills X, Y, psi_aux, deltaX,
 *  w0, phase_pinned; may flip the stored psi sign so psi(t1) > 0. */
void quantum_action(ArcSolution& sol, const ArcProblem& prob);

/** Same phase construction applied to the left-decaying branch alone, which
 *  stays a smooth solution at any E (the glued psi has a derivative kink at
 *  the match point off eigenvalues).  Used for hbar scans at fixed E. */
PhaseData left_branch_phase(const ArcProblem& prob);

/** Max relative residual of the third-order real-phase identity
 *
 *    3 hb^2 g'^2 X'^2 + 4 g^2 X'^4 - 3 hb^2 g^2 X''^2 + 2 hb^2 g^2 X' X'''
 *      - 2 hb^2 g g'' X'^2  =  8 m (E - U_k) g^4 X'^2
 *
 *  over the inner 60% of the oscillatory segment, with X', X'', X''' from
 *  centered second-order stencils on the given samples. */
double qhje_residual(const std::vector<double>& X, const ArcProblem& prob);

/// Same identity evaluated at one point from caller-supplied derivatives.
double qhje_residual_at(const ArcProblem& prob, double t, double Xp,
                        double Xpp, double Xppp, double hbar);

/** Rebuilds A sin(X/hbar + pi/4) / sqrt(X'/g) with least-squares amplitude A
 *  and returns max |rebuilt - psi| / max |psi| over the oscillatory segment. */
double wkb_form_check(const ArcSolution& sol, const ArcProblem& prob);

/// Classical phase W_C(t) = integral from t1 of sqrt(2m(E-U_k)) g dt'.
double classical_action(const ArcProblem& prob, double t);

}  // namespace caustiq::arc1d
