#pragma once

#include <stdexcept>
#include <vector>

#include "caustiq/model.hpp"

namespace caustiq::classical {

/** Fixed-step phase-space history of a single orbit.  `energy` is the value
 *  of H at the start point; every retained sample has drifted from it by no
 *  more than 1e-9 max(1, E). */
struct Trajectory {
    double energy = 0.0;
    double step = 0.0;
    double mass = 1.0;
    std::vector<double> times;
    std::vector<model::PhasePoint> states;
};

/** Two deviation fields along a trajectory, released from the same point
 *  with dq(0) = 0 and unit initial velocities e1, e2, propagated by the
 *  linearised equation  d2(dq)/dt2 = -Hess(U) dq / m.  `wronskian` holds the
 *  exterior product dq1 ^ dq2 per sample; its zeros away from t = 0 mark
 *  points conjugate to the start point. */
struct JacobiBundle {
    std::vector<Vec2> dq1, dv1, dq2, dv2;
    std::vector<double> wronskian;
};

struct CausticPoint {
    double t = 0.0;
    Vec2 position;
    Vec2 momentum;  // momentum of the touching trajectory at the point
};

struct CausticPointCloud {
    double energy = 0.0;
    std::vector<CausticPoint> points;
};

struct StepTooLargeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EscapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientIntegrationTimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Integrates Hamilton's equations with a fixed-step fourth-order symplectic
 *  composition.  Aborts with StepTooLargeError when the energy drift bound is
 *  violated and with EscapeError when the orbit leaves the bounding box
 *  |x|, |y| <= escape_radius. */
Trajectory integrate_trajectory(const model::HamiltonianModel& m,
                                const model::PhasePoint& start, double t_max,
                                double step, double escape_radius = 50.0);

/** Deviation fields along (a re-run of) an existing trajectory, sampled on
 *  the same time grid. */
JacobiBundle integrate_jacobi(const model::HamiltonianModel& m,
                              const Trajectory& traj);

/// One pass producing both histories; the pipeline's fast path.
void integrate_with_jacobi(const model::HamiltonianModel& m,
                           const model::PhasePoint& start, double t_max,
                           double step, double escape_radius, Trajectory& traj,
                           JacobiBundle& jac);

/** Sign changes of the Wronskian, refined to 1e-10 in t by bisection on a
 *  cubic Hermite interpolant; the trivial zero at t = 0 is excluded.  Throws
 *  InsufficientIntegrationTimeError when no zero crossing is found. */
CausticPointCloud detect_caustic_points(const JacobiBundle& jac,
                                        const Trajectory& traj);

/// Cubic-Hermite interpolated configuration at time t (clamped to the range).
Vec2 position_at(const Trajectory& traj, double t);

/// Interpolated momentum at time t (quadratic through neighbouring samples).
Vec2 momentum_at(const Trajectory& traj, double t);

/** Brute-force envelope check: the orbit is rasterised onto a grid and the
 *  boundary cells of the covered region are returned.  Independent of the
 *  deviation-field construction. */
struct EnvelopeBoundary {
    std::vector<Vec2> points;  // centres of boundary cells
    double cell = 0.0;
    bool undercovered = false;  // interior pinholes detected
};

EnvelopeBoundary envelope_oracle(const Trajectory& traj, int resolution);

/// Symmetric Hausdorff distance between two point sets.
double hausdorff_distance(const std::vector<Vec2>& a,
                          const std::vector<Vec2>& b);

}  // namespace caustiq::classical
