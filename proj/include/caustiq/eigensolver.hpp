#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "caustiq/caustic.hpp"
#include "caustiq/model.hpp"

namespace caustiq::eigensolver {

struct PipelineOptions {
    caustic::BuildOptions build;  // see constructor below
    int n_grid = 2000;            // arc problem nodes
    // Convergence tolerance on the pair-averaged quantization residuals, in
    // half-wave units (equivalently, wave-matching angle for the decoupled
    // system, where the two notions coincide at the root).
    double defect_tol = 1e-6;
    // Wave-side health bound on the converged family: opposite arcs split
    // symmetrically about their pair mean by an O(lambda) integrability
    // defect that grows with the transverse excitation (~5e-2 rad for the
    // (0,4) state at lambda = -0.11); a split beyond this means the family
    // is not a quantized torus.
    double consistency_tol = 0.15;
    int max_iter = 60;
    double max_step_e = 0.08;  // damping caps for one quasi-Newton step
    double max_step_s = 0.08;
    double fd_step = 2e-4;   // secant displacement for the Jacobian estimate
    double e_max_guard = 8.6;  // scan refusal threshold (escape channels open)

    PipelineOptions() {
        // The left/right arcs develop a high-curvature waist as E grows;
        // degree 8 stalls near 1e-2 there.  Degree 12 keeps the arc action
        // error ~1e-3 while the loose gate still catches partition failures.
        build.fit_degree = 12;
        build.fit_residual_tol = 2e-2;
    }
};

/** One pipeline evaluation at trial (E, s): s is the polar angle of the ray
 *  from the origin whose U = E point seeds the trajectory.  Failures of any
 *  pipeline stage are embedded, never thrown. */
struct FamilyTrial {
    double energy = 0.0;
    double s = 0.0;
    bool valid = false;
    std::string error;  // failure description when !valid
    caustic::Caustic caustic;
    std::array<double, 4> arc_defects{};
    std::array<int, 4> arc_nodes{};
};

struct SpectrumEntry {
    double energy = 0.0;
    int m = 0;  // node count on the top/bottom arc pair (x excitation)
    int n = 0;  // node count on the left/right arc pair (y excitation)
    double vertex_s = 0.0;
    std::array<double, 4> defects{};
    std::array<double, 4> ebk_residuals{};  // action/(hbar pi) - (nodes + 1/2)
    caustic::Caustic caustic;
};

struct SearchError : std::runtime_error {
    std::string trace;
    SearchError(const std::string& msg, std::string tr)
        : std::runtime_error(msg), trace(std::move(tr)) {}
};
/// Iteration cap exceeded without meeting the defect tolerance.
struct NoConvergenceError : SearchError {
    using SearchError::SearchError;
};
/// Defects small but node counts alternating: two states straddled.
struct StraddlingStatesError : SearchError {
    using SearchError::SearchError;
};
/// Opposite arcs disagree on node counts at convergence.
struct InconsistentFamilyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Runs classical -> caustic -> four arc solves at trial (E, s).  The defect
 *  of arc k is the signed matching angle of its two decaying branches; on a
 *  quantized family the defects are small and each opposite-arc pair splits
 *  symmetrically about its mean. */
FamilyTrial evaluate_trial(const model::HamiltonianModel& m, double E, double s,
                           const PipelineOptions& opt = {});

/// (m, n) from a converged trial; throws InconsistentFamilyError on mismatch.
std::pair<int, int> classify_nodes(const FamilyTrial& trial);

/** Root search for one quantized family.
 *
 *  The equations are the pair-averaged torus action residuals: left/right
 *  arc actions vs (n + 1/2) half-waves, top/bottom vs (m + 1/2).  They are
 *  smooth in (E, s), monotone in the energy share of each degree of
 *  freedom, and independent of the arc continuations, so the target state
 *  owns the full basin.  (Wave-matching defects are unsuitable equations:
 *  they wrap by pi per node between states, and their roots inherit an
 *  O(1e-2) bias from the invented forbidden-region continuation of each
 *  arc.)  Solved by damped secant Newton with a halving line search.
 *
 *  At the root the four 1-d wave problems are solved once; the family is
 *  accepted when every arc carries the target node count and the matching
 *  defects stay bounded with opposite-arc splits <= consistency_tol.
 *
 *  `target` fixes (m, n); when absent the nearest action lattice point seen
 *  from the seed is used. */
SpectrumEntry find_state(const model::HamiltonianModel& m, double e_init,
                         double s_init,
                         std::optional<std::pair<int, int>> target = {},
                         const PipelineOptions& opt = {});

struct FailedSeed {
    int m = 0, n = 0;
    double e_seed = 0.0;
    std::string message;
};

struct ScanReport {
    std::vector<SpectrumEntry> entries;  // ascending energy, unique (m, n)
    std::vector<FailedSeed> failures;
};

/** Seeds find_state from every decoupled level
 *  hbar w_x (m+1/2) + hbar w_y (n+1/2) <= e_max, with s aimed at the
 *  corresponding rectangle corner.  Duplicate converged states merge by
 *  (m, n) (energy agreement within 1e-4 expected); per-seed failures are
 *  recorded and the scan continues.  e_max above the guard is refused. */
ScanReport scan_spectrum(const model::HamiltonianModel& m, double e_max,
                         const PipelineOptions& opt = {});

}  // namespace caustiq::eigensolver
