#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "caustiq/classical.hpp"
#include "caustiq/model.hpp"

namespace caustiq::caustic {

enum class Axis { y_of_x, x_of_y };

/// One of the four points where the caustic touches the equipotential U = E.
struct Vertex {
    int index = 0;  // 1 = lower-left, then 2,3,4 clockwise
    Vec2 position;
    double residual = 0.0;  // |U(position) - E|
};

/** One caustic arc in graph form.  The dependent coordinate is a polynomial
 *  in the scaled parameter u = (t - center)/scale on [dom_lo, dom_hi], and a
 *  tangent line beyond the domain (the straight continuation that hosts the
 *  exterior decaying solutions).  [ext_lo, ext_hi] contains the domain. */
struct ArcFit {
    int index = 0;  // 1 = left, 2 = top, 3 = right, 4 = bottom
    Axis axis = Axis::y_of_x;
    std::vector<double> coefficients;  // ascending powers of u
    double center = 0.0, scale = 1.0;
    double dom_lo = 0.0, dom_hi = 0.0;
    double ext_lo = 0.0, ext_hi = 0.0;
    double fit_residual = 0.0;  // max orthogonal deviation of kept points
    double energy = 0.0;

    double value(double t) const;
    double deriv(double t) const;
    double second_deriv(double t) const;
    double third_deriv(double t) const;
    Vec2 point(double t) const;
    double scale_factor(double t) const;  // sqrt(1 + f'(t)^2)
};

struct Caustic {
    double energy = 0.0;
    std::array<Vertex, 4> vertices;
    std::array<ArcFit, 4> arcs;
    bool clockwise = true;  // orientation of the stored vertex sequence
};

struct DegenerateFamilyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FitFailureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyWellError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BuildOptions {
    double step = 0.002;
    double t_max = 400.0;
    double escape_radius = 50.0;
    int fit_degree = 8;
    double fit_residual_tol = 1e-3;
    double kappa_target = 10.0;   // decay exponent to accumulate per extension
    double extension_cap = 3.0;   // max extension length, in domain lengths
};

/// U restricted to the arc: U_k(t) = U(point on arc at parameter t).
double arc_potential(const model::HamiltonianModel& m, const ArcFit& arc,
                     double t);

/** Clusters cloud points lying close to the equipotential and returns the
 *  four cluster centroids projected back onto U = E, ordered lower-left
 *  first then clockwise.  The closeness tolerance starts at 1e-4 E and is
 *  relaxed stepwise until exactly four clusters appear (sparse clouds from
 *  near-periodic orbits need the looser rungs). */
std::array<Vertex, 4> extract_vertices(const classical::CausticPointCloud& cloud,
                                       const model::HamiltonianModel& m,
                                       double E);

/** Partitions the cloud among the four sides of the vertex quadrilateral and
 *  least-squares fits one polynomial graph per side (graph axis chosen by
 *  smaller coordinate spread, ties broken toward y = f(x)).  Points far off
 *  a first-pass fit are dropped before the final fit (mis-partitioned
 *  samples near vertices).  Residual above `residual_tol` is an error. */
std::array<ArcFit, 4> fit_arcs(const classical::CausticPointCloud& cloud,
                               const std::array<Vertex, 4>& vertices,
                               int degree, double residual_tol = 1e-3);

/** Grows the straight continuations beyond both domain ends until the
 *  accumulated decay exponent  ∫ g sqrt(2m(U_k - E))/hbar dt  reaches
 *  `kappa_target`, stopping early at `cap_factor` domain lengths or where
 *  U_k stops increasing (escape directions of the coupled potential). */
void extend_arc(const model::HamiltonianModel& m, ArcFit& arc,
                double kappa_target, double cap_factor);

/** Full construction at trial energy E: launch a trajectory from rest at the
 *  equipotential point in direction `start_angle`, detect conjugate points,
 *  extract vertices, fit arcs, refine vertices to the exact U_k = E
 *  crossings of the fitted arcs (two rounds), and size the extensions. */
Caustic build_caustic(const model::HamiltonianModel& m, double E,
                      double start_angle, const BuildOptions& opt = {});

/** Classical boundary action w_C(s) = ∫ sqrt(2m(E-U)) dl over the first s
 *  arc-length units of the caustic, traversed counterclockwise from
 *  `start_vertex`.  Fit overshoot past the equipotential is clamped to zero
 *  integrand and reported through `clamped` when non-null. */
double boundary_action(const model::HamiltonianModel& m, const Caustic& c,
                       int start_vertex, double s, bool* clamped = nullptr);

/// Total arc length of the caustic.
double perimeter(const Caustic& c);

/** Arc action ∫ sqrt(2m(E - U_k)) g_k dt between the two U_k = E crossings;
 *  the semiclassical value is hbar pi (nodes + 1/2). */
double ebk_integral(const model::HamiltonianModel& m, const ArcFit& arc);

/// Straight-segment arc (separable limit and synthetic 1-D problems).
ArcFit line_arc(Axis axis, double level, double lo, double hi, double energy,
                double ext_margin = 0.0);

}  // namespace caustiq::caustic
