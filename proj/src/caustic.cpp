#include "caustiq/caustic.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "caustiq/numeric.hpp"

namespace caustiq::caustic {
namespace {

constexpr double PI = 3.14159265358979323846;

double scaled(const ArcFit& arc, double t) {
    return (t - arc.center) / arc.scale;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    const Vec2 proj = a + ab * s;
    return norm(p - proj);
}

/* Vertex k sits between two arcs; this table records which domain end of
 * each adjacent arc lands on it (arc 1 runs v1->v2, arc 2 v2->v3 by
 * increasing parameter; arcs 3 and 4 run v4->v3 and v1->v4). */
struct VertexEnds {
    int arc_a, arc_b;  // 0-based arc indices
    bool hi_a, hi_b;   // true: vertex at dom_hi of that arc
};
constexpr VertexEnds VERTEX_ENDS[4] = {
    {0, 3, false, false},  // v1: arc1 lo, arc4 lo
    {0, 1, true, false},   // v2: arc1 hi, arc2 lo
    {1, 2, true, true},    // v3: arc2 hi, arc3 hi
    {2, 3, false, true},   // v4: arc3 lo, arc4 hi
};

void order_vertices(std::array<Vertex, 4>& v) {
    // Lower-left first (minimal x+y), then clockwise around the centroid.
    Vec2 c{0.0, 0.0};
    for (const auto& vk : v) c += vk.position * 0.25;
    std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) {
        return a.position.x + a.position.y < b.position.x + b.position.y;
    });
    const Vertex first = v[0];
    const double th1 = std::atan2(first.position.y - c.y, first.position.x - c.x);
    auto cw_key = [&](const Vertex& a) {
        const double th = std::atan2(a.position.y - c.y, a.position.x - c.x);
        return std::fmod(th1 - th + 4.0 * PI, 2.0 * PI);
    };
    std::sort(v.begin() + 1, v.end(), [&](const Vertex& a, const Vertex& b) {
        return cw_key(a) < cw_key(b);
    });
    for (int k = 0; k < 4; ++k) v[k].index = k + 1;
}

// Newton projection onto the equipotential along the local gradient.
Vec2 project_to_equipotential(const model::HamiltonianModel& m, Vec2 q,
                              double E) {
    for (int it = 0; it < 4; ++it) {
        const double r = model::potential(m, q) - E;
        const Vec2 grad = model::gradient(m, q);
        const double g2 = dot(grad, grad);
        if (g2 == 0.0) break;
        q -= grad * (r / g2);
    }
    return q;
}

struct FitData {
    std::vector<double> t, dep;
};

double polyfit_residual_scale(const std::vector<double>& r) {
    std::vector<double> dev(r.size());
    const double med = numeric::median(r);
    for (std::size_t i = 0; i < r.size(); ++i) dev[i] = std::abs(r[i] - med);
    return 1.4826 * numeric::median(dev);
}

ArcFit fit_one_arc(const FitData& data, int arc_index, Axis axis,
                   double dom_lo, double dom_hi, int degree,
                   double residual_tol, double energy) {
    ArcFit arc;
    arc.index = arc_index;
    arc.axis = axis;
    arc.energy = energy;
    arc.dom_lo = dom_lo;
    arc.dom_hi = dom_hi;
    arc.center = 0.5 * (dom_lo + dom_hi);
    arc.scale = 0.5 * (dom_hi - dom_lo);
    if (!(arc.scale > 0.0))
        throw FitFailureError("arc " + std::to_string(arc_index) +
                              ": degenerate domain");

    const std::size_t n = data.t.size();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = scaled(arc, data.t[i]);

    // The usable degree is limited by the number of distinct abscissae
    // (near-periodic orbits revisit the same handful of caustic points).
    std::vector<double> su = u;
    std::sort(su.begin(), su.end());
    int distinct = 1;
    for (std::size_t i = 1; i < n; ++i)
        if (su[i] - su[i - 1] > 1e-6) ++distinct;
    const int deg_cap =
        std::min(degree, std::min<int>(distinct - 1, static_cast<int>(n) - 1));

    auto orth_residual = [&](const std::vector<double>& c,
                             const std::vector<double>& uu,
                             const std::vector<double>& dd) {
        double worst = 0.0;
        for (std::size_t i = 0; i < uu.size(); ++i) {
            const double r = dd[i] - numeric::polyval(c, uu[i]);
            const double fp = numeric::polyval_d1(c, uu[i]) / arc.scale;
            worst = std::max(worst, std::abs(r) / std::hypot(1.0, fp));
        }
        return worst;
    };

    // Pass 1 at full degree exposes outliers against the arc shape:
    // mis-partitioned vertex-area samples belong to the neighbouring,
    // nearly perpendicular arc and sit far off this one.
    std::vector<double> coeff = numeric::polyfit(u, data.dep, deg_cap);
    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i)
        res[i] = data.dep[i] - numeric::polyval(coeff, u[i]);
    const double med = numeric::median(res);
    const double sigma = polyfit_residual_scale(res) + 1e-14;
    std::vector<double> ku, kd;
    ku.reserve(n);
    kd.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(res[i] - med) <= 8.0 * sigma) {
            ku.push_back(u[i]);
            kd.push_back(data.dep[i]);
        }
    }
    const std::size_t min_keep = std::max<std::size_t>(deg_cap + 1, (6 * n) / 10);
    if (ku.size() < min_keep) {
        // trim rejected too much; keep the best points by deviation instead
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(res[a] - med) < std::abs(res[b] - med);
        });
        ku.clear();
        kd.clear();
        for (std::size_t j = 0; j < std::min(n, std::max<std::size_t>(
                                                    min_keep, (8 * n) / 10));
             ++j) {
            ku.push_back(u[idx[j]]);
            kd.push_back(data.dep[idx[j]]);
        }
    }

    // Pass 2: smallest degree already fitting at the cloud noise floor.
    // Separable-limit arcs are exact constants; forcing high degree there
    // would only chase integrator noise with an ill-conditioned system.
    double dep_scale = 1.0;
    for (double d : kd) dep_scale = std::max(dep_scale, std::abs(d));
    const double noise_floor = 1e-8 * dep_scale;
    double worst = 0.0;
    for (int d = 0; d <= deg_cap; ++d) {
        std::vector<double> c = numeric::polyfit(ku, kd, d);
        worst = orth_residual(c, ku, kd);
        coeff = std::move(c);
        if (worst <= noise_floor) break;
    }

    arc.coefficients = coeff;
    arc.ext_lo = dom_lo;
    arc.ext_hi = dom_hi;
    arc.fit_residual = worst;
    if (worst > residual_tol)
        throw FitFailureError("arc " + std::to_string(arc_index) +
                              ": fit residual " + std::to_string(worst) +
                              " exceeds " + std::to_string(residual_tol) +
                              " at degree " + std::to_string(deg_cap));
    return arc;
}

/* Locates the U_k = E crossing of an arc near the domain end `hi_end`,
 * searching outward up to `reach` domain lengths.  Inside the domain
 * E - U_k > 0; past the turning point it goes negative. */
double turning_point_near_end(const model::HamiltonianModel& m,
                              const ArcFit& arc, bool hi_end, double E,
                              double reach) {
    const double L = arc.dom_hi - arc.dom_lo;
    const double dir = hi_end ? 1.0 : -1.0;
    const double t_end = hi_end ? arc.dom_hi : arc.dom_lo;
    auto h = [&](double t) { return E - arc_potential(m, arc, t); };

    const double dt = 0.02 * L;
    double t_in = t_end, t_out = t_end;
    if (h(t_end) > 0.0) {
        // end still inside: march outward for the sign change
        bool found = false;
        for (int j = 1; j <= static_cast<int>(reach / 0.02) + 1; ++j) {
            t_out = t_end + dir * j * dt;
            if (h(t_out) <= 0.0) {
                t_in = t_end + dir * (j - 1) * dt;
                found = true;
                break;
            }
        }
        if (!found)
            throw FitFailureError(
                "arc " + std::to_string(arc.index) +
                ": no turning point within the extrapolation reach");
    } else {
        // end already outside: march inward
        bool found = false;
        for (int j = 1; j <= 50; ++j) {
            t_in = t_end - dir * j * dt;
            if (h(t_in) > 0.0) {
                t_out = t_end - dir * (j - 1) * dt;
                found = true;
                break;
            }
        }
        if (!found)
            throw FitFailureError("arc " + std::to_string(arc.index) +
                                  ": no classically allowed interior");
    }
    return numeric::bisect(h, t_in, t_out,
                           1e-14 * std::max(1.0, std::abs(L)));
}

std::array<std::array<double, 2>, 4> arc_crossings(
    const model::HamiltonianModel& m, const std::array<ArcFit, 4>& arcs,
    double E) {
    std::array<std::array<double, 2>, 4> cr{};
    for (int k = 0; k < 4; ++k) {
        cr[k][0] = turning_point_near_end(m, arcs[k], false, E, 0.35);
        cr[k][1] = turning_point_near_end(m, arcs[k], true, E, 0.35);
    }
    return cr;
}

std::array<Vertex, 4> vertices_from_crossings(
    const model::HamiltonianModel& m, const std::array<ArcFit, 4>& arcs,
    const std::array<std::array<double, 2>, 4>& cr, double E) {
    std::array<Vertex, 4> v{};
    for (int k = 0; k < 4; ++k) {
        const VertexEnds& e = VERTEX_ENDS[k];
        const Vec2 pa = arcs[e.arc_a].point(cr[e.arc_a][e.hi_a ? 1 : 0]);
        const Vec2 pb = arcs[e.arc_b].point(cr[e.arc_b][e.hi_b ? 1 : 0]);
        Vec2 q = (pa + pb) * 0.5;
        q = project_to_equipotential(m, q, E);
        v[k].index = k + 1;
        v[k].position = q;
        v[k].residual = std::abs(model::potential(m, q) - E);
    }
    return v;
}

void apply_domains(std::array<ArcFit, 4>& arcs,
                   const std::array<std::array<double, 2>, 4>& cr) {
    for (int k = 0; k < 4; ++k) {
        arcs[k].dom_lo = cr[k][0];
        arcs[k].dom_hi = cr[k][1];
        arcs[k].ext_lo = cr[k][0];
        arcs[k].ext_hi = cr[k][1];
    }
}

double shoelace(const std::array<Vertex, 4>& v) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
        const Vec2& a = v[k].position;
        const Vec2& b = v[(k + 1) % 4].position;
        s += cross(a, b);
    }
    return 0.5 * s;
}

/* Counterclockwise traversal order starting from vertex 1: bottom and right
 * arcs run with increasing parameter, top and left against it. */
struct Leg {
    int arc;       // 0-based
    bool forward;  // increasing parameter
};
constexpr Leg CCW_FROM_V1[4] = {{3, true}, {2, true}, {1, false}, {0, false}};

int ccw_offset(int start_vertex) {
    switch (start_vertex) {
        case 1: return 0;
        case 4: return 1;
        case 3: return 2;
        case 2: return 3;
        default:
            throw std::invalid_argument("start vertex must be 1..4");
    }
}

struct ThetaMap {
    double mid, hw;
    double t(double theta) const { return mid - hw * std::cos(theta); }
};

ThetaMap theta_map(const ArcFit& arc) {
    return {0.5 * (arc.dom_lo + arc.dom_hi), 0.5 * (arc.dom_hi - arc.dom_lo)};
}

double arc_length_segment(const ArcFit& arc, double th_a, double th_b) {
    const ThetaMap map = theta_map(arc);
    return numeric::adaptive_simpson(
        [&](double th) {
            return arc.scale_factor(map.t(th)) * map.hw * std::sin(th);
        },
        th_a, th_b, 1e-11);
}

double action_segment(const model::HamiltonianModel& m, const ArcFit& arc,
                      double th_a, double th_b, double E, bool* clamped) {
    const ThetaMap map = theta_map(arc);
    return numeric::adaptive_simpson(
        [&](double th) {
            const double t = map.t(th);
            const double h = E - arc_potential(m, arc, t);
            if (h < 0.0 && clamped &&
                h < -1e-12 * std::max(1.0, std::abs(E)))
                *clamped = true;
            return std::sqrt(2.0 * m.mass * std::max(h, 0.0)) *
                   arc.scale_factor(t) * map.hw * std::sin(th);
        },
        th_a, th_b, 1e-10);
}

/* An orbit touches its envelope moving tangentially, so the squared normal
 * velocity fraction discriminates samples that sit close to two arcs: a
 * corner-region sample lies near both curves but its momentum is tangent to
 * exactly one.  Near the corners |p| -> 0 (the corner is a turning point);
 * the regulariser lets the criterion degrade gracefully to pure distance. */
double misalignment2(const Vec2& p, const Vec2& normal) {
    const double pn = dot(p, normal);
    return pn * pn / (dot(p, p) * dot(normal, normal) + 1e-12);
}

std::array<FitData, 4> partition_by_chord(
    const classical::CausticPointCloud& cloud,
    const std::array<Vertex, 4>& vertices) {
    double chord_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k)
        chord_min = std::min(chord_min,
                             norm(vertices[(k + 1) % 4].position -
                                  vertices[k].position));
    const double weight = 0.0625 * chord_min * chord_min;  // (chord/4)^2

    std::array<FitData, 4> seg;
    for (const auto& cp : cloud.points) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k) {
            const Vec2& a = vertices[k].position;
            const Vec2& b = vertices[(k + 1) % 4].position;
            const double dist = point_segment_distance(cp.position, a, b);
            const Vec2 chord = b - a;
            const double d = dist * dist +
                             weight * misalignment2(cp.momentum,
                                                    {-chord.y, chord.x});
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        // side k of the quadrilateral v[k] -> v[k+1] is arc k+1; store as
        // (x, y) for now and swap after the graph axis is chosen
        seg[best].t.push_back(cp.position.x);
        seg[best].dep.push_back(cp.position.y);
    }
    return seg;
}

// Squared distance from p to the arc graph restricted to its domain.
// Optionally reports the foot-point parameter.
double dist2_point_arc(const Vec2& p, const ArcFit& arc,
                       double* t_foot = nullptr) {
    const double tp = arc.axis == Axis::y_of_x ? p.x : p.y;
    const double dp = arc.axis == Axis::y_of_x ? p.y : p.x;
    auto d2 = [&](double t) {
        const double dt = t - tp, df = arc.value(t) - dp;
        return dt * dt + df * df;
    };
    constexpr int K = 64;
    const double span = arc.dom_hi - arc.dom_lo;
    double best_t = arc.dom_lo, best = d2(arc.dom_lo);
    for (int j = 1; j <= K; ++j) {
        const double t = arc.dom_lo + span * j / K;
        const double v = d2(t);
        if (v < best) {
            best = v;
            best_t = t;
        }
    }
    double a = std::max(arc.dom_lo, best_t - span / K);
    double b = std::min(arc.dom_hi, best_t + span / K);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = d2(x1), f2 = d2(x2);
    for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = d2(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = d2(x2);
        }
    }
    if (t_foot) *t_foot = f1 < f2 ? x1 : x2;
    return std::min({f1, f2, best});
}

/* Repartition by proximity to the current fitted curves plus momentum
 * alignment.  Distance alone is not enough even against fitted curves: on a
 * near-degenerate resonant torus an early polluted fit interpolates the
 * adjacent edge's corner samples exactly, so they would stay in the wrong
 * bucket forever; their normal velocity gives them away. */
std::array<FitData, 4> partition_by_curve(
    const classical::CausticPointCloud& cloud,
    const std::array<ArcFit, 4>& arcs) {
    double edge_min = std::numeric_limits<double>::infinity();
    for (const auto& arc : arcs)
        edge_min = std::min(edge_min, arc.dom_hi - arc.dom_lo);
    const double weight = 0.0625 * edge_min * edge_min;

    std::array<FitData, 4> seg;
    for (const auto& cp : cloud.points) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k) {
            double tf;
            const double d2 = dist2_point_arc(cp.position, arcs[k], &tf);
            const double fp = arcs[k].deriv(tf);
            const Vec2 normal = arcs[k].axis == Axis::y_of_x
                                    ? Vec2{-fp, 1.0}
                                    : Vec2{1.0, -fp};
            const double d =
                d2 + weight * misalignment2(cp.momentum, normal);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        seg[best].t.push_back(cp.position.x);
        seg[best].dep.push_back(cp.position.y);
    }
    return seg;
}

std::array<ArcFit, 4> fit_buckets(std::array<FitData, 4>& seg,
                                  const std::array<Vertex, 4>& vertices,
                                  int degree, double residual_tol,
                                  double energy) {
    std::array<ArcFit, 4> arcs;
    for (int k = 0; k < 4; ++k) {
        FitData& d = seg[k];
        if (d.t.size() < 4)
            throw FitFailureError("arc " + std::to_string(k + 1) + ": only " +
                                  std::to_string(d.t.size()) +
                                  " caustic points");
        double xmin = d.t[0], xmax = xmin, ymin = d.dep[0], ymax = ymin;
        for (std::size_t i = 0; i < d.t.size(); ++i) {
            xmin = std::min(xmin, d.t[i]);
            xmax = std::max(xmax, d.t[i]);
            ymin = std::min(ymin, d.dep[i]);
            ymax = std::max(ymax, d.dep[i]);
        }
        const Axis axis =
            (ymax - ymin > xmax - xmin) ? Axis::x_of_y : Axis::y_of_x;
        if (axis == Axis::x_of_y)
            for (std::size_t i = 0; i < d.t.size(); ++i)
                std::swap(d.t[i], d.dep[i]);

        const Vec2& va = vertices[k].position;
        const Vec2& vb = vertices[(k + 1) % 4].position;
        const double ta = axis == Axis::y_of_x ? va.x : va.y;
        const double tb = axis == Axis::y_of_x ? vb.x : vb.y;
        arcs[k] = fit_one_arc(d, k + 1, axis, std::min(ta, tb),
                              std::max(ta, tb), degree, residual_tol, energy);
    }
    return arcs;
}

}  // namespace

double ArcFit::value(double t) const {
    if (t < dom_lo) {
        const double u = scaled(*this, dom_lo);
        return numeric::polyval(coefficients, u) +
               numeric::polyval_d1(coefficients, u) / scale * (t - dom_lo);
    }
    if (t > dom_hi) {
        const double u = scaled(*this, dom_hi);
        return numeric::polyval(coefficients, u) +
               numeric::polyval_d1(coefficients, u) / scale * (t - dom_hi);
    }
    return numeric::polyval(coefficients, scaled(*this, t));
}

double ArcFit::deriv(double t) const {
    const double tc = std::clamp(t, dom_lo, dom_hi);
    return numeric::polyval_d1(coefficients, scaled(*this, tc)) / scale;
}

double ArcFit::second_deriv(double t) const {
    if (t < dom_lo || t > dom_hi) return 0.0;
    return numeric::polyval_d2(coefficients, scaled(*this, t)) /
           (scale * scale);
}

double ArcFit::third_deriv(double t) const {
    if (t < dom_lo || t > dom_hi) return 0.0;
    return numeric::polyval_d3(coefficients, scaled(*this, t)) /
           (scale * scale * scale);
}

Vec2 ArcFit::point(double t) const {
    const double f = value(t);
    return axis == Axis::y_of_x ? Vec2{t, f} : Vec2{f, t};
}

double ArcFit::scale_factor(double t) const {
    return std::hypot(1.0, deriv(t));
}

double arc_potential(const model::HamiltonianModel& m, const ArcFit& arc,
                     double t) {
    return model::potential(m, arc.point(t));
}

std::array<Vertex, 4> extract_vertices(const classical::CausticPointCloud& cloud,
                                       const model::HamiltonianModel& m,
                                       double E) {
    if (cloud.points.empty())
        throw std::invalid_argument("extract_vertices: empty cloud");

    Vec2 lo = cloud.points.front().position, hi = lo;
    for (const auto& cp : cloud.points) {
        lo.x = std::min(lo.x, cp.position.x);
        lo.y = std::min(lo.y, cp.position.y);
        hi.x = std::max(hi.x, cp.position.x);
        hi.y = std::max(hi.y, cp.position.y);
    }
    const double link = 0.15 * norm(hi - lo);

    // Relax the equipotential-closeness rung until four clusters appear.
    const double rungs[] = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2,
                            3e-2, 1e-1, 1.5e-1, 2e-1, 3e-1};
    std::string trail;
    for (double rung : rungs) {
        const double tol = rung * std::max(1.0, std::abs(E));
        std::vector<Vec2> pts;
        for (const auto& cp : cloud.points)
            if (E - model::potential(m, cp.position) <= tol)
                pts.push_back(cp.position);
        if (pts.size() < 4) continue;

        // single-link clustering by the fixed linking radius
        std::vector<int> label(pts.size(), -1);
        int n_clusters = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (label[i] >= 0) continue;
            label[i] = n_clusters;
            std::vector<std::size_t> stack{i};
            while (!stack.empty()) {
                const std::size_t j = stack.back();
                stack.pop_back();
                for (std::size_t k = 0; k < pts.size(); ++k) {
                    if (label[k] < 0 && norm(pts[k] - pts[j]) <= link) {
                        label[k] = n_clusters;
                        stack.push_back(k);
                    }
                }
            }
            ++n_clusters;
        }
        trail += " " + std::to_string(rung) + "->" + std::to_string(n_clusters);
        if (n_clusters != 4) continue;

        std::array<Vec2, 4> centroid{};
        std::array<int, 4> count{};
        for (std::size_t i = 0; i < pts.size(); ++i) {
            centroid[label[i]] += pts[i];
            ++count[label[i]];
        }
        std::array<Vertex, 4> v{};
        for (int k = 0; k < 4; ++k) {
            Vec2 c = centroid[k] * (1.0 / count[k]);
            c = model::equipotential_point(m, E, c);
            v[k].position = c;
            v[k].residual = std::abs(model::potential(m, c) - E);
        }
        order_vertices(v);
        return v;
    }

    /* No rung produced four clusters.  This happens on separable resonant
     * tori: the corner touches are double zeros of the Jacobi Wronskian
     * (both transverse fields vanish at once), leave no sign change, and so
     * never enter the cloud -- tight rungs collect fewer than four points
     * while loose ones chain along the short edges.  The cloud still traces
     * the envelope edges, so its extreme points along the aspect-normalized
     * diagonals sit next to the corners; they only seed the partition, and
     * the crossing refinement relocates the true vertices afterwards. */
    const Vec2 c = (lo + hi) * 0.5;
    const double wx = std::max(hi.x - lo.x, 1e-12);
    const double wy = std::max(hi.y - lo.y, 1e-12);
    constexpr double DIAG_SIGN[4][2] = {
        {-1.0, -1.0}, {-1.0, 1.0}, {1.0, 1.0}, {1.0, -1.0}};
    std::array<Vertex, 4> v{};
    for (int k = 0; k < 4; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        Vec2 pick{};
        for (const auto& cp : cloud.points) {
            const double val = DIAG_SIGN[k][0] * (cp.position.x - c.x) / wx +
                               DIAG_SIGN[k][1] * (cp.position.y - c.y) / wy;
            if (val > best) {
                best = val;
                pick = cp.position;
            }
        }
        const Vec2 q = model::equipotential_point(m, E, pick);
        v[k].position = q;
        v[k].residual = std::abs(model::potential(m, q) - E);
    }
    const double sep_min = 1e-3 * norm(hi - lo);
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            if (norm(v[a].position - v[b].position) < sep_min)
                throw DegenerateFamilyError(
                    "vertex clustering failed and the diagonal extremes "
                    "coincide (rung->clusters:" + trail + ")");
    order_vertices(v);
    return v;
}

std::array<ArcFit, 4> fit_arcs(const classical::CausticPointCloud& cloud,
                               const std::array<Vertex, 4>& vertices,
                               int degree, double residual_tol) {
    auto seg = partition_by_chord(cloud, vertices);
    return fit_buckets(seg, vertices, degree, residual_tol, cloud.energy);
}

void extend_arc(const model::HamiltonianModel& m, ArcFit& arc,
                double kappa_target, double cap_factor) {
    const double L = arc.dom_hi - arc.dom_lo;
    const double E = arc.energy;
    const double dt = 0.02 * L;
    for (int side = 0; side < 2; ++side) {
        const double dir = side == 0 ? -1.0 : 1.0;
        const double t0 = side == 0 ? arc.dom_lo : arc.dom_hi;
        auto kappa = [&](double t) {
            const double over = arc_potential(m, arc, t) - E;
            return arc.scale_factor(t) *
                   std::sqrt(2.0 * m.mass * std::max(over, 0.0)) / m.hbar;
        };
        double acc = 0.0;
        double t_prev = t0;
        double k_prev = kappa(t0);
        double u_prev = arc_potential(m, arc, t0);
        double t_end = t0;
        const int max_steps = static_cast<int>(cap_factor / 0.02) + 1;
        for (int j = 1; j <= max_steps && acc < kappa_target; ++j) {
            const double t = t0 + dir * j * dt;
            const double u = arc_potential(m, arc, t);
            if (u <= u_prev) break;  // barrier stopped rising; stop here
            const double k = kappa(t);
            acc += 0.5 * (k + k_prev) * dt;
            t_prev = t;
            k_prev = k;
            u_prev = u;
            t_end = t;
        }
        (void)t_prev;
        if (side == 0)
            arc.ext_lo = t_end;
        else
            arc.ext_hi = t_end;
    }
}

Caustic build_caustic(const model::HamiltonianModel& m, double E,
                      double start_angle, const BuildOptions& opt) {
    const Vec2 dir{std::cos(start_angle), std::sin(start_angle)};
    const Vec2 q0 = model::equipotential_point(m, E, dir);

    classical::Trajectory traj;
    classical::JacobiBundle jac;
    classical::integrate_with_jacobi(m, {q0, {0.0, 0.0}}, opt.t_max, opt.step,
                                     opt.escape_radius, traj, jac);
    const auto cloud = classical::detect_caustic_points(jac, traj);

    std::array<Vertex, 4> v = extract_vertices(cloud, m, E);

    // Cluster centroids smear along the adjacent edges, so the chord-based
    // first partition can misplace corner-region samples (worst where the
    // cloud is sparse: near-degenerate resonant tori).  Fit best-effort
    // first, then iterate: repartition against the fitted curves, refine the
    // vertices from the U = E crossings, refit.  The residual contract is
    // only enforced on the last round.
    const double no_tol = std::numeric_limits<double>::infinity();
    auto seg = partition_by_chord(cloud, v);
    std::array<ArcFit, 4> arcs =
        fit_buckets(seg, v, opt.fit_degree, no_tol, cloud.energy);
    std::array<std::array<double, 2>, 4> cr{};
    constexpr int ROUNDS = 3;
    for (int round = 0; round < ROUNDS; ++round) {
        cr = arc_crossings(m, arcs, E);
        v = vertices_from_crossings(m, arcs, cr, E);
        order_vertices(v);
        seg = partition_by_curve(cloud, arcs);
#ifdef CAUSTIQ_TRACE_BUILD
        for (const auto& vv : v)
            std::fprintf(stderr, "round %d v%d (%.9f, %.9f)\n", round,
                         vv.index, vv.position.x, vv.position.y);
        for (int k = 0; k < 4; ++k)
            std::fprintf(stderr, "round %d arc%d deg=%zu res=%.3e bucket=%zu\n",
                         round, k + 1, arcs[k].coefficients.size() - 1,
                         arcs[k].fit_residual, seg[k].t.size());
#endif
        arcs = fit_buckets(seg, v, opt.fit_degree,
                           round + 1 < ROUNDS ? no_tol : opt.fit_residual_tol,
                           cloud.energy);
    }
    cr = arc_crossings(m, arcs, E);
    v = vertices_from_crossings(m, arcs, cr, E);
    order_vertices(v);
    apply_domains(arcs, cr);

    for (auto& arc : arcs) extend_arc(m, arc, opt.kappa_target, opt.extension_cap);

    Caustic c;
    c.energy = E;
    c.vertices = v;
    c.arcs = arcs;
    c.clockwise = shoelace(v) < 0.0;
    if (!c.clockwise)
        throw DegenerateFamilyError(
            "vertex ordering is not clockwise; caustic topology unexpected");
    return c;
}

double boundary_action(const model::HamiltonianModel& m, const Caustic& c,
                       int start_vertex, double s, bool* clamped) {
    if (clamped) *clamped = false;
    if (s < 0.0) throw std::invalid_argument("boundary_action: negative s");
    if (s == 0.0) return 0.0;

    const int off = ccw_offset(start_vertex);
    double remaining = s;
    double total = 0.0;
    for (int leg_i = 0; leg_i < 4 && remaining > 0.0; ++leg_i) {
        const Leg leg = CCW_FROM_V1[(leg_i + off) % 4];
        const ArcFit& arc = c.arcs[leg.arc];
        const double th_a = leg.forward ? 0.0 : PI;
        const double th_b = leg.forward ? PI : 0.0;
        const double len = std::abs(arc_length_segment(arc, th_a, th_b));
        if (remaining >= len) {
            total += std::abs(
                action_segment(m, arc, th_a, th_b, c.energy, clamped));
            remaining -= len;
            continue;
        }
        // partial leg: find the angle where the walked length equals s
        double lo = th_a, hi = th_b;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double l = std::abs(arc_length_segment(arc, th_a, mid));
            if (l < remaining)
                lo = mid;
            else
                hi = mid;
            if (std::abs(hi - lo) < 1e-12) break;
        }
        total += std::abs(action_segment(m, arc, th_a, 0.5 * (lo + hi),
                                         c.energy, clamped));
        remaining = 0.0;
    }
    return total;
}

double perimeter(const Caustic& c) {
    double total = 0.0;
    for (const auto& arc : c.arcs)
        total += std::abs(arc_length_segment(arc, 0.0, PI));
    return total;
}

double ebk_integral(const model::HamiltonianModel& m, const ArcFit& arc) {
    const double E = arc.energy;
    auto h = [&](double t) { return E - arc_potential(m, arc, t); };

    // locate the allowed segment anywhere inside the extended span
    const int N = 2000;
    const double a = arc.ext_lo, b = arc.ext_hi;
    const double dt = (b - a) / N;
    double hmax = -std::numeric_limits<double>::infinity();
    int i_max = 0;
    for (int i = 0; i <= N; ++i) {
        const double v = h(a + i * dt);
        if (v > hmax) {
            hmax = v;
            i_max = i;
        }
    }
    if (hmax <= 1e-12 * std::max(1.0, std::abs(E)))
        throw EmptyWellError("arc " + std::to_string(arc.index) +
                             ": no classically allowed segment at E = " +
                             std::to_string(E));

    int i_lo = i_max, i_hi = i_max;
    while (i_lo > 0 && h(a + (i_lo - 1) * dt) > 0.0) --i_lo;
    while (i_hi < N && h(a + (i_hi + 1) * dt) > 0.0) ++i_hi;
    double t1 = a + i_lo * dt;
    double t2 = a + i_hi * dt;
    if (i_lo > 0)
        t1 = numeric::bisect(h, a + (i_lo - 1) * dt, t1, 1e-14);
    if (i_hi < N)
        t2 = numeric::bisect(h, t2, a + (i_hi + 1) * dt, 1e-14);

    // theta substitution absorbs the square-root turning-point behaviour
    const double mid = 0.5 * (t1 + t2), hw = 0.5 * (t2 - t1);
    std::vector<double> nodes, weights;
    numeric::gauss_legendre(96, nodes, weights);
    double total = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double th = 0.5 * PI * (nodes[i] + 1.0);
        const double w = 0.5 * PI * weights[i];
        const double t = mid - hw * std::cos(th);
        total += w * std::sqrt(2.0 * m.mass * std::max(h(t), 0.0)) *
                 arc.scale_factor(t) * hw * std::sin(th);
    }
    return total;
}

ArcFit line_arc(Axis axis, double level, double lo, double hi, double energy,
                double ext_margin) {
    if (!(hi > lo)) throw std::invalid_argument("line_arc: empty domain");
    ArcFit arc;
    arc.index = 0;
    arc.axis = axis;
    arc.coefficients = {level};
    arc.center = 0.5 * (lo + hi);
    arc.scale = 0.5 * (hi - lo);
    arc.dom_lo = lo;
    arc.dom_hi = hi;
    arc.ext_lo = lo - ext_margin * (hi - lo);
    arc.ext_hi = hi + ext_margin * (hi - lo);
    arc.fit_residual = 0.0;
    arc.energy = energy;
    return arc;
}

}  // namespace caustiq::caustic
