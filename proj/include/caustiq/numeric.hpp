#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace caustiq::numeric {

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Polynomial evaluation, coefficients in ascending order.
double polyval(const std::vector<double>& c, double u);
double polyval_d1(const std::vector<double>& c, double u);
double polyval_d2(const std::vector<double>& c, double u);
double polyval_d3(const std::vector<double>& c, double u);

/** Least-squares polynomial fit via Householder QR on the Vandermonde matrix.
 *  The abscissae should already be scaled to O(1) by the caller; degree 8 on
 *  [-1,1] keeps the system comfortably conditioned in double precision. */
std::vector<double> polyfit(const std::vector<double>& u,
                            const std::vector<double>& y, int degree);

/// Bisection for a bracketed root, |b - a| reduced below xtol.
double bisect(const std::function<double(double)>& f, double a, double b,
              double xtol, int max_iter = 200);

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth = 28);

/// Cubic Hermite interpolant on [t0, t1] with values y and slopes m at the ends.
double cubic_hermite(double t0, double t1, double y0, double m0, double y1,
                     double m1, double t);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

/// Median; takes the vector by value on purpose.
double median(std::vector<double> v);

}  // namespace caustiq::numeric
