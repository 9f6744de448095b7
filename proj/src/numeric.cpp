#include "caustiq/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace caustiq::numeric {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2)
        throw std::invalid_argument("linspace: need at least two points");
    std::vector<double> x(n);
    const double d = (hi - lo) / double(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = lo + double(i) * d;
    x.back() = hi;
    return x;
}

double polyval(const std::vector<double>& c, double u) {
    double s = 0.0;
    for (std::size_t j = c.size(); j-- > 0;)
        s = s * u + c[j];
    return s;
}

double polyval_d1(const std::vector<double>& c, double u) {
    double s = 0.0;
    for (std::size_t j = c.size(); j-- > 1;)
        s = s * u + double(j) * c[j];
    return s;
}

double polyval_d2(const std::vector<double>& c, double u) {
    double s = 0.0;
    for (std::size_t j = c.size(); j-- > 2;)
        s = s * u + double(j) * double(j - 1) * c[j];
    return s;
}

double polyval_d3(const std::vector<double>& c, double u) {
    double s = 0.0;
    for (std::size_t j = c.size(); j-- > 3;)
        s = s * u + double(j) * double(j - 1) * double(j - 2) * c[j];
    return s;
}

std::vector<double> polyfit(const std::vector<double>& u,
                            const std::vector<double>& y, int degree) {
    const std::size_t m = u.size();
    const int p = degree + 1;
    if (degree < 0 || m < std::size_t(p))
        throw std::invalid_argument("polyfit: not enough points for degree");
    if (y.size() != m)
        throw std::invalid_argument("polyfit: size mismatch");

    // column-major Vandermonde
    std::vector<double> a(m * std::size_t(p));
    for (std::size_t r = 0; r < m; ++r) {
        double t = 1.0;
        for (int c = 0; c < p; ++c) {
            a[std::size_t(c) * m + r] = t;
            t *= u[r];
        }
    }
    std::vector<double> b = y;

    // Householder QR, reflectors applied in place
    for (int c = 0; c < p; ++c) {
        double* col = &a[std::size_t(c) * m];
        double s2 = 0.0;
        for (std::size_t r = c; r < m; ++r)
            s2 += col[r] * col[r];
        const double s = std::sqrt(s2);
        if (s == 0.0)
            throw std::runtime_error("polyfit: rank-deficient design matrix");
        const double alpha = col[c] > 0.0 ? -s : s;
        std::vector<double> v(m - c);
        v[0] = col[c] - alpha;
        for (std::size_t r = c + 1; r < m; ++r)
            v[r - c] = col[r];
        double vtv = 0.0;
        for (double w : v)
            vtv += w * w;
        if (vtv == 0.0)
            continue;
        for (int cc = c; cc < p; ++cc) {
            double* col2 = &a[std::size_t(cc) * m];
            double vt = 0.0;
            for (std::size_t r = c; r < m; ++r)
                vt += v[r - c] * col2[r];
            const double f = 2.0 * vt / vtv;
            for (std::size_t r = c; r < m; ++r)
                col2[r] -= f * v[r - c];
        }
        double vt = 0.0;
        for (std::size_t r = c; r < m; ++r)
            vt += v[r - c] * b[r];
        const double f = 2.0 * vt / vtv;
        for (std::size_t r = c; r < m; ++r)
            b[r] -= f * v[r - c];
    }

    std::vector<double> coef(p);
    for (int r = p - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < p; ++c)
            s -= a[std::size_t(c) * m + r] * coef[c];
        const double d = a[std::size_t(r) * m + r];
        if (d == 0.0)
            throw std::runtime_error("polyfit: singular triangular factor");
        coef[r] = s / d;
    }
    return coef;
}

double bisect(const std::function<double(double)>& f, double a, double b,
              double xtol, int max_iter) {
    if (a > b) std::swap(a, b);
    double fa = f(a), fb = f(b);
    if (fa == 0.0)
        return a;
    if (fb == 0.0)
        return b;
    if (fa * fb > 0.0)
        throw std::invalid_argument("bisect: root not bracketed");
    for (int i = 0; i < max_iter && (b - a) > xtol; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0)
            return m;
        if (fa * fm < 0.0) {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    return 0.5 * (a + b);
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth) {
    if (a == b)
        return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

double cubic_hermite(double t0, double t1, double y0, double m0, double y1,
                     double m1, double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * m0 +
           (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * m1;
}

void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
    if (n < 1)
        throw std::invalid_argument("gauss_legendre: n must be positive");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double pk =
                    ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / double(k);
                p0 = p1;
                p1 = pk;
            }
            dp = double(n) * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::fabs(dt) < 1e-15)
                break;
        }
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

double median(std::vector<double> v) {
    if (v.empty())
        throw std::invalid_argument("median: empty input");
    const std::size_t k = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    double m = v[k];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + k - 1, v.begin() + k);
        m = 0.5 * (m + v[k - 1]);
    }
    return m;
}

}  // namespace caustiq::numeric
