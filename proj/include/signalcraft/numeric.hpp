#pragma once

#include <cmath>
#include <functional>
#include <utility>

namespace signalcraft {

namespace detail {

template <class F>
double simpson_rec(const F& f, double a, double m, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double h6 = (b - a) / 12.0;
    const double left = h6 * (fa + 4.0 * flm + fm);
    const double right = h6 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction; absolute tolerance.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, max_depth);
}

// Boundary of a monotone predicate: pred is true on [lo, x*] and false after.
// Returns x* to within tol. Assumes pred(lo) is true; if pred(hi) is true
// returns hi.
template <class P>
double bisect_boundary(const P& pred, double lo, double hi, double tol = 1e-13,
                       int max_iter = 200) {
    if (pred(hi)) return hi;
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pred(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Root of a nondecreasing function bracketed by [lo, hi]: smallest x with
// f(x) >= 0, assuming f(lo) < 0 <= f(hi).
template <class F>
double bisect_first_nonnegative(const F& f, double lo, double hi, double tol = 1e-13,
                                int max_iter = 200) {
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace signalcraft
