#pragma once

#include <cmath>
#include <cstdlib>

#include <boost/math/quadrature/gauss.hpp>

namespace warpcert {

namespace detail {

template <class F>
double simpson_panel(const F& f, double a, double fa, double b, double fb,
                     double* fm_out) {
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  *fm_out = fm;
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double m,
                            double fm, double b, double fb, double whole,
                            double tol, int depth) {
  double fl, fr;
  const double left = simpson_panel(f, a, fa, m, fm, &fl);
  const double right = simpson_panel(f, m, fm, b, fb, &fr);
  const double err = left + right - whole;
  if (depth <= 0 || std::abs(err) <= 15.0 * tol) {
    return left + right + err / 15.0;
  }
  return adaptive_simpson_rec(f, a, fa, 0.5 * (a + m), fl, m, fm, left,
                              0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, fm, 0.5 * (m + b), fr, b, fb, right,
                              0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with the classical /15 error estimate.  tol is treated as
// an absolute tolerance on the panel being integrated; callers that want a
// relative target scale it by an a-priori magnitude estimate.
template <class F>
double integrate_adaptive(const F& f, double a, double b, double tol,
                          int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b);
  double fm;
  const double whole = detail::simpson_panel(f, a, fa, b, fb, &fm);
  return detail::adaptive_simpson_rec(f, a, fa, 0.5 * (a + b), fm, b, fb,
                                      whole, tol, max_depth);
}

// Relative-target convenience wrapper: runs one pilot pass to estimate the
// magnitude, then integrates to rel * magnitude absolute tolerance.
template <class F>
double integrate_relative(const F& f, double a, double b, double rel) {
  const double pilot = integrate_adaptive(f, a, b, 1e-6);
  double scale = std::abs(pilot);
  if (scale < 1e-12) scale = 1e-12;
  return integrate_adaptive(f, a, b, rel * scale);
}

// Fixed-order Gauss-Legendre.  Deterministic node placement and an error
// that varies smoothly with the endpoints, which matters when the result is
// later finite-differenced.
template <class F>
double integrate_gauss(const F& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 32>::integrate(f, a, b);
}

// Seven-node variant for inner optimization loops: exact to degree 13 on a
// single panel, an order of magnitude cheaper than the 32-node rule.
template <class F>
double integrate_gauss_fast(const F& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 7>::integrate(f, a, b);
}

}  // namespace warpcert
