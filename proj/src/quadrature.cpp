#include "ustat/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ustat/error.hpp"

namespace ustat {

namespace {

struct SimpsonState {
  const ScalarFn& f;
  int failures = 0;

  double eval(double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "quadrature: integrand is not finite at x=" << x;
      fail(ErrorCode::kNumerical, msg.str());
    }
    return v;
  }

  double recurse(double a, double fa, double b, double fb, double m, double fm, double whole,
                 double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) {
      ++failures;
      return left + right + delta / 15.0;
    }
    return recurse(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           recurse(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
  }
};

}  // namespace

double adaptive_simpson(const ScalarFn& f, double a, double b, double abs_tol, int max_depth) {
  require(std::isfinite(a) && std::isfinite(b), "quadrature: bounds must be finite");
  require(abs_tol > 0.0, "quadrature: tolerance must be positive");
  if (a == b) return 0.0;
  SimpsonState state{f};
  // Start from four panels so that integrands vanishing at the three
  // classic Simpson nodes are not mistaken for zero.
  constexpr int kPanels = 4;
  const double width = (b - a) / kPanels;
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double lo = a + p * width;
    const double hi = (p + 1 == kPanels) ? b : lo + width;
    const double mid = 0.5 * (lo + hi);
    const double flo = state.eval(lo);
    const double fhi = state.eval(hi);
    const double fmid = state.eval(mid);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += state.recurse(lo, flo, hi, fhi, mid, fmid, whole, abs_tol / kPanels, max_depth);
  }
  if (state.failures > 0) {
    std::ostringstream msg;
    msg << "quadrature: no convergence on [" << a << ", " << b << "] at tolerance " << abs_tol
        << " (" << state.failures << " panels hit the depth limit)";
    fail(ErrorCode::kConvergence, msg.str());
  }
  return total;
}

double integrate_pieces(const ScalarFn& f, std::span<const double> breakpoints, double abs_tol) {
  require(breakpoints.size() >= 2, "quadrature: need at least two breakpoints");
  const double share = abs_tol / static_cast<double>(breakpoints.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double lo = breakpoints[i];
    const double hi = breakpoints[i + 1];
    require(lo <= hi, "quadrature: breakpoints must be ascending");
    if (lo == hi) continue;
    // One-sided values at the ends, so a jump belongs to neither neighbour.
    const double inner_lo = std::nextafter(lo, hi);
    const double inner_hi = std::nextafter(hi, lo);
    const ScalarFn inside = [&](double x) { return f(std::clamp(x, inner_lo, inner_hi)); };
    total += adaptive_simpson(inside, lo, hi, share);
  }
  return total;
}

}  // namespace ustat
