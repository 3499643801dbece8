#ifndef USTAT_QUADRATURE_HPP_
#define USTAT_QUADRATURE_HPP_

#include <functional>
#include <span>

namespace ustat {

using ScalarFn = std::function<double(double)>;

/// Adaptive Simpson integration of `f` over [a, b] to absolute tolerance
/// `abs_tol`. Throws Error(kConvergence) when the recursion depth is exhausted
/// before the local error estimate drops below its share of the tolerance,
/// and Error(kNumerical) on a non-finite integrand value.
double adaptive_simpson(const ScalarFn& f, double a, double b, double abs_tol,
                        int max_depth = 48);

/// Integrates over consecutive pieces [p0,p1], [p1,p2], ... splitting the
/// tolerance evenly. Use this to keep kinks and jumps on piece boundaries.
double integrate_pieces(const ScalarFn& f, std::span<const double> breakpoints, double abs_tol);

}  // namespace ustat

#endif  // USTAT_QUADRATURE_HPP_
