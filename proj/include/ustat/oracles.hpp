#ifndef USTAT_ORACLES_HPP_
#define USTAT_ORACLES_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ustat/gof.hpp"
#include "ustat/online.hpp"

// Slow reference implementations used to cross-check the fast paths. They
// share no code with the routines they check.
namespace ustat::oracle {

/// delta2 by enumerating every partial matching of x with y; unmatched entries
/// are paired with zeros.
double delta2_permutations(std::span<const double> x, std::span<const double> y);

/// Optimal assignment cost min_pi sum_i c[i][pi(i)] (Hungarian algorithm).
double assignment_cost(const std::vector<std::vector<double>>& cost);

/// delta2 through the assignment problem on squared differences.
double delta2_assignment(std::span<const double> x, std::span<const double> y);

/// (1 / (n (n - 1))) sum_{i != j} sum_k phi_k(X_i) phi_k(X_j) with explicit
/// basis functions.
double theta_hat_naive(const ModelIndex& m, std::span<const double> sample);

/// Eigenvalues by Householder tridiagonalization and Sturm-sequence bisection,
/// ascending.
std::vector<double> sturm_eigenvalues(const Eigen::MatrixXd& m);

double paired_risk_naive(std::size_t t, std::span<const Hypothesis> hyps, std::span<const double> x,
                         const PairwiseLoss& loss, std::size_t b_n);

/// Average over ordered pairs i != k of {X_{t+1}..X_n}.
double suffix_risk_naive(std::size_t t, const Hypothesis& h, std::span<const double> x,
                         const PairwiseLoss& loss);

/// argmin_{i} risk[i] + penalty[i] by scanning every index and keeping the
/// first exact minimum.
std::size_t argmin_naive(std::span<const double> risk, std::span<const double> penalty);

}  // namespace ustat::oracle

#endif  // USTAT_ORACLES_HPP_
