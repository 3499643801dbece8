#ifndef USTAT_ONLINE_HPP_
#define USTAT_ONLINE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ustat/chains.hpp"

namespace ustat {

/// Linear pairwise scorer h_w(x, u) = w . (psi(x) - psi(u)) with the fixed
/// feature map psi(x) = (x, x^2, sin x).
struct Hypothesis {
  std::array<double, 3> w{};
  std::size_t id = 0;  // number of stream points seen when it was emitted

  static std::array<double, 3> features(double x);
  double score(double x, double u) const;
};

enum class LossKind {
  kMisranking,  // 1{(f(x) - f(u)) h < 0}
  kSigmoid,     // 1 / (1 + exp(sgn(f(x) - f(u)) h))
  kLogistic,    // min(1, log2(1 + exp(-sgn(f(x) - f(u)) h)))
  kConstant,    // kappa everywhere
};

/// l(h, x, u) = phi(f(x) - f(u), h(x, u)) with values in [0, 1]. Pairs with
/// equal labels carry no ranking information and have loss 0, except for the
/// constant loss.
struct PairwiseLoss {
  LossKind kind = LossKind::kSigmoid;
  std::string label = "identity";  // f: "identity", "square" or "abs"
  double kappa = 0.0;              // value of the constant loss

  double phi(double label_diff, double score) const;
  double label_of(double x) const;
  double operator()(const Hypothesis& h, double x, double u) const;
  /// Lipschitz constant of phi in its second argument (infinite for kMisranking).
  double lipschitz() const;
  std::string describe() const;
};

PairwiseLoss loss_from_name(const std::string& name, const std::string& label = "identity");

struct OnlineParams {
  double c = 0.5;
  double xi = 1.0;
  double rho = 0.9;
  double m = 1.0;
  double tau = 1.0;
  double gamma = 0.05;    // used when epsilon == 0
  double epsilon = 0.0;   // > 0 derives gamma from the selection theorem
  double penalty_scale = 1.0;
};

/// Index bookkeeping for a stream of length n: c_n = ceil(c n),
/// q = (xi + 1) / log(1 / rho), b_n = floor(q log n).
struct OnlineIndices {
  std::size_t n = 0;
  std::size_t c_n = 0;
  std::size_t b_n = 0;
  double q = 0.0;
};

/// Throws Error(kInvalidArgument) unless 1 <= c_n - b_n and c_n <= n - 2.
OnlineIndices online_indices(const OnlineParams& params, std::size_t n);

/// C(m, tau)^-1 = 7000 m^2 tau^2.
double inverse_penalty_constant(const OnlineParams& params);

/// gamma as configured, or 64 (n - c_n + 1) exp(-(n - c_n) eps^2 C / 128)
/// when epsilon > 0. Throws Error(kInvalidArgument) if it is not in (0, 1).
double resolve_gamma(const OnlineParams& params, const OnlineIndices& idx);

/// c_gamma(x) = sqrt((C^-1 / x) log(64 (n - c_n)(n - c_n + 1) / gamma)).
double penalty(double x, const OnlineParams& params, const OnlineIndices& idx, double gamma);

// Stream positions are 1-based as in X_1..X_n; x[i - 1] holds X_i and hyps[k]
// is the hypothesis trained on X_1..X_k.

/// M_t = (1 / (t - b_n)) sum_{i=1}^{t - b_n} l(h_{t - b_n}, X_t, X_i), c_n <= t <= n - 1.
double paired_empirical_risk(std::size_t t, std::span<const Hypothesis> hyps, std::span<const double> x,
                             const PairwiseLoss& loss, const OnlineIndices& idx);

/// Mean of M_t over t in [c_n, n - 1].
double average_paired_risk(std::span<const Hypothesis> hyps, std::span<const double> x,
                           const PairwiseLoss& loss, const OnlineIndices& idx);

/// U-statistic of l(h, ., .) over pairs of {X_{t+1}, ..., X_n}; needs t <= n - 2.
double suffix_empirical_risk(std::size_t t, const Hypothesis& h, std::span<const double> x,
                             const PairwiseLoss& loss);

/// argmin over i of risk[i] + penalty[i], smallest i on ties.
std::size_t argmin_penalized(std::span<const double> risk, std::span<const double> penalty);

struct RiskTrace {
  OnlineIndices idx;
  double gamma = 0.0;
  std::vector<std::size_t> t;          // c_n .. n - 1
  std::vector<double> m_t;             // M_t
  std::vector<double> suffix_risk;     // R(h_{t - b_n}, t + 1); NaN for t = n - 1
  std::vector<double> penalty;         // c_gamma(n - t), unscaled
  double m_avg = 0.0;
  std::size_t selected_t = 0;
  Hypothesis selected;
};

/// Selection over t in [c_n, n - 2] using the given penalty multiplier.
std::size_t select_t(const RiskTrace& trace, double penalty_scale);

RiskTrace build_risk_trace(std::span<const Hypothesis> hyps, std::span<const double> x,
                           const PairwiseLoss& loss, const OnlineParams& params);

struct StepSchedule {
  double eta0 = 0.5;
  double power = 0.5;  // eta_t = eta0 / t^power
};

/// Online gradient descent on the logistic surrogate. Returns n hypotheses;
/// entry k has seen X_1..X_k, so entry 0 is the zero scorer. Throws
/// Error(kNumerical) when |w| exceeds 1e6.
std::vector<Hypothesis> reference_online_learner(std::span<const double> x, const PairwiseLoss& loss,
                                                 const StepSchedule& schedule);

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
};

/// Monte Carlo estimate of E l(h, X, X') over independent X, X' from the
/// chain's invariant law. Pairs are drawn in fixed blocks with derived seeds,
/// so the result does not depend on `workers`.
RiskEstimate true_risk(const Hypothesis& h, const PairwiseLoss& loss, const ChainSpec& chain,
                       std::size_t reps, std::uint64_t seed, std::size_t workers = 1);

/// Same draws for several hypotheses at once.
std::vector<RiskEstimate> true_risks(std::span<const Hypothesis> hyps, const PairwiseLoss& loss,
                                     const ChainSpec& chain, std::size_t reps, std::uint64_t seed,
                                     std::size_t workers = 1);

}  // namespace ustat

#endif  // USTAT_ONLINE_HPP_
