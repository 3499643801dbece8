#ifndef USTAT_DENSITY_HPP_
#define USTAT_DENSITY_HPP_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ustat/quadrature.hpp"
#include "ustat/rng.hpp"

namespace ustat {

/// A scalar function referenced by registry name plus numeric parameters, so
/// that chain and density specs can be written to and read from config files.
///
/// Registered names:
///   - "mh_example"   x -> exp(-x^2) (3 + sin 5x + sin 2x)
///   - "beta_affine"  Beta(alpha, beta) pdf evaluated at (x + shift) / scale
///   - "gaussian"     exp(-(x - mu)^2 / (2 sigma2)), unnormalized
///   - "uniform"      constant 1
struct NamedFunction {
  std::string name;
  std::map<std::string, double> params;

  bool operator==(const NamedFunction&) const = default;
};

ScalarFn resolve_function(const NamedFunction& fn);
std::string describe(const NamedFunction& fn);

double std_normal_cdf(double x);
double std_normal_pdf(double x);

enum class DensityKind { kGaussian, kTruncatedGaussian, kSkewNormalArch, kUnnormalizedOnInterval };

/// Univariate probability density with exact evaluation, a CDF, its squared
/// L2 norm and an iid sampler. Immutable and cheap to copy.
class DensitySpec {
 public:
  static DensitySpec gaussian(double mu, double sigma2);
  static DensitySpec truncated_gaussian(double mu, double sigma2, double a, double b);
  /// Invariant law of X' = theta |X| + sqrt(1 - theta^2) xi, i.e. the
  /// skew-normal 2 phi(y) Phi(theta y / sqrt(1 - theta^2)).
  static DensitySpec skew_normal_arch(double theta);
  static DensitySpec unnormalized(const NamedFunction& g, double a, double b);
  /// Unnormalized density from an arbitrary callable; not serializable.
  static DensitySpec unnormalized(std::string label, ScalarFn g, double a, double b);

  DensityKind kind() const;
  double pdf(double x) const;
  double operator()(double x) const { return pdf(x); }
  double cdf(double x) const;
  /// P(lo < X <= hi), accurate in both tails.
  double probability(double lo, double hi) const;
  /// Squared L2 norm, cached at construction.
  double l2_norm_sq() const;
  /// Finite interval outside which the density is zero or below ~1e-22.
  std::pair<double, double> effective_support() const;
  /// Integration breakpoints: support ends plus any jump locations.
  std::vector<double> breakpoints() const;

  /// One iid draw; exact for Gaussians, rejection otherwise.
  double draw(Rng& rng, std::size_t max_attempts = 1'000'000) const;

  std::string describe() const;

  double mu() const;
  double sigma2() const;
  double lower() const;
  double upper() const;
  double theta() const;
  /// Normalizing constant of the truncated or unnormalized kinds (1 otherwise).
  double normalizer() const;
  const std::optional<NamedFunction>& function() const;

 private:
  struct Impl;
  explicit DensitySpec(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

}  // namespace ustat

#endif  // USTAT_DENSITY_HPP_
