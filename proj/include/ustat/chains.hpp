#ifndef USTAT_CHAINS_HPP_
#define USTAT_CHAINS_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ustat/density.hpp"
#include "ustat/rng.hpp"

namespace ustat {

/// X_{n+1} = theta X_n + xi_{n+1}, xi ~ N(0, tau^2), X_1 = 0.
struct Ar1Chain {
  double theta = 0.0;
  double tau = 1.0;
};

/// X_{n+1} = theta |X_n| + sqrt(1 - theta^2) xi_{n+1}, X_1 = 0.
struct ArchChain {
  double theta = 0.0;
};

enum class ProposalKind { kUniform, kTruncatedGaussian };

/// Proposal of the independent Hastings chain, restricted to the chain's
/// interval. The Gaussian variant is sampled by rejection from the untruncated
/// normal.
struct Proposal {
  ProposalKind kind = ProposalKind::kUniform;
  double mu = 0.0;
  double sigma2 = 1.0;
};

/// Independent Metropolis-Hastings on [a, b].
struct IndepHastingsChain {
  NamedFunction target;  // unnormalized target density (not its log)
  Proposal proposal;
  double a = 0.0;
  double b = 1.0;
};

/// Random walk on the unit sphere of R^dim: X_i = r X_{i-1} + sqrt(1 - r^2) Y
/// with r ~ radial density on [-1, 1] and Y uniform on the great sphere
/// orthogonal to X_{i-1}.
struct SphereWalkChain {
  int dim = 2;
  NamedFunction radial;
};

using ChainSpec = std::variant<Ar1Chain, ArchChain, IndepHastingsChain, SphereWalkChain>;

/// Throws Error(kInvalidArgument) on a parameter outside its domain.
void validate(const ChainSpec& spec);
std::size_t state_dim(const ChainSpec& spec);
std::string describe(const ChainSpec& spec);
bool is_reversible(const ChainSpec& spec);
/// Known invariant density of a scalar chain; nullopt for the sphere walk.
std::optional<DensitySpec> invariant_density(const ChainSpec& spec);

/// Sample path or iid sample. Points are stored row-major with `dim`
/// coordinates each.
struct Trajectory {
  std::vector<double> points;
  std::size_t dim = 1;
  std::uint64_t seed = 0;
  std::shared_ptr<const ChainSpec> spec;  // null for iid samples

  std::size_t size() const { return dim == 0 ? 0 : points.size() / dim; }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
  /// Scalar view of the sample; throws for multivariate states.
  std::span<const double> values() const;
};

/// Pre-validated sampler for one chain spec. Immutable; `sample` may be called
/// concurrently.
class ChainSampler {
 public:
  explicit ChainSampler(ChainSpec spec);

  Trajectory sample(std::size_t n, std::uint64_t seed) const;
  /// Writes n states into `out` (resized to n * dim) using `rng`.
  void sample_into(std::size_t n, Rng& rng, std::vector<double>& out) const;

  const ChainSpec& spec() const { return *spec_; }
  std::size_t dim() const { return dim_; }

 private:
  std::shared_ptr<const ChainSpec> spec_;
  std::size_t dim_ = 1;
  ScalarFn log_target_;
  ScalarFn log_proposal_;
  ScalarFn radial_;
  double radial_envelope_ = 0.0;
};

Trajectory sample_chain(const ChainSpec& spec, std::size_t n, std::uint64_t seed);

/// min(1, pi(y) q(x) / (pi(x) q(y))) computed in log space.
double mh_acceptance(double x, double y, const ScalarFn& target_logdensity,
                     const ScalarFn& proposal_logdensity);

Trajectory sample_iid(const DensitySpec& density, std::size_t n, std::uint64_t seed,
                      std::size_t max_attempts = 1'000'000);
void sample_iid_into(const DensitySpec& density, std::size_t n, Rng& rng, std::vector<double>& out,
                     std::size_t max_attempts = 1'000'000);

/// r x + sqrt(1 - r^2) y with y uniform on the unit sphere of x's orthogonal
/// complement.
std::vector<double> sphere_walk_step(std::span<const double> x, double r, Rng& rng);

}  // namespace ustat

#endif  // USTAT_CHAINS_HPP_
