#include "ustat/chains.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ustat/error.hpp"

namespace ustat {

namespace {

constexpr int kValidationPoints = 1001;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, std::string(what) + " is not finite");
}

// Draws y uniform on the unit sphere orthogonal to x and writes
// r x + sqrt(1 - r^2) y into out.
void sphere_step_into(std::span<const double> x, double r, Rng& rng, std::span<double> out,
                      std::vector<double>& scratch) {
  const std::size_t d = x.size();
  scratch.resize(d);
  double norm = 0.0;
  do {
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      scratch[k] = rng.normal();
      dot += scratch[k] * x[k];
    }
    norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      scratch[k] -= dot * x[k];
      norm += scratch[k] * scratch[k];
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-8);
  const double s = std::sqrt(std::max(0.0, 1.0 - r * r));
  double out_norm = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    out[k] = r * x[k] + s * scratch[k] / norm;
    out_norm += out[k] * out[k];
  }
  out_norm = std::sqrt(out_norm);
  for (std::size_t k = 0; k < d; ++k) out[k] /= out_norm;
}

}  // namespace

void validate(const ChainSpec& spec) {
  std::visit(
      Overloaded{
          [](const Ar1Chain& c) {
            require_finite(c.theta, "ar1.theta");
            require_finite(c.tau, "ar1.tau");
            require(std::fabs(c.theta) < 1.0, "ar1: need |theta| < 1");
            require(c.tau > 0.0, "ar1: need tau > 0");
          },
          [](const ArchChain& c) {
            require_finite(c.theta, "arch.theta");
            require(std::fabs(c.theta) < 1.0, "arch: need |theta| < 1");
          },
          [](const IndepHastingsChain& c) {
            require_finite(c.a, "indep_hastings.a");
            require_finite(c.b, "indep_hastings.b");
            require(c.a < c.b, "indep_hastings: need a < b");
            require_finite(c.proposal.mu, "indep_hastings.proposal.mu");
            require_finite(c.proposal.sigma2, "indep_hastings.proposal.sigma2");
            require(c.proposal.sigma2 > 0.0, "indep_hastings: proposal sigma2 must be positive");
            const ScalarFn g = resolve_function(c.target);
            for (int k = 0; k < kValidationPoints; ++k) {
              const double x = c.a + (c.b - c.a) * k / (kValidationPoints - 1);
              const double lg = std::log(g(x));
              if (!std::isfinite(lg)) {
                std::ostringstream msg;
                msg << "indep_hastings: target log-density is not finite at x=" << x;
                fail(ErrorCode::kInvalidArgument, msg.str());
              }
            }
          },
          [](const SphereWalkChain& c) {
            require(c.dim >= 2, "sphere_walk: need dim >= 2");
            const ScalarFn f = resolve_function(c.radial);
            double lo = INFINITY;
            double hi = 0.0;
            for (int k = 0; k < kValidationPoints; ++k) {
              const double r = -1.0 + 2.0 * k / (kValidationPoints - 1);
              const double v = f(r);
              require_finite(v, "sphere_walk radial density");
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
            require(lo > 0.0, "sphere_walk: radial density must be bounded away from 0 on [-1, 1]");
          },
      },
      spec);
}

std::size_t state_dim(const ChainSpec& spec) {
  if (const auto* s = std::get_if<SphereWalkChain>(&spec)) return static_cast<std::size_t>(s->dim);
  return 1;
}

std::string describe(const ChainSpec& spec) {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const Ar1Chain& c) { out << "ar1(theta=" << c.theta << ", tau=" << c.tau << ")"; },
                 [&](const ArchChain& c) { out << "arch(theta=" << c.theta << ")"; },
                 [&](const IndepHastingsChain& c) {
                   out << "indep_hastings(target=" << describe(c.target) << ", interval=[" << c.a
                       << ", " << c.b << "], proposal="
                       << (c.proposal.kind == ProposalKind::kUniform ? "uniform" : "truncated_gaussian");
                   if (c.proposal.kind == ProposalKind::kTruncatedGaussian) {
                     out << "(mu=" << c.proposal.mu << ", sigma2=" << c.proposal.sigma2 << ")";
                   }
                   out << ")";
                 },
                 [&](const SphereWalkChain& c) {
                   out << "sphere_walk(dim=" << c.dim << ", radial=" << describe(c.radial) << ")";
                 },
             },
             spec);
  return out.str();
}

bool is_reversible(const ChainSpec& spec) { return !std::holds_alternative<ArchChain>(spec); }

std::optional<DensitySpec> invariant_density(const ChainSpec& spec) {
  return std::visit(
      Overloaded{
          [](const Ar1Chain& c) -> std::optional<DensitySpec> {
            return DensitySpec::gaussian(0.0, c.tau * c.tau / (1.0 - c.theta * c.theta));
          },
          [](const ArchChain& c) -> std::optional<DensitySpec> {
            return DensitySpec::skew_normal_arch(c.theta);
          },
          [](const IndepHastingsChain& c) -> std::optional<DensitySpec> {
            return DensitySpec::unnormalized(c.target, c.a, c.b);
          },
          [](const SphereWalkChain&) -> std::optional<DensitySpec> { return std::nullopt; },
      },
      spec);
}

std::span<const double> Trajectory::values() const {
  require(dim == 1, "trajectory: scalar view requested for a multivariate sample");
  return {points.data(), points.size()};
}

ChainSampler::ChainSampler(ChainSpec spec)
    : spec_(std::make_shared<const ChainSpec>(std::move(spec))) {
  validate(*spec_);
  dim_ = state_dim(*spec_);
  if (const auto* ih = std::get_if<IndepHastingsChain>(spec_.get())) {
    ScalarFn g = resolve_function(ih->target);
    log_target_ = [g](double x) { return std::log(g(x)); };
    if (ih->proposal.kind == ProposalKind::kUniform) {
      log_proposal_ = [](double) { return 0.0; };
    } else {
      const double mu = ih->proposal.mu;
      const double s2 = ih->proposal.sigma2;
      log_proposal_ = [mu, s2](double x) { return -(x - mu) * (x - mu) / (2.0 * s2); };
      const double mass = std_normal_cdf((ih->b - mu) / std::sqrt(s2)) -
                          std_normal_cdf((ih->a - mu) / std::sqrt(s2));
      require(mass > 1e-6, "indep_hastings: proposal puts almost no mass on the interval");
    }
  } else if (const auto* sw = std::get_if<SphereWalkChain>(spec_.get())) {
    radial_ = resolve_function(sw->radial);
    double peak = 0.0;
    for (int k = 0; k <= 4 * kValidationPoints; ++k) {
      peak = std::max(peak, radial_(-1.0 + 2.0 * k / (4 * kValidationPoints)));
    }
    radial_envelope_ = 1.05 * peak;
  }
}

void ChainSampler::sample_into(std::size_t n, Rng& rng, std::vector<double>& out) const {
  require(n >= 1, "sample_chain: n must be at least 1");
  out.resize(n * dim_);
  std::visit(
      Overloaded{
          [&](const Ar1Chain& c) {
            out[0] = 0.0;
            for (std::size_t i = 1; i < n; ++i) out[i] = c.theta * out[i - 1] + c.tau * rng.normal();
          },
          [&](const ArchChain& c) {
            const double s = std::sqrt(1.0 - c.theta * c.theta);
            out[0] = 0.0;
            for (std::size_t i = 1; i < n; ++i) {
              out[i] = c.theta * std::fabs(out[i - 1]) + s * rng.normal();
            }
          },
          [&](const IndepHastingsChain& c) {
            auto propose = [&]() {
              if (c.proposal.kind == ProposalKind::kUniform) return rng.uniform(c.a, c.b);
              const double sd = std::sqrt(c.proposal.sigma2);
              for (;;) {
                const double y = rng.normal(c.proposal.mu, sd);
                if (y >= c.a && y <= c.b) return y;
              }
            };
            double x = propose();
            double lx = log_target_(x) - log_proposal_(x);
            out[0] = x;
            for (std::size_t i = 1; i < n; ++i) {
              const double y = propose();
              const double ly = log_target_(y) - log_proposal_(y);
              const double u = rng.uniform();
              if (ly >= lx || u < std::exp(ly - lx)) {
                x = y;
                lx = ly;
              }
              out[i] = x;
            }
          },
          [&](const SphereWalkChain& c) {
            const auto d = static_cast<std::size_t>(c.dim);
            double norm = 0.0;
            do {
              norm = 0.0;
              for (std::size_t k = 0; k < d; ++k) {
                out[k] = rng.normal();
                norm += out[k] * out[k];
              }
              norm = std::sqrt(norm);
            } while (norm < 1e-8);
            for (std::size_t k = 0; k < d; ++k) out[k] /= norm;
            std::vector<double> scratch(d);
            for (std::size_t i = 1; i < n; ++i) {
              double r;
              do {
                r = rng.uniform(-1.0, 1.0);
              } while (rng.uniform() * radial_envelope_ >= radial_(r));
              sphere_step_into({out.data() + (i - 1) * d, d}, r, rng, {out.data() + i * d, d},
                               scratch);
            }
          },
      },
      *spec_);
}

Trajectory ChainSampler::sample(std::size_t n, std::uint64_t seed) const {
  Rng rng(seed);
  Trajectory traj;
  traj.dim = dim_;
  traj.seed = seed;
  traj.spec = spec_;
  sample_into(n, rng, traj.points);
  return traj;
}

Trajectory sample_chain(const ChainSpec& spec, std::size_t n, std::uint64_t seed) {
  return ChainSampler(spec).sample(n, seed);
}

double mh_acceptance(double x, double y, const ScalarFn& target_logdensity,
                     const ScalarFn& proposal_logdensity) {
  require_finite(x, "mh_acceptance: x");
  require_finite(y, "mh_acceptance: y");
  const double lpx = target_logdensity(x);
  const double lpy = target_logdensity(y);
  const double lqx = proposal_logdensity(x);
  const double lqy = proposal_logdensity(y);
  if (!std::isfinite(lpx) || !std::isfinite(lpy) || !std::isfinite(lqx) || !std::isfinite(lqy)) {
    fail(ErrorCode::kNumerical, "mh_acceptance: log-density evaluation is not finite");
  }
  return std::exp(std::min(0.0, (lpy + lqx) - (lpx + lqy)));
}

void sample_iid_into(const DensitySpec& density, std::size_t n, Rng& rng, std::vector<double>& out,
                     std::size_t max_attempts) {
  require(n >= 1, "sample_iid: n must be at least 1");
  out.resize(n);
  for (auto& v : out) v = density.draw(rng, max_attempts);
}

Trajectory sample_iid(const DensitySpec& density, std::size_t n, std::uint64_t seed,
                      std::size_t max_attempts) {
  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  sample_iid_into(density, n, rng, traj.points, max_attempts);
  return traj;
}

std::vector<double> sphere_walk_step(std::span<const double> x, double r, Rng& rng) {
  require(std::isfinite(r) && std::fabs(r) <= 1.0, "sphere_walk_step: need |r| <= 1");
  require(x.size() >= 2, "sphere_walk_step: need dimension >= 2");
  double norm = 0.0;
  for (double v : x) norm += v * v;
  require(std::fabs(std::sqrt(norm) - 1.0) <= 1e-10, "sphere_walk_step: x must be a unit vector");
  std::vector<double> out(x.size());
  std::vector<double> scratch;
  sphere_step_into(x, r, rng, out, scratch);
  return out;
}

}  // namespace ustat
