#include "ustat/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ustat/error.hpp"

namespace ustat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kTableIntervals = 4096;
constexpr int kValidationPoints = 1001;

double param(const NamedFunction& fn, const std::string& key) {
  auto it = fn.params.find(key);
  if (it == fn.params.end()) {
    fail(ErrorCode::kConfig, "function '" + fn.name + "' requires parameter '" + key + "'");
  }
  if (!std::isfinite(it->second)) {
    fail(ErrorCode::kConfig, "function '" + fn.name + "': parameter '" + key + "' is not finite");
  }
  return it->second;
}

double param_or(const NamedFunction& fn, const std::string& key, double fallback) {
  return fn.params.contains(key) ? param(fn, key) : fallback;
}

// P(lo < X <= hi) for X ~ N(mu, sd^2), using erfc on the side away from the
// mean so that both tails keep full relative precision.
double gaussian_probability(double mu, double sd, double lo, double hi) {
  if (hi <= lo) return 0.0;
  const double zl = (lo - mu) / (sd * std::numbers::sqrt2);
  const double zh = (hi - mu) / (sd * std::numbers::sqrt2);
  if (zl >= 0.0) return 0.5 * (std::erfc(zl) - std::erfc(zh));
  if (zh <= 0.0) return 0.5 * (std::erfc(-zh) - std::erfc(-zl));
  return 1.0 - 0.5 * std::erfc(zh) - 0.5 * std::erfc(-zl);
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

ScalarFn resolve_function(const NamedFunction& fn) {
  if (fn.name == "mh_example") {
    return [](double x) { return std::exp(-x * x) * (3.0 + std::sin(5.0 * x) + std::sin(2.0 * x)); };
  }
  if (fn.name == "uniform") {
    return [](double) { return 1.0; };
  }
  if (fn.name == "gaussian") {
    const double mu = param(fn, "mu");
    const double s2 = param(fn, "sigma2");
    if (s2 <= 0.0) fail(ErrorCode::kConfig, "function 'gaussian': sigma2 must be positive");
    return [mu, s2](double x) { return std::exp(-(x - mu) * (x - mu) / (2.0 * s2)); };
  }
  if (fn.name == "beta_affine") {
    const double a = param(fn, "alpha");
    const double b = param(fn, "beta");
    const double shift = param_or(fn, "shift", 0.0);
    const double scale = param_or(fn, "scale", 1.0);
    if (a <= 0.0 || b <= 0.0 || scale <= 0.0) {
      fail(ErrorCode::kConfig, "function 'beta_affine': alpha, beta and scale must be positive");
    }
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    return [a, b, shift, scale, log_beta](double x) {
      const double t = (x + shift) / scale;
      if (t < 0.0 || t > 1.0) return 0.0;
      return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0) * std::exp(-log_beta);
    };
  }
  fail(ErrorCode::kConfig, "unknown function name '" + fn.name + "'");
}

std::string describe(const NamedFunction& fn) {
  std::ostringstream out;
  out << fn.name;
  if (!fn.params.empty()) {
    out << '(';
    bool first = true;
    for (const auto& [k, v] : fn.params) {
      out << (first ? "" : ", ") << k << '=' << v;
      first = false;
    }
    out << ')';
  }
  return out.str();
}

struct DensitySpec::Impl {
  DensityKind kind = DensityKind::kGaussian;
  double mu = 0.0;
  double sigma2 = 1.0;
  double sd = 1.0;
  double a = -kInf;
  double b = kInf;
  double theta = 0.0;
  double skew = 0.0;  // theta / sqrt(1 - theta^2)
  double z = 1.0;
  std::optional<NamedFunction> fn;
  std::string label;
  ScalarFn g;
  double l2 = 0.0;
  double envelope = 0.0;
  // Tabulated CDF on [lo, hi] for the kinds without a closed form.
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
  std::vector<double> cumulative;

  double pdf(double x) const {
    switch (kind) {
      case DensityKind::kGaussian:
        return std_normal_pdf((x - mu) / sd) / sd;
      case DensityKind::kTruncatedGaussian:
        if (x < a || x > b) return 0.0;
        return std_normal_pdf((x - mu) / sd) / (sd * z);
      case DensityKind::kSkewNormalArch:
        return 2.0 * std_normal_pdf(x) * std_normal_cdf(skew * x);
      case DensityKind::kUnnormalizedOnInterval:
        if (x < a || x > b) return 0.0;
        return g(x) / z;
    }
    return 0.0;
  }

  std::pair<double, double> support() const {
    switch (kind) {
      case DensityKind::kGaussian:
        return {mu - 10.0 * sd, mu + 10.0 * sd};
      case DensityKind::kTruncatedGaussian:
        return {std::max(a, mu - 10.0 * sd), std::min(b, mu + 10.0 * sd)};
      case DensityKind::kSkewNormalArch:
        return {-10.0, 10.0};
      case DensityKind::kUnnormalizedOnInterval:
        return {a, b};
    }
    return {0.0, 0.0};
  }

  void build_table() {
    std::tie(lo, hi) = support();
    step = (hi - lo) / kTableIntervals;
    cumulative.assign(kTableIntervals + 1, 0.0);
    double prev = pdf(lo);
    for (int k = 0; k < kTableIntervals; ++k) {
      const double x0 = lo + k * step;
      const double x1 = (k + 1 == kTableIntervals) ? hi : x0 + step;
      const double mid = pdf(0.5 * (x0 + x1));
      const double next = pdf(x1);
      cumulative[k + 1] = cumulative[k] + (x1 - x0) / 6.0 * (prev + 4.0 * mid + next);
      prev = next;
    }
    const double total = cumulative.back();
    if (std::fabs(total - 1.0) > 1e-6) {
      std::ostringstream msg;
      msg << "density " << label << " integrates to " << total << " instead of 1";
      fail(ErrorCode::kNumerical, msg.str());
    }
  }

  double table_cdf(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const auto k = std::min(static_cast<int>((x - lo) / step), kTableIntervals - 1);
    const double x0 = lo + k * step;
    const double part = (x - x0) / 6.0 * (pdf(x0) + 4.0 * pdf(0.5 * (x0 + x)) + pdf(x));
    return std::clamp(cumulative[k] + part, 0.0, 1.0);
  }

  void finish() {
    if (kind == DensityKind::kSkewNormalArch || kind == DensityKind::kUnnormalizedOnInterval) {
      build_table();
    }
    if (kind == DensityKind::kGaussian) {
      l2 = 1.0 / (2.0 * sd * std::sqrt(std::numbers::pi));
    } else {
      auto [s0, s1] = support();
      std::vector<double> bp{s0, 0.5 * (s0 + s1), s1};
      l2 = integrate_pieces([this](double x) { double p = pdf(x); return p * p; }, bp, 1e-10);
    }
    if (kind != DensityKind::kGaussian) {
      auto [s0, s1] = support();
      double peak = 0.0;
      constexpr int kScan = 4 * kTableIntervals;
      for (int k = 0; k <= kScan; ++k) peak = std::max(peak, pdf(s0 + (s1 - s0) * k / kScan));
      envelope = 1.05 * peak;
    }
  }
};

DensitySpec DensitySpec::gaussian(double mu, double sigma2) {
  require(std::isfinite(mu) && std::isfinite(sigma2), "gaussian: parameters must be finite");
  require(sigma2 > 0.0, "gaussian: sigma2 must be positive");
  auto impl = std::make_shared<Impl>();
  impl->kind = DensityKind::kGaussian;
  impl->mu = mu;
  impl->sigma2 = sigma2;
  impl->sd = std::sqrt(sigma2);
  std::ostringstream label;
  label << "gaussian(mu=" << mu << ", sigma2=" << sigma2 << ")";
  impl->label = label.str();
  impl->finish();
  return DensitySpec(std::move(impl));
}

DensitySpec DensitySpec::truncated_gaussian(double mu, double sigma2, double a, double b) {
  require(std::isfinite(mu) && std::isfinite(sigma2) && std::isfinite(a) && std::isfinite(b),
          "truncated_gaussian: parameters must be finite");
  require(sigma2 > 0.0, "truncated_gaussian: sigma2 must be positive");
  require(a < b, "truncated_gaussian: need a < b");
  auto impl = std::make_shared<Impl>();
  impl->kind = DensityKind::kTruncatedGaussian;
  impl->mu = mu;
  impl->sigma2 = sigma2;
  impl->sd = std::sqrt(sigma2);
  impl->a = a;
  impl->b = b;
  impl->z = gaussian_probability(mu, impl->sd, a, b);
  require(impl->z > 1e-12, "truncated_gaussian: interval carries no mass");
  std::ostringstream label;
  label << "truncated_gaussian(mu=" << mu << ", sigma2=" << sigma2 << ", a=" << a << ", b=" << b
        << ")";
  impl->label = label.str();
  impl->finish();
  return DensitySpec(std::move(impl));
}

DensitySpec DensitySpec::skew_normal_arch(double theta) {
  require(std::isfinite(theta) && std::fabs(theta) < 1.0, "skew_normal_arch: need |theta| < 1");
  auto impl = std::make_shared<Impl>();
  impl->kind = DensityKind::kSkewNormalArch;
  impl->theta = theta;
  impl->skew = theta / std::sqrt(1.0 - theta * theta);
  std::ostringstream label;
  label << "skew_normal_arch(theta=" << theta << ")";
  impl->label = label.str();
  impl->finish();
  return DensitySpec(std::move(impl));
}

DensitySpec DensitySpec::unnormalized(const NamedFunction& g, double a, double b) {
  DensitySpec spec = unnormalized(ustat::describe(g), resolve_function(g), a, b);
  auto impl = std::make_shared<Impl>(*spec.impl_);
  impl->fn = g;
  return DensitySpec(std::move(impl));
}

DensitySpec DensitySpec::unnormalized(std::string label, ScalarFn g, double a, double b) {
  require(std::isfinite(a) && std::isfinite(b) && a < b, "unnormalized density: need finite a < b");
  require(static_cast<bool>(g), "unnormalized density: missing function");
  for (int k = 0; k < kValidationPoints; ++k) {
    const double x = a + (b - a) * k / (kValidationPoints - 1);
    const double v = g(x);
    if (!std::isfinite(v) || v < 0.0) {
      std::ostringstream msg;
      msg << "unnormalized density " << label << ": value " << v << " at x=" << x
          << " is negative or not finite";
      fail(ErrorCode::kInvalidArgument, msg.str());
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = DensityKind::kUnnormalizedOnInterval;
  impl->a = a;
  impl->b = b;
  impl->g = std::move(g);
  impl->label = "unnormalized(" + label + " on [" + std::to_string(a) + ", " + std::to_string(b) + "])";
  impl->z = adaptive_simpson(impl->g, a, b, 1e-12);
  require(impl->z > 0.0, "unnormalized density: integral is zero");
  impl->finish();
  return DensitySpec(std::move(impl));
}

DensityKind DensitySpec::kind() const { return impl_->kind; }
double DensitySpec::pdf(double x) const { return impl_->pdf(x); }

double DensitySpec::cdf(double x) const {
  const Impl& d = *impl_;
  switch (d.kind) {
    case DensityKind::kGaussian:
      return std_normal_cdf((x - d.mu) / d.sd);
    case DensityKind::kTruncatedGaussian:
      if (x <= d.a) return 0.0;
      if (x >= d.b) return 1.0;
      return gaussian_probability(d.mu, d.sd, d.a, x) / d.z;
    default:
      return d.table_cdf(x);
  }
}

double DensitySpec::probability(double lo, double hi) const {
  if (hi <= lo) return 0.0;
  const Impl& d = *impl_;
  switch (d.kind) {
    case DensityKind::kGaussian:
      return gaussian_probability(d.mu, d.sd, lo, hi);
    case DensityKind::kTruncatedGaussian:
      return gaussian_probability(d.mu, d.sd, std::max(lo, d.a), std::min(hi, d.b)) / d.z;
    default:
      return std::max(0.0, cdf(hi) - cdf(lo));
  }
}

double DensitySpec::l2_norm_sq() const { return impl_->l2; }
std::pair<double, double> DensitySpec::effective_support() const { return impl_->support(); }

std::vector<double> DensitySpec::breakpoints() const {
  auto [lo, hi] = impl_->support();
  return {lo, hi};
}

double DensitySpec::draw(Rng& rng, std::size_t max_attempts) const {
  const Impl& d = *impl_;
  switch (d.kind) {
    case DensityKind::kGaussian:
      return rng.normal(d.mu, d.sd);
    case DensityKind::kTruncatedGaussian:
      for (std::size_t i = 0; i < max_attempts; ++i) {
        const double x = rng.normal(d.mu, d.sd);
        if (x >= d.a && x <= d.b) return x;
      }
      break;
    case DensityKind::kSkewNormalArch:
      // 2 phi(y) Phi(skew y) <= 2 phi(y): propose from N(0,1), accept w.p. Phi(skew y).
      for (std::size_t i = 0; i < max_attempts; ++i) {
        const double y = rng.normal();
        if (rng.uniform() < std_normal_cdf(d.skew * y)) return y;
      }
      break;
    case DensityKind::kUnnormalizedOnInterval:
      for (std::size_t i = 0; i < max_attempts; ++i) {
        const double x = rng.uniform(d.a, d.b);
        if (rng.uniform() * d.envelope < d.pdf(x)) return x;
      }
      break;
  }
  std::ostringstream msg;
  msg << "rejection sampling failed after " << max_attempts << " attempts for density " << d.label;
  fail(ErrorCode::kNumerical, msg.str());
}

std::string DensitySpec::describe() const { return impl_->label; }
double DensitySpec::mu() const { return impl_->mu; }
double DensitySpec::sigma2() const { return impl_->sigma2; }
double DensitySpec::lower() const { return impl_->a; }
double DensitySpec::upper() const { return impl_->b; }
double DensitySpec::theta() const { return impl_->theta; }
double DensitySpec::normalizer() const { return impl_->z; }
const std::optional<NamedFunction>& DensitySpec::function() const { return impl_->fn; }

}  // namespace ustat
