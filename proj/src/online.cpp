#include "ustat/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ustat/error.hpp"
#include "ustat/parallel.hpp"

namespace ustat {

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

constexpr std::size_t kRiskBlock = 1024;

}  // namespace

std::array<double, 3> Hypothesis::features(double x) { return {x, x * x, std::sin(x)}; }

double Hypothesis::score(double x, double u) const {
  const auto a = features(x);
  const auto b = features(u);
  return w[0] * (a[0] - b[0]) + w[1] * (a[1] - b[1]) + w[2] * (a[2] - b[2]);
}

double PairwiseLoss::phi(double label_diff, double s) const {
  if (kind == LossKind::kConstant) return kappa;
  const double y = sign(label_diff);
  if (y == 0.0) return 0.0;
  switch (kind) {
    case LossKind::kMisranking:
      return (y * s < 0.0) ? 1.0 : 0.0;
    case LossKind::kSigmoid:
      return 1.0 / (1.0 + std::exp(y * s));
    case LossKind::kLogistic:
      return std::min(1.0, std::log1p(std::exp(-y * s)) / std::numbers::ln2);
    case LossKind::kConstant:
      break;
  }
  return kappa;
}

double PairwiseLoss::label_of(double x) const {
  if (label == "identity") return x;
  if (label == "square") return x * x;
  if (label == "abs") return std::abs(x);
  fail(ErrorCode::kInvalidArgument, "unknown label function '" + label + "'");
}

double PairwiseLoss::operator()(const Hypothesis& h, double x, double u) const {
  if (kind == LossKind::kConstant) return kappa;
  return phi(label_of(x) - label_of(u), h.score(x, u));
}

double PairwiseLoss::lipschitz() const {
  switch (kind) {
    case LossKind::kMisranking:
      return std::numeric_limits<double>::infinity();
    case LossKind::kSigmoid:
      return 0.25;
    case LossKind::kLogistic:
      return 1.0 / (2.0 * std::numbers::ln2);
    case LossKind::kConstant:
      return 0.0;
  }
  return 0.0;
}

std::string PairwiseLoss::describe() const {
  switch (kind) {
    case LossKind::kMisranking:
      return "misranking[" + label + "]";
    case LossKind::kSigmoid:
      return "sigmoid[" + label + "]";
    case LossKind::kLogistic:
      return "logistic[" + label + "]";
    case LossKind::kConstant: {
      std::ostringstream s;
      s << "constant(" << kappa << ")";
      return s.str();
    }
  }
  return "?";
}

PairwiseLoss loss_from_name(const std::string& name, const std::string& label) {
  PairwiseLoss loss;
  loss.label = label;
  if (name == "misranking") {
    loss.kind = LossKind::kMisranking;
  } else if (name == "sigmoid") {
    loss.kind = LossKind::kSigmoid;
  } else if (name == "logistic") {
    loss.kind = LossKind::kLogistic;
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown loss '" + name + "' (misranking, sigmoid, logistic)");
  }
  loss.label_of(0.0);
  return loss;
}

OnlineIndices online_indices(const OnlineParams& p, std::size_t n) {
  require(p.c > 0.0 && p.c < 1.0, "online: c must lie in (0, 1)");
  require(p.xi > 0.0, "online: xi must be positive");
  require(p.rho > 0.0 && p.rho < 1.0, "online: rho must lie in (0, 1)");
  require(p.m > 0.0 && p.tau > 0.0, "online: m and tau must be positive");
  require(p.penalty_scale >= 0.0, "online: penalty scale must be non-negative");
  require(n >= 3, "online: need a stream of at least 3 points");
  OnlineIndices idx;
  idx.n = n;
  idx.c_n = static_cast<std::size_t>(std::ceil(p.c * static_cast<double>(n)));
  idx.q = (p.xi + 1.0) / std::log(1.0 / p.rho);
  idx.b_n = static_cast<std::size_t>(std::floor(idx.q * std::log(static_cast<double>(n))));
  if (idx.c_n < idx.b_n + 1 || idx.c_n + 2 > n) {
    std::ostringstream msg;
    msg << "online: n=" << n << " too small: c_n=" << idx.c_n << ", b_n=" << idx.b_n
        << " (need c_n - b_n >= 1 and c_n <= n - 2)";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  return idx;
}

double inverse_penalty_constant(const OnlineParams& p) { return 7000.0 * p.m * p.m * p.tau * p.tau; }

double resolve_gamma(const OnlineParams& p, const OnlineIndices& idx) {
  double gamma = p.gamma;
  if (p.epsilon > 0.0) {
    const double span = static_cast<double>(idx.n - idx.c_n);
    gamma = 64.0 * (span + 1.0) *
            std::exp(-span * p.epsilon * p.epsilon / (128.0 * inverse_penalty_constant(p)));
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    std::ostringstream msg;
    msg << "online: gamma=" << gamma << " is outside (0, 1)";
    if (p.epsilon > 0.0) msg << "; increase epsilon or n";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  return gamma;
}

double penalty(double x, const OnlineParams& p, const OnlineIndices& idx, double gamma) {
  require(x >= 1.0, "penalty: x must be at least 1");
  require(gamma > 0.0 && gamma < 1.0, "penalty: gamma must lie in (0, 1)");
  const double span = static_cast<double>(idx.n - idx.c_n);
  return std::sqrt(inverse_penalty_constant(p) / x * std::log(64.0 * span * (span + 1.0) / gamma));
}

double paired_empirical_risk(std::size_t t, std::span<const Hypothesis> hyps, std::span<const double> x,
                             const PairwiseLoss& loss, const OnlineIndices& idx) {
  if (t < idx.c_n || t + 1 > idx.n || t <= idx.b_n) {
    std::ostringstream msg;
    msg << "paired_empirical_risk: t=" << t << " outside [" << idx.c_n << ", " << idx.n - 1 << "]";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  require(x.size() == idx.n && hyps.size() >= idx.n - idx.b_n,
          "paired_empirical_risk: stream or hypothesis list too short");
  const std::size_t k = t - idx.b_n;
  const Hypothesis& h = hyps[k];
  const double xt = x[t - 1];
  double sum = 0.0;
  for (std::size_t i = 1; i <= k; ++i) sum += loss(h, xt, x[i - 1]);
  return sum / static_cast<double>(k);
}

double average_paired_risk(std::span<const Hypothesis> hyps, std::span<const double> x,
                           const PairwiseLoss& loss, const OnlineIndices& idx) {
  double sum = 0.0;
  for (std::size_t t = idx.c_n; t <= idx.n - 1; ++t) sum += paired_empirical_risk(t, hyps, x, loss, idx);
  return sum / static_cast<double>(idx.n - idx.c_n);
}

double suffix_empirical_risk(std::size_t t, const Hypothesis& h, std::span<const double> x,
                             const PairwiseLoss& loss) {
  const std::size_t n = x.size();
  if (n < 2 || t + 2 > n) {
    std::ostringstream msg;
    msg << "suffix_empirical_risk: t=" << t << " exceeds n - 2 = " << static_cast<long long>(n) - 2;
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  if (loss.kind == LossKind::kConstant) return loss.kappa;
  // Scores are differences of a projection, so project each point once.
  std::vector<double> proj(n - t);
  std::vector<double> label(n - t);
  for (std::size_t i = t + 1; i <= n; ++i) {
    const auto f = Hypothesis::features(x[i - 1]);
    proj[i - t - 1] = h.w[0] * f[0] + h.w[1] * f[1] + h.w[2] * f[2];
    label[i - t - 1] = loss.label_of(x[i - 1]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    for (std::size_t k = i + 1; k < proj.size(); ++k) {
      sum += loss.phi(label[i] - label[k], proj[i] - proj[k]);
    }
  }
  const double m = static_cast<double>(n - t);
  return sum / (m * (m - 1.0) / 2.0);
}

std::size_t argmin_penalized(std::span<const double> risk, std::span<const double> pen) {
  require(!risk.empty() && risk.size() == pen.size(), "argmin_penalized: size mismatch");
  std::size_t best = 0;
  double best_value = risk[0] + pen[0];
  for (std::size_t i = 1; i < risk.size(); ++i) {
    const double v = risk[i] + pen[i];
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

std::size_t select_t(const RiskTrace& trace, double penalty_scale) {
  const std::size_t count = trace.t.size() - 1;  // t = n - 1 has no suffix pairs
  std::vector<double> scaled(count);
  for (std::size_t i = 0; i < count; ++i) scaled[i] = penalty_scale * trace.penalty[i];
  const auto pick = argmin_penalized(std::span(trace.suffix_risk).first(count), scaled);
  return trace.t[pick];
}

RiskTrace build_risk_trace(std::span<const Hypothesis> hyps, std::span<const double> x,
                           const PairwiseLoss& loss, const OnlineParams& params) {
  RiskTrace trace;
  trace.idx = online_indices(params, x.size());
  require(hyps.size() == x.size(), "build_risk_trace: need one hypothesis per stream point");
  trace.gamma = resolve_gamma(params, trace.idx);
  const auto& idx = trace.idx;
  double sum = 0.0;
  for (std::size_t t = idx.c_n; t <= idx.n - 1; ++t) {
    trace.t.push_back(t);
    const double m = paired_empirical_risk(t, hyps, x, loss, idx);
    trace.m_t.push_back(m);
    sum += m;
    trace.suffix_risk.push_back(t + 2 <= idx.n ? suffix_empirical_risk(t, hyps[t - idx.b_n], x, loss)
                                               : std::numeric_limits<double>::quiet_NaN());
    trace.penalty.push_back(penalty(static_cast<double>(idx.n - t), params, idx, trace.gamma));
  }
  trace.m_avg = sum / static_cast<double>(idx.n - idx.c_n);
  trace.selected_t = select_t(trace, params.penalty_scale);
  trace.selected = hyps[trace.selected_t - idx.b_n];
  return trace;
}

std::vector<Hypothesis> reference_online_learner(std::span<const double> x, const PairwiseLoss& loss,
                                                 const StepSchedule& schedule) {
  require(schedule.eta0 >= 0.0 && schedule.power >= 0.0, "learner: step sizes must be non-negative");
  const std::size_t n = x.size();
  std::vector<std::array<double, 3>> feats(n);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    feats[i] = Hypothesis::features(x[i]);
    labels[i] = loss.label_of(x[i]);
  }
  std::vector<Hypothesis> hyps(n);
  Hypothesis current;
  for (std::size_t k = 1; k < n; ++k) {
    // Step after receiving X_k (k >= 2), averaging over pairs (X_k, X_i), i < k.
    if (k >= 2 && schedule.eta0 > 0.0) {
      const double eta = schedule.eta0 / std::pow(static_cast<double>(k), schedule.power);
      std::array<double, 3> grad{};
      const auto& fk = feats[k - 1];
      for (std::size_t i = 0; i + 1 < k; ++i) {
        const double y = sign(labels[k - 1] - labels[i]);
        if (y == 0.0) continue;
        const std::array<double, 3> d{fk[0] - feats[i][0], fk[1] - feats[i][1], fk[2] - feats[i][2]};
        const double s = current.w[0] * d[0] + current.w[1] * d[1] + current.w[2] * d[2];
        const double g = -y / (std::numbers::ln2 * (1.0 + std::exp(y * s)));
        for (int c = 0; c < 3; ++c) grad[c] += g * d[c];
      }
      const double inv = 1.0 / static_cast<double>(k - 1);
      double norm = 0.0;
      for (int c = 0; c < 3; ++c) {
        current.w[c] -= eta * grad[c] * inv;
        norm += current.w[c] * current.w[c];
      }
      if (!(std::sqrt(norm) <= 1e6)) {
        std::ostringstream msg;
        msg << "learner: weights diverged at step " << k << "; use a smaller eta0";
        fail(ErrorCode::kNumerical, msg.str());
      }
    }
    current.id = k;
    hyps[k] = current;
  }
  return hyps;
}

std::vector<RiskEstimate> true_risks(std::span<const Hypothesis> hyps, const PairwiseLoss& loss,
                                     const ChainSpec& chain, std::size_t reps, std::uint64_t seed,
                                     std::size_t workers) {
  require(reps >= 2, "true_risk: need at least two pairs");
  const auto pi = invariant_density(chain);
  if (!pi) fail(ErrorCode::kInvalidArgument, "true_risk: chain has no scalar invariant law");
  const std::size_t blocks = (reps + kRiskBlock - 1) / kRiskBlock;
  const std::size_t nh = hyps.size();
  std::vector<double> sums(blocks * nh, 0.0);
  std::vector<double> squares(blocks * nh, 0.0);
  parallel_for(blocks, workers, [&](std::size_t b) {
    Rng rng(derive_seed(seed, "true-risk", b));
    const std::size_t count = std::min(kRiskBlock, reps - b * kRiskBlock);
    for (std::size_t r = 0; r < count; ++r) {
      const double a = pi->draw(rng);
      const double c = pi->draw(rng);
      for (std::size_t h = 0; h < nh; ++h) {
        const double v = loss(hyps[h], a, c);
        sums[b * nh + h] += v;
        squares[b * nh + h] += v * v;
      }
    }
  });
  std::vector<RiskEstimate> out(nh);
  const double r = static_cast<double>(reps);
  for (std::size_t h = 0; h < nh; ++h) {
    double s = 0.0;
    double q = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      s += sums[b * nh + h];
      q += squares[b * nh + h];
    }
    const double mean = s / r;
    const double var = std::max(0.0, (q - r * mean * mean) / (r - 1.0));
    out[h] = RiskEstimate{mean, std::sqrt(var / r), reps};
  }
  return out;
}

RiskEstimate true_risk(const Hypothesis& h, const PairwiseLoss& loss, const ChainSpec& chain,
                       std::size_t reps, std::uint64_t seed, std::size_t workers) {
  const Hypothesis one[] = {h};
  return true_risks(one, loss, chain, reps, seed, workers).front();
}

}  // namespace ustat
