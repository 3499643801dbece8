#include "ustat/gof.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "ustat/config.hpp"
#include "ustat/error.hpp"
#include "ustat/parallel.hpp"

namespace ustat {

namespace {

std::vector<std::int64_t> bin_keys(std::span<const double> sample, double dim) {
  std::vector<std::int64_t> keys(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = sample[i];
    if (!std::isfinite(x)) fail(ErrorCode::kInvalidArgument, "theta_hat: sample has a non-finite value");
    keys[i] = static_cast<std::int64_t>(std::floor(x * dim));
  }
  return keys;
}

// D / (n (n - 1)) * sum_k c_k (c_k - 1) over occupied bins.
double histogram_theta(std::span<const double> sample, std::uint64_t dim) {
  const double d = static_cast<double>(dim);
  auto keys = bin_keys(sample, d);
  std::sort(keys.begin(), keys.end());
  double pairs = 0.0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= keys.size(); ++i) {
    if (i < keys.size() && keys[i] == keys[i - 1]) {
      ++run;
    } else {
      pairs += static_cast<double>(run) * static_cast<double>(run - 1);
      run = 1;
    }
  }
  const double n = static_cast<double>(sample.size());
  return d * pairs / (n * (n - 1.0));
}

double fourier_theta(std::span<const double> sample, std::uint64_t dim) {
  for (double x : sample) {
    if (!(x >= 0.0 && x <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "theta_hat: the Fourier family needs all points in [0, 1]");
    }
  }
  const double n = static_cast<double>(sample.size());
  double total = n * n - n;  // g_0 = 1 on [0, 1]
  for (std::uint64_t j = 1; j <= dim; ++j) {
    const std::uint64_t p = (j + 1) / 2;
    const bool cosine = (j % 2) == 1;
    double s = 0.0;
    double q = 0.0;
    for (double x : sample) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(p) * x;
      const double g = std::numbers::sqrt2 * (cosine ? std::cos(arg) : std::sin(arg));
      s += g;
      q += g * g;
    }
    total += s * s - q;
  }
  return total / (n * (n - 1.0));
}

std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

void validate(const ModelIndex& m) {
  require(m.family >= 1 && m.family <= 3, "model: family must be 1, 2 or 3");
  if (m.family == 1) require(m.dim >= 1, "model: histogram dimension must be positive");
  if (m.family == 2) {
    require(m.dim >= 1 && std::has_single_bit(m.dim), "model: Haar dimension must be a power of two");
  }
}

std::string describe(const ModelIndex& m) {
  return "(" + std::to_string(m.family) + "," + std::to_string(m.dim) + ")";
}

std::vector<ModelIndex> default_models() {
  std::vector<ModelIndex> out;
  for (std::uint64_t d = 1; d <= 10; ++d) out.push_back({1, d});
  return out;
}

double theta_hat(const ModelIndex& m, std::span<const double> sample) {
  validate(m);
  require(sample.size() >= 2, "theta_hat: need at least two points");
  if (m.family == 3) return fourier_theta(sample, m.dim);
  return histogram_theta(sample, m.dim);
}

double t_hat_statistic(const ModelIndex& m, std::span<const double> sample, const DensitySpec& f0) {
  const ModelIndex models[] = {m};
  return t_hat_statistics(models, sample, f0).front();
}

std::vector<double> t_hat_statistics(std::span<const ModelIndex> models,
                                     std::span<const double> sample, const DensitySpec& f0) {
  require(sample.size() >= 2, "t_hat_statistic: need at least two points");
  double mean_f0 = 0.0;
  for (double x : sample) mean_f0 += f0.pdf(x);
  mean_f0 /= static_cast<double>(sample.size());
  const double shift = f0.l2_norm_sq() - 2.0 * mean_f0;
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(theta_hat(m, sample) + shift);
  return out;
}

double upper_quantile(std::span<const double> sorted, double u) {
  require(!sorted.empty(), "quantile of an empty sample");
  const double r = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil((1.0 - u) * r - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, sorted.size());
  return sorted[idx - 1];
}

CalibrationTable calibrate(const DensitySpec& f0, std::vector<ModelIndex> models,
                           const CalibrationOptions& options) {
  require(!models.empty(), "calibrate: empty model list");
  for (const auto& m : models) validate(m);
  require(options.alpha > 0.0 && options.alpha < 1.0, "calibrate: alpha must lie in (0, 1)");
  require(options.reps >= 100, "calibrate: need at least 100 replications");
  require(options.n >= 2, "calibrate: need n >= 2");

  CalibrationTable table;
  table.models = std::move(models);
  table.n = options.n;
  table.reps = options.reps;
  table.alpha = options.alpha;
  table.seed = options.seed;
  table.f0 = f0;
  if (!options.u_grid.empty()) {
    table.u_grid = options.u_grid;
  } else {
    require(options.u_grid_size >= 1, "calibrate: empty u-grid");
    for (std::size_t k = 1; k <= options.u_grid_size; ++k) {
      table.u_grid.push_back(options.alpha * static_cast<double>(k) /
                             static_cast<double>(options.u_grid_size));
    }
  }
  require(!table.u_grid.empty(), "calibrate: empty u-grid");
  for (std::size_t k = 0; k < table.u_grid.size(); ++k) {
    require(table.u_grid[k] > 0.0 && table.u_grid[k] < 1.0, "calibrate: u-grid values must lie in (0, 1)");
    require(k == 0 || table.u_grid[k] > table.u_grid[k - 1], "calibrate: u-grid must be ascending");
  }

  const std::size_t n_models = table.models.size();
  const std::size_t reps = options.reps;
  auto simulate = [&](const char* phase) {
    std::vector<double> stats(reps * n_models);
    parallel_for(reps, options.workers, [&](std::size_t r) {
      Rng rng(derive_seed(options.seed, phase, r));
      std::vector<double> sample;
      sample_iid_into(f0, options.n, rng, sample);
      const auto t = t_hat_statistics(table.models, sample, f0);
      std::copy(t.begin(), t.end(), stats.begin() + static_cast<std::ptrdiff_t>(r * n_models));
    });
    return stats;
  };

  // Step 1: quantiles from the first batch.
  const auto first = simulate("gof-calib-quantile");
  const std::size_t n_u = table.u_grid.size();
  table.thresholds.resize(n_models * n_u);
  for (std::size_t m = 0; m < n_models; ++m) {
    std::vector<double> column(reps);
    for (std::size_t r = 0; r < reps; ++r) column[r] = first[r * n_models + m];
    const auto sorted = sorted_copy(std::move(column));
    for (std::size_t k = 0; k < n_u; ++k) {
      table.thresholds[m * n_u + k] = upper_quantile(sorted, table.u_grid[k]);
    }
  }

  // Step 2: level of the aggregated test on a fresh batch.
  const auto second = simulate("gof-calib-level");
  table.level.assign(n_u, 0.0);
  for (std::size_t k = 0; k < n_u; ++k) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t m = 0; m < n_models; ++m) {
        if (second[r * n_models + m] - table.thresholds[m * n_u + k] > 0.0) {
          ++hits;
          break;
        }
      }
    }
    table.level[k] = static_cast<double>(hits) / static_cast<double>(reps);
  }
  bool found = false;
  for (std::size_t k = 0; k < n_u; ++k) {
    if (table.level[k] <= options.alpha) {
      table.u_alpha_index = k;
      found = true;
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "calibrate: no u-grid point reaches level " << options.alpha
        << " (smallest estimated level " << table.level.front()
        << "); use a finer grid near 0 or more replications";
    fail(ErrorCode::kNumerical, msg.str());
  }
  return table;
}

TestOutcome run_test(std::span<const double> sample, const CalibrationTable& table) {
  if (sample.size() != table.n) {
    std::ostringstream msg;
    msg << "run_test: sample length " << sample.size() << " does not match the table's n=" << table.n;
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  require(!table.models.empty() && table.thresholds.size() == table.models.size() * table.u_grid.size(),
          "run_test: calibration table model set does not match its thresholds");
  TestOutcome out;
  out.per_model = t_hat_statistics(table.models, sample, table.f0);
  out.t_alpha = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < table.models.size(); ++m) {
    out.t_alpha = std::max(out.t_alpha, out.per_model[m] - table.threshold_at_alpha(m));
  }
  out.reject = out.t_alpha > 0.0;
  return out;
}

std::string describe(const DataSource& source) {
  if (const auto* c = std::get_if<ChainSpec>(&source)) return describe(*c);
  return std::get<DensitySpec>(source).describe();
}

PowerEstimate estimate_rejection_rate(const DataSource& source, std::size_t n, std::size_t reps,
                                      std::uint64_t seed, const std::string& phase,
                                      const std::function<bool(std::span<const double>)>& decide,
                                      std::size_t workers) {
  require(reps >= 1, "estimate_power: need at least one replication");
  std::optional<ChainSampler> sampler;
  if (const auto* c = std::get_if<ChainSpec>(&source)) {
    sampler.emplace(*c);
    require(sampler->dim() == 1, "estimate_power: needs a scalar chain");
  }
  std::vector<unsigned char> rejected(reps, 0);
  parallel_for(reps, workers, [&](std::size_t r) {
    Rng rng(derive_seed(seed, phase, r));
    std::vector<double> sample;
    if (sampler) {
      sampler->sample_into(n, rng, sample);
    } else {
      sample_iid_into(std::get<DensitySpec>(source), n, rng, sample);
    }
    rejected[r] = decide(sample) ? 1 : 0;
  });
  PowerEstimate est;
  est.reps = reps;
  for (unsigned char v : rejected) est.rejections += v;
  est.power = static_cast<double>(est.rejections) / static_cast<double>(reps);
  est.std_error = std::sqrt(est.power * (1.0 - est.power) / static_cast<double>(reps));
  est.alternative = describe(source);
  return est;
}

PowerEstimate estimate_power(const DataSource& source, const CalibrationTable& table,
                             std::size_t reps, std::uint64_t seed, std::size_t workers) {
  require(reps >= 100, "estimate_power: need at least 100 replications");
  return estimate_rejection_rate(
      source, table.n, reps, seed, "gof-power",
      [&table](std::span<const double> s) { return run_test(s, table).reject; }, workers);
}

double ks_statistic(std::span<const double> sample, const DensitySpec& f0) {
  require(!sample.empty(), "ks_statistic: empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = f0.cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

namespace {

NullCalibratedThreshold null_threshold(const DensitySpec& f0, std::size_t n, std::size_t null_reps,
                                       double alpha, std::uint64_t seed, const char* phase,
                                       std::size_t workers,
                                       const std::function<double(std::span<const double>)>& stat) {
  require(alpha > 0.0 && alpha < 1.0, "null calibration: alpha must lie in (0, 1)");
  require(null_reps >= 1, "null calibration: need at least one replication");
  std::vector<double> values(null_reps);
  parallel_for(null_reps, workers, [&](std::size_t r) {
    Rng rng(derive_seed(seed, phase, r));
    std::vector<double> sample;
    sample_iid_into(f0, n, rng, sample);
    values[r] = stat(sample);
  });
  std::sort(values.begin(), values.end());
  return NullCalibratedThreshold{upper_quantile(values, alpha), n, null_reps, alpha};
}

}  // namespace

NullCalibratedThreshold calibrate_ks(const DensitySpec& f0, std::size_t n, std::size_t null_reps,
                                     double alpha, std::uint64_t seed, std::size_t workers) {
  return null_threshold(f0, n, null_reps, alpha, seed, "ks-null", workers,
                        [&f0](std::span<const double> s) { return ks_statistic(s, f0); });
}

bool ks_test_calibrated(std::span<const double> sample, const DensitySpec& f0,
                        std::size_t null_reps, double alpha, std::uint64_t seed) {
  const auto cal = calibrate_ks(f0, sample.size(), null_reps, alpha, seed);
  return ks_statistic(sample, f0) > cal.threshold;
}

Chi2Binning make_chi2_binning(const DensitySpec& f0, double a, double b, std::size_t bins) {
  require(bins >= 2, "chi2: need at least two bins");
  require(std::isfinite(a) && std::isfinite(b) && a < b, "chi2: need a finite interval a < b");
  Chi2Binning out;
  out.a = a;
  out.b = b;
  out.bins = bins;
  const double width = (b - a) / static_cast<double>(bins);
  std::vector<double> prob(bins);
  for (std::size_t j = 0; j < bins; ++j) {
    const double lo = a + width * static_cast<double>(j);
    const double hi = (j + 1 == bins) ? b : lo + width;
    prob[j] = f0.probability(lo, hi);
  }
  out.cell_of_bin.assign(bins, 0);
  // Leading zero-mass bins join the first positive cell, later ones join the
  // cell on their left.
  std::size_t pending_leading = 0;
  for (std::size_t j = 0; j < bins; ++j) {
    if (prob[j] > 0.0) {
      out.cell_prob.push_back(prob[j]);
      out.cell_of_bin[j] = out.cell_prob.size() - 1;
    } else if (out.cell_prob.empty()) {
      ++pending_leading;
    } else {
      out.cell_of_bin[j] = out.cell_prob.size() - 1;
    }
  }
  if (out.cell_prob.empty()) fail(ErrorCode::kNumerical, "chi2: f0 puts no mass on [a, b]");
  std::size_t merged = 0;
  for (double p : prob) merged += (p > 0.0) ? 0 : 1;
  (void)pending_leading;
  if (merged > 0) {
    std::ostringstream msg;
    msg << "chi2: " << merged << " of " << bins << " bins have zero mass under "
        << f0.describe() << " and were merged into neighbours";
    out.warnings.push_back(msg.str());
  }
  return out;
}

double chi2_statistic(std::span<const double> sample, const Chi2Binning& binning, std::size_t* clipped) {
  require(!sample.empty(), "chi2_statistic: empty sample");
  std::vector<double> observed(binning.cell_prob.size(), 0.0);
  const double width = (binning.b - binning.a) / static_cast<double>(binning.bins);
  std::size_t outside = 0;
  for (double x : sample) {
    std::size_t j;
    if (x < binning.a) {
      j = 0;
      ++outside;
    } else if (x >= binning.b) {
      j = binning.bins - 1;
      if (x > binning.b) ++outside;
    } else {
      j = std::min(static_cast<std::size_t>((x - binning.a) / width), binning.bins - 1);
    }
    observed[binning.cell_of_bin[j]] += 1.0;
  }
  if (clipped) *clipped = outside;
  const double n = static_cast<double>(sample.size());
  double stat = 0.0;
  for (std::size_t c = 0; c < observed.size(); ++c) {
    const double expected = n * binning.cell_prob[c];
    stat += (observed[c] - expected) * (observed[c] - expected) / expected;
  }
  return stat;
}

NullCalibratedThreshold calibrate_chi2(const DensitySpec& f0, const Chi2Binning& binning,
                                       std::size_t n, std::size_t null_reps, double alpha,
                                       std::uint64_t seed, std::size_t workers) {
  return null_threshold(f0, n, null_reps, alpha, seed, "chi2-null", workers,
                        [&binning](std::span<const double> s) { return chi2_statistic(s, binning); });
}

bool chi2_test_calibrated(std::span<const double> sample, const DensitySpec& f0, double a, double b,
                          std::size_t bins, std::size_t null_reps, double alpha, std::uint64_t seed) {
  const auto binning = make_chi2_binning(f0, a, b, bins);
  const auto cal = calibrate_chi2(f0, binning, sample.size(), null_reps, alpha, seed);
  return chi2_statistic(sample, binning) > cal.threshold;
}

double l2_distance(const DensitySpec& f, const DensitySpec& g) {
  std::vector<double> bp = f.breakpoints();
  const auto gb = g.breakpoints();
  bp.insert(bp.end(), gb.begin(), gb.end());
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  std::vector<double> fine;
  constexpr int kSplit = 8;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    for (int s = 0; s < kSplit; ++s) fine.push_back(bp[i] + (bp[i + 1] - bp[i]) * s / kSplit);
  }
  fine.push_back(bp.back());
  const double sq = integrate_pieces(
      [&](double x) {
        const double d = f.pdf(x) - g.pdf(x);
        return d * d;
      },
      fine, 1e-10);
  return std::sqrt(std::max(0.0, sq));
}

void write_table(const CalibrationTable& table, std::ostream& out) {
  out << kTableFormat << '\n';
  out << std::setprecision(17);
  out << "n " << table.n << '\n';
  out << "alpha " << table.alpha << '\n';
  out << "reps " << table.reps << '\n';
  out << "seed " << table.seed << '\n';
  out << "f0 " << to_json(table.f0).dump() << '\n';
  out << "models " << table.models.size();
  for (const auto& m : table.models) out << ' ' << m.family << ':' << m.dim;
  out << '\n';
  out << "u_alpha " << table.u_alpha() << '\n';
  out << "level";
  for (double v : table.level) out << ' ' << v;
  out << '\n';
  out << "rows " << table.thresholds.size() << '\n';
  for (std::size_t m = 0; m < table.models.size(); ++m) {
    for (std::size_t k = 0; k < table.u_grid.size(); ++k) {
      out << table.models[m].family << ' ' << table.models[m].dim << ' ' << table.u_grid[k] << ' '
          << table.threshold(m, k) << '\n';
    }
  }
}

namespace {

void expect_key(std::istream& in, const std::string& key) {
  std::string got;
  if (!(in >> got) || got != key) {
    fail(ErrorCode::kIo, "calibration table: expected '" + key + "' but found '" + got + "'");
  }
}

double read_double(std::istream& in, const std::string& what) {
  std::string token;
  if (!(in >> token)) fail(ErrorCode::kIo, "calibration table: missing " + what);
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kIo, "calibration table: bad number '" + token + "' for " + what);
  }
}

std::uint64_t read_count(std::istream& in, const std::string& what) {
  std::uint64_t v = 0;
  if (!(in >> v)) fail(ErrorCode::kIo, "calibration table: bad count for " + what);
  return v;
}

}  // namespace

CalibrationTable read_table(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (header != kTableFormat) {
    fail(ErrorCode::kIo, "calibration table: unsupported format line '" + header + "'");
  }
  CalibrationTable table;
  expect_key(in, "n");
  table.n = read_count(in, "n");
  expect_key(in, "alpha");
  table.alpha = read_double(in, "alpha");
  expect_key(in, "reps");
  table.reps = read_count(in, "reps");
  expect_key(in, "seed");
  table.seed = read_count(in, "seed");
  expect_key(in, "f0");
  std::string f0_line;
  std::getline(in >> std::ws, f0_line);
  try {
    table.f0 = density_from_json(Json::parse(f0_line), "f0");
  } catch (const Json::exception& e) {
    fail(ErrorCode::kIo, std::string("calibration table: bad f0 line: ") + e.what());
  }
  expect_key(in, "models");
  const auto n_models = read_count(in, "models");
  for (std::uint64_t i = 0; i < n_models; ++i) {
    std::string token;
    in >> token;
    const auto colon = token.find(':');
    if (colon == std::string::npos) fail(ErrorCode::kIo, "calibration table: bad model '" + token + "'");
    ModelIndex m{std::stoi(token.substr(0, colon)),
                 static_cast<std::uint64_t>(std::stoull(token.substr(colon + 1)))};
    validate(m);
    table.models.push_back(m);
  }
  expect_key(in, "u_alpha");
  const double u_alpha = read_double(in, "u_alpha");
  expect_key(in, "level");
  std::string level_line;
  std::getline(in, level_line);
  std::istringstream levels(level_line);
  for (double v; levels >> v;) table.level.push_back(v);
  expect_key(in, "rows");
  const auto rows = read_count(in, "rows");
  if (n_models == 0 || rows % n_models != 0) fail(ErrorCode::kIo, "calibration table: row count mismatch");
  const std::size_t n_u = rows / n_models;
  table.thresholds.resize(rows);
  for (std::size_t m = 0; m < n_models; ++m) {
    for (std::size_t k = 0; k < n_u; ++k) {
      const auto family = static_cast<int>(read_count(in, "family"));
      const auto dim = read_count(in, "dim");
      if (family != table.models[m].family || dim != table.models[m].dim) {
        fail(ErrorCode::kIo, "calibration table: rows out of model order");
      }
      const double u = read_double(in, "u");
      if (m == 0) {
        table.u_grid.push_back(u);
      } else if (u != table.u_grid[k]) {
        fail(ErrorCode::kIo, "calibration table: inconsistent u-grid");
      }
      table.thresholds[m * n_u + k] = read_double(in, "threshold");
    }
  }
  if (table.level.size() != n_u) fail(ErrorCode::kIo, "calibration table: level row length mismatch");
  auto it = std::find(table.u_grid.begin(), table.u_grid.end(), u_alpha);
  if (it == table.u_grid.end()) fail(ErrorCode::kIo, "calibration table: u_alpha is not on the grid");
  table.u_alpha_index = static_cast<std::size_t>(it - table.u_grid.begin());
  return table;
}

void save_table(const CalibrationTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_table(table, out);
  if (!out) fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

CalibrationTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open calibration table '" + path + "'");
  return read_table(in);
}

}  // namespace ustat
