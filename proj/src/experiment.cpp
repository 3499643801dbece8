#include "ustat/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "ustat/error.hpp"
#include "ustat/gof.hpp"
#include "ustat/online.hpp"
#include "ustat/parallel.hpp"
#include "ustat/spectral.hpp"

namespace ustat {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV file with a format line ahead of the header row.
class CsvWriter {
 public:
  CsvWriter(std::string format, std::vector<std::string> columns)
      : columns_(columns.size()) {
    out_ << "# " << format << '\n';
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) fail(ErrorCode::kInternal, "csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::size_t columns_;
  std::ostringstream out_;
};

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      fail(ErrorCode::kIo, "cannot create output directory '" + dir + "'");
    }
  }

  void write(const std::string& name, const std::string& bytes) {
    const fs::path path = fs::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
    out << bytes;
    if (!out) fail(ErrorCode::kIo, "write to '" + path.string() + "' failed");
    artifacts_.push_back(Artifact{name, fnv1a64_hex(bytes), bytes.size()});
  }

  const std::string& dir() const { return dir_; }
  const std::vector<Artifact>& artifacts() const { return artifacts_; }

 private:
  std::string dir_;
  std::vector<Artifact> artifacts_;
};

std::uint64_t seed_of(const Json& config) { return count_field_or(config, "seed", "", 0); }

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()) - 1e-9));
  return v[std::clamp<std::size_t>(idx, 1, v.size()) - 1];
}

void reject_unknown_keys(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(ErrorCode::kConfig, "config: " + (path.empty() ? "<root>" : path) + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      fail(ErrorCode::kConfig,
           "config: " + (path.empty() ? key : path + "." + key) + ": unknown key");
    }
  }
}

std::vector<std::size_t> counts_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(ErrorCode::kConfig, "config: " + path + ": expected a non-empty array");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
      fail(ErrorCode::kConfig, "config: " + path + ": entries must be positive integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

// ---------------------------------------------------------------- spectra

Json run_spectra(const Json& cfg, std::size_t workers, OutputDir& out) {
  reject_unknown_keys(cfg, "", {"seed", "kernel", "chain", "sizes", "replications", "top", "plot_top"});
  const std::uint64_t seed = seed_of(cfg);
  const MercerSphereKernel kernel = mercer_kernel_from_json(field(cfg, "kernel", ""), "kernel");
  const ChainSpec chain = chain_from_json(field(cfg, "chain", ""), "chain");
  if (!std::holds_alternative<SphereWalkChain>(chain) ||
      state_dim(chain) != static_cast<std::size_t>(kernel.dim)) {
    fail(ErrorCode::kConfig, "config: chain: spectra needs a sphere_walk chain with the kernel's dim");
  }
  const auto sizes = counts_from_json(field(cfg, "sizes", ""), "sizes");
  const std::size_t reps = count_field_or(cfg, "replications", "", 1);
  const std::size_t top = count_field_or(cfg, "top", "", 5);
  const std::size_t plot_top = count_field_or(cfg, "plot_top", "", 20);
  if (reps == 0 || top == 0) fail(ErrorCode::kConfig, "config: replications and top must be positive");
  for (std::size_t n : sizes) {
    if (n < 2) fail(ErrorCode::kConfig, "config: sizes: every n must be at least 2");
  }

  const Spectrum truth = ground_truth_spectrum(kernel);
  const std::size_t jobs = sizes.size() * reps;
  std::vector<SpectrumRecord> records(jobs);
  std::vector<std::uint64_t> seeds(jobs);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    for (std::size_t r = 0; r < reps; ++r) {
      seeds[s * reps + r] = derive_seed(seed, "spectra-n" + std::to_string(sizes[s]), r);
    }
  }
  parallel_for(jobs, workers, [&](std::size_t j) {
    records[j] = spectrum_experiment(kernel, chain, sizes[j / reps], seeds[j], &truth);
  });

  auto top_value = [](const Spectrum& s, std::size_t k) {
    return k < s.size() ? s.values[k] : 0.0;
  };
  std::vector<std::string> cols{"n", "replication", "seed", "delta2_sq", "diag_shift_delta2",
                                "diag_shift_bound"};
  for (std::size_t k = 1; k <= top; ++k) cols.push_back("est_" + std::to_string(k));
  for (std::size_t k = 1; k <= top; ++k) cols.push_back("truth_" + std::to_string(k));
  CsvWriter csv("ustat-spectra-csv v1", cols);
  for (std::size_t j = 0; j < jobs; ++j) {
    const auto& rec = records[j];
    std::vector<std::string> row{std::to_string(sizes[j / reps]), std::to_string(j % reps),
                                 std::to_string(seeds[j]), num(rec.delta2_sq),
                                 num(rec.diag_shift_delta2), num(rec.diag_shift_bound)};
    for (std::size_t k = 0; k < top; ++k) row.push_back(num(top_value(rec.estimated, k)));
    for (std::size_t k = 0; k < top; ++k) row.push_back(num(top_value(truth, k)));
    csv.row(row);
  }
  out.write("spectra.csv", csv.str());

  CsvWriter plot("ustat-spectra-plot v1", {"n", "index", "series", "eigenvalue"});
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const auto& rec = records[s * reps];
    for (std::size_t k = 0; k < plot_top; ++k) {
      plot.row({std::to_string(sizes[s]), std::to_string(k + 1), "estimate", num(top_value(rec.estimated, k))});
    }
  }
  for (std::size_t k = 0; k < plot_top; ++k) {
    plot.row({"0", std::to_string(k + 1), "truth", num(top_value(truth, k))});
  }
  out.write("spectra_plot.csv", plot.str());

  CsvWriter summary("ustat-spectra-summary v1", {"n", "replications", "median_delta2_sq", "mean_delta2_sq"});
  Json sizes_json = Json::array();
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    std::vector<double> d;
    for (std::size_t r = 0; r < reps; ++r) d.push_back(records[s * reps + r].delta2_sq);
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    const double med = median(d);
    summary.row({std::to_string(sizes[s]), std::to_string(reps), num(med), num(mean)});
    sizes_json.push_back({{"n", sizes[s]}, {"median_delta2_sq", med}, {"mean_delta2_sq", mean}});
  }
  out.write("spectra_summary.csv", summary.str());

  Json truth_top = Json::array();
  for (std::size_t k = 0; k < top; ++k) truth_top.push_back(top_value(truth, k));
  return {{"sizes", sizes_json}, {"truth_top", truth_top}, {"truth_size", truth.size()}};
}

// ---------------------------------------------------------------- gof

CalibrationOptions calibration_options(const Json& cfg, const Json& cal, std::uint64_t seed, std::size_t workers) {
  CalibrationOptions opt;
  opt.n = count_field_or(cfg, "n", "", 100);
  opt.alpha = number_field_or(cfg, "alpha", "", 0.05);
  opt.reps = count_field_or(cal, "reps", "calibration", 5000);
  opt.u_grid_size = count_field_or(cal, "u_grid_size", "calibration", 100);
  opt.seed = seed;
  opt.workers = workers;
  if (opt.n < 2) fail(ErrorCode::kConfig, "config: n: need at least 2");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) fail(ErrorCode::kConfig, "config: alpha: must lie in (0, 1)");
  if (opt.reps < 100) fail(ErrorCode::kConfig, "config: calibration.reps: need at least 100");
  if (opt.u_grid_size == 0) fail(ErrorCode::kConfig, "config: calibration.u_grid_size: must be positive");
  return opt;
}

std::vector<ModelIndex> models_or_default(const Json& cal) {
  if (cal.is_object() && cal.contains("models")) return models_from_json(cal["models"], "calibration.models");
  return default_models();
}

void write_table_artifact(const CalibrationTable& table, const std::string& name, OutputDir& out) {
  std::ostringstream s;
  write_table(table, s);
  out.write(name, s.str());
}

Json run_gof_calibrate(const Json& cfg, std::size_t workers, OutputDir& out) {
  reject_unknown_keys(cfg, "", {"seed", "f0", "n", "alpha", "calibration"});
  const std::uint64_t seed = seed_of(cfg);
  const DensitySpec f0 = density_from_json(field(cfg, "f0", ""), "f0");
  const Json cal = cfg.contains("calibration") ? cfg["calibration"] : Json::object();
  reject_unknown_keys(cal, "calibration", {"reps", "u_grid_size", "models"});
  const auto models = models_or_default(cal);
  const auto opt = calibration_options(cfg, cal, derive_seed(seed, "gof-calibrate", 0), workers);
  const auto table = calibrate(f0, models, opt);
  write_table_artifact(table, "calibration_table.txt", out);

  CsvWriter csv("ustat-calibration-level v1", {"u", "level"});
  for (std::size_t k = 0; k < table.u_grid.size(); ++k) csv.row({num(table.u_grid[k]), num(table.level[k])});
  out.write("calibration_level.csv", csv.str());
  return {{"u_alpha", table.u_alpha()}, {"level_at_u_alpha", table.level[table.u_alpha_index]}};
}

struct Alternative {
  DensitySpec f0 = DensitySpec::gaussian(0.0, 1.0);
  Json spec;
};

Json run_gof_power(const Json& cfg, std::size_t workers, OutputDir& out) {
  reject_unknown_keys(cfg, "", {"seed", "n", "alpha", "calibration", "power_reps", "source", "alternatives",
                                "table", "baselines", "null_level", "plot_points", "label"});
  const std::uint64_t seed = seed_of(cfg);
  const DataSource source = source_from_json(field(cfg, "source", ""), "source");
  if (const auto* c = std::get_if<ChainSpec>(&source); c && state_dim(*c) != 1) {
    fail(ErrorCode::kConfig, "config: source: the test needs a scalar chain");
  }
  const Json cal = cfg.contains("calibration") ? cfg["calibration"] : Json::object();
  reject_unknown_keys(cal, "calibration", {"reps", "u_grid_size", "models"});
  const std::size_t power_reps = count_field_or(cfg, "power_reps", "", 5000);
  if (power_reps < 100) fail(ErrorCode::kConfig, "config: power_reps: need at least 100");
  const bool null_level = cfg.value("null_level", false);
  const std::size_t plot_points = count_field_or(cfg, "plot_points", "", 1000);

  // Precomputed table or one calibration per alternative.
  std::vector<Alternative> alts;
  std::vector<CalibrationTable> tables;
  if (cfg.contains("table")) {
    if (cfg.contains("alternatives")) {
      fail(ErrorCode::kConfig, "config: table: give either 'table' or 'alternatives', not both");
    }
    const auto path = string_field(cfg, "table", "");
    tables.push_back(load_table(path));
    alts.push_back(Alternative{tables.back().f0, to_json(tables.back().f0)});
  } else {
    const Json& list = field(cfg, "alternatives", "");
    if (!list.is_array() || list.empty()) fail(ErrorCode::kConfig, "config: alternatives: expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      alts.push_back(Alternative{density_from_json(list[i], "alternatives[" + std::to_string(i) + "]"), list[i]});
    }
  }
  const auto models = models_or_default(cal);
  const auto cal_opt = calibration_options(cfg, cal, 0, workers);

  struct Baselines {
    bool ks = false;
    bool chi2 = false;
    double a = 0.0, b = 0.0;
    std::size_t bins = 100;
    std::size_t null_reps = 5000;
  } base;
  if (cfg.contains("baselines")) {
    const Json& bj = cfg["baselines"];
    reject_unknown_keys(bj, "baselines", {"ks", "chi2", "null_reps"});
    base.ks = bj.value("ks", false);
    base.null_reps = count_field_or(bj, "null_reps", "baselines", 5000);
    if (bj.contains("chi2")) {
      const Json& cj = bj["chi2"];
      reject_unknown_keys(cj, "baselines.chi2", {"interval", "bins"});
      const Json& iv = field(cj, "interval", "baselines.chi2");
      if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number() ||
          !(iv[0].get<double>() < iv[1].get<double>())) {
        fail(ErrorCode::kConfig, "config: baselines.chi2.interval: expected [a, b] with a < b");
      }
      base.chi2 = true;
      base.a = iv[0].get<double>();
      base.b = iv[1].get<double>();
      base.bins = count_field_or(cj, "bins", "baselines.chi2", 100);
      if (base.bins < 2) fail(ErrorCode::kConfig, "config: baselines.chi2.bins: need at least 2");
    }
    if (base.null_reps < 20) fail(ErrorCode::kConfig, "config: baselines.null_reps: need at least 20");
  }

  std::optional<DensitySpec> truth;
  if (const auto* c = std::get_if<ChainSpec>(&source)) {
    truth = invariant_density(*c);
  } else {
    truth = std::get<DensitySpec>(source);
  }

  std::vector<std::string> cols{"index", "f0", "power", "std_error", "reps", "u_alpha", "level_at_u_alpha"};
  if (base.ks) cols.push_back("ks_power");
  if (base.chi2) cols.push_back("chi2_power");
  if (truth) cols.push_back("l2_distance");
  if (null_level) cols.push_back("null_level");
  CsvWriter csv("ustat-gof-power v1", cols);
  Json rows = Json::array();
  Json warnings = Json::array();
  std::size_t worst = 0;
  double worst_power = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < alts.size(); ++i) {
    const DensitySpec& f0 = alts[i].f0;
    if (tables.size() <= i) {
      auto opt = cal_opt;
      opt.seed = derive_seed(seed, "gof-calibrate", i);
      tables.push_back(calibrate(f0, models, opt));
    }
    const CalibrationTable& table = tables[i];
    const std::uint64_t rep_seed = derive_seed(seed, "gof-alternative", i);
    const auto power = estimate_power(source, table, power_reps, rep_seed, workers);
    Json row = {{"f0", alts[i].spec}, {"power", power.power}, {"std_error", power.std_error}};
    std::vector<std::string> cells{std::to_string(i), '"' + f0.describe() + '"', num(power.power),
                                   num(power.std_error), std::to_string(power.reps), num(table.u_alpha()),
                                   num(table.level[table.u_alpha_index])};
    if (base.ks) {
      const auto ks = calibrate_ks(f0, table.n, base.null_reps, table.alpha, derive_seed(rep_seed, "ks", 0), workers);
      const auto rate = estimate_rejection_rate(
          source, table.n, power_reps, rep_seed, "gof-power",
          [&](std::span<const double> s) { return ks_statistic(s, f0) > ks.threshold; }, workers);
      cells.push_back(num(rate.power));
      row["ks_power"] = rate.power;
    }
    if (base.chi2) {
      const auto binning = make_chi2_binning(f0, base.a, base.b, base.bins);
      for (const auto& w : binning.warnings) warnings.push_back(w);
      const auto chi = calibrate_chi2(f0, binning, table.n, base.null_reps, table.alpha,
                                      derive_seed(rep_seed, "chi2", 0), workers);
      const auto rate = estimate_rejection_rate(
          source, table.n, power_reps, rep_seed, "gof-power",
          [&](std::span<const double> s) { return chi2_statistic(s, binning) > chi.threshold; }, workers);
      cells.push_back(num(rate.power));
      row["chi2_power"] = rate.power;
    }
    if (truth) {
      const double l2 = l2_distance(*truth, f0);
      cells.push_back(num(l2));
      row["l2_distance"] = l2;
    }
    if (null_level) {
      const auto level = estimate_rejection_rate(
          f0, table.n, power_reps, derive_seed(seed, "gof-null", i), "gof-null",
          [&](std::span<const double> s) { return run_test(s, table).reject; }, workers);
      cells.push_back(num(level.power));
      row["null_level"] = level.power;
    }
    csv.row(cells);
    rows.push_back(row);
    if (power.power < worst_power) {
      worst_power = power.power;
      worst = i;
    }
    if (cfg.contains("alternatives")) {
      write_table_artifact(table, "calibration_table_" + std::to_string(i) + ".txt", out);
    }
  }
  out.write("gof_power.csv", csv.str());

  if (truth && plot_points >= 2) {
    const DensitySpec& f0 = alts[worst].f0;
    auto [lo, hi] = truth->effective_support();
    const auto [flo, fhi] = f0.effective_support();
    lo = std::max(std::min(lo, flo), -50.0);
    hi = std::min(std::max(hi, fhi), 50.0);
    CsvWriter plot("ustat-gof-plot v1", {"x", "invariant_density", "worst_alternative"});
    for (std::size_t k = 0; k < plot_points; ++k) {
      const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(plot_points - 1);
      plot.row({num(x), num(truth->pdf(x)), num(f0.pdf(x))});
    }
    out.write("gof_plot.csv", plot.str());
  }
  return {{"rows", rows}, {"worst_alternative", worst}, {"warnings", warnings}};
}

// ---------------------------------------------------------------- online

Json run_online(const Json& cfg, std::size_t workers, OutputDir& out) {
  reject_unknown_keys(cfg, "", {"seed", "chain", "n", "loss", "label", "params", "learner", "replications",
                                "true_risk_reps"});
  const std::uint64_t seed = seed_of(cfg);
  const ChainSpec chain = chain_from_json(field(cfg, "chain", ""), "chain");
  if (state_dim(chain) != 1) fail(ErrorCode::kConfig, "config: chain: online runs need a scalar chain");
  const std::size_t n = count_field(cfg, "n", "");
  const std::string loss_name = cfg.contains("loss") ? string_field(cfg, "loss", "") : "sigmoid";
  const std::string label = cfg.contains("label") ? string_field(cfg, "label", "") : "identity";
  PairwiseLoss loss;
  try {
    loss = loss_from_name(loss_name, label);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("config: loss: ") + e.what());
  }
  OnlineParams params;
  if (cfg.contains("params")) {
    const Json& p = cfg["params"];
    reject_unknown_keys(p, "params", {"c", "xi", "rho", "m", "tau", "gamma", "epsilon", "penalty_scale"});
    params.c = number_field_or(p, "c", "params", params.c);
    params.xi = number_field_or(p, "xi", "params", params.xi);
    params.rho = number_field_or(p, "rho", "params", params.rho);
    params.m = number_field_or(p, "m", "params", params.m);
    params.tau = number_field_or(p, "tau", "params", params.tau);
    params.gamma = number_field_or(p, "gamma", "params", params.gamma);
    params.epsilon = number_field_or(p, "epsilon", "params", params.epsilon);
    params.penalty_scale = number_field_or(p, "penalty_scale", "params", params.penalty_scale);
  }
  StepSchedule schedule;
  if (cfg.contains("learner")) {
    const Json& l = cfg["learner"];
    reject_unknown_keys(l, "learner", {"eta0", "power"});
    schedule.eta0 = number_field_or(l, "eta0", "learner", schedule.eta0);
    schedule.power = number_field_or(l, "power", "learner", schedule.power);
  }
  const std::size_t reps = count_field_or(cfg, "replications", "", 1);
  const std::size_t risk_reps = count_field_or(cfg, "true_risk_reps", "", 100000);
  if (reps == 0) fail(ErrorCode::kConfig, "config: replications: must be positive");
  OnlineIndices idx;
  try {
    idx = online_indices(params, n);
    resolve_gamma(params, idx);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("config: params: ") + e.what());
  }

  std::vector<double> scales{params.penalty_scale};
  if (params.penalty_scale != 0.0) scales.push_back(0.0);

  struct Outcome {
    RiskTrace trace;
    std::vector<std::size_t> t_hat;
    std::vector<RiskEstimate> risk;
  };
  std::vector<Outcome> outcomes(reps);
  const std::size_t inner_workers = reps == 1 ? workers : 1;
  parallel_for(reps, reps == 1 ? 1 : workers, [&](std::size_t r) {
    const Trajectory traj = sample_chain(chain, n, derive_seed(seed, "online", r));
    const auto x = traj.values();
    const auto hyps = reference_online_learner(x, loss, schedule);
    Outcome o;
    o.trace = build_risk_trace(hyps, x, loss, params);
    std::vector<Hypothesis> chosen;
    for (double s : scales) {
      const std::size_t t = select_t(o.trace, s);
      o.t_hat.push_back(t);
      chosen.push_back(hyps[t - o.trace.idx.b_n]);
    }
    o.risk = true_risks(chosen, loss, chain, risk_reps, derive_seed(seed, "true-risk", r), inner_workers);
    outcomes[r] = std::move(o);
  });

  const auto& first = outcomes.front().trace;
  CsvWriter trace("ustat-online-trace v1", {"t", "M_t", "suffix_risk", "penalty", "selected"});
  for (std::size_t i = 0; i < first.t.size(); ++i) {
    trace.row({std::to_string(first.t[i]), num(first.m_t[i]), num(first.suffix_risk[i]), num(first.penalty[i]),
               first.t[i] == outcomes.front().t_hat[0] ? "1" : "0"});
  }
  out.write("online_trace.csv", trace.str());

  CsvWriter summary("ustat-online-summary v1",
                    {"replication", "penalty_scale", "M_avg", "t_hat", "true_risk", "std_error", "gap"});
  Json per_scale = Json::array();
  for (std::size_t s = 0; s < scales.size(); ++s) {
    std::vector<double> gaps;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& o = outcomes[r];
      const double gap = o.risk[s].mean - o.trace.m_avg;
      gaps.push_back(gap);
      summary.row({std::to_string(r), num(scales[s]), num(o.trace.m_avg), std::to_string(o.t_hat[s]),
                   num(o.risk[s].mean), num(o.risk[s].std_error), num(gap)});
    }
    per_scale.push_back({{"penalty_scale", scales[s]},
                         {"gap_p95", percentile(gaps, 0.95)},
                         {"first_t_hat", outcomes.front().t_hat[s]},
                         {"first_true_risk", outcomes.front().risk[s].mean}});
  }
  out.write("online_summary.csv", summary.str());

  Json warnings = Json::array();
  if (!is_reversible(chain)) warnings.push_back("chain " + describe(chain) + " is not reversible");
  return {{"c_n", idx.c_n},
          {"b_n", idx.b_n},
          {"gamma", first.gamma},
          {"M_avg", first.m_avg},
          {"selection", per_scale},
          {"warnings", warnings}};
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorCode::kConfig, "override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) fail(ErrorCode::kConfig, "override '" + assignment + "': empty key segment");
    if (!node->is_object()) fail(ErrorCode::kConfig, "override '" + assignment + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

RunResult run_experiment(const std::string& command, const Json& config, const RunOptions& options) {
  if (!config.is_object()) fail(ErrorCode::kConfig, "config: <root>: expected an object");
  const auto start = std::chrono::steady_clock::now();
  OutputDir out(options.out_dir);
  const std::size_t workers = resolve_workers(options.workers);
  RunResult result;
  if (command == "spectra") {
    result.summary = run_spectra(config, workers, out);
  } else if (command == "gof-calibrate") {
    result.summary = run_gof_calibrate(config, workers, out);
  } else if (command == "gof-power") {
    result.summary = run_gof_power(config, workers, out);
  } else if (command == "online-run") {
    result.summary = run_online(config, workers, out);
  } else {
    fail(ErrorCode::kConfig, "unknown command '" + command + "' (spectra, gof-calibrate, gof-power, online-run)");
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json artifacts = Json::array();
  for (const auto& a : out.artifacts()) {
    artifacts.push_back({{"file", a.file}, {"fnv1a64", a.fnv1a64}, {"bytes", a.bytes}});
  }
  Json manifest = {{"format", kManifestFormat},
                   {"version", USTAT_VERSION_STRING},
                   {"command", command},
                   {"config", config},
                   {"seed_rule", kSeedRule},
                   {"artifacts", artifacts},
                   {"wall_time_seconds", seconds}};
  result.artifacts = out.artifacts();
  const fs::path path = fs::path(out.dir()) / "manifest.json";
  std::ofstream mf(path);
  if (!mf) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  mf << manifest.dump(2) << '\n';
  if (!mf) fail(ErrorCode::kIo, "write to '" + path.string() + "' failed");
  return result;
}

RunResult rerun_manifest(const Json& manifest, const RunOptions& options) {
  if (!manifest.is_object() || manifest.value("format", "") != kManifestFormat) {
    fail(ErrorCode::kConfig, std::string("manifest: expected format '") + kManifestFormat + "'");
  }
  return run_experiment(string_field(manifest, "command", "manifest"), field(manifest, "config", "manifest"),
                        options);
}

}  // namespace ustat
