#ifndef USTAT_GOF_HPP_
#define USTAT_GOF_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ustat/chains.hpp"
#include "ustat/density.hpp"

namespace ustat {

/// Projection space S_(family, dim):
///   family 1: histograms I_{D,k} = sqrt(D) 1[k/D, (k+1)/D)
///   family 2: Haar scaling functions at resolution D = 2^J
///   family 3: Fourier basis g_0..g_D of L2([0, 1])
struct ModelIndex {
  int family = 1;
  std::uint64_t dim = 1;

  auto operator<=>(const ModelIndex&) const = default;
};

void validate(const ModelIndex& m);
std::string describe(const ModelIndex& m);
/// {(1, 1), ..., (1, 10)}.
std::vector<ModelIndex> default_models();

/// U-statistic estimate of ||Pi_{S_m} f||^2. Needs at least two points.
double theta_hat(const ModelIndex& m, std::span<const double> sample);

/// theta_hat + ||f0||^2 - (2/n) sum f0(X_i).
double t_hat_statistic(const ModelIndex& m, std::span<const double> sample, const DensitySpec& f0);
/// Same statistic for several models sharing the f0 terms.
std::vector<double> t_hat_statistics(std::span<const ModelIndex> models,
                                     std::span<const double> sample, const DensitySpec& f0);

/// Estimated (1 - u) quantiles of each T_m under f0 on a u-grid, and the
/// selected u_alpha.
struct CalibrationTable {
  std::vector<double> u_grid;      // ascending, in (0, alpha]
  std::vector<ModelIndex> models;
  std::vector<double> thresholds;  // row-major: models.size() x u_grid.size()
  std::vector<double> level;       // estimated P(sup_m (T_m - t_m(u)) > 0) per u
  std::size_t u_alpha_index = 0;
  std::size_t n = 0;
  std::size_t reps = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  DensitySpec f0 = DensitySpec::gaussian(0.0, 1.0);

  double u_alpha() const { return u_grid.at(u_alpha_index); }
  double threshold(std::size_t model, std::size_t u_index) const {
    return thresholds.at(model * u_grid.size() + u_index);
  }
  double threshold_at_alpha(std::size_t model) const { return threshold(model, u_alpha_index); }
};

struct CalibrationOptions {
  std::size_t n = 100;
  double alpha = 0.05;
  std::size_t u_grid_size = 100;
  std::vector<double> u_grid;  // overrides u_grid_size when non-empty
  std::size_t reps = 5000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Empirical (1 - u) quantile: the ceil((1 - u) R)-th order statistic of `sorted`.
double upper_quantile(std::span<const double> sorted, double u);

/// Two-batch Monte Carlo calibration under iid f0 samples.
CalibrationTable calibrate(const DensitySpec& f0, std::vector<ModelIndex> models,
                           const CalibrationOptions& options);

struct TestOutcome {
  double t_alpha = 0.0;
  bool reject = false;
  std::vector<double> per_model;  // T_m in table.models order
};

TestOutcome run_test(std::span<const double> sample, const CalibrationTable& table);

/// Where power-study samples come from: a Markov chain or iid draws.
using DataSource = std::variant<ChainSpec, DensitySpec>;
std::string describe(const DataSource& source);

struct PowerEstimate {
  double power = 0.0;
  std::size_t reps = 0;
  std::size_t rejections = 0;
  double std_error = 0.0;
  std::string alternative;
};

/// Fraction of `reps` independent samples of length n from `source` for which
/// `decide` returns true; replication i uses derive_seed(seed, phase, i).
PowerEstimate estimate_rejection_rate(const DataSource& source, std::size_t n, std::size_t reps,
                                      std::uint64_t seed, const std::string& phase,
                                      const std::function<bool(std::span<const double>)>& decide,
                                      std::size_t workers = 1);

PowerEstimate estimate_power(const DataSource& source, const CalibrationTable& table,
                             std::size_t reps, std::uint64_t seed, std::size_t workers = 1);

/// sup_x |F_n(x) - F_0(x)| via the sorted-sample formula.
double ks_statistic(std::span<const double> sample, const DensitySpec& f0);

/// A statistic with a rejection threshold set by sampling under the null.
struct NullCalibratedThreshold {
  double threshold = 0.0;
  std::size_t n = 0;
  std::size_t null_reps = 0;
  double alpha = 0.05;
};

NullCalibratedThreshold calibrate_ks(const DensitySpec& f0, std::size_t n, std::size_t null_reps,
                                     double alpha, std::uint64_t seed, std::size_t workers = 1);
bool ks_test_calibrated(std::span<const double> sample, const DensitySpec& f0,
                        std::size_t null_reps, double alpha, std::uint64_t seed);

/// Regular partition of [a, b] with the f0 mass of every cell. Cells with zero
/// mass are merged into a neighbour and reported in `warnings`.
struct Chi2Binning {
  double a = 0.0;
  double b = 1.0;
  std::size_t bins = 0;
  std::vector<std::size_t> cell_of_bin;  // regular bin -> merged cell
  std::vector<double> cell_prob;
  std::vector<std::string> warnings;
};

Chi2Binning make_chi2_binning(const DensitySpec& f0, double a, double b, std::size_t bins);
/// sum_j (O_j - n p_j)^2 / (n p_j); observations outside [a, b] count in the end bins.
double chi2_statistic(std::span<const double> sample, const Chi2Binning& binning,
                      std::size_t* clipped = nullptr);

NullCalibratedThreshold calibrate_chi2(const DensitySpec& f0, const Chi2Binning& binning,
                                       std::size_t n, std::size_t null_reps, double alpha,
                                       std::uint64_t seed, std::size_t workers = 1);
bool chi2_test_calibrated(std::span<const double> sample, const DensitySpec& f0, double a, double b,
                          std::size_t bins, std::size_t null_reps, double alpha, std::uint64_t seed);

/// sqrt(int (f - g)^2) by adaptive quadrature, tolerance 1e-8.
double l2_distance(const DensitySpec& f, const DensitySpec& g);

/// Text artifact: header lines (format tag, n, alpha, reps, seed, f0, models,
/// u_alpha) followed by one `family dim u threshold` row per (model, u).
void write_table(const CalibrationTable& table, std::ostream& out);
CalibrationTable read_table(std::istream& in);
void save_table(const CalibrationTable& table, const std::string& path);
CalibrationTable load_table(const std::string& path);

inline constexpr const char* kTableFormat = "ustat-calibration-table v1";

}  // namespace ustat

#endif  // USTAT_GOF_HPP_
