#include "ustat/ustat.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "ustat/config.hpp"
#include "ustat/error.hpp"
#include "ustat/experiment.hpp"
#include "ustat/gof.hpp"
#include "ustat/rng.hpp"
#include "ustat/selftest.hpp"
#include "ustat/spectral.hpp"

struct ustat_chain {
  ustat::ChainSampler sampler;
};

struct ustat_density {
  ustat::DensitySpec spec;
};

struct ustat_table {
  ustat::CalibrationTable table;
};

namespace {

thread_local std::string last_error;

int set_error(int code, const std::string& message) {
  last_error = message;
  return code;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return USTAT_OK;
  } catch (const ustat::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const ustat::Json::exception& e) {
    return set_error(USTAT_ERR_CONFIG, std::string("json: ") + e.what());
  } catch (const std::bad_alloc&) {
    return set_error(USTAT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(USTAT_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(USTAT_ERR_INTERNAL, "unknown exception");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) ustat::fail(ustat::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ustat::Json parse(const char* text, const char* what) {
  need(text, what);
  try {
    return ustat::Json::parse(text);
  } catch (const ustat::Json::parse_error& e) {
    ustat::fail(ustat::ErrorCode::kConfig, std::string(what) + ": " + e.what());
  }
}

std::string run_summary(const ustat::RunResult& result) {
  ustat::Json artifacts = ustat::Json::array();
  for (const auto& a : result.artifacts) {
    artifacts.push_back({{"file", a.file}, {"fnv1a64", a.fnv1a64}, {"bytes", a.bytes}});
  }
  return ustat::Json{{"summary", result.summary}, {"artifacts", artifacts}}.dump(2);
}

}  // namespace

extern "C" {

const char* ustat_version(void) { return USTAT_VERSION_STRING; }

const char* ustat_last_error(void) { return last_error.c_str(); }

const char* ustat_status_name(int status) {
  switch (status) {
    case USTAT_OK:
      return "ok";
    case USTAT_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case USTAT_ERR_CONFIG:
      return "config error";
    case USTAT_ERR_NUMERICAL:
      return "numerical error";
    case USTAT_ERR_IO:
      return "i/o error";
    case USTAT_ERR_CONVERGENCE:
      return "convergence failure";
    case USTAT_ERR_INTERNAL:
      return "internal error";
    default:
      return "unknown status";
  }
}

void ustat_string_free(char* s) { std::free(s); }

int ustat_chain_from_json(const char* json, ustat_chain** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    const auto spec = ustat::chain_from_json(parse(json, "chain json"), "chain");
    *out = new ustat_chain{ustat::ChainSampler(spec)};
  });
}

void ustat_chain_free(ustat_chain* chain) { delete chain; }

int ustat_chain_state_dim(const ustat_chain* chain, size_t* dim) {
  return guarded([&] {
    need(chain, "chain");
    need(dim, "dim");
    *dim = chain->sampler.dim();
  });
}

int ustat_chain_sample(const ustat_chain* chain, size_t n, uint64_t seed, double* out, size_t out_len) {
  return guarded([&] {
    need(chain, "chain");
    need(out, "out");
    if (out_len < n * chain->sampler.dim()) {
      ustat::fail(ustat::ErrorCode::kInvalidArgument, "ustat_chain_sample: output buffer too small");
    }
    const auto traj = chain->sampler.sample(n, seed);
    std::copy(traj.points.begin(), traj.points.end(), out);
  });
}

int ustat_density_from_json(const char* json, ustat_density** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    *out = new ustat_density{ustat::density_from_json(parse(json, "density json"), "density")};
  });
}

void ustat_density_free(ustat_density* density) { delete density; }

int ustat_density_pdf(const ustat_density* density, double x, double* out) {
  return guarded([&] {
    need(density, "density");
    need(out, "out");
    *out = density->spec.pdf(x);
  });
}

int ustat_density_cdf(const ustat_density* density, double x, double* out) {
  return guarded([&] {
    need(density, "density");
    need(out, "out");
    *out = density->spec.cdf(x);
  });
}

int ustat_density_sample(const ustat_density* density, size_t n, uint64_t seed, double* out) {
  return guarded([&] {
    need(density, "density");
    need(out, "out");
    const auto traj = ustat::sample_iid(density->spec, n, seed);
    std::copy(traj.points.begin(), traj.points.end(), out);
  });
}

int ustat_l2_distance(const ustat_density* f, const ustat_density* g, double* out) {
  return guarded([&] {
    need(f, "f");
    need(g, "g");
    need(out, "out");
    *out = ustat::l2_distance(f->spec, g->spec);
  });
}

int ustat_delta2(const double* x, size_t nx, const double* y, size_t ny, double* out) {
  return guarded([&] {
    if (nx) need(x, "x");
    if (ny) need(y, "y");
    need(out, "out");
    *out = ustat::delta2(std::span<const double>(x, nx), std::span<const double>(y, ny));
  });
}

int ustat_symmetric_eigenvalues(const double* m, size_t n, double* out) {
  return guarded([&] {
    need(m, "m");
    need(out, "out");
    const auto dim = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd mat(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) mat(i, j) = m[i * dim + j];
    }
    const auto spec = ustat::symmetric_eigenvalues(mat);
    std::copy(spec.values.begin(), spec.values.end(), out);
  });
}

int ustat_funk_hecke_eigenvalue(const double* coeffs, size_t ncoeffs, int dim, int k, double* out) {
  return guarded([&] {
    need(coeffs, "coeffs");
    need(out, "out");
    if (ncoeffs == 0) ustat::fail(ustat::ErrorCode::kInvalidArgument, "funk_hecke: empty polynomial");
    std::vector<double> c(coeffs, coeffs + ncoeffs);
    ustat::MercerSphereKernel kernel;
    kernel.dim = dim;
    kernel.psi = [c](double t) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
      return acc;
    };
    *out = ustat::funk_hecke_eigenvalue(kernel, k);
  });
}

int ustat_theta_hat(int family, uint64_t dim, const double* x, size_t n, double* out) {
  return guarded([&] {
    need(x, "x");
    need(out, "out");
    *out = ustat::theta_hat(ustat::ModelIndex{family, dim}, std::span<const double>(x, n));
  });
}

int ustat_table_calibrate(const char* config_json, size_t workers, ustat_table** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    const auto cfg = parse(config_json, "calibration config");
    const auto f0 = ustat::density_from_json(ustat::field(cfg, "f0", ""), "f0");
    ustat::Json cal = cfg.contains("calibration") ? cfg["calibration"] : ustat::Json::object();
    ustat::CalibrationOptions opt;
    opt.n = ustat::count_field_or(cfg, "n", "", opt.n);
    opt.alpha = ustat::number_field_or(cfg, "alpha", "", opt.alpha);
    opt.reps = ustat::count_field_or(cal, "reps", "calibration", opt.reps);
    opt.u_grid_size = ustat::count_field_or(cal, "u_grid_size", "calibration", opt.u_grid_size);
    opt.seed = ustat::derive_seed(ustat::count_field_or(cfg, "seed", "", 0), "gof-calibrate", 0);
    opt.workers = workers;
    auto models = cal.contains("models") ? ustat::models_from_json(cal["models"], "calibration.models")
                                         : ustat::default_models();
    *out = new ustat_table{ustat::calibrate(f0, std::move(models), opt)};
  });
}

int ustat_table_load(const char* path, ustat_table** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new ustat_table{ustat::load_table(path)};
  });
}

int ustat_table_save(const ustat_table* table, const char* path) {
  return guarded([&] {
    need(table, "table");
    need(path, "path");
    ustat::save_table(table->table, path);
  });
}

void ustat_table_free(ustat_table* table) { delete table; }

int ustat_table_u_alpha(const ustat_table* table, double* out) {
  return guarded([&] {
    need(table, "table");
    need(out, "out");
    *out = table->table.u_alpha();
  });
}

int ustat_table_test(const ustat_table* table, const double* x, size_t n, double* t_alpha, int* reject) {
  return guarded([&] {
    need(table, "table");
    need(x, "x");
    const auto outcome = ustat::run_test(std::span<const double>(x, n), table->table);
    if (t_alpha) *t_alpha = outcome.t_alpha;
    if (reject) *reject = outcome.reject ? 1 : 0;
  });
}

uint64_t ustat_derive_seed(uint64_t master, const char* phase, uint64_t index) {
  return ustat::derive_seed(master, phase ? phase : "", index);
}

int ustat_run(const char* command, const char* config_json, const char* out_dir, size_t workers,
              char** summary_json) {
  return guarded([&] {
    need(command, "command");
    need(out_dir, "out_dir");
    if (summary_json) *summary_json = nullptr;
    const auto cfg = parse(config_json, "config");
    const auto result = ustat::run_experiment(command, cfg, ustat::RunOptions{out_dir, workers});
    if (summary_json) *summary_json = copy_string(run_summary(result));
  });
}

int ustat_rerun(const char* manifest_json, const char* out_dir, size_t workers, char** summary_json) {
  return guarded([&] {
    need(out_dir, "out_dir");
    if (summary_json) *summary_json = nullptr;
    const auto manifest = parse(manifest_json, "manifest");
    const auto result = ustat::rerun_manifest(manifest, ustat::RunOptions{out_dir, workers});
    if (summary_json) *summary_json = copy_string(run_summary(result));
  });
}

int ustat_apply_override(const char* config_json, const char* assignment, char** out_json) {
  return guarded([&] {
    need(assignment, "assignment");
    need(out_json, "out_json");
    *out_json = nullptr;
    auto cfg = parse(config_json, "config");
    ustat::apply_override(cfg, assignment);
    *out_json = copy_string(cfg.dump());
  });
}

int ustat_selftest(uint64_t seed, char** report, int* all_passed) {
  return guarded([&] {
    need(report, "report");
    *report = nullptr;
    const auto results = ustat::run_selftest(seed);
    bool ok = true;
    for (const auto& r : results) ok = ok && r.passed;
    if (all_passed) *all_passed = ok ? 1 : 0;
    *report = copy_string(ustat::format_report(results));
  });
}

}  // extern "C"
