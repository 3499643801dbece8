#include "ustat/config.hpp"

#include <cmath>

#include "ustat/error.hpp"

namespace ustat {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorCode::kConfig, "config: " + (path.empty() ? std::string("<root>") : path) + ": " + what);
}

void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) config_error(path, "expected an object");
}

double interval_end(const Json& j, std::size_t i, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[i].is_number()) {
    config_error(path, "expected [a, b]");
  }
  return j[i].get<double>();
}

}  // namespace

const Json& field(const Json& j, const std::string& key, const std::string& path) {
  expect_object(j, path);
  auto it = j.find(key);
  if (it == j.end()) config_error(join(path, key), "missing");
  return *it;
}

double number_field(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = field(j, key, path);
  if (!v.is_number()) config_error(join(path, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(join(path, key), "expected a finite number");
  return x;
}

double number_field_or(const Json& j, const std::string& key, const std::string& path, double fallback) {
  expect_object(j, path);
  return j.contains(key) ? number_field(j, key, path) : fallback;
}

std::uint64_t count_field(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = field(j, key, path);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    config_error(join(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::uint64_t count_field_or(const Json& j, const std::string& key, const std::string& path,
                             std::uint64_t fallback) {
  expect_object(j, path);
  return j.contains(key) ? count_field(j, key, path) : fallback;
}

std::string string_field(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = field(j, key, path);
  if (!v.is_string()) config_error(join(path, key), "expected a string");
  return v.get<std::string>();
}

NamedFunction function_from_json(const Json& j, const std::string& path) {
  NamedFunction fn;
  fn.name = string_field(j, "name", path);
  for (const auto& [key, value] : j.items()) {
    if (key == "name") continue;
    if (!value.is_number()) config_error(join(path, key), "function parameters must be numbers");
    fn.params[key] = value.get<double>();
  }
  try {
    resolve_function(fn);
  } catch (const Error& e) {
    config_error(path, e.what());
  }
  return fn;
}

Json to_json(const NamedFunction& fn) {
  Json j = {{"name", fn.name}};
  for (const auto& [k, v] : fn.params) j[k] = v;
  return j;
}

DensitySpec density_from_json(const Json& j, const std::string& path) {
  const std::string type = string_field(j, "type", path);
  try {
    if (type == "gaussian") {
      return DensitySpec::gaussian(number_field(j, "mu", path), number_field(j, "sigma2", path));
    }
    if (type == "truncated_gaussian") {
      const Json& iv = field(j, "interval", path);
      return DensitySpec::truncated_gaussian(number_field(j, "mu", path), number_field(j, "sigma2", path),
                                             interval_end(iv, 0, join(path, "interval")),
                                             interval_end(iv, 1, join(path, "interval")));
    }
    if (type == "skew_normal_arch") {
      return DensitySpec::skew_normal_arch(number_field(j, "theta", path));
    }
    if (type == "unnormalized") {
      const Json& iv = field(j, "interval", path);
      return DensitySpec::unnormalized(function_from_json(field(j, "function", path), join(path, "function")),
                                       interval_end(iv, 0, join(path, "interval")),
                                       interval_end(iv, 1, join(path, "interval")));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    config_error(path, e.what());
  }
  config_error(join(path, "type"), "unknown density type '" + type + "'");
}

Json to_json(const DensitySpec& density) {
  switch (density.kind()) {
    case DensityKind::kGaussian:
      return {{"type", "gaussian"}, {"mu", density.mu()}, {"sigma2", density.sigma2()}};
    case DensityKind::kTruncatedGaussian:
      return {{"type", "truncated_gaussian"},
              {"mu", density.mu()},
              {"sigma2", density.sigma2()},
              {"interval", {density.lower(), density.upper()}}};
    case DensityKind::kSkewNormalArch:
      return {{"type", "skew_normal_arch"}, {"theta", density.theta()}};
    case DensityKind::kUnnormalizedOnInterval:
      if (!density.function()) {
        fail(ErrorCode::kConfig, "density '" + density.describe() + "' has no registered function");
      }
      return {{"type", "unnormalized"},
              {"function", to_json(*density.function())},
              {"interval", {density.lower(), density.upper()}}};
  }
  fail(ErrorCode::kConfig, "unknown density kind");
}

ChainSpec chain_from_json(const Json& j, const std::string& path) {
  const std::string type = string_field(j, "type", path);
  ChainSpec spec;
  if (type == "ar1") {
    spec = Ar1Chain{number_field(j, "theta", path), number_field_or(j, "tau", path, 1.0)};
  } else if (type == "arch") {
    spec = ArchChain{number_field(j, "theta", path)};
  } else if (type == "indep_hastings") {
    IndepHastingsChain c;
    c.target = function_from_json(field(j, "target", path), join(path, "target"));
    const Json& iv = field(j, "interval", path);
    c.a = interval_end(iv, 0, join(path, "interval"));
    c.b = interval_end(iv, 1, join(path, "interval"));
    if (j.contains("proposal")) {
      const std::string ppath = join(path, "proposal");
      const Json& p = j["proposal"];
      const std::string kind = string_field(p, "type", ppath);
      if (kind == "uniform") {
        c.proposal = Proposal{ProposalKind::kUniform, 0.0, 1.0};
      } else if (kind == "truncated_gaussian") {
        c.proposal = Proposal{ProposalKind::kTruncatedGaussian, number_field(p, "mu", ppath),
                              number_field(p, "sigma2", ppath)};
      } else {
        config_error(join(ppath, "type"), "unknown proposal type '" + kind + "'");
      }
    }
    spec = c;
  } else if (type == "sphere_walk") {
    SphereWalkChain c;
    c.dim = static_cast<int>(count_field(j, "dim", path));
    c.radial = function_from_json(field(j, "radial", path), join(path, "radial"));
    spec = c;
  } else {
    config_error(join(path, "type"), "unknown chain type '" + type + "'");
  }
  try {
    validate(spec);
  } catch (const Error& e) {
    config_error(path, e.what());
  }
  return spec;
}

Json to_json(const ChainSpec& chain) {
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Ar1Chain>) {
          return {{"type", "ar1"}, {"theta", c.theta}, {"tau", c.tau}};
        } else if constexpr (std::is_same_v<T, ArchChain>) {
          return {{"type", "arch"}, {"theta", c.theta}};
        } else if constexpr (std::is_same_v<T, IndepHastingsChain>) {
          Json proposal = c.proposal.kind == ProposalKind::kUniform
                              ? Json{{"type", "uniform"}}
                              : Json{{"type", "truncated_gaussian"},
                                     {"mu", c.proposal.mu},
                                     {"sigma2", c.proposal.sigma2}};
          return {{"type", "indep_hastings"},
                  {"target", to_json(c.target)},
                  {"interval", {c.a, c.b}},
                  {"proposal", proposal}};
        } else {
          return {{"type", "sphere_walk"}, {"dim", c.dim}, {"radial", to_json(c.radial)}};
        }
      },
      chain);
}

DataSource source_from_json(const Json& j, const std::string& path) {
  expect_object(j, path);
  const bool has_chain = j.contains("chain");
  const bool has_density = j.contains("density");
  if (has_chain == has_density) config_error(path, "expected exactly one of 'chain' or 'density'");
  if (has_chain) return chain_from_json(j["chain"], join(path, "chain"));
  return density_from_json(j["density"], join(path, "density"));
}

Json to_json(const DataSource& source) {
  if (const auto* c = std::get_if<ChainSpec>(&source)) return {{"chain", to_json(*c)}};
  return {{"density", to_json(std::get<DensitySpec>(source))}};
}

ModelIndex model_from_json(const Json& j, const std::string& path) {
  ModelIndex m;
  if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_unsigned()) {
    m = {j[0].get<int>(), j[1].get<std::uint64_t>()};
  } else if (j.is_object()) {
    m = {static_cast<int>(count_field(j, "family", path)), count_field(j, "dim", path)};
  } else {
    config_error(path, "expected [family, dim] or {\"family\", \"dim\"}");
  }
  try {
    validate(m);
  } catch (const Error& e) {
    config_error(path, e.what());
  }
  return m;
}

std::vector<ModelIndex> models_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) config_error(path, "expected a non-empty array of models");
  std::vector<ModelIndex> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(model_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Json to_json(const ModelIndex& m) { return Json::array({m.family, m.dim}); }

MercerSphereKernel mercer_kernel_from_json(const Json& j, const std::string& path) {
  MercerSphereKernel k;
  k.dim = static_cast<int>(count_field(j, "dim", path));
  if (k.dim < 2) config_error(join(path, "dim"), "sphere dimension must be at least 2");
  k.truncation = static_cast<int>(count_field_or(j, "truncation", path, 0));
  const std::string ppath = join(path, "psi");
  const Json& psi = field(j, "psi", path);
  const std::string kind = string_field(psi, "kind", ppath);
  if (kind == "polynomial") {
    const Json& c = field(psi, "coefficients", ppath);
    if (!c.is_array() || c.empty()) config_error(join(ppath, "coefficients"), "expected a non-empty array");
    std::vector<double> coeffs;
    for (const auto& v : c) {
      if (!v.is_number()) config_error(join(ppath, "coefficients"), "coefficients must be numbers");
      coeffs.push_back(v.get<double>());
    }
    k.psi = [coeffs](double t) {
      double acc = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
      return acc;
    };
    k.label = "polynomial" + c.dump();
  } else if (kind == "exponential") {
    const double s = number_field(psi, "scale", ppath);
    k.psi = [s](double t) { return std::exp(s * t); };
    k.label = "exp(" + std::to_string(s) + " t)";
  } else {
    config_error(join(ppath, "kind"), "unknown psi kind '" + kind + "'");
  }
  return k;
}

}  // namespace ustat
