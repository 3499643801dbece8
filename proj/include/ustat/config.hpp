#ifndef USTAT_CONFIG_HPP_
#define USTAT_CONFIG_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "ustat/chains.hpp"
#include "ustat/density.hpp"
#include "ustat/gof.hpp"
#include "ustat/spectral.hpp"

namespace ustat {

using Json = nlohmann::json;

// Readers throw Error(kConfig) with the dotted path of the offending key.

NamedFunction function_from_json(const Json& j, const std::string& path);
Json to_json(const NamedFunction& fn);

DensitySpec density_from_json(const Json& j, const std::string& path);
/// Throws Error(kConfig) for densities built from an unnamed callable.
Json to_json(const DensitySpec& density);

ChainSpec chain_from_json(const Json& j, const std::string& path);
Json to_json(const ChainSpec& chain);

/// Either {"chain": {...}} or {"density": {...}}.
DataSource source_from_json(const Json& j, const std::string& path);
Json to_json(const DataSource& source);

ModelIndex model_from_json(const Json& j, const std::string& path);
std::vector<ModelIndex> models_from_json(const Json& j, const std::string& path);
Json to_json(const ModelIndex& m);

/// psi given as {"kind": "polynomial", "coefficients": [c0, c1, ...]} or
/// {"kind": "exponential", "scale": s} for psi(t) = exp(s t).
MercerSphereKernel mercer_kernel_from_json(const Json& j, const std::string& path);

// Typed field access with path-qualified errors.
const Json& field(const Json& j, const std::string& key, const std::string& path);
double number_field(const Json& j, const std::string& key, const std::string& path);
double number_field_or(const Json& j, const std::string& key, const std::string& path, double fallback);
std::uint64_t count_field(const Json& j, const std::string& key, const std::string& path);
std::uint64_t count_field_or(const Json& j, const std::string& key, const std::string& path,
                             std::uint64_t fallback);
std::string string_field(const Json& j, const std::string& key, const std::string& path);

}  // namespace ustat

#endif  // USTAT_CONFIG_HPP_
