#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rcmps/matrix_core.hpp"
#include "rcmps/observables.hpp"
#include "rcmps/tangent_optimizer.hpp"

namespace rcmps {

using Json = nlohmann::json;

/// {"rows": n, "cols": m, "data": [[re, im], ...]} with entries in row-major order.
[[nodiscard]] Json matrix_to_json(const Matrix& m);
/// Throws ConfigError on malformed input.
[[nodiscard]] Matrix matrix_from_json(const Json& j);

/// {"dim", "mass", "K", "R"}.
[[nodiscard]] Json state_to_json(const CmpsState& state);
[[nodiscard]] CmpsState state_from_json(const Json& j);

[[nodiscard]] Json observables_to_json(const ObservableSet& obs);
[[nodiscard]] ObservableSet observables_from_json(const Json& j);

[[nodiscard]] Json optimizer_config_to_json(const OptimizerConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
[[nodiscard]] OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base = {});

[[nodiscard]] Json numerics_to_json(const Numerics& n);
[[nodiscard]] Numerics numerics_from_json(const Json& j, Numerics base = {});

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a(std::string_view bytes);
[[nodiscard]] std::string hex64(std::uint64_t v);

} // namespace rcmps
