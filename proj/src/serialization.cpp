#include "rcmps/serialization.hpp"

#include <cstdio>
#include <set>

namespace rcmps {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* section) {
    if (!j.is_object()) {
        throw ConfigError(std::string(section) + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(std::string("unknown key '") + key + "' in " + section);
        }
    }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace

Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            data.push_back({m(i, j).real(), m(i, j).imag()});
        }
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
    try {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const Json& data = j.at("data");
        if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
            throw ConfigError("matrix shape does not match its data");
        }
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index k = 0; k < cols; ++k) {
                const Json& e = data.at(static_cast<std::size_t>(i * cols + k));
                if (!e.is_array() || e.size() != 2) {
                    throw ConfigError("matrix entries must be [re, im] pairs");
                }
                m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
            }
        }
        return m;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed matrix: ") + e.what());
    }
}

Json state_to_json(const CmpsState& state) {
    return {{"dim", state.dim()},
            {"mass", state.mass()},
            {"K", matrix_to_json(state.k())},
            {"R", matrix_to_json(state.r())}};
}

CmpsState state_from_json(const Json& j) {
    try {
        CmpsState s(matrix_from_json(j.at("K")), matrix_from_json(j.at("R")), j.at("mass").get<double>());
        if (j.contains("dim") && j.at("dim").get<int>() != s.dim()) {
            throw ConfigError("state dim does not match its matrices");
        }
        return s;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed state: ") + e.what());
    } catch (const DimensionMismatch& e) {
        throw ConfigError(std::string("malformed state: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("malformed state: ") + e.what());
    }
}

Json observables_to_json(const ObservableSet& obs) {
    Json vertex = Json::array();
    for (const auto& [b, v] : obs.vertex_samples) {
        vertex.push_back({b, v});
    }
    return {{"energy_density", obs.energy_density},
            {"kinetic_part", obs.kinetic_part},
            {"quartic_part", obs.quartic_part},
            {"phi_moments", obs.phi_moments},
            {"vertex_samples", std::move(vertex)}};
}

ObservableSet observables_from_json(const Json& j) {
    try {
        ObservableSet obs;
        obs.energy_density = j.at("energy_density").get<double>();
        obs.kinetic_part = j.at("kinetic_part").get<double>();
        obs.quartic_part = j.at("quartic_part").get<double>();
        obs.phi_moments = j.at("phi_moments").get<std::vector<double>>();
        if (j.contains("vertex_samples")) {
            for (const auto& e : j.at("vertex_samples")) {
                obs.vertex_samples.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
            }
        }
        return obs;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed observables: ") + e.what());
    }
}

Json optimizer_config_to_json(const OptimizerConfig& c) {
    return {{"max_iters", c.max_iters},
            {"grad_norm_tol", c.grad_norm_tol},
            {"energy_rel_tol", c.energy_rel_tol},
            {"stall_window", c.stall_window},
            {"metric_reg", c.metric_reg},
            {"metric_reg_max", c.metric_reg_max},
            {"armijo_c", c.armijo_c},
            {"backtrack_factor", c.backtrack_factor},
            {"max_backtracks", c.max_backtracks},
            {"init_scale", c.init_scale},
            {"seed", c.seed},
            {"step_init", c.step_init},
            {"step_max", c.step_max},
            {"max_seconds", c.max_seconds}};
}

OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig c) {
    reject_unknown(j,
                   {"max_iters", "grad_norm_tol", "energy_rel_tol", "stall_window", "metric_reg", "metric_reg_max",
                    "armijo_c", "backtrack_factor", "max_backtracks", "init_scale", "seed", "step_init",
                    "step_max", "max_seconds"},
                   "optimizer");
    read(j, "max_iters", c.max_iters);
    read(j, "grad_norm_tol", c.grad_norm_tol);
    read(j, "energy_rel_tol", c.energy_rel_tol);
    read(j, "stall_window", c.stall_window);
    read(j, "metric_reg", c.metric_reg);
    read(j, "metric_reg_max", c.metric_reg_max);
    read(j, "armijo_c", c.armijo_c);
    read(j, "backtrack_factor", c.backtrack_factor);
    read(j, "max_backtracks", c.max_backtracks);
    read(j, "init_scale", c.init_scale);
    read(j, "seed", c.seed);
    read(j, "step_init", c.step_init);
    read(j, "step_max", c.step_max);
    read(j, "max_seconds", c.max_seconds);
    c.validate();
    return c;
}

Json numerics_to_json(const Numerics& n) {
    return {{"ode_tol", n.ode_tol}, {"quad_rtol", n.quad_rtol}, {"x_max_factor", n.x_max_factor}};
}

Numerics numerics_from_json(const Json& j, Numerics n) {
    reject_unknown(j, {"ode_tol", "quad_rtol", "x_max_factor"}, "numerics");
    read(j, "ode_tol", n.ode_tol);
    read(j, "quad_rtol", n.quad_rtol);
    read(j, "x_max_factor", n.x_max_factor);
    if (!(n.ode_tol > 0.0 && n.ode_tol < 1e-2)) {
        throw ConfigError("numerics: ode_tol must lie in (0, 1e-2)");
    }
    if (!(n.quad_rtol > 0.0 && n.quad_rtol <= 1e-2)) {
        throw ConfigError("numerics: quad_rtol must lie in (0, 1e-2]");
    }
    if (!(n.x_max_factor >= 20.0)) {
        throw ConfigError("numerics: x_max_factor must be at least 20");
    }
    return n;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace rcmps
