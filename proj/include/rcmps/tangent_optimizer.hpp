#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rcmps/adjoint_gradient.hpp"
#include "rcmps/matrix_core.hpp"
#include "rcmps/observables.hpp"

namespace rcmps {

struct OptimizerConfig {
    int max_iters = 20000;
    double grad_norm_tol = 1e-6;
    double energy_rel_tol = 1e-10;
    int stall_window = 20;
    double metric_reg = 1e-10;
    double metric_reg_max = 1e-6;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 40;
    double init_scale = 0.0; // <= 0 selects 1/sqrt(D)
    std::uint64_t seed = 1;
    double step_init = 0.1;
    double step_max = 1e4;
    double max_seconds = 0.0; // <= 0: no wall-time limit

    /// Throws ConfigError on out-of-range fields.
    void validate() const;
};

/// no_descent: the line search found no decrease above the evaluation noise
/// after a successful start; the last accepted point is returned.
enum class Termination { grad_norm, energy_stall, max_iters, time_limit, no_descent };

[[nodiscard]] std::string to_string(Termination t);

struct OptimizationResult {
    explicit OptimizationResult(CmpsState s) : state(std::move(s)) {}

    CmpsState state;
    double energy = 0.0;
    double grad_norm = 0.0;
    std::vector<double> energy_trace;    // energy before each iteration, then the final value
    std::vector<double> grad_norm_trace;
    std::vector<double> step_trace;      // accepted step sizes
    Termination termination = Termination::max_iters;
    int iterations = 0;
    double wall_seconds = 0.0;
    double metric_reg = 0.0; // regularization in force at the end
};

/// A point of the objective: the state, its value and the metric matrix
/// (rho_ss for the physical energy). `cache` lets the gradient reuse the
/// forward pass of the evaluation.
struct ObjectivePoint {
    std::shared_ptr<const CmpsState> state;
    Matrix metric;
    double value = 0.0;
    std::shared_ptr<const void> cache;
};

class Objective {
public:
    virtual ~Objective() = default;
    [[nodiscard]] virtual ObjectivePoint evaluate(const CmpsState& state) const = 0;
    [[nodiscard]] virtual GradientMatrix gradient(const ObjectivePoint& point) const = 0;
};

/// E = <:h_fb:> + g <:phi^4:>.
class EnergyObjective : public Objective {
public:
    EnergyObjective(double mass, double g, const Numerics& numerics = {});

    [[nodiscard]] ObjectivePoint evaluate(const CmpsState& state) const override;
    [[nodiscard]] GradientMatrix gradient(const ObjectivePoint& point) const override;

    [[nodiscard]] double coupling() const noexcept { return g_; }
    [[nodiscard]] const QuadGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const OdeOptions& ode() const noexcept { return ode_; }

private:
    double mass_;
    double g_;
    QuadGrid grid_;
    OdeOptions ode_;
};

/// W = -G (metric + delta 1)^{-1} for a Hermitian PSD metric. Throws
/// SingularMetric if the regularized metric is numerically singular.
[[nodiscard]] TangentVector metric_inverse_apply(const Matrix& metric, const GradientMatrix& g, double delta);
[[nodiscard]] TangentVector metric_inverse_apply(const DensityMatrix& rho, const GradientMatrix& g, double delta);

/// R' = R + eps W, K' = K + eps (R^dag W - W^dag R) / 2i.
[[nodiscard]] CmpsState retract(const CmpsState& state, const TangentVector& w, double eps);

struct LineSearchResult {
    double step = 0.0;
    ObjectivePoint point;
    int trials = 0;
    double next_step_init = 0.0;
};

/// Armijo backtracking from cfg.step_init (or `step_init` when positive).
/// Trial states whose stationary state is degenerate count as rejections.
/// Throws DomainError if W is not a descent direction and LineSearchFailed
/// after cfg.max_backtracks rejections.
[[nodiscard]] LineSearchResult line_search(const ObjectivePoint& start, const TangentVector& w,
                                           const GradientMatrix& g, const OptimizerConfig& cfg,
                                           const Objective& objective, double step_init = 0.0);

/// Uniform entries in [-s, s] for Re/Im of R and of K (then Hermitized).
[[nodiscard]] CmpsState random_init(int dim, double mass, const OptimizerConfig& cfg);

/// Embeds `small` in the top-left block of a dim x dim state without changing
/// its observables. The new sector gets uniform entries of amplitude `noise`
/// and decays into the old one; the coupling back is left to the optimizer.
[[nodiscard]] CmpsState embed_state(const CmpsState& small, int dim, double noise, std::uint64_t seed);

using ProgressCallback = std::function<void(int iteration, double energy, double grad_norm, double step)>;

/// Natural-gradient descent from `initial`. A line-search failure on the first
/// iteration is rethrown as LineSearchFailed; later ones end the run with
/// Termination::no_descent.
[[nodiscard]] OptimizationResult optimize(const CmpsState& initial, const Objective& objective,
                                          const OptimizerConfig& cfg, const ProgressCallback& progress = {});

/// Natural-gradient descent on the energy from a random initial state.
[[nodiscard]] OptimizationResult optimize(int dim, double mass, double g, const OptimizerConfig& cfg,
                                          const Numerics& numerics = {}, const ProgressCallback& progress = {});

} // namespace rcmps
