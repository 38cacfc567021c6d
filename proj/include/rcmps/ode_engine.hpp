#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rcmps/kernel_quadrature.hpp"

namespace rcmps {

/// Flattened (block-stacked) complex ODE state.
using OdeVector = Eigen::VectorXcd;

/// Right-hand side dy/dx = f(x, y), written into `dydx` (pre-sized).
using OdeRhs = std::function<void(double x, const OdeVector& y, OdeVector& dydx)>;

enum class Direction { forward, backward };

struct IntegrationStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_calls = 0;
};

/// Solution sampled at every grid node, plus the value at the far end of the
/// line (+x_max for forward runs, -x_max for backward runs). `values[i]` always
/// belongs to `nodes[i]`, whatever the direction.
struct Trajectory {
    std::vector<double> nodes;
    std::vector<OdeVector> values;
    OdeVector terminal;
    Direction direction = Direction::forward;
    IntegrationStats stats;
};

struct OdeOptions {
    double tol = 1e-10; // used as both absolute and relative tolerance
    std::size_t max_steps = 2'000'000;
};

/// Integrates from x_start to x_end (either order) and records the solution at
/// each stop. Stops must be ordered along the direction of integration and lie
/// within the span; the integrator lands exactly on each of them.
/// Throws StepUnderflow if the step size collapses.
[[nodiscard]] std::vector<OdeVector> integrate_span(const OdeRhs& rhs, const OdeVector& init, double x_start,
                                                    double x_end, std::span<const double> stops,
                                                    const OdeOptions& options, OdeVector* terminal = nullptr,
                                                    IntegrationStats* stats = nullptr);

/// Forward runs start at -x_max from `init`; backward runs start at +x_max.
[[nodiscard]] Trajectory integrate(const OdeRhs& rhs, const OdeVector& init, const QuadGrid& grid,
                                   Direction direction, const OdeOptions& options = {});

} // namespace rcmps
