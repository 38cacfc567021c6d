#pragma once

#include <vector>

namespace rcmps {

/// Smearing kernel J(x) = (1/2pi) int dk e^{-ikx} / sqrt(2 omega_k), omega_k = sqrt(k^2 + m^2).
///
/// Evaluated through the closed form sqrt(m) K_{1/4}(m|x|) / (2^{9/4} sqrt(pi) Gamma(5/4) (m|x|)^{1/4}).
/// J is even, positive, decays like e^{-m|x|} and has an integrable |x|^{-1/2}
/// singularity at the origin. Throws DomainError at x = 0 or for m <= 0.
[[nodiscard]] double kernel_j(double x, double mass);

/// Truncated real-line quadrature shared by the ODE dense output and the
/// kernel-weighted integrals. Nodes come from the tanh-sinh map of each
/// half-interval (0, x_max), mirrored, so they cluster at the kernel
/// singularity and the integration rule stays exact-to-rtol for any smooth
/// integrand on the truncated line, not only for ones decaying like the
/// kernel. Zero is never a node.
struct QuadGrid {
    std::vector<double> nodes;   // strictly ascending
    std::vector<double> weights; // same length as nodes
    double x_max = 0.0;
    double x_min = 0.0; // innermost |node| bound
    double mass = 0.0;
    double step = 0.0; // step of the underlying t-lattice
    bool singularity_split = true;

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }
};

/// sum_i w_i J(x_i); equals 1/sqrt(2m) up to the grid tolerance.
[[nodiscard]] double kernel_integral(double mass, const QuadGrid& grid);

/// Builds a grid with x_max = x_max_factor / m, halving the lattice step until
/// kernel_integral matches 1/sqrt(2m) to relative tolerance rtol and
/// exponentials e^{-a|x|}, a in {m/4, m, 4m}, integrate to the same tolerance.
/// Requires rtol in (0, 1e-2] and x_max_factor >= 20.
[[nodiscard]] QuadGrid build_grid(double mass, double rtol = 1e-9, double x_max_factor = 40.0);

/// Same lattice as `grid` with the t-step halved `levels` times.
[[nodiscard]] QuadGrid refine_grid(const QuadGrid& grid, int levels = 1);

} // namespace rcmps
