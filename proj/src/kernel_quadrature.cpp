#include "rcmps/kernel_quadrature.hpp"

#include <cmath>
#include <numbers>

#include "rcmps/errors.hpp"

namespace rcmps {

namespace {

// 2^{9/4} sqrt(pi) Gamma(5/4)
const double kKernelNorm = std::pow(2.0, 2.25) * std::sqrt(std::numbers::pi) * std::tgamma(1.25);

// J(x) ~ kSmallX / sqrt|x| as x -> 0, independent of the mass.
constexpr double kSmallX = 0.5 / 1.7724538509055160273; // 1 / (2 sqrt(pi))

// Tanh-sinh map of t onto (0, x_max): x = x_max / (1 + e^{-2u}), u = pi/2 sinh t.
QuadGrid make_grid(double mass, double x_min, double x_max, double step) {
    const double half_pi = 0.5 * std::numbers::pi;
    // Nodes closer than this to x_max carry no weight worth keeping.
    const double edge = 1e-10 * x_max;
    const double u_lo = -0.5 * std::log(x_max / x_min - 1.0);
    const double u_hi = 0.5 * std::log(x_max / edge - 1.0);
    const auto k_lo = static_cast<long>(std::ceil(std::asinh(u_lo / half_pi) / step));
    const auto k_hi = static_cast<long>(std::floor(std::asinh(u_hi / half_pi) / step));

    std::vector<double> half_nodes;
    std::vector<double> half_weights;
    for (long k = k_lo; k <= k_hi; ++k) {
        const double t = static_cast<double>(k) * step;
        const double u = half_pi * std::sinh(t);
        const double e = std::exp(-2.0 * std::abs(u));
        const double x = u >= 0.0 ? x_max / (1.0 + e) : x_max * e / (1.0 + e);
        // dx/dt = x_max pi/2 cosh t / (2 cosh^2 u)
        const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        half_nodes.push_back(x);
        half_weights.push_back(step * x_max * half_pi * std::cosh(t) * 0.5 * sech2);
    }

    QuadGrid grid;
    grid.x_max = x_max;
    grid.x_min = x_min;
    grid.mass = mass;
    grid.step = step;
    grid.nodes.reserve(2 * half_nodes.size());
    grid.weights.reserve(2 * half_nodes.size());
    for (auto i = half_nodes.size(); i-- > 0;) {
        grid.nodes.push_back(-half_nodes[i]);
        grid.weights.push_back(half_weights[i]);
    }
    for (std::size_t i = 0; i < half_nodes.size(); ++i) {
        grid.nodes.push_back(half_nodes[i]);
        grid.weights.push_back(half_weights[i]);
    }
    return grid;
}

/// The adjoint integrands are smooth on each half-line and decay at the rate
/// of the transfer-operator gap, which is unrelated to the kernel. Require the
/// rule to integrate exponentials over a spread of rates as well.
bool resolves_smooth_decay(const QuadGrid& grid, double rtol) {
    for (const double scale : {0.25, 1.0, 4.0}) {
        const double a = scale * grid.mass;
        double sum = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            sum += grid.weights[i] * std::exp(-a * std::abs(grid.nodes[i]));
        }
        const double exact = 2.0 * (std::exp(-a * grid.x_min) - std::exp(-a * grid.x_max)) / a;
        if (std::abs(sum - exact) > rtol * exact) {
            return false;
        }
    }
    return true;
}

} // namespace

double kernel_j(double x, double mass) {
    if (x == 0.0) {
        throw DomainError("kernel J diverges at x = 0");
    }
    if (!(mass > 0.0)) {
        throw DomainError("kernel J requires a positive mass");
    }
    const double z = mass * std::abs(x);
    if (z > 700.0) {
        return 0.0;
    }
    return std::sqrt(mass) * std::cyl_bessel_k(0.25, z) / (kKernelNorm * std::pow(z, 0.25));
}

double kernel_integral(double mass, const QuadGrid& grid) {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sum += grid.weights[i] * kernel_j(grid.nodes[i], mass);
    }
    return sum;
}

QuadGrid build_grid(double mass, double rtol, double x_max_factor) {
    if (!(mass > 0.0)) {
        throw DomainError("grid requires a positive mass");
    }
    if (!(rtol > 0.0 && rtol <= 1e-2)) {
        throw DomainError("grid rtol must lie in (0, 1e-2]");
    }
    if (!(x_max_factor >= 20.0)) {
        throw DomainError("x_max_factor must be at least 20");
    }
    const double exact = 1.0 / std::sqrt(2.0 * mass);
    // Drop (-x_min, x_min), which carries ~ 4 kSmallX sqrt(x_min) of the kernel weight.
    const double x_min = std::pow(0.1 * rtol * exact / (4.0 * kSmallX), 2);
    const double x_max = x_max_factor / mass;

    double step = 0.5;
    for (int level = 0; level < 12; ++level, step *= 0.5) {
        QuadGrid grid = make_grid(mass, x_min, x_max, step);
        if (std::abs(kernel_integral(mass, grid) - exact) <= rtol * exact && resolves_smooth_decay(grid, rtol)) {
            return grid;
        }
    }
    throw DomainError("grid did not reach the requested tolerance");
}

QuadGrid refine_grid(const QuadGrid& grid, int levels) {
    return make_grid(grid.mass, grid.x_min, grid.x_max, grid.step * std::ldexp(1.0, -levels));
}

} // namespace rcmps
