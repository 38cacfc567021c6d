#pragma once

#include <utility>
#include <vector>

#include "rcmps/cascade.hpp"
#include "rcmps/kernel_quadrature.hpp"
#include "rcmps/matrix_core.hpp"
#include "rcmps/ode_engine.hpp"

namespace rcmps {

/// Tolerances shared by every ODE-based evaluation.
struct Numerics {
    double ode_tol = 1e-10;
    double quad_rtol = 1e-9;
    double x_max_factor = 40.0;

    [[nodiscard]] OdeOptions ode() const { return {ode_tol}; }
    [[nodiscard]] QuadGrid grid(double mass) const { return build_grid(mass, quad_rtol, x_max_factor); }
};

inline constexpr int kMaxMomentOrder = 8;

struct ObservableSet {
    double energy_density = 0.0;
    double kinetic_part = 0.0;
    double quartic_part = 0.0;         // g <:phi^4:>
    std::vector<double> phi_moments;   // <:phi^n:>, n = 1..4
    std::vector<std::pair<double, double>> vertex_samples;
};

/// <:e^{b phi}:>, the trace at +x_max of d rho/dx = L rho + b J (R rho + rho R^dag), rho(-x_max) = rho_ss.
[[nodiscard]] double vertex_expectation(const CmpsState& state, const DensityMatrix& rho, double b,
                                        const QuadGrid& grid, const OdeOptions& options = {});

/// <:phi^n:> from the stacked system rho^(0..n). n in [1, 8].
[[nodiscard]] double phi_moment(const CmpsState& state, const DensityMatrix& rho, int n, const QuadGrid& grid,
                                const OdeOptions& options = {});

/// <:phi^k:> for k = 1..n from a single integration.
[[nodiscard]] std::vector<double> phi_moments(const CmpsState& state, const DensityMatrix& rho, int n,
                                              const QuadGrid& grid, const OdeOptions& options = {});

/// Normal-ordered free Hamiltonian density <:(pi^2 + (d phi)^2 + m^2 phi^2)/2:>.
[[nodiscard]] double kinetic_density(const CmpsState& state, const DensityMatrix& rho, const QuadGrid& grid,
                                     const OdeOptions& options = {});

enum class TwoPointOrdering {
    creation_annihilation,   // <a^dag(s) a(0)> = tr[e^{sL}(R rho) R^dag]
    annihilation_pair,       // <a(s) a(0)>     = tr[R e^{sL}(R rho)]
    creation_pair,           // <a^dag(s) a^dag(0)> = tr[e^{sL}(rho R^dag) R^dag]
};

/// Two-point function of the relativistic mode operators at separation s >= 0,
/// by dense exponentiation of the vectorized generator.
[[nodiscard]] Complex a_two_point(const CmpsState& state, const DensityMatrix& rho, double s,
                                  TwoPointOrdering ordering = TwoPointOrdering::creation_annihilation);

/// Cascade for E = <:h_fb:> + g <:phi^4:>: kinetic blocks first, then the four moment blocks.
[[nodiscard]] CascadeSpec energy_spec(double mass, double g);

/// Reads kinetic part, moments and energy off a forward pass of energy_spec.
[[nodiscard]] ObservableSet observables_from_pass(const ForwardPass& pass, double g);

/// One forward integration of energy_spec.
[[nodiscard]] ObservableSet evaluate_observables(const CmpsState& state, const DensityMatrix& rho, double g,
                                                 const QuadGrid& grid, const OdeOptions& options = {});

/// Real part of an expectation value; throws DomainError when the imaginary
/// part exceeds 1e-9 (relative to max(1, |value|)).
[[nodiscard]] double checked_real(Complex value, const char* what);

} // namespace rcmps
