#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "rcmps/adjoint_gradient.hpp"
#include "rcmps/matrix_core.hpp"
#include "rcmps/observables.hpp"

namespace rcmps {

/// <:phi^2:> = 4 int_0^inf ds K_0(m s)/(2 pi) Re[<a a>(s) + <a^dag a>(s)], from
/// dense two-point functions. Requires D <= 4.
[[nodiscard]] double naive_phi2(const CmpsState& state, const DensityMatrix& rho, double rtol = 1e-11);

/// <:phi^4:> as the ordered fourfold integral of the source insertions,
/// accumulated on a uniform grid in u (x = u |u|) with dense propagators and
/// one Richardson step. Requires D <= 2.
[[nodiscard]] double naive_phi4(const CmpsState& state, const DensityMatrix& rho, int intervals = 2048,
                                double x_max_factor = 40.0);

/// <:h_fb:> = m |tr(R rho)|^2 + (1/pi) int_0^inf dk omega_k n_c(k), with the
/// connected occupation n_c(k) from the eigen-decomposition of the generator.
[[nodiscard]] double naive_kinetic(const CmpsState& state, const DensityMatrix& rho, double rtol = 1e-11);

/// Reference values for a bond-dimension-one state (a zero-momentum coherent
/// state). Gradients follow the Re tr[W^dag G] convention.
struct CoherentReference {
    double vertex = 0.0;
    std::vector<double> moments; // n = 1..max_order
    double kinetic = 0.0;
    double energy = 0.0;
    Complex grad_vertex;
    std::vector<Complex> grad_moments;
    Complex grad_kinetic;
    Complex grad_energy;
};

[[nodiscard]] CoherentReference coherent_closed_forms(Complex r, double kappa, double mass, double g, double b,
                                                      int max_order = 4);

using StateFunctional = std::function<double(const CmpsState&)>;

/// 4th-order central differences along retract(state, W, +-h, +-2h).
/// Requires h in [1e-6, 1e-3].
[[nodiscard]] std::vector<double> finite_diff_gradient(const CmpsState& state, const StateFunctional& f,
                                                       const std::vector<Matrix>& directions, double h = 1e-4);

enum class FunctionalKind { vertex, moment, kinetic, energy };

/// Functional with its own stationary state, for finite differencing.
[[nodiscard]] StateFunctional make_functional(FunctionalKind kind, double parameter, const QuadGrid& grid,
                                              const OdeOptions& options);

/// Adjoint gradient of the same functional.
[[nodiscard]] GradientMatrix functional_gradient(FunctionalKind kind, double parameter, const CmpsState& state,
                                                 const QuadGrid& grid, const OdeOptions& options);

struct CheckResult {
    std::string name;
    double fast = 0.0;
    double oracle = 0.0;
    double abs_dev = 0.0;
    double rel_dev = 0.0;
    double tolerance = 0.0;
    bool relative = true; // whether tolerance applies to rel_dev
    bool pass = false;
};

struct OracleReport {
    std::vector<CheckResult> checks;

    void add(std::string name, double fast, double oracle, double tolerance, bool relative = true);
    [[nodiscard]] bool all_pass() const;
};

enum class CheckLevel { quick, full };

/// Oracle and invariant suite behind `rcmps check`.
[[nodiscard]] OracleReport run_checks(CheckLevel level, const Numerics& numerics = {});

} // namespace rcmps
