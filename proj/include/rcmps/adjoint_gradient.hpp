#pragma once

#include "rcmps/cascade.hpp"
#include "rcmps/matrix_core.hpp"
#include "rcmps/observables.hpp"

namespace rcmps {

/// Gradient with respect to the tangent direction W: the derivative of the
/// functional along (R + eps W, K + eps (R^dag W - W^dag R) / 2i) is Re tr[W^dag G].
struct GradientMatrix {
    Matrix g;

    [[nodiscard]] double directional(const Matrix& w) const { return (w.adjoint() * g).trace().real(); }
    [[nodiscard]] double norm() const { return g.norm(); }
};

/// Adjoint pass over a finished forward pass. Includes the response of the
/// stationary state itself through one deflated D^2 x D^2 solve.
[[nodiscard]] GradientMatrix cascade_gradient(const CascadeContext& ctx, const ForwardPass& pass,
                                              const OdeOptions& options);

/// A cascade functional evaluated at one state, with the forward pass kept
/// so that the gradient costs one backward integration.
class CascadeEvaluation {
public:
    CascadeEvaluation(CmpsState state, const QuadGrid& grid, CascadeSpec spec, const OdeOptions& options);
    CascadeEvaluation(CmpsState state, DensityMatrix rho, const QuadGrid& grid, CascadeSpec spec,
                      const OdeOptions& options);

    [[nodiscard]] const CmpsState& state() const noexcept { return state_; }
    [[nodiscard]] const DensityMatrix& rho() const noexcept { return rho_; }
    [[nodiscard]] const ForwardPass& pass() const noexcept { return pass_; }
    [[nodiscard]] double value() const;
    [[nodiscard]] GradientMatrix gradient() const;

private:
    CmpsState state_;
    DensityMatrix rho_;
    const QuadGrid* grid_;
    OdeOptions options_;
    ForwardPass pass_;
};

[[nodiscard]] GradientMatrix grad_vertex(const CmpsState& state, const DensityMatrix& rho, double b,
                                         const QuadGrid& grid, const OdeOptions& options = {});
[[nodiscard]] GradientMatrix grad_phi_moment(const CmpsState& state, const DensityMatrix& rho, int n,
                                             const QuadGrid& grid, const OdeOptions& options = {});
[[nodiscard]] GradientMatrix grad_kinetic(const CmpsState& state, const DensityMatrix& rho, const QuadGrid& grid,
                                          const OdeOptions& options = {});

struct EnergyGradient {
    double energy = 0.0;
    GradientMatrix gradient;
};

/// E = <:h_fb:> + g <:phi^4:> and its gradient from one forward and one backward pass.
[[nodiscard]] EnergyGradient energy_and_gradient(const CmpsState& state, double g, const QuadGrid& grid,
                                                 const OdeOptions& options = {});

/// Energy only (same forward pass, no adjoint).
[[nodiscard]] double energy_density(const CmpsState& state, double g, const QuadGrid& grid,
                                    const OdeOptions& options = {});

} // namespace rcmps
