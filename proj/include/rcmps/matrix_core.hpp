#pragma once

#include <complex>

#include <Eigen/Dense>

#include "rcmps/errors.hpp"

namespace rcmps {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Translation-invariant RCMPS in left gauge.
///
/// The state is stored as the Hermitian matrix K and the general matrix R;
/// the gauge-fixed Q = -iK - R^dag R / 2 is always derived on demand.
class CmpsState {
public:
    /// K is re-Hermitized on construction. Throws DimensionMismatch for
    /// non-square or mismatched matrices and DomainError for m <= 0 or
    /// non-finite entries.
    CmpsState(Matrix k, Matrix r, double mass);

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(r_.rows()); }
    [[nodiscard]] double mass() const noexcept { return mass_; }
    [[nodiscard]] const Matrix& k() const noexcept { return k_; }
    [[nodiscard]] const Matrix& r() const noexcept { return r_; }

private:
    Matrix k_;
    Matrix r_;
    double mass_;
};

/// Trace-one Hermitian D x D matrix (stationary state of the transfer generator).
class DensityMatrix {
public:
    /// Hermitizes and normalizes to unit trace. Throws DomainError if the trace
    /// vanishes.
    explicit DensityMatrix(Matrix rho);

    [[nodiscard]] const Matrix& matrix() const noexcept { return rho_; }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(rho_.rows()); }
    [[nodiscard]] double min_eigenvalue() const;

private:
    Matrix rho_;
};

/// Tangent direction W. The companion V = -R^dag W is implied.
struct TangentVector {
    Matrix w;
};

/// Q = -iK - R^dag R / 2.
[[nodiscard]] Matrix gauge_q(const CmpsState& state);

/// L.rho = -i[K, rho] + R rho R^dag - {R^dag R, rho} / 2.
[[nodiscard]] Matrix apply_lindblad(const CmpsState& state, const Matrix& rho);

/// L*.O = Q^dag O + O Q + R^dag O R, dual to L under tr[O rho].
[[nodiscard]] Matrix apply_adjoint_lindblad(const CmpsState& state, const Matrix& op);

/// Column-major vectorized generator acting on vec(rho), size D^2 x D^2.
[[nodiscard]] Matrix lindblad_superoperator(const CmpsState& state);

/// Column-major vectorized adjoint generator acting on vec(O).
[[nodiscard]] Matrix adjoint_lindblad_superoperator(const CmpsState& state);

/// Unique trace-one fixed point of the generator.
///
/// Dense eigen-decomposition of the vectorized generator selects the
/// eigenvalue closest to zero; DegenerateSteadyState is thrown when the
/// second-smallest |eigenvalue| falls below 1e-10. The eigenvector is then
/// polished by a bordered linear solve. If the eigen-solver fails, the fixed
/// point is obtained from a long-time propagation exp(T L) (1/D).
[[nodiscard]] DensityMatrix stationary_state(const CmpsState& state);

/// Solves L* Y = Z - tr[Z rho] 1 for Y with tr[rho Y] = 0.
///
/// This is the pairing needed to differentiate quantities that depend on the
/// stationary state: for any perturbation dL of the generator,
/// tr[Z d(rho_ss)] = -tr[Y dL.rho_ss].
[[nodiscard]] Matrix solve_adjoint_deflated(const CmpsState& state, const DensityMatrix& rho, const Matrix& z);

[[nodiscard]] inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

} // namespace rcmps
