#include "rcmps/matrix_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace rcmps {

namespace {

constexpr double kDegeneracyThreshold = 1e-10;

void require_square(const Matrix& m, const char* name) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw DimensionMismatch(std::string(name) + " must be a non-empty square matrix");
    }
}

void require_same_dim(const CmpsState& state, const Matrix& m) {
    if (m.rows() != state.dim() || m.cols() != state.dim()) {
        throw DimensionMismatch("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", state bond dimension is " + std::to_string(state.dim()));
    }
}

/// Column-major vec(A X B) = (B^T kron A) vec(X).
Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unvec(const Vector& v, int d) { return Eigen::Map<const Matrix>(v.data(), d, d); }

Matrix long_time_fixed_point(const Matrix& generator, int d) {
    const double scale = std::max(generator.cwiseAbs().colwise().sum().maxCoeff(), 1e-300);
    Matrix propagator = (generator / scale).exp();
    for (int i = 0; i < 64; ++i) {
        Matrix squared = propagator * propagator;
        const double change = (squared - propagator).norm();
        propagator = std::move(squared);
        if (change < 1e-15 * propagator.norm()) {
            break;
        }
    }
    const Vector start = vec(Matrix::Identity(d, d) / static_cast<double>(d));
    return unvec(propagator * start, d);
}

} // namespace

CmpsState::CmpsState(Matrix k, Matrix r, double mass) : k_(std::move(k)), r_(std::move(r)), mass_(mass) {
    require_square(k_, "K");
    require_square(r_, "R");
    if (k_.rows() != r_.rows()) {
        throw DimensionMismatch("K and R must have the same bond dimension");
    }
    if (!(mass_ > 0.0) || !std::isfinite(mass_)) {
        throw DomainError("mass must be positive and finite");
    }
    if (!k_.allFinite() || !r_.allFinite()) {
        throw DomainError("state matrices must be finite");
    }
    k_ = hermitian_part(k_);
}

DensityMatrix::DensityMatrix(Matrix rho) : rho_(hermitian_part(rho)) {
    require_square(rho_, "rho");
    const double trace = rho_.trace().real();
    if (!(std::abs(trace) > 0.0) || !std::isfinite(trace)) {
        throw DomainError("density matrix has vanishing trace");
    }
    rho_ /= trace;
}

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(rho_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

Matrix gauge_q(const CmpsState& state) {
    const Complex i{0.0, 1.0};
    return -i * state.k() - 0.5 * state.r().adjoint() * state.r();
}

Matrix apply_lindblad(const CmpsState& state, const Matrix& rho) {
    require_same_dim(state, rho);
    const Matrix q = gauge_q(state);
    const Matrix& r = state.r();
    return q * rho + rho * q.adjoint() + r * rho * r.adjoint();
}

Matrix apply_adjoint_lindblad(const CmpsState& state, const Matrix& op) {
    require_same_dim(state, op);
    const Matrix q = gauge_q(state);
    const Matrix& r = state.r();
    return q.adjoint() * op + op * q + r.adjoint() * op * r;
}

Matrix lindblad_superoperator(const CmpsState& state) {
    const int d = state.dim();
    const Matrix q = gauge_q(state);
    const Matrix id = Matrix::Identity(d, d);
    return kron(id, q) + kron(q.conjugate(), id) + kron(state.r().conjugate(), state.r());
}

Matrix adjoint_lindblad_superoperator(const CmpsState& state) {
    const int d = state.dim();
    const Matrix q = gauge_q(state);
    const Matrix id = Matrix::Identity(d, d);
    return kron(id, q.adjoint()) + kron(q.transpose(), id) + kron(state.r().transpose(), state.r().adjoint());
}

DensityMatrix stationary_state(const CmpsState& state) {
    const int d = state.dim();
    if (d == 1) {
        return DensityMatrix(Matrix::Ones(1, 1));
    }
    const Matrix generator = lindblad_superoperator(state);

    Eigen::ComplexEigenSolver<Matrix> solver(generator, true);
    if (solver.info() != Eigen::Success) {
        return DensityMatrix(long_time_fixed_point(generator, d));
    }
    const Vector& eigenvalues = solver.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(eigenvalues.size()));
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    std::partial_sort(order.begin(), order.begin() + 2, order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(eigenvalues(a)) < std::abs(eigenvalues(b));
    });
    const double second = std::abs(eigenvalues(order[1]));
    if (second < kDegeneracyThreshold) {
        throw DegenerateSteadyState("generator has a degenerate fixed point (second |eigenvalue| = " +
                                    std::to_string(second) + ")");
    }

    // Bordered system (L + u v^T) x = u with v = vec(1) and u = vec(1)/D pins tr x = 1.
    const Vector identity = vec(Matrix::Identity(d, d));
    const Vector u = identity / static_cast<double>(d);
    const Matrix bordered = generator + u * identity.transpose();
    const Vector polished = bordered.partialPivLu().solve(u);
    if (polished.allFinite()) {
        return DensityMatrix(unvec(polished, d));
    }
    const Vector eigvec = solver.eigenvectors().col(order[0]);
    return DensityMatrix(unvec(eigvec, d));
}

Matrix solve_adjoint_deflated(const CmpsState& state, const DensityMatrix& rho, const Matrix& z) {
    require_same_dim(state, z);
    const int d = state.dim();
    const Matrix& r = rho.matrix();
    const Complex shift = (r * z).trace();
    if (d == 1) {
        return Matrix::Zero(1, 1);
    }
    const Matrix centered = z - shift * Matrix::Identity(d, d);
    const Vector identity = vec(Matrix::Identity(d, d));
    const Vector pairing = vec(Matrix(r.transpose()));
    const Matrix system = adjoint_lindblad_superoperator(state) + identity * pairing.transpose();
    return unvec(system.partialPivLu().solve(vec(centered)), d);
}

} // namespace rcmps
