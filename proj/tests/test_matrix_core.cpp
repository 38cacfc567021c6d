#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "helpers.hpp"

using namespace rcmps;
using testing::random_state;

namespace {

Matrix sigma_minus() {
    Matrix s = Matrix::Zero(2, 2);
    s(1, 0) = 1.0;
    return s;
}

double generator_norm(const CmpsState& s) { return lindblad_superoperator(s).operatorNorm(); }

} // namespace

TEST_SUITE("matrix_core") {

TEST_CASE("state construction validates its inputs") {
    CHECK_THROWS_AS(CmpsState(Matrix::Zero(2, 2), Matrix::Zero(3, 3), 1.0), DimensionMismatch);
    CHECK_THROWS_AS(CmpsState(Matrix::Zero(2, 3), Matrix::Zero(2, 3), 1.0), DimensionMismatch);
    CHECK_THROWS_AS(CmpsState(Matrix::Zero(1, 1), Matrix::Ones(1, 1), 0.0), DomainError);
    Matrix bad = Matrix::Ones(1, 1);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(CmpsState(Matrix::Zero(1, 1), bad, 1.0), DomainError);

    Matrix k(2, 2);
    k << 1.0, Complex(0.0, 1.0), Complex(0.0, 3.0), 2.0;
    const CmpsState s(k, Matrix::Identity(2, 2), 1.0);
    CHECK((s.k() - s.k().adjoint()).norm() == doctest::Approx(0.0));
}

TEST_CASE("density matrix normalizes and rejects zero trace") {
    Matrix m = Matrix::Identity(3, 3) * 2.0;
    const DensityMatrix rho(m);
    CHECK(rho.matrix().trace().real() == doctest::Approx(1.0));
    CHECK_THROWS_AS(DensityMatrix(Matrix::Zero(2, 2)), DomainError);
}

TEST_CASE("gauge Q") {
    const CmpsState s = random_state(3, 11);
    const Matrix q = gauge_q(s);
    const Matrix expected = -Complex(0.0, 1.0) * s.k() - 0.5 * s.r().adjoint() * s.r();
    CHECK((q - expected).norm() < 1e-14);
}

TEST_CASE("generator at bond dimension one vanishes") {
    const CmpsState s(Matrix::Constant(1, 1, 0.7), Matrix::Constant(1, 1, Complex(0.3, -0.4)), 1.0);
    CHECK(std::abs(apply_lindblad(s, Matrix::Constant(1, 1, 1.0))(0, 0)) < 1e-15);
    CHECK(std::abs(apply_adjoint_lindblad(s, Matrix::Constant(1, 1, Complex(2.0, 1.0)))(0, 0)) < 1e-15);
}

TEST_CASE("amplitude damping by hand") {
    const CmpsState s(Matrix::Zero(2, 2), sigma_minus(), 1.0);
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = -1.0;
    expected(1, 1) = 1.0;
    CHECK((apply_lindblad(s, rho) - expected).norm() < 1e-15);

    const DensityMatrix ss = stationary_state(s);
    Matrix target = Matrix::Zero(2, 2);
    target(1, 1) = 1.0;
    CHECK((ss.matrix() - target).norm() < 1e-12);
}

TEST_CASE("adjoint generator annihilates the identity") {
    for (int d = 1; d <= 5; ++d) {
        const CmpsState s = random_state(d, 40 + static_cast<std::uint64_t>(d));
        CHECK(apply_adjoint_lindblad(s, Matrix::Identity(d, d)).norm() < 1e-13);
    }
}

TEST_CASE("duality on random pairs at D=3") {
    std::mt19937_64 rng(7);
    const CmpsState s = random_state(3, 5);
    for (int i = 0; i < 10; ++i) {
        const Matrix o = testing::gaussian_matrix(3, rng);
        const Matrix x = testing::gaussian_matrix(3, rng);
        const Complex lhs = (o * apply_lindblad(s, x)).trace();
        const Complex rhs = (apply_adjoint_lindblad(s, o) * x).trace();
        CHECK(std::abs(lhs - rhs) <= 1e-12 * o.norm() * x.norm());
    }
}

TEST_CASE("superoperators agree with the matrix forms") {
    std::mt19937_64 rng(8);
    const CmpsState s = random_state(3, 9);
    const Matrix x = testing::gaussian_matrix(3, rng);
    const Eigen::Map<const Vector> vx(x.data(), x.size());
    const Vector lx = lindblad_superoperator(s) * vx;
    const Vector ax = adjoint_lindblad_superoperator(s) * vx;
    const Matrix l = apply_lindblad(s, x);
    const Matrix a = apply_adjoint_lindblad(s, x);
    CHECK((lx - Eigen::Map<const Vector>(l.data(), l.size())).norm() < 1e-13);
    CHECK((ax - Eigen::Map<const Vector>(a.data(), a.size())).norm() < 1e-13);
}

TEST_CASE("stationary state at bond dimension one") {
    const CmpsState s(Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, 0.5), 1.0);
    CHECK(std::abs(stationary_state(s).matrix()(0, 0) - 1.0) < 1e-15);
}

TEST_CASE("stationary state postconditions and long-time oracle at D=4") {
    const CmpsState s = random_state(4, 12);
    const DensityMatrix rho = stationary_state(s);
    const Matrix& r = rho.matrix();
    const Matrix l = lindblad_superoperator(s);
    CHECK(apply_lindblad(s, r).norm() <= 1e-12 * l.operatorNorm());
    CHECK((r - r.adjoint()).norm() < 1e-14);
    CHECK(std::abs(r.trace() - 1.0) < 1e-14);
    CHECK(rho.min_eigenvalue() > -1e-14);

    // exp(T L) (1/D) with T = 1e3 / gap.
    Eigen::ComplexEigenSolver<Matrix> es(l);
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double re = -es.eigenvalues()(i).real();
        if (std::abs(es.eigenvalues()(i)) > 1e-8) {
            gap = std::min(gap, re);
        }
    }
    REQUIRE(gap > 0.0);
    const Matrix prop = (l * (1e3 / gap)).exp();
    const Matrix start = Matrix::Identity(4, 4) / 4.0;
    const Vector v = prop * Eigen::Map<const Vector>(start.data(), start.size());
    const Matrix evolved = Eigen::Map<const Matrix>(v.data(), 4, 4);
    CHECK((evolved - r).norm() < 1e-10);
}

TEST_CASE("degenerate generators are rejected") {
    CHECK_THROWS_AS((void)stationary_state(CmpsState(Matrix::Zero(2, 2), Matrix::Zero(2, 2), 1.0)),
                    DegenerateSteadyState);
    // Block-diagonal R and K: two independent sectors.
    Matrix r = Matrix::Zero(2, 2);
    r(0, 0) = 0.5;
    r(1, 1) = -0.3;
    CHECK_THROWS_AS((void)stationary_state(CmpsState(Matrix::Identity(2, 2), r, 1.0)), DegenerateSteadyState);
}

TEST_CASE("deflated adjoint solve") {
    std::mt19937_64 rng(13);
    for (int d = 2; d <= 4; ++d) {
        const CmpsState s = random_state(d, 60 + static_cast<std::uint64_t>(d));
        const DensityMatrix rho = stationary_state(s);
        const Matrix z = testing::gaussian_matrix(d, rng);
        const Matrix y = solve_adjoint_deflated(s, rho, z);
        const Matrix rhs = z - (z * rho.matrix()).trace() * Matrix::Identity(d, d);
        CHECK((apply_adjoint_lindblad(s, y) - rhs).norm() < 1e-10 * (1.0 + z.norm()));
        CHECK(std::abs((rho.matrix() * y).trace()) < 1e-12 * (1.0 + y.norm()));
    }
}

TEST_CASE("property: trace preservation, duality and Hermiticity on 100 random instances") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 100; ++i) {
        const int d = 1 + i % 6;
        const CmpsState s = random_state(d, 1000 + static_cast<std::uint64_t>(i), 0.3 + 0.02 * i);
        const Matrix x = testing::gaussian_matrix(d, rng);
        const Matrix o = testing::gaussian_matrix(d, rng);
        CAPTURE(i);
        CHECK(std::abs(apply_lindblad(s, x).trace()) <= 1e-12 * x.norm() * (1.0 + generator_norm(s)));
        CHECK(std::abs((o * apply_lindblad(s, x)).trace() - (apply_adjoint_lindblad(s, o) * x).trace()) <=
              1e-12 * o.norm() * x.norm() * (1.0 + generator_norm(s)));
        const Matrix h = testing::hermitian_matrix(d, rng);
        const Matrix lh = apply_lindblad(s, h);
        CHECK((lh - lh.adjoint()).norm() <= 1e-13 * (1.0 + lh.norm()));
    }
}

TEST_CASE("property: gauge covariance of the stationary state") {
    std::mt19937_64 rng(100);
    for (int i = 0; i < 20; ++i) {
        const int d = 2 + i % 4;
        const CmpsState s = random_state(d, 2000 + static_cast<std::uint64_t>(i));
        const Matrix u = testing::unitary_matrix(d, rng);
        const CmpsState t(u * s.k() * u.adjoint(), u * s.r() * u.adjoint(), 1.0);
        const Matrix expected = u * stationary_state(s).matrix() * u.adjoint();
        CHECK((stationary_state(t).matrix() - expected).norm() < 1e-10);
    }
}

TEST_CASE("dimension mismatches are reported") {
    const CmpsState s = random_state(3, 1);
    CHECK_THROWS_AS((void)apply_lindblad(s, Matrix::Zero(2, 2)), DimensionMismatch);
    CHECK_THROWS_AS((void)apply_adjoint_lindblad(s, Matrix::Zero(4, 4)), DimensionMismatch);
}

}
