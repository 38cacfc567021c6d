#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rcmps/adjoint_gradient.hpp"
#include "rcmps/oracle.hpp"
#include "rcmps/tangent_optimizer.hpp"

using namespace rcmps;
using testing::random_state;

namespace {

const QuadGrid& grid() {
    static const QuadGrid g = build_grid(1.0, 1e-9, 40.0);
    return g;
}

const OdeOptions tight{1e-12};

CmpsState coherent(Complex r) { return {Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, r), 1.0}; }

bool fd_agrees(double adjoint, double fd) { return std::abs(adjoint - fd) <= std::max(1e-5 * std::abs(fd), 1e-8); }

void check_against_fd(FunctionalKind kind, double p, const CmpsState& s, int ndirs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Matrix> dirs;
    for (int i = 0; i < ndirs; ++i) {
        dirs.push_back(testing::gaussian_matrix(s.dim(), rng));
    }
    const GradientMatrix g = functional_gradient(kind, p, s, grid(), tight);
    const std::vector<double> fd = finite_diff_gradient(s, make_functional(kind, p, grid(), tight), dirs);
    for (int i = 0; i < ndirs; ++i) {
        const double ad = g.directional(dirs[static_cast<std::size_t>(i)]);
        CAPTURE(ad);
        CAPTURE(fd[static_cast<std::size_t>(i)]);
        CHECK(fd_agrees(ad, fd[static_cast<std::size_t>(i)]));
    }
}

} // namespace

TEST_SUITE("adjoint_gradient") {

TEST_CASE("directional derivative convention") {
    GradientMatrix g{Matrix::Constant(1, 1, Complex(3.0, 1.0))};
    CHECK(g.directional(Matrix::Constant(1, 1, Complex(0.0, 1.0))) == doctest::Approx(1.0));
    CHECK(g.directional(Matrix::Constant(1, 1, 2.0)) == doctest::Approx(6.0));
}

TEST_CASE("coherent gradients at D=1") {
    const CmpsState s = coherent(0.5);
    const DensityMatrix rho = stationary_state(s);
    // d/d(Re r) of exp(b sqrt(2) Re r) at b = 1.
    const GradientMatrix gv = grad_vertex(s, rho, 1.0, grid(), tight);
    CHECK(std::abs(gv.g(0, 0) - std::sqrt(2.0) * std::exp(1.0 / std::sqrt(2.0))) < 1e-7);
    const GradientMatrix g4 = grad_phi_moment(s, rho, 4, grid(), tight);
    CHECK(std::abs(g4.g(0, 0) - 2.0) < 1e-8);
    const GradientMatrix gk = grad_kinetic(s, rho, grid(), tight);
    CHECK(std::abs(gk.g(0, 0) - 1.0) < 1e-8);
    const EnergyGradient eg = energy_and_gradient(s, 1.0, grid(), tight);
    CHECK(std::abs(eg.energy - 0.5) < 1e-9);
    CHECK(std::abs(eg.gradient.g(0, 0) - 3.0) < 1e-8);

    // Finite differences along W = 1 give 3 as well.
    const std::vector<double> fd = finite_diff_gradient(
        s, make_functional(FunctionalKind::energy, 1.0, grid(), tight), {Matrix::Constant(1, 1, 1.0)});
    CHECK(std::abs(fd[0] - 3.0) < 1e-7);

    // Complex r: the kinetic gradient is 2 m r.
    const CmpsState c = coherent(Complex(0.2, -0.4));
    CHECK(std::abs(grad_kinetic(c, stationary_state(c), grid(), tight).g(0, 0) - Complex(0.4, -0.8)) < 1e-8);
}

TEST_CASE("vertex without source has zero gradient") {
    const CmpsState s = random_state(3, 8);
    CHECK(grad_vertex(s, stationary_state(s), 0.0, grid()).norm() < 1e-12);
}

TEST_CASE("finite differences at D=2 and D=3") {
    check_against_fd(FunctionalKind::vertex, 0.7, random_state(3, 21), 10, 1);
    check_against_fd(FunctionalKind::moment, 2.0, random_state(2, 22), 3, 2);
    check_against_fd(FunctionalKind::moment, 3.0, random_state(2, 23), 3, 3);
    check_against_fd(FunctionalKind::kinetic, 0.0, random_state(3, 24), 3, 4);
    check_against_fd(FunctionalKind::energy, 2.0, random_state(2, 25), 3, 5);
}

TEST_CASE("parity of moment gradients") {
    const CmpsState s = random_state(2, 30);
    const CmpsState f(s.k(), -s.r(), 1.0);
    for (int n = 1; n <= 4; ++n) {
        const Matrix gs = grad_phi_moment(s, stationary_state(s), n, grid(), tight).g;
        const Matrix gf = grad_phi_moment(f, stationary_state(f), n, grid(), tight).g;
        const double sign = n % 2 == 1 ? 1.0 : -1.0;
        CAPTURE(n);
        CHECK((gf - sign * gs).norm() < 1e-8 * (1.0 + gs.norm()));
    }
}

TEST_CASE("gradients vanish linearly at the vacuum") {
    std::mt19937_64 rng(6);
    const Matrix k = testing::hermitian_matrix(2, rng);
    const Matrix r = testing::gaussian_matrix(2, rng);
    const CmpsState a(k, 1e-3 * r, 1.0);
    const CmpsState b(k, 5e-4 * r, 1.0);
    const EnergyGradient ea = energy_and_gradient(a, 2.0, grid());
    const EnergyGradient eb = energy_and_gradient(b, 2.0, grid());
    CHECK(std::abs(ea.energy) < 1e-4);
    CHECK(ea.gradient.norm() < 1e-1);
    CHECK(ea.gradient.norm() / eb.gradient.norm() == doctest::Approx(2.0).epsilon(2e-2));
    const double ka = grad_kinetic(a, stationary_state(a), grid()).norm();
    const double kb = grad_kinetic(b, stationary_state(b), grid()).norm();
    CHECK(ka / kb == doctest::Approx(2.0).epsilon(2e-2));
}

TEST_CASE("energy and gradient agree with the observables") {
    const CmpsState s = random_state(2, 40);
    const EnergyGradient eg = energy_and_gradient(s, 2.0, grid());
    const ObservableSet o = evaluate_observables(s, stationary_state(s), 2.0, grid());
    CHECK(std::abs(eg.energy - o.energy_density) < 1e-10);
    CHECK(std::abs(energy_density(s, 2.0, grid()) - o.energy_density) < 1e-10);

    // Sum of term gradients.
    const DensityMatrix rho = stationary_state(s);
    const Matrix sum = grad_kinetic(s, rho, grid()).g + 2.0 * grad_phi_moment(s, rho, 4, grid()).g;
    CHECK((eg.gradient.g - sum).norm() < 1e-8 * sum.norm());
}

TEST_CASE("cached evaluation reuses its forward pass") {
    const CmpsState s = random_state(3, 41);
    const CascadeEvaluation ev(s, grid(), energy_spec(1.0, 1.5), OdeOptions{});
    const EnergyGradient eg = energy_and_gradient(s, 1.5, grid());
    CHECK(ev.value() == doctest::Approx(eg.energy).epsilon(1e-12));
    CHECK((ev.gradient().g - eg.gradient.g).norm() < 1e-10);
}

TEST_CASE("doubling the line length leaves the gradient unchanged") {
    const CmpsState s = random_state(3, 42);
    const QuadGrid longer = build_grid(1.0, 1e-9, 80.0);
    const Matrix a = energy_and_gradient(s, 1.0, grid(), tight).gradient.g;
    const Matrix b = energy_and_gradient(s, 1.0, longer, tight).gradient.g;
    CHECK((a - b).norm() <= 1e-9 * a.norm());
}

}
