#include "rcmps/oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "rcmps/tangent_optimizer.hpp"

namespace rcmps {

namespace {

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix random_unitary(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = Complex(n(rng), n(rng));
    }
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ() * Matrix::Identity(d, d);
}

Matrix random_matrix(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = Complex(u(rng), u(rng));
    }
    return a;
}

CmpsState random_state(int d, std::uint64_t seed) {
    OptimizerConfig cfg;
    cfg.seed = seed;
    return random_init(d, 1.0, cfg);
}

double relative_deviation(double fast, double oracle) {
    return std::abs(fast - oracle) / std::max(std::abs(oracle), 1e-300);
}

} // namespace

double naive_phi2(const CmpsState& state, const DensityMatrix& rho, double rtol) {
    if (state.dim() > 4) {
        throw DomainError("naive_phi2 is limited to D <= 4");
    }
    const double m = state.mass();
    auto integrand = [&](double s) {
        if (m * s > 700.0) {
            return 0.0;
        }
        const Complex aa = a_two_point(state, rho, s, TwoPointOrdering::annihilation_pair);
        const Complex ca = a_two_point(state, rho, s, TwoPointOrdering::creation_annihilation);
        return 4.0 * std::cyl_bessel_k(0.0, m * s) / (2.0 * std::numbers::pi) * (aa + ca).real();
    };
    boost::math::quadrature::exp_sinh<double> quad;
    return quad.integrate(integrand, rtol);
}

double naive_phi4(const CmpsState& state, const DensityMatrix& rho, int intervals, double x_max_factor) {
    if (state.dim() > 2) {
        throw DomainError("naive_phi4 is limited to D <= 2");
    }
    if (intervals < 16 || intervals % 2 != 0) {
        throw DomainError("naive_phi4 needs an even number of intervals >= 16");
    }
    const int d = state.dim();
    const double m = state.mass();
    const double u_max = std::sqrt(x_max_factor / m);
    const Matrix gen = lindblad_superoperator(state);
    const Matrix id = Matrix::Identity(d, d);
    // vec(R X + X R^dag)
    Matrix source(d * d, d * d);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) {
            Matrix e = Matrix::Zero(d, d);
            e(i, j) = 1.0;
            source.col(j * d + i) = vec(state.r() * e + e * state.r().adjoint());
        }
    }

    auto run = [&](int n) {
        const double h = 2.0 * u_max / n;
        std::vector<double> x(static_cast<std::size_t>(n + 1)), a(x.size());
        for (int i = 0; i <= n; ++i) {
            const double u = -u_max + h * i;
            x[static_cast<std::size_t>(i)] = u * std::abs(u);
            // dx = 2|u| du, and 2|u| J(u^2) -> 1/sqrt(pi) at u = 0
            a[static_cast<std::size_t>(i)] =
                i == n / 2 ? 1.0 / std::sqrt(std::numbers::pi) : 2.0 * std::abs(u) * kernel_j(u * u, m);
        }
        std::vector<std::vector<Vector>> f(5, std::vector<Vector>(x.size(), Vector::Zero(d * d)));
        for (auto& v : f[0]) {
            v = vec(rho.matrix());
        }
        std::vector<Matrix> prop(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            prop[static_cast<std::size_t>(i)] =
                ((x[static_cast<std::size_t>(i) + 1] - x[static_cast<std::size_t>(i)]) * gen).exp();
        }
        for (int k = 1; k <= 4; ++k) {
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                const Vector left = a[i] * (source * f[static_cast<std::size_t>(k - 1)][i]);
                const Vector right = a[i + 1] * (source * f[static_cast<std::size_t>(k - 1)][i + 1]);
                f[static_cast<std::size_t>(k)][i + 1] =
                    prop[i] * (f[static_cast<std::size_t>(k)][i] + 0.5 * h * left) + 0.5 * h * right;
            }
        }
        const Vector& last = f[4].back();
        Complex tr = 0.0;
        for (int i = 0; i < d; ++i) {
            tr += last(i * d + i);
        }
        return 24.0 * tr.real();
    };
    const double coarse = run(intervals);
    const double fine = run(2 * intervals);
    return (4.0 * fine - coarse) / 3.0;
}

double naive_kinetic(const CmpsState& state, const DensityMatrix& rho, double rtol) {
    const int d = state.dim();
    const double m = state.mass();
    const Eigen::ComplexEigenSolver<Matrix> eig(lindblad_superoperator(state));
    if (eig.info() != Eigen::Success) {
        throw DomainError("eigen-decomposition of the generator failed");
    }
    const Matrix& v = eig.eigenvectors();
    const Matrix v_inv = v.inverse();
    const Vector seed = vec(state.r() * rho.matrix());
    const Vector probe = vec(state.r().conjugate());
    const Vector amplitude = (probe.transpose() * v).transpose().cwiseProduct(v_inv * seed);
    std::vector<Complex> alpha, lambda;
    for (int j = 0; j < d * d; ++j) {
        if (std::abs(eig.eigenvalues()(j)) > 1e-10) {
            alpha.push_back(amplitude(j));
            lambda.push_back(eig.eigenvalues()(j));
        }
    }
    // Connected <a^dag(s) a(0)> = sum_j alpha_j e^{lambda_j s} for s >= 0.
    auto occupation = [&](double k) {
        double n = 0.0;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            n += 2.0 * (alpha[j] * (-lambda[j]) / (lambda[j] * lambda[j] + k * k)).real();
        }
        return n;
    };
    boost::math::quadrature::exp_sinh<double> quad;
    const double connected =
        quad.integrate([&](double k) { return std::sqrt(k * k + m * m) * occupation(k); }, rtol);
    return m * std::norm((state.r() * rho.matrix()).trace()) + connected / std::numbers::pi;
}

CoherentReference coherent_closed_forms(Complex r, double /*kappa*/, double mass, double g, double b,
                                        int max_order) {
    CoherentReference ref;
    const double scale = 1.0 / std::sqrt(2.0 * mass);
    const double phi = 2.0 * r.real() * scale;
    ref.vertex = std::exp(b * phi);
    // d(r + conj r) along w is 2 Re w = Re[conj(w) 2]
    ref.grad_vertex = ref.vertex * b * 2.0 * scale;
    for (int n = 1; n <= max_order; ++n) {
        ref.moments.push_back(std::pow(phi, n));
        ref.grad_moments.emplace_back(n * std::pow(phi, n - 1) * 2.0 * scale);
    }
    ref.kinetic = mass * std::norm(r);
    ref.grad_kinetic = 2.0 * mass * r;
    ref.energy = ref.kinetic + g * std::pow(phi, 4);
    ref.grad_energy = ref.grad_kinetic + g * 4.0 * std::pow(phi, 3) * 2.0 * scale;
    return ref;
}

std::vector<double> finite_diff_gradient(const CmpsState& state, const StateFunctional& f,
                                         const std::vector<Matrix>& directions, double h) {
    if (!(h >= 1e-6 && h <= 1e-3)) {
        throw DomainError("finite-difference step must lie in [1e-6, 1e-3]");
    }
    std::vector<double> out;
    out.reserve(directions.size());
    for (const Matrix& w : directions) {
        if (w.norm() == 0.0) {
            out.push_back(0.0);
            continue;
        }
        const TangentVector t{w};
        const double fp1 = f(retract(state, t, h));
        const double fm1 = f(retract(state, t, -h));
        const double fp2 = f(retract(state, t, 2.0 * h));
        const double fm2 = f(retract(state, t, -2.0 * h));
        out.push_back((8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h));
    }
    return out;
}

StateFunctional make_functional(FunctionalKind kind, double parameter, const QuadGrid& grid,
                                const OdeOptions& options) {
    return [=, &grid](const CmpsState& s) {
        const DensityMatrix rho = stationary_state(s);
        switch (kind) {
        case FunctionalKind::vertex:
            return vertex_expectation(s, rho, parameter, grid, options);
        case FunctionalKind::moment:
            return phi_moment(s, rho, static_cast<int>(parameter), grid, options);
        case FunctionalKind::kinetic:
            return kinetic_density(s, rho, grid, options);
        case FunctionalKind::energy:
            return evaluate_observables(s, rho, parameter, grid, options).energy_density;
        }
        return 0.0;
    };
}

GradientMatrix functional_gradient(FunctionalKind kind, double parameter, const CmpsState& state,
                                   const QuadGrid& grid, const OdeOptions& options) {
    const DensityMatrix rho = stationary_state(state);
    switch (kind) {
    case FunctionalKind::vertex:
        return grad_vertex(state, rho, parameter, grid, options);
    case FunctionalKind::moment:
        return grad_phi_moment(state, rho, static_cast<int>(parameter), grid, options);
    case FunctionalKind::kinetic:
        return grad_kinetic(state, rho, grid, options);
    case FunctionalKind::energy:
        return energy_and_gradient(state, parameter, grid, options).gradient;
    }
    return {};
}

void OracleReport::add(std::string name, double fast, double oracle, double tolerance, bool relative) {
    CheckResult c;
    c.name = std::move(name);
    c.fast = fast;
    c.oracle = oracle;
    c.abs_dev = std::abs(fast - oracle);
    c.rel_dev = relative_deviation(fast, oracle);
    c.tolerance = tolerance;
    c.relative = relative;
    c.pass = std::isfinite(fast) && std::isfinite(oracle) && (relative ? c.rel_dev : c.abs_dev) <= tolerance;
    checks.push_back(std::move(c));
}

bool OracleReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

OracleReport run_checks(CheckLevel level, const Numerics& numerics) {
    OracleReport report;
    const QuadGrid grid = numerics.grid(1.0);
    const OdeOptions tight{std::min(numerics.ode_tol, 1e-12)};

    // Bond dimension one: coherent states.
    for (const Complex r : {Complex(0.5, 0.0), Complex(0.3, -0.2), Complex(0.0, 0.5)}) {
        const CmpsState s(Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, r), 1.0);
        const DensityMatrix rho = stationary_state(s);
        const CoherentReference ref = coherent_closed_forms(r, 0.3, 1.0, 1.0, 1.0);
        const std::string tag = "D1 r=(" + std::to_string(r.real()) + "," + std::to_string(r.imag()) + ") ";
        report.add(tag + "vertex b=1", vertex_expectation(s, rho, 1.0, grid, tight), ref.vertex, 1e-8, false);
        const std::vector<double> mom = phi_moments(s, rho, 4, grid, tight);
        for (int n = 0; n < 4; ++n) {
            report.add(tag + "moment n=" + std::to_string(n + 1), mom[static_cast<std::size_t>(n)],
                       ref.moments[static_cast<std::size_t>(n)], 1e-8, false);
        }
        report.add(tag + "kinetic", kinetic_density(s, rho, grid, tight), ref.kinetic, 1e-8, false);
        const EnergyGradient eg = energy_and_gradient(s, 1.0, grid, tight);
        report.add(tag + "energy g=1", eg.energy, ref.energy, 1e-8, false);
        report.add(tag + "energy gradient re", eg.gradient.g(0, 0).real(), ref.grad_energy.real(), 1e-8, false);
        report.add(tag + "energy gradient im", eg.gradient.g(0, 0).imag(), ref.grad_energy.imag(), 1e-8, false);
        const GradientMatrix gv = grad_vertex(s, rho, 1.0, grid, tight);
        report.add(tag + "vertex gradient re", gv.g(0, 0).real(), ref.grad_vertex.real(), 1e-8, false);
        const GradientMatrix gk = grad_kinetic(s, rho, grid, tight);
        report.add(tag + "kinetic gradient re", gk.g(0, 0).real(), ref.grad_kinetic.real(), 1e-8, false);
        report.add(tag + "kinetic gradient im", gk.g(0, 0).imag(), ref.grad_kinetic.imag(), 1e-8, false);
    }

    // Finite differences.
    std::mt19937_64 rng(2024);
    const int fd_states = level == CheckLevel::quick ? 1 : 3;
    for (int d = 2; d <= (level == CheckLevel::quick ? 2 : 3); ++d) {
        for (int k = 0; k < fd_states; ++k) {
            const CmpsState s = random_state(d, 100 + static_cast<std::uint64_t>(10 * d + k));
            const std::vector<Matrix> dirs{random_matrix(d, rng)};
            const std::vector<std::pair<FunctionalKind, double>> kinds{{FunctionalKind::vertex, 0.7},
                                                                        {FunctionalKind::moment, 2.0},
                                                                        {FunctionalKind::moment, 4.0},
                                                                        {FunctionalKind::kinetic, 0.0},
                                                                        {FunctionalKind::energy, 1.0}};
            for (const auto& [kind, p] : kinds) {
                const GradientMatrix g = functional_gradient(kind, p, s, grid, tight);
                const double fd = finite_diff_gradient(s, make_functional(kind, p, grid, tight), dirs)[0];
                static const char* names[] = {"vertex", "moment", "kinetic", "energy"};
                report.add("FD D" + std::to_string(d) + " state " + std::to_string(k) + " " +
                               names[static_cast<int>(kind)] + " p=" + std::to_string(p),
                           g.directional(dirs[0]), fd, std::abs(fd) > 1e-3 ? 1e-5 : 1e-8, std::abs(fd) > 1e-3);
            }
        }
    }
    if (level == CheckLevel::quick) {
        return report;
    }

    // Naive integrals.
    for (int d = 1; d <= 3; ++d) {
        for (int k = 0; k < 2; ++k) {
            const CmpsState s = random_state(d, 300 + static_cast<std::uint64_t>(10 * d + k));
            const DensityMatrix rho = stationary_state(s);
            const std::string tag = "D" + std::to_string(d) + " state " + std::to_string(k) + " ";
            report.add(tag + "naive phi^2", phi_moment(s, rho, 2, grid, tight), naive_phi2(s, rho), 1e-6, false);
            report.add(tag + "spectral kinetic", kinetic_density(s, rho, grid, tight), naive_kinetic(s, rho), 1e-8,
                       false);
            if (d <= 2) {
                report.add(tag + "naive phi^4", phi_moment(s, rho, 4, grid, tight), naive_phi4(s, rho), 1e-4,
                           false);
            }
        }
    }

    // Invariances.
    for (int k = 0; k < 4; ++k) {
        const int d = 2 + k % 3;
        const CmpsState s = random_state(d, 500 + static_cast<std::uint64_t>(k));
        const DensityMatrix rho = stationary_state(s);
        const ObservableSet base = evaluate_observables(s, rho, 1.0, grid, tight);
        const std::string tag = "D" + std::to_string(d) + " state " + std::to_string(k) + " ";

        const Matrix u = random_unitary(d, rng);
        const CmpsState rotated(u * s.k() * u.adjoint(), u * s.r() * u.adjoint(), 1.0);
        const DensityMatrix rho_rot = stationary_state(rotated);
        report.add(tag + "gauge: stationary state", (rho_rot.matrix() - u * rho.matrix() * u.adjoint()).norm(), 0.0,
                   1e-10, false);
        const ObservableSet rot = evaluate_observables(rotated, rho_rot, 1.0, grid, tight);
        report.add(tag + "gauge: energy", rot.energy_density, base.energy_density, 1e-9, false);
        report.add(tag + "gauge: <phi>", rot.phi_moments[0], base.phi_moments[0], 1e-9, false);

        const CmpsState flipped(s.k(), -s.r(), 1.0);
        const ObservableSet flip = evaluate_observables(flipped, stationary_state(flipped), 1.0, grid, tight);
        report.add(tag + "parity: kinetic", flip.kinetic_part, base.kinetic_part, 1e-10, false);
        report.add(tag + "parity: <:phi^2:>", flip.phi_moments[1], base.phi_moments[1], 1e-10, false);
        report.add(tag + "parity: <phi> flips", flip.phi_moments[0], -base.phi_moments[0], 1e-10, false);

        const Matrix x = random_matrix(d, rng);
        const Matrix o = random_matrix(d, rng);
        const double scale = x.norm() * o.norm();
        report.add(tag + "trace preservation", std::abs(apply_lindblad(s, x).trace()) / x.norm(), 0.0, 1e-12,
                   false);
        report.add(tag + "adjoint duality",
                   std::abs((o * apply_lindblad(s, x)).trace() - (apply_adjoint_lindblad(s, o) * x).trace()) / scale,
                   0.0, 1e-12, false);
        report.add(tag + "metric PSD: min eigenvalue of rho_ss >= -1e-12", std::min(rho.min_eigenvalue() + 1e-12, 0.0),
                   0.0, 0.0, false);
    }
    return report;
}

} // namespace rcmps
