#include "rcmps/observables.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace rcmps {

namespace {

constexpr int kKineticBlocks = 6;
constexpr int kEnergyMoments = 4;

ForwardPass forward(const CmpsState& state, const DensityMatrix& rho, const QuadGrid& grid,
                    const CascadeSpec& spec, const OdeOptions& options) {
    const CascadeContext ctx(state, rho, grid);
    return run_forward(ctx, spec, options);
}

void check_order(int n) {
    if (n < 1 || n > kMaxMomentOrder) {
        throw DomainError("moment order must lie in [1, " + std::to_string(kMaxMomentOrder) + "]");
    }
}

} // namespace

double checked_real(Complex value, const char* what) {
    if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
        throw DomainError(std::string(what) + " is not finite");
    }
    if (std::abs(value.imag()) > 1e-9 * std::max(1.0, std::abs(value))) {
        throw DomainError(std::string(what) + " has imaginary part " + std::to_string(value.imag()));
    }
    return value.real();
}

double vertex_expectation(const CmpsState& state, const DensityMatrix& rho, double b, const QuadGrid& grid,
                          const OdeOptions& options) {
    if (b == 0.0) {
        return 1.0;
    }
    return checked_real(forward(state, rho, grid, CascadeSpec::vertex(b), options).value, "vertex expectation");
}

double phi_moment(const CmpsState& state, const DensityMatrix& rho, int n, const QuadGrid& grid,
                  const OdeOptions& options) {
    check_order(n);
    return checked_real(forward(state, rho, grid, CascadeSpec::moments(n), options).value, "field moment");
}

std::vector<double> phi_moments(const CmpsState& state, const DensityMatrix& rho, int n, const QuadGrid& grid,
                                const OdeOptions& options) {
    check_order(n);
    const ForwardPass pass = forward(state, rho, grid, CascadeSpec::moments(n), options);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (const Complex t : pass.final_traces) {
        out.push_back(checked_real(t, "field moment"));
    }
    return out;
}

double kinetic_density(const CmpsState& state, const DensityMatrix& rho, const QuadGrid& grid,
                       const OdeOptions& options) {
    return checked_real(forward(state, rho, grid, CascadeSpec::kinetic(state.mass()), options).value,
                        "kinetic density");
}

Complex a_two_point(const CmpsState& state, const DensityMatrix& rho, double s, TwoPointOrdering ordering) {
    if (!(s >= 0.0)) {
        throw DomainError("separation must be non-negative");
    }
    const int d = state.dim();
    const Matrix& r = state.r();
    const Matrix& p = rho.matrix();
    const Matrix seed = ordering == TwoPointOrdering::creation_pair ? Matrix(p * r.adjoint()) : Matrix(r * p);
    Matrix evolved = seed;
    if (s > 0.0) {
        const Matrix propagator = (s * lindblad_superoperator(state)).exp();
        const Vector v = propagator * Eigen::Map<const Vector>(seed.data(), seed.size());
        evolved = Eigen::Map<const Matrix>(v.data(), d, d);
    }
    switch (ordering) {
    case TwoPointOrdering::creation_annihilation:
    case TwoPointOrdering::creation_pair:
        return (evolved * r.adjoint()).trace();
    case TwoPointOrdering::annihilation_pair:
        return (r * evolved).trace();
    }
    return 0.0;
}

CascadeSpec energy_spec(double mass, double g) {
    CascadeSpec spec = CascadeSpec::kinetic(mass);
    CascadeSpec quartic = CascadeSpec::moments(kEnergyMoments);
    for (double& w : quartic.weights) {
        w *= g;
    }
    spec.append(quartic);
    return spec;
}

ObservableSet observables_from_pass(const ForwardPass& pass, double g) {
    if (pass.spec.num_blocks() != kKineticBlocks + kEnergyMoments) {
        throw DomainError("forward pass does not come from the energy cascade");
    }
    ObservableSet out;
    Complex kinetic = 0.0;
    for (int k = 0; k < kKineticBlocks; ++k) {
        kinetic += pass.spec.weights[static_cast<std::size_t>(k)] * pass.final_traces[static_cast<std::size_t>(k)];
    }
    out.kinetic_part = checked_real(kinetic, "kinetic density");
    for (int k = 0; k < kEnergyMoments; ++k) {
        out.phi_moments.push_back(
            checked_real(pass.final_traces[static_cast<std::size_t>(kKineticBlocks + k)], "field moment"));
    }
    out.quartic_part = g * out.phi_moments.back();
    out.energy_density = out.kinetic_part + out.quartic_part;
    return out;
}

ObservableSet evaluate_observables(const CmpsState& state, const DensityMatrix& rho, double g,
                                   const QuadGrid& grid, const OdeOptions& options) {
    return observables_from_pass(forward(state, rho, grid, energy_spec(state.mass(), g), options), g);
}

} // namespace rcmps
