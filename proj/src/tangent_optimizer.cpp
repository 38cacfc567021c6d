#include "rcmps/tangent_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace rcmps {

namespace {

constexpr Complex kI{0.0, 1.0};

struct EnergyCache {
    CascadeEvaluation eval;
};

template <class Error>
[[noreturn]] void rethrow_at(const Error& e, int iteration) {
    throw Error("iteration " + std::to_string(iteration) + ": " + e.what());
}

Matrix uniform_matrix(int rows, int cols, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double re = dist(rng);
            const double im = dist(rng);
            m(i, j) = Complex(re, im);
        }
    }
    return m;
}

} // namespace

void OptimizerConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("optimizer: ") + what);
        }
    };
    require(max_iters >= 0, "max_iters must be non-negative");
    require(grad_norm_tol > 0.0, "grad_norm_tol must be positive");
    require(energy_rel_tol >= 0.0, "energy_rel_tol must be non-negative");
    require(stall_window >= 1, "stall_window must be at least 1");
    require(metric_reg >= 0.0 && metric_reg_max >= metric_reg, "need 0 <= metric_reg <= metric_reg_max");
    require(armijo_c > 0.0 && armijo_c < 1.0, "armijo_c must lie in (0, 1)");
    require(backtrack_factor > 0.0 && backtrack_factor < 1.0, "backtrack_factor must lie in (0, 1)");
    require(max_backtracks >= 1, "max_backtracks must be at least 1");
    require(step_init > 0.0 && step_max >= step_init, "need 0 < step_init <= step_max");
    require(std::isfinite(init_scale), "init_scale must be finite");
}

std::string to_string(Termination t) {
    switch (t) {
    case Termination::grad_norm:
        return "grad_norm";
    case Termination::energy_stall:
        return "energy_stall";
    case Termination::max_iters:
        return "max_iters";
    case Termination::time_limit:
        return "time_limit";
    case Termination::no_descent:
        return "no_descent";
    }
    return "unknown";
}

EnergyObjective::EnergyObjective(double mass, double g, const Numerics& numerics)
    : mass_(mass), g_(g), grid_(numerics.grid(mass)), ode_(numerics.ode()) {
    if (!(g >= 0.0)) {
        throw DomainError("coupling must be non-negative");
    }
}

ObjectivePoint EnergyObjective::evaluate(const CmpsState& state) const {
    if (std::abs(state.mass() - mass_) > 1e-12 * mass_) {
        throw DomainError("state mass differs from the objective mass");
    }
    auto cache = std::make_shared<EnergyCache>(EnergyCache{CascadeEvaluation(state, grid_, energy_spec(mass_, g_), ode_)});
    const CascadeEvaluation& eval = cache->eval;
    ObjectivePoint p;
    p.state = std::shared_ptr<const CmpsState>(cache, &eval.state());
    p.metric = eval.rho().matrix();
    p.value = eval.value();
    p.cache = cache;
    return p;
}

GradientMatrix EnergyObjective::gradient(const ObjectivePoint& point) const {
    if (const auto* cache = static_cast<const EnergyCache*>(point.cache.get())) {
        return cache->eval.gradient();
    }
    return energy_and_gradient(*point.state, g_, grid_, ode_).gradient;
}

TangentVector metric_inverse_apply(const Matrix& metric, const GradientMatrix& g, double delta) {
    if (metric.rows() != g.g.rows() || metric.cols() != g.g.cols() || metric.rows() != metric.cols()) {
        throw DimensionMismatch("metric and gradient dimensions differ");
    }
    if (!(delta >= 0.0)) {
        throw DomainError("metric regularization must be non-negative");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(hermitian_part(metric));
    if (eig.info() != Eigen::Success) {
        throw SingularMetric("eigen-decomposition of the metric failed");
    }
    const Eigen::VectorXd lambda = eig.eigenvalues().array() + delta;
    const double floor = 1e-14 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if (lambda.minCoeff() <= floor) {
        throw SingularMetric("regularized metric has eigenvalue " + std::to_string(lambda.minCoeff()));
    }
    const Matrix& u = eig.eigenvectors();
    const Matrix inv = u * lambda.cwiseInverse().cast<Complex>().asDiagonal() * u.adjoint();
    return {-g.g * inv};
}

TangentVector metric_inverse_apply(const DensityMatrix& rho, const GradientMatrix& g, double delta) {
    return metric_inverse_apply(rho.matrix(), g, delta);
}

CmpsState retract(const CmpsState& state, const TangentVector& w, double eps) {
    if (w.w.rows() != state.dim() || w.w.cols() != state.dim()) {
        throw DimensionMismatch("tangent vector and state dimensions differ");
    }
    const Matrix& r = state.r();
    const Matrix dk = (r.adjoint() * w.w - w.w.adjoint() * r) / (2.0 * kI);
    return {state.k() + eps * dk, r + eps * w.w, state.mass()};
}

LineSearchResult line_search(const ObjectivePoint& start, const TangentVector& w, const GradientMatrix& g,
                             const OptimizerConfig& cfg, const Objective& objective, double step_init) {
    const double slope = g.directional(w.w);
    if (!(slope < 0.0)) {
        throw DomainError("line search needs a descent direction");
    }
    double eps = step_init > 0.0 ? step_init : cfg.step_init;
    for (int trial = 0; trial < cfg.max_backtracks; ++trial, eps *= cfg.backtrack_factor) {
        try {
            ObjectivePoint p = objective.evaluate(retract(*start.state, w, eps));
            if (std::isfinite(p.value) && p.value <= start.value + cfg.armijo_c * eps * slope) {
                const double next = trial == 0 ? std::min(2.0 * eps, cfg.step_max) : eps;
                return {eps, std::move(p), trial + 1, next};
            }
        } catch (const DegenerateSteadyState&) {
        } catch (const StepUnderflow&) {
        } catch (const DomainError&) {
        }
    }
    throw LineSearchFailed("no Armijo step after " + std::to_string(cfg.max_backtracks) + " backtracks");
}

CmpsState random_init(int dim, double mass, const OptimizerConfig& cfg) {
    if (dim < 1) {
        throw DomainError("bond dimension must be positive");
    }
    const double scale = cfg.init_scale > 0.0 ? cfg.init_scale : 1.0 / std::sqrt(static_cast<double>(dim));
    std::mt19937_64 rng(cfg.seed);
    Matrix r = uniform_matrix(dim, dim, scale, rng);
    Matrix k = uniform_matrix(dim, dim, scale, rng);
    return {hermitian_part(k), std::move(r), mass};
}

CmpsState embed_state(const CmpsState& small, int dim, double noise, std::uint64_t seed) {
    const int d0 = small.dim();
    if (dim < d0) {
        throw DimensionMismatch("cannot embed into a smaller bond dimension");
    }
    if (dim == d0) {
        return small;
    }
    const int d1 = dim - d0;
    std::mt19937_64 rng(seed);
    // R and Q block upper triangular: the old sector is invariant and the new
    // one decays into it, so every observable of `small` is unchanged.
    Matrix r = Matrix::Zero(dim, dim);
    r.topLeftCorner(d0, d0) = small.r();
    r.topRightCorner(d0, d1) = uniform_matrix(d0, d1, noise, rng);
    r.bottomRightCorner(d1, d1) = uniform_matrix(d1, d1, noise, rng);
    const Matrix rr = r.adjoint() * r;
    Matrix k = Matrix::Zero(dim, dim);
    k.topLeftCorner(d0, d0) = small.k();
    k.bottomRightCorner(d1, d1) = hermitian_part(uniform_matrix(d1, d1, noise, rng));
    k.bottomLeftCorner(d1, d0) = Complex(0.0, 0.5) * rr.bottomLeftCorner(d1, d0);
    k.topRightCorner(d0, d1) = k.bottomLeftCorner(d1, d0).adjoint();
    return {std::move(k), std::move(r), small.mass()};
}

OptimizationResult optimize(const CmpsState& initial, const Objective& objective, const OptimizerConfig& cfg,
                            const ProgressCallback& progress) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    ObjectivePoint point = objective.evaluate(initial);
    OptimizationResult out(*point.state);
    double reg = cfg.metric_reg;
    double step = cfg.step_init;

    for (int it = 0;; ++it) {
        const GradientMatrix g = objective.gradient(point);
        const double gnorm = g.norm();
        out.energy_trace.push_back(point.value);
        out.grad_norm_trace.push_back(gnorm);
        out.iterations = it;
        if (progress) {
            progress(it, point.value, gnorm, out.step_trace.empty() ? 0.0 : out.step_trace.back());
        }

        const auto n = out.energy_trace.size();
        bool done = true;
        if (gnorm <= cfg.grad_norm_tol) {
            out.termination = Termination::grad_norm;
        } else if (n > static_cast<std::size_t>(cfg.stall_window) &&
                   std::abs(out.energy_trace[n - 1 - static_cast<std::size_t>(cfg.stall_window)] - point.value) <=
                       cfg.energy_rel_tol * std::abs(point.value)) {
            out.termination = Termination::energy_stall;
        } else if (it >= cfg.max_iters) {
            out.termination = Termination::max_iters;
        } else if (cfg.max_seconds > 0.0 && elapsed() >= cfg.max_seconds) {
            out.termination = Termination::time_limit;
        } else {
            done = false;
        }
        if (done) {
            out.state = *point.state;
            out.energy = point.value;
            out.grad_norm = gnorm;
            break;
        }

        TangentVector w;
        for (;;) {
            try {
                w = metric_inverse_apply(point.metric, g, reg);
                break;
            } catch (const SingularMetric& e) {
                if (reg >= cfg.metric_reg_max) {
                    rethrow_at(e, it);
                }
                reg = std::min(std::max(reg * 100.0, 1e-14), cfg.metric_reg_max);
            }
        }

        try {
            LineSearchResult ls = line_search(point, w, g, cfg, objective, step);
            point = std::move(ls.point);
            step = ls.next_step_init;
            out.step_trace.push_back(ls.step);
        } catch (const LineSearchFailed& e) {
            if (it == 0) {
                rethrow_at(e, it);
            }
            out.termination = Termination::no_descent;
            out.state = *point.state;
            out.energy = point.value;
            out.grad_norm = gnorm;
            break;
        } catch (const DomainError& e) {
            rethrow_at(e, it);
        }
    }
    out.wall_seconds = elapsed();
    out.metric_reg = reg;
    return out;
}

OptimizationResult optimize(int dim, double mass, double g, const OptimizerConfig& cfg, const Numerics& numerics,
                            const ProgressCallback& progress) {
    const EnergyObjective objective(mass, g, numerics);
    return optimize(random_init(dim, mass, cfg), objective, cfg, progress);
}

} // namespace rcmps
