#include "rcmps/adjoint_gradient.hpp"

#include <vector>

namespace rcmps {

namespace {

/// Accumulates M_W and M_{W^dag} with dF = tr[M_W W + M_{W^dag} W^dag].
class Pullback {
public:
    explicit Pullback(const CascadeContext& ctx)
        : ctx_(ctx), m_w_(Matrix::Zero(ctx.r.rows(), ctx.r.cols())), m_wd_(m_w_), tmp_(m_w_) {}

    /// tr[O dL(y)] with dL(y) = dQ y + y dQ^dag + W y R^dag + R y W^dag and dQ = -R^dag W.
    void generator(const Matrix& o, const Matrix& y, double scale) {
        tmp_.noalias() = ctx_.r_dag * o - o * ctx_.r_dag;
        m_w_.noalias() += scale * y * tmp_;
        tmp_.noalias() = o * ctx_.r - ctx_.r * o;
        m_wd_.noalias() += scale * tmp_ * y;
    }

    /// tr[C dA] for the source matrix A.
    void source(SourceOp op, const Matrix& c, double scale) {
        const Matrix& r = ctx_.r;
        const Matrix& rd = ctx_.r_dag;
        switch (op) {
        case SourceOp::none:
            return;
        case SourceOp::r:
            m_w_ += scale * c;
            return;
        case SourceOp::r_dag:
            m_wd_ += scale * c;
            return;
        case SourceOp::qr_comm:
            // d[Q,R] = [-R^dag W, R] + [Q, W]
            tmp_.noalias() = c * ctx_.q - ctx_.q * c;
            tmp_.noalias() += c * r * rd;
            tmp_.noalias() -= r * c * rd;
            m_w_ += scale * tmp_;
            return;
        case SourceOp::qr_comm_dag:
            tmp_.noalias() = ctx_.q_dag * c - c * ctx_.q_dag;
            tmp_.noalias() += r * rd * c;
            tmp_.noalias() -= r * c * rd;
            m_wd_ += scale * tmp_;
            return;
        }
    }

    [[nodiscard]] GradientMatrix result() const { return {m_w_.adjoint() + m_wd_}; }

private:
    const CascadeContext& ctx_;
    Matrix m_w_, m_wd_, tmp_;
};

} // namespace

GradientMatrix cascade_gradient(const CascadeContext& ctx, const ForwardPass& pass, const OdeOptions& options) {
    const CascadeSpec& spec = pass.spec;
    const CascadeLayout& layout = pass.layout;
    using Role = CascadeLayout::Role;
    const int d = ctx.state.dim();
    const auto nb = static_cast<std::size_t>(spec.num_blocks());
    const Matrix identity = Matrix::Identity(d, d);

    const Trajectory adjoint = run_backward(ctx, spec, layout, options);

    Pullback pull(ctx);
    Matrix z = Matrix::Zero(d, d);
    std::vector<Matrix> y(nb), o(nb);
    Matrix c(d, d);

    auto load = [&](const OdeVector& fwd, const OdeVector& bwd) {
        for (std::size_t k = 0; k < nb; ++k) {
            switch (layout.roles[k]) {
            case Role::evolving:
                y[k] = block_view(fwd, layout, static_cast<int>(k));
                o[k] = block_view(bwd, layout, static_cast<int>(k));
                break;
            case Role::terminal:
                o[k] = spec.weights[k] * identity;
                break;
            case Role::mirror:
                break;
            }
        }
        for (std::size_t k = 0; k < nb; ++k) {
            if (layout.roles[k] == Role::mirror) {
                const auto orig = static_cast<std::size_t>(spec.mirror_of[k]);
                y[k] = y[orig].adjoint();
                o[k] = o[orig].adjoint();
            }
        }
    };

    for (std::size_t i = 0; i < adjoint.nodes.size(); ++i) {
        const double w = ctx.grid.weights[i];
        load(pass.trajectory.values[i], adjoint.values[i]);
        for (std::size_t k = 0; k < nb; ++k) {
            if (layout.roles[k] != Role::terminal) {
                pull.generator(o[k], y[k], w);
            }
        }
        const double j = ctx.kernel(adjoint.nodes[i]);
        if (j == 0.0) {
            continue;
        }
        for (const auto& term : spec.terms) {
            const Matrix& ot = o[static_cast<std::size_t>(term.target)];
            const Matrix& ys =
                term.source == kSteadyStateBlock ? ctx.rho.matrix() : y[static_cast<std::size_t>(term.source)];
            const double scale = w * term.coeff * j;
            if (term.left != SourceOp::none) {
                c.noalias() = ys * ot;
                pull.source(term.left, c, scale);
            }
            if (term.right != SourceOp::none) {
                c.noalias() = ot * ys;
                pull.source(term.right, c, scale);
            }
            if (term.source == kSteadyStateBlock) {
                if (term.left != SourceOp::none) {
                    z.noalias() += scale * ot * ctx.op(term.left);
                }
                if (term.right != SourceOp::none) {
                    z.noalias() += scale * ctx.op(term.right) * ot;
                }
            }
        }
    }

    // Blocks started from rho_ss at -x_max.
    load(pass.trajectory.values.front(), adjoint.terminal);
    for (std::size_t k = 0; k < nb; ++k) {
        if (spec.init_steady[k] && layout.roles[k] != Role::terminal) {
            z += o[k];
        }
    }
    if (d > 1) {
        const Matrix yz = solve_adjoint_deflated(ctx.state, ctx.rho, z);
        pull.generator(-yz, ctx.rho.matrix(), 1.0);
    }
    return pull.result();
}

CascadeEvaluation::CascadeEvaluation(CmpsState state, const QuadGrid& grid, CascadeSpec spec,
                                     const OdeOptions& options)
    : CascadeEvaluation(state, stationary_state(state), grid, std::move(spec), options) {}

CascadeEvaluation::CascadeEvaluation(CmpsState state, DensityMatrix rho, const QuadGrid& grid, CascadeSpec spec,
                                     const OdeOptions& options)
    : state_(std::move(state)), rho_(std::move(rho)), grid_(&grid), options_(options),
      pass_(run_forward(CascadeContext(state_, rho_, grid), spec, options)) {}

double CascadeEvaluation::value() const { return checked_real(pass_.value, "cascade functional"); }

GradientMatrix CascadeEvaluation::gradient() const {
    const CascadeContext ctx(state_, rho_, *grid_);
    return cascade_gradient(ctx, pass_, options_);
}

GradientMatrix grad_vertex(const CmpsState& state, const DensityMatrix& rho, double b, const QuadGrid& grid,
                           const OdeOptions& options) {
    if (b == 0.0) {
        return {Matrix::Zero(state.dim(), state.dim())};
    }
    return CascadeEvaluation(state, rho, grid, CascadeSpec::vertex(b), options).gradient();
}

GradientMatrix grad_phi_moment(const CmpsState& state, const DensityMatrix& rho, int n, const QuadGrid& grid,
                               const OdeOptions& options) {
    if (n < 1 || n > kMaxMomentOrder) {
        throw DomainError("moment order out of range");
    }
    return CascadeEvaluation(state, rho, grid, CascadeSpec::moments(n), options).gradient();
}

GradientMatrix grad_kinetic(const CmpsState& state, const DensityMatrix& rho, const QuadGrid& grid,
                            const OdeOptions& options) {
    return CascadeEvaluation(state, rho, grid, CascadeSpec::kinetic(state.mass()), options).gradient();
}

EnergyGradient energy_and_gradient(const CmpsState& state, double g, const QuadGrid& grid,
                                   const OdeOptions& options) {
    if (!(g >= 0.0)) {
        throw DomainError("coupling must be non-negative");
    }
    const CascadeEvaluation eval(state, grid, energy_spec(state.mass(), g), options);
    return {eval.value(), eval.gradient()};
}

double energy_density(const CmpsState& state, double g, const QuadGrid& grid, const OdeOptions& options) {
    if (!(g >= 0.0)) {
        throw DomainError("coupling must be non-negative");
    }
    return CascadeEvaluation(state, grid, energy_spec(state.mass(), g), options).value();
}

} // namespace rcmps
