#include "rcmps/cascade.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace rcmps {

namespace {

using MapMatrix = Eigen::Map<Matrix>;
using ConstMapMatrix = Eigen::Map<const Matrix>;

/// tr(A B) without forming the product.
Complex trace_of_product(const Matrix& a, const Matrix& b) { return a.transpose().cwiseProduct(b).sum(); }

} // namespace

int CascadeSpec::add_block(bool steady_init, double weight, int mirror) {
    init_steady.push_back(steady_init);
    weights.push_back(weight);
    mirror_of.push_back(mirror);
    return num_blocks() - 1;
}

int CascadeSpec::append(const CascadeSpec& other) {
    const int offset = num_blocks();
    for (int k = 0; k < other.num_blocks(); ++k) {
        const int mirror = other.mirror_of[static_cast<std::size_t>(k)];
        add_block(other.init_steady[static_cast<std::size_t>(k)], other.weights[static_cast<std::size_t>(k)],
                  mirror < 0 ? -1 : mirror + offset);
    }
    for (SourceTerm term : other.terms) {
        term.target += offset;
        if (term.source != kSteadyStateBlock) {
            term.source += offset;
        }
        terms.push_back(term);
    }
    return offset;
}

CascadeSpec CascadeSpec::vertex(double b) {
    CascadeSpec spec;
    const int rho = spec.add_block(true, 1.0);
    spec.terms.push_back({rho, rho, b, SourceOp::r, SourceOp::r_dag});
    return spec;
}

CascadeSpec CascadeSpec::moments(int n) {
    if (n < 1) {
        throw DomainError("moment order must be positive");
    }
    CascadeSpec spec;
    int previous = kSteadyStateBlock;
    for (int k = 1; k <= n; ++k) {
        const int block = spec.add_block(false, k == n ? 1.0 : 0.0);
        spec.terms.push_back({block, previous, static_cast<double>(k), SourceOp::r, SourceOp::r_dag});
        previous = block;
    }
    return spec;
}

CascadeSpec CascadeSpec::kinetic(double mass) {
    CascadeSpec spec;
    // rho system: a(y) <-> R on the left, a^dag(x) <-> R^dag on the right.
    const int x10 = spec.add_block(false, 0.0);
    const int x01 = spec.add_block(false, 0.0, x10);
    const int x11 = spec.add_block(false, 2.0 * mass * mass);
    spec.terms.push_back({x10, kSteadyStateBlock, 1.0, SourceOp::r, SourceOp::none});
    spec.terms.push_back({x01, kSteadyStateBlock, 1.0, SourceOp::none, SourceOp::r_dag});
    spec.terms.push_back({x11, x01, 1.0, SourceOp::r, SourceOp::none});
    spec.terms.push_back({x11, x10, 1.0, SourceOp::none, SourceOp::r_dag});
    // sigma system: derivative insertions carry [Q, R] and [R^dag, Q^dag].
    const int s10 = spec.add_block(false, 0.0);
    const int s01 = spec.add_block(false, 0.0, s10);
    const int s11 = spec.add_block(false, 2.0);
    spec.terms.push_back({s10, kSteadyStateBlock, 1.0, SourceOp::qr_comm, SourceOp::none});
    spec.terms.push_back({s01, kSteadyStateBlock, 1.0, SourceOp::none, SourceOp::qr_comm_dag});
    spec.terms.push_back({s11, s01, 1.0, SourceOp::qr_comm, SourceOp::none});
    spec.terms.push_back({s11, s10, 1.0, SourceOp::none, SourceOp::qr_comm_dag});
    return spec;
}

CascadeLayout::CascadeLayout(const CascadeSpec& spec, int d) : dim(d) {
    const auto n = static_cast<std::size_t>(spec.num_blocks());
    std::vector<bool> needed(n, false);
    for (const auto& term : spec.terms) {
        if (term.source != kSteadyStateBlock) {
            needed[static_cast<std::size_t>(term.source)] = true;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (spec.mirror_of[k] >= 0) {
            needed[static_cast<std::size_t>(spec.mirror_of[k])] = true;
        }
    }
    roles.resize(n);
    offset.assign(n, -1);
    for (std::size_t k = 0; k < n; ++k) {
        if (spec.mirror_of[k] >= 0) {
            if (spec.mirror_of[spec.mirror_of[k]] >= 0) {
                throw DomainError("a mirror block must refer to an independent block");
            }
            roles[k] = Role::mirror;
        } else if (needed[k]) {
            roles[k] = Role::evolving;
            offset[k] = num_evolving++ * d * d;
        } else {
            roles[k] = Role::terminal;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (roles[k] == Role::terminal) {
            offset[k] = num_evolving * d * d + num_terminal++;
        }
    }
}

Eigen::Map<const Matrix> block_view(const OdeVector& v, const CascadeLayout& layout, int k) {
    return {v.data() + layout.offset[static_cast<std::size_t>(k)], layout.dim, layout.dim};
}

CascadeContext::CascadeContext(const CmpsState& s, const DensityMatrix& density, const QuadGrid& g)
    : state(s), rho(density), grid(g) {
    if (density.dim() != s.dim()) {
        throw DimensionMismatch("density matrix and state have different bond dimensions");
    }
    if (std::abs(g.mass - s.mass()) > 1e-12 * s.mass()) {
        throw DomainError("quadrature grid was built for a different mass");
    }
    q = gauge_q(s);
    q_dag = q.adjoint();
    r = s.r();
    r_dag = r.adjoint();
    comm = q * r - r * q;
    comm_dag = comm.adjoint();
}

const Matrix& CascadeContext::op(SourceOp which) const {
    switch (which) {
    case SourceOp::r:
        return r;
    case SourceOp::r_dag:
        return r_dag;
    case SourceOp::qr_comm:
        return comm;
    case SourceOp::qr_comm_dag:
        return comm_dag;
    case SourceOp::none:
        break;
    }
    throw DomainError("no matrix attached to SourceOp::none");
}

double CascadeContext::kernel(double x) const {
    if (std::abs(x) < grid.x_min) {
        return 0.0;
    }
    return kernel_j(x, state.mass());
}

namespace {

/// Shared scratch space for the right-hand sides.
struct Workspace {
    explicit Workspace(int d) : tmp(d, d), src(d, d), acc(d, d) {}
    Matrix tmp, src, acc;
};

void add_source(const CascadeContext& ctx, const SourceTerm& term, const Matrix& y, double scale, Matrix& out,
                Matrix& tmp) {
    if (term.left != SourceOp::none) {
        tmp.noalias() = ctx.op(term.left) * y;
        out += scale * tmp;
    }
    if (term.right != SourceOp::none) {
        tmp.noalias() = y * ctx.op(term.right);
        out += scale * tmp;
    }
}

Complex source_trace(const CascadeContext& ctx, const SourceTerm& term, const Matrix& y) {
    Complex t = 0.0;
    if (term.left != SourceOp::none) {
        t += trace_of_product(ctx.op(term.left), y);
    }
    if (term.right != SourceOp::none) {
        t += trace_of_product(y, ctx.op(term.right));
    }
    return t;
}

} // namespace

ForwardPass run_forward(const CascadeContext& ctx, const CascadeSpec& spec, const OdeOptions& options) {
    const int d = ctx.state.dim();
    CascadeLayout layout(spec, d);
    using Role = CascadeLayout::Role;

    OdeVector init = OdeVector::Zero(layout.size());
    for (int k = 0; k < spec.num_blocks(); ++k) {
        const auto uk = static_cast<std::size_t>(k);
        if (!spec.init_steady[uk]) {
            continue;
        }
        if (layout.roles[uk] == Role::evolving) {
            MapMatrix(init.data() + layout.offset[uk], d, d) = ctx.rho.matrix();
        } else if (layout.roles[uk] == Role::terminal) {
            init(layout.offset[uk]) = 1.0;
        }
    }

    auto work = std::make_shared<Workspace>(d);
    const OdeRhs rhs = [&ctx, &spec, &layout, work, d](double x, const OdeVector& y, OdeVector& dy) {
        Workspace& w = *work;
        for (int k = 0; k < spec.num_blocks(); ++k) {
            const auto uk = static_cast<std::size_t>(k);
            if (layout.roles[uk] != Role::evolving) {
                continue;
            }
            ConstMapMatrix yk(y.data() + layout.offset[uk], d, d);
            MapMatrix out(dy.data() + layout.offset[uk], d, d);
            out.noalias() = ctx.q * yk;
            out.noalias() += yk * ctx.q_dag;
            w.tmp.noalias() = ctx.r * yk;
            out.noalias() += w.tmp * ctx.r_dag;
        }
        for (int k = 0; k < spec.num_blocks(); ++k) {
            const auto uk = static_cast<std::size_t>(k);
            if (layout.roles[uk] == Role::terminal) {
                dy(layout.offset[uk]) = 0.0;
            }
        }
        const double j = ctx.kernel(x);
        if (j == 0.0) {
            return;
        }
        for (const auto& term : spec.terms) {
            const auto ut = static_cast<std::size_t>(term.target);
            if (layout.roles[ut] == Role::mirror) {
                continue;
            }
            const Matrix* src = &ctx.rho.matrix();
            if (term.source != kSteadyStateBlock) {
                const auto us = static_cast<std::size_t>(term.source);
                if (layout.roles[us] == Role::mirror) {
                    w.src = block_view(y, layout, spec.mirror_of[us]).adjoint();
                } else {
                    w.src = block_view(y, layout, term.source);
                }
                src = &w.src;
            }
            const double scale = term.coeff * j;
            if (layout.roles[ut] == Role::terminal) {
                dy(layout.offset[ut]) += scale * source_trace(ctx, term, *src);
            } else {
                w.acc.setZero();
                add_source(ctx, term, *src, scale, w.acc, w.tmp);
                MapMatrix(dy.data() + layout.offset[ut], d, d) += w.acc;
            }
        }
    };

    ForwardPass pass{spec, layout, integrate(rhs, init, ctx.grid, Direction::forward, options), {}, 0.0};
    const OdeVector& fin = pass.trajectory.terminal;
    pass.final_traces.resize(static_cast<std::size_t>(spec.num_blocks()));
    for (int k = 0; k < spec.num_blocks(); ++k) {
        const auto uk = static_cast<std::size_t>(k);
        switch (layout.roles[uk]) {
        case Role::evolving:
            pass.final_traces[uk] = block_view(fin, layout, k).trace();
            break;
        case Role::terminal:
            pass.final_traces[uk] = fin(layout.offset[uk]);
            break;
        case Role::mirror:
            pass.final_traces[uk] = std::conj(block_view(fin, layout, spec.mirror_of[uk]).trace());
            break;
        }
        pass.value += spec.weights[uk] * pass.final_traces[uk];
    }
    return pass;
}

Trajectory run_backward(const CascadeContext& ctx, const CascadeSpec& spec, const CascadeLayout& layout,
                        const OdeOptions& options) {
    const int d = ctx.state.dim();
    using Role = CascadeLayout::Role;

    OdeVector init = OdeVector::Zero(layout.size());
    for (int k = 0; k < spec.num_blocks(); ++k) {
        const auto uk = static_cast<std::size_t>(k);
        if (layout.roles[uk] == Role::evolving) {
            MapMatrix(init.data() + layout.offset[uk], d, d) =
                spec.weights[uk] * Matrix::Identity(d, d);
        }
    }

    auto work = std::make_shared<Workspace>(d);
    const OdeRhs rhs = [&ctx, &spec, &layout, work, d](double x, const OdeVector& o, OdeVector& dout) {
        Workspace& w = *work;
        dout.setZero();
        for (int k = 0; k < spec.num_blocks(); ++k) {
            const auto uk = static_cast<std::size_t>(k);
            if (layout.roles[uk] != Role::evolving) {
                continue;
            }
            ConstMapMatrix ok(o.data() + layout.offset[uk], d, d);
            MapMatrix out(dout.data() + layout.offset[uk], d, d);
            out.noalias() -= ctx.q_dag * ok;
            out.noalias() -= ok * ctx.q;
            w.tmp.noalias() = ctx.r_dag * ok;
            out.noalias() -= w.tmp * ctx.r;
        }
        const double j = ctx.kernel(x);
        if (j == 0.0) {
            return;
        }
        for (const auto& term : spec.terms) {
            if (term.source == kSteadyStateBlock) {
                continue;
            }
            const auto us = static_cast<std::size_t>(term.source);
            if (layout.roles[us] != Role::evolving) {
                continue;
            }
            const auto ut = static_cast<std::size_t>(term.target);
            const double scale = term.coeff * j;
            MapMatrix out(dout.data() + layout.offset[us], d, d);
            if (layout.roles[ut] == Role::terminal) {
                const double wt = spec.weights[ut];
                if (wt == 0.0) {
                    continue;
                }
                if (term.left != SourceOp::none) {
                    out -= (scale * wt) * ctx.op(term.left);
                }
                if (term.right != SourceOp::none) {
                    out -= (scale * wt) * ctx.op(term.right);
                }
                continue;
            }
            if (layout.roles[ut] == Role::mirror) {
                w.src = block_view(o, layout, spec.mirror_of[ut]).adjoint();
            } else {
                w.src = block_view(o, layout, term.target);
            }
            // tr[O_t (A y + y B)] = tr[(O_t A + B O_t) y]
            if (term.left != SourceOp::none) {
                w.tmp.noalias() = w.src * ctx.op(term.left);
                out -= scale * w.tmp;
            }
            if (term.right != SourceOp::none) {
                w.tmp.noalias() = ctx.op(term.right) * w.src;
                out -= scale * w.tmp;
            }
        }
    };

    return integrate(rhs, init, ctx.grid, Direction::backward, options);
}

} // namespace rcmps
