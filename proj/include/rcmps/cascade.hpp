#pragma once

#include <vector>

#include "rcmps/kernel_quadrature.hpp"
#include "rcmps/matrix_core.hpp"
#include "rcmps/ode_engine.hpp"

namespace rcmps {

/// Parameter-dependent matrix multiplying a source block from the left or right.
enum class SourceOp {
    none,
    r,           // R
    r_dag,       // R^dag
    qr_comm,     // [Q, R]
    qr_comm_dag, // [R^dag, Q^dag]
};

inline constexpr int kSteadyStateBlock = -1;

/// Contribution coeff * J(x) * (left . y_source + y_source . right) to d(y_target)/dx.
struct SourceTerm {
    int target = 0;
    int source = kSteadyStateBlock;
    double coeff = 1.0;
    SourceOp left = SourceOp::none;
    SourceOp right = SourceOp::none;
};

/// A block-triangular family of matrix ODEs
///
///     d y_k / dx = L . y_k + sum_terms coeff J(x) (A y_s + y_s B),
///
/// with y_k(-inf) either rho_ss or 0, and the functional sum_k w_k tr y_k(+inf).
/// Vertex operators, field monomials and the free Hamiltonian density are all
/// of this form. A block can be declared the Hermitian conjugate of another
/// (mirror); it is then never integrated.
struct CascadeSpec {
    std::vector<bool> init_steady;
    std::vector<int> mirror_of; // -1 when the block is independent
    std::vector<double> weights;
    std::vector<SourceTerm> terms;

    [[nodiscard]] int num_blocks() const noexcept { return static_cast<int>(weights.size()); }
    int add_block(bool steady_init, double weight, int mirror = -1);

    /// Appends `other`, shifting its block indices; returns the offset used.
    int append(const CascadeSpec& other);

    /// One block, source b J (R y + y R^dag); value <V_b>.
    static CascadeSpec vertex(double b);
    /// Blocks rho^(1..n), source k J (R rho^(k-1) + rho^(k-1) R^dag); value <:phi^n:>.
    static CascadeSpec moments(int n);
    /// rho^(1,0), rho^(0,1), rho^(1,1) and the [Q,R]-sourced sigma copies;
    /// value 2 tr[m^2 rho^(1,1) + sigma^(1,1)] = <:h_fb:>.
    static CascadeSpec kinetic(double mass);
};

/// Role of each block in the flattened ODE vector.
struct CascadeLayout {
    enum class Role { evolving, terminal, mirror };
    std::vector<Role> roles;
    std::vector<int> offset; // evolving: start index of the D*D block; terminal: scalar index
    int dim = 0;
    int num_evolving = 0;
    int num_terminal = 0;

    CascadeLayout(const CascadeSpec& spec, int dim);
    [[nodiscard]] Eigen::Index size() const noexcept {
        return static_cast<Eigen::Index>(num_evolving) * dim * dim + num_terminal;
    }
};

/// Matrices shared by the forward and backward passes of one state.
struct CascadeContext {
    CascadeContext(const CmpsState& state, const DensityMatrix& rho, const QuadGrid& grid);

    [[nodiscard]] const Matrix& op(SourceOp which) const;
    /// Kernel with the excluded core |x| < x_min set to zero, matching the grid.
    [[nodiscard]] double kernel(double x) const;

    const CmpsState& state;
    const DensityMatrix& rho;
    const QuadGrid& grid;
    Matrix q, q_dag, r, r_dag, comm, comm_dag;
};

struct ForwardPass {
    CascadeSpec spec;
    CascadeLayout layout;
    Trajectory trajectory;
    std::vector<Complex> final_traces; // tr y_k(+x_max) for every block
    Complex value;                     // sum_k w_k tr y_k(+x_max)
};

/// Integrates the cascade from -x_max to +x_max, storing the blocks at every node.
[[nodiscard]] ForwardPass run_forward(const CascadeContext& ctx, const CascadeSpec& spec, const OdeOptions& options);

/// Adjoint pass: integrates the dual blocks O_k backwards from O_k(+x_max) = w_k 1.
[[nodiscard]] Trajectory run_backward(const CascadeContext& ctx, const CascadeSpec& spec,
                                      const CascadeLayout& layout, const OdeOptions& options);

/// Views of the D x D block `k` inside a flattened cascade vector.
[[nodiscard]] Eigen::Map<const Matrix> block_view(const OdeVector& v, const CascadeLayout& layout, int k);

} // namespace rcmps
