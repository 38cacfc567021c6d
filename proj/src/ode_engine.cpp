#include "rcmps/ode_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rcmps/errors.hpp"

namespace rcmps {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;
constexpr double kAlpha = 0.7 / 5.0; // PI controller exponents
constexpr double kBeta = 0.4 / 5.0;

class DormandPrince {
public:
    DormandPrince(const OdeRhs& rhs, const OdeVector& init, double x, const OdeOptions& options,
                  IntegrationStats& stats)
        : rhs_(rhs), options_(options), stats_(stats), x_(x), y_(init) {
        const auto n = init.size();
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_}) {
            v->resize(n);
        }
        eval(x_, y_, k1_);
    }

    /// Advances to `target` exactly, taking as many adaptive steps as needed.
    void advance_to(double target) {
        const double sign = target >= x_ ? 1.0 : -1.0;
        if (h_ == 0.0) {
            h_ = sign * initial_step(std::abs(target - x_));
        }
        h_ = sign * std::abs(h_);
        while ((target - x_) * sign > 0.0) {
            const double remaining = target - x_;
            const bool clamped = std::abs(h_) >= std::abs(remaining);
            const double h = clamped ? remaining : h_;
            const double err = try_step(h);
            if (err <= 1.0) {
                const double factor = accept_factor(err);
                x_ = clamped ? target : x_ + h;
                y_.swap(ynew_);
                k1_.swap(k7_);
                ++stats_.accepted;
                // Clamped steps are short for geometric reasons; keep the controller step.
                h_ = clamped ? sign * std::max(std::abs(h_), std::abs(h) * factor) : h * factor;
            } else {
                ++stats_.rejected;
                h_ = h * std::max(kMinFactor, kSafety * std::pow(err, -0.2));
                if (std::abs(h_) < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(x_), 1e-300)) {
                    throw StepUnderflow("ODE step size underflow at x = " + std::to_string(x_));
                }
            }
            if (stats_.accepted + stats_.rejected > options_.max_steps) {
                throw StepUnderflow("ODE exceeded the maximum number of steps near x = " + std::to_string(x_));
            }
        }
    }

    [[nodiscard]] const OdeVector& state() const noexcept { return y_; }

private:
    void eval(double x, const OdeVector& y, OdeVector& out) {
        rhs_(x, y, out);
        ++stats_.rhs_calls;
    }

    double initial_step(double span) {
        const double d0 = scaled_norm(y_, y_);
        const double d1 = scaled_norm(k1_, y_);
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        return std::min(h, span);
    }

    [[nodiscard]] double scaled_norm(const OdeVector& v, const OdeVector& ref) const {
        if (v.size() == 0) {
            return 0.0;
        }
        double sum = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = options_.tol * (1.0 + std::abs(ref(i)));
            const double r = std::abs(v(i)) / sc;
            sum += r * r;
        }
        return std::sqrt(sum / static_cast<double>(v.size()));
    }

    double try_step(double h) {
        tmp_ = y_ + h * a21 * k1_;
        eval(x_ + c2 * h, tmp_, k2_);
        tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
        eval(x_ + c3 * h, tmp_, k3_);
        tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        eval(x_ + c4 * h, tmp_, k4_);
        tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        eval(x_ + c5 * h, tmp_, k5_);
        tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        eval(x_ + h, tmp_, k6_);
        ynew_ = y_ + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        eval(x_ + h, ynew_, k7_);
        tmp_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

        double sum = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            const double sc = options_.tol * (1.0 + std::max(std::abs(y_(i)), std::abs(ynew_(i))));
            const double r = std::abs(tmp_(i)) / sc;
            sum += r * r;
        }
        const double err = y_.size() == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(y_.size()));
        if (!std::isfinite(err)) {
            return std::numeric_limits<double>::infinity();
        }
        return err;
    }

    double accept_factor(double err) {
        const double e = std::max(err, 1e-10);
        double factor = kSafety * std::pow(e, -kAlpha) * std::pow(err_prev_, kBeta);
        factor = std::clamp(factor, kMinFactor, kMaxFactor);
        err_prev_ = e;
        return factor;
    }

    const OdeRhs& rhs_;
    const OdeOptions& options_;
    IntegrationStats& stats_;
    double x_;
    double h_ = 0.0;
    double err_prev_ = 1e-4;
    OdeVector y_;
    OdeVector k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_;
};

} // namespace

std::vector<OdeVector> integrate_span(const OdeRhs& rhs, const OdeVector& init, double x_start, double x_end,
                                      std::span<const double> stops, const OdeOptions& options,
                                      OdeVector* terminal, IntegrationStats* stats) {
    if (!init.allFinite()) {
        throw DomainError("ODE initial value must be finite");
    }
    IntegrationStats local;
    IntegrationStats& st = stats ? *stats : local;
    DormandPrince stepper(rhs, init, x_start, options, st);
    std::vector<OdeVector> values;
    values.reserve(stops.size());
    for (const double stop : stops) {
        stepper.advance_to(stop);
        values.push_back(stepper.state());
    }
    stepper.advance_to(x_end);
    if (terminal) {
        *terminal = stepper.state();
    }
    return values;
}

Trajectory integrate(const OdeRhs& rhs, const OdeVector& init, const QuadGrid& grid, Direction direction,
                     const OdeOptions& options) {
    Trajectory traj;
    traj.nodes = grid.nodes;
    traj.direction = direction;
    if (direction == Direction::forward) {
        traj.values =
            integrate_span(rhs, init, -grid.x_max, grid.x_max, grid.nodes, options, &traj.terminal, &traj.stats);
    } else {
        std::vector<double> reversed(grid.nodes.rbegin(), grid.nodes.rend());
        traj.values =
            integrate_span(rhs, init, grid.x_max, -grid.x_max, reversed, options, &traj.terminal, &traj.stats);
        std::reverse(traj.values.begin(), traj.values.end());
    }
    return traj;
}

} // namespace rcmps
