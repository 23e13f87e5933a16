#ifndef DIFFBAL_SIMULATE_HPP
#define DIFFBAL_SIMULATE_HPP

#include <cstdint>

#include "diffbal/system.hpp"
#include "diffbal/trajectory.hpp"

namespace diffbal {

enum class Scheme { euler, rk4 };

/// Any state entry beyond this magnitude aborts the run with a
/// DivergenceError; cubic nonlinearities blow up fast and must fail loudly.
inline constexpr double kDivergenceLimit = 1e12;

/// Fixed-step integration of x' = f(x) + B u(t). For rk4 the input is
/// evaluated at t_k, t_k + dt/2 and t_k + dt.
Trajectory integrate(const SystemModel& sys, const Eigen::VectorXd& x0,
                     const InputSignal& u, const TimeGrid& grid,
                     Scheme scheme = Scheme::rk4);

/// Propagates the linearization dx' = jac_f(x(t)) dx + B du(t) along `base`.
/// rk4 half-step Jacobians are evaluated at linearly interpolated base states.
VariationalTrajectory integrate_variational(const SystemModel& sys,
                                            const Trajectory& base,
                                            const Eigen::VectorXd& dx0,
                                            const InputSignal& du,
                                            Scheme scheme = Scheme::rk4);

/// Flow-Jacobian sequence Phi[k] obtained by propagating the matrix equation
/// Phi' = jac_f(x(t)) Phi from Phi(t0) = I. Column j equals the variational
/// solution with dx0 = e_j, du = 0. Propagation is sequential and
/// deterministic.
FundamentalMatrix fundamental_matrix(const SystemModel& sys, const Trajectory& base,
                                     Scheme scheme = Scheme::rk4);

/// Counter of nonlinear `integrate` runs, for instrumentation of
/// trajectory-count claims. Thread-safe.
namespace sim_stats {
void reset();
std::uint64_t integrate_calls();
} // namespace sim_stats

namespace detail {

/// One integration step of the variational dynamics for a block of columns:
/// M' = A(t) M + F(t), with A(t) = jac_f(x(t)) (or its transpose, for the
/// dual system) and optional forcing. Exposed for the Gramian assembly,
/// which streams these steps without materializing a FundamentalMatrix.
class VariationalStepper {
public:
    VariationalStepper(const SystemModel& sys, const Trajectory& base,
                       Scheme scheme, bool transpose_jacobian = false);

    /// Advances M from grid index k to k+1 in place. `forcing`, when
    /// non-null, is the same-shape matrix du(t) evaluated as needed; pass
    /// nullptr for du = 0.
    void step(Index k, Eigen::MatrixXd& M,
              const std::function<Eigen::MatrixXd(double)>* forcing) const;

private:
    Eigen::MatrixXd system_matrix(const Eigen::VectorXd& x) const;

    const SystemModel& sys_;
    const Trajectory& base_;
    Scheme scheme_;
    bool transpose_;
};

void check_state_ok(const Eigen::MatrixXd& M, Index step_index);

} // namespace detail

} // namespace diffbal

#endif // DIFFBAL_SIMULATE_HPP
