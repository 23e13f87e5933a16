#ifndef DIFFBAL_TRAJECTORY_HPP
#define DIFFBAL_TRAJECTORY_HPP

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffbal/errors.hpp"
#include "diffbal/system.hpp"

namespace diffbal {

/// Uniform grid t_k = t0 + k*dt, k = 0..N. Construction fails unless dt
/// divides tf - t0 to within 1e-9 relative.
struct TimeGrid {
    double t0 = 0.0;
    double tf = 0.0;
    double dt = 0.0;
    Index N = 0;

    static TimeGrid make(double t0, double tf, double dt);

    double time(Index k) const { return t0 + static_cast<double>(k) * dt; }

    /// Grid index of a time value; ConfigError if t is not a grid point.
    Index index_of(double t) const;

    bool same_as(const TimeGrid& other, double tol = 1e-12) const;
};

enum class InputKind { zero, expression_of_time, sampled_zoh };

/// Grid-evaluable input signal u(t) with m channels.
class InputSignal {
public:
    using Fn = std::function<Eigen::VectorXd(double)>;

    static InputSignal zero(Index m);

    /// Time-dependent signal backed by an arbitrary function; `description`
    /// is carried into run manifests (typically the source expression text).
    static InputSignal from_function(Index m, Fn fn, std::string description);

    /// Zero-order hold over samples given on `grid` ((N+1) x m).
    static InputSignal sampled_zoh(const TimeGrid& grid, Eigen::MatrixXd samples);

    Eigen::VectorXd operator()(double t) const;

    InputKind kind() const { return kind_; }
    Index dim() const { return m_; }
    const std::string& description() const { return description_; }
    const TimeGrid& sample_grid() const { return grid_; }

private:
    InputSignal() = default;

    InputKind kind_ = InputKind::zero;
    Index m_ = 0;
    Fn fn_;
    TimeGrid grid_;            // sampled_zoh only
    Eigen::MatrixXd samples_;  // sampled_zoh only
    std::string description_ = "zero";
};

/// Snapshots of a nonlinear run on a uniform grid. Row k of X/U/Y holds the
/// state, input sample, and output at t_k.
struct Trajectory {
    TimeGrid grid;
    Eigen::MatrixXd X;  // (N+1) x n
    Eigen::MatrixXd U;  // (N+1) x m
    Eigen::MatrixXd Y;  // (N+1) x p
    std::string model_id;

    Index n() const { return X.cols(); }
    Index m() const { return U.cols(); }
    Index p() const { return Y.cols(); }

    Eigen::VectorXd state(Index k) const { return X.row(k).transpose(); }
};

/// Perturbation run along a stored base trajectory. dY holds the output
/// response of whichever variational dynamics produced it: jac_h(X)*dX for
/// the primal system, B^T * dZ for the dual one.
struct VariationalTrajectory {
    TimeGrid grid;
    Eigen::MatrixXd dX;  // (N+1) x n
    Eigen::MatrixXd dY;  // (N+1) x (output dim of the producing system)
    std::string base_id;
};

/// Flow Jacobians Phi[k] = d phi_{t_k - t0} / d x0 along a base trajectory.
/// Phi[0] is the identity.
struct FundamentalMatrix {
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> Phi;
    std::string base_id;
};

} // namespace diffbal

#endif // DIFFBAL_TRAJECTORY_HPP
