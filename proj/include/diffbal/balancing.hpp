#ifndef DIFFBAL_BALANCING_HPP
#define DIFFBAL_BALANCING_HPP

#include "diffbal/gramian.hpp"
#include "diffbal/simulate.hpp"
#include "diffbal/system.hpp"
#include "diffbal/trajectory.hpp"

namespace diffbal {

/// Eigenvalue clamp defining the effective rank of a balancing transform,
/// relative to the largest eigenvalue / singular value.
inline constexpr double kClampThreshold = 1e-12;

/// Invertible transform z = T x that diagonalizes both Gramians:
/// T WR T^T = Tinv^T WO Tinv = diag(sigma).
struct BalancingResult {
    Eigen::MatrixXd T;
    Eigen::MatrixXd Tinv;
    Eigen::VectorXd sigma;  // descending, positive after clamping
    double residual_reach = 0.0;  // off-diagonal norm of T WR T^T
    double residual_obs = 0.0;    // off-diagonal norm of Tinv^T WO Tinv
    Index effective_rank = 0;     // count of sigma above the clamp threshold
};

/// Square-root balancing: symmetric-eigendecomposition square roots of the
/// two Gramians (eigenvalues clamped at kClampThreshold * lambda_max), then
/// an SVD of the cross factor L_O^T L_R. Rank-deficient inputs yield a
/// result usable only for truncation at k <= effective_rank.
BalancingResult balance(const Gramian& WR, const Gramian& WO);

/// Orthonormal eigenbasis with eigenvalues sorted descending and a
/// deterministic sign convention (largest-magnitude entry positive).
struct EigenBasis {
    Eigen::MatrixXd U;           // n x n, columns are eigenvectors
    Eigen::VectorXd eigenvalues; // descending, unclamped
};
EigenBasis eigen_truncate_basis(const Gramian& W);

/// Order-k Galerkin reduction z' = P T f(Tinv E z) + P T B u,
/// y = h(Tinv E z), with E zero-padding and P taking the first k rows.
/// Simulation goes through the ordinary integrator via reduced_system().
class ReducedModel {
public:
    ReducedModel(SystemModel parent, Eigen::MatrixXd T, Eigen::MatrixXd Tinv,
                 Index k);

    Index order() const { return k_; }
    const SystemModel& parent() const { return parent_; }
    const Eigen::MatrixXd& T() const { return T_; }
    const Eigen::MatrixXd& Tinv() const { return Tinv_; }

    /// The k-dimensional system, sharing the parent's maps.
    SystemModel reduced_system() const;

    /// Projected initial condition z0 = P T x0.
    Eigen::VectorXd project_state(const Eigen::VectorXd& x) const;

    /// Embedded full-coordinate state x = Tinv E z.
    Eigen::VectorXd lift_state(const Eigen::VectorXd& z) const;

private:
    SystemModel parent_;
    Eigen::MatrixXd T_;
    Eigen::MatrixXd Tinv_;
    Index k_;
};

ReducedModel truncate(const SystemModel& sys, const BalancingResult& bal, Index k);
ReducedModel truncate(const SystemModel& sys, const EigenBasis& basis, Index k);

/// Output error of a reduced simulation against a stored full trajectory on
/// the same grid and input. Divergence of the reduced run is reported in the
/// flags rather than thrown.
struct OutputErrorReport {
    double rel_l2 = 0.0;
    double max_abs = 0.0;
    double argmax_t = 0.0;
    Eigen::VectorXd per_channel_rel_l2;
    bool degenerate = false;  // reference output identically zero
    bool diverged = false;
    Index diverged_step = -1;
};
OutputErrorReport compare_outputs(const Trajectory& full, const ReducedModel& reduced,
                                  const InputSignal& u, const TimeGrid& grid,
                                  Scheme scheme = Scheme::rk4);

/// Error report between two already-simulated trajectories with matching
/// grids and output dimensions (used by the CLI compare command).
OutputErrorReport compare_trajectories(const Trajectory& reference,
                                       const Trajectory& candidate);

} // namespace diffbal

#endif // DIFFBAL_BALANCING_HPP
