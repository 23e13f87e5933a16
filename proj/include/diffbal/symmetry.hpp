#ifndef DIFFBAL_SYMMETRY_HPP
#define DIFFBAL_SYMMETRY_HPP

#include <vector>

#include "diffbal/gramian.hpp"
#include "diffbal/simulate.hpp"
#include "diffbal/system.hpp"
#include "diffbal/trajectory.hpp"

namespace diffbal {

inline constexpr double kDefaultSymmetryTol = 1e-9;

/// Evidence that a constant nonsingular S satisfies
///
///     S jac_f(x) = jac_f(x)^T S      and      S B = jac_h(x)^T
///
/// at every probed state. When it does, the dual variational system
///
///     dz' = jac_f(x(t))^T dz + jac_h(x(t))^T du,   dy = B^T dz
///
/// is available and reduction needs reachability-type responses only.
struct SymmetryCertificate {
    Eigen::MatrixXd S;
    double res_dyn = 0.0;  // max_x ||S jac_f(x) - jac_f(x)^T S||_F
    double res_out = 0.0;  // max_x ||S B - jac_h(x)^T||_F
    bool positive = false;
    double cond_S = 0.0;
    double tolerance = kDefaultSymmetryTol;
    int sample_count = 0;
};

/// Residual check over the given probe states. Verdict is positive iff both
/// residuals are <= tau_sym * (1 + max_x ||jac_f(x)||_F). Singular S is
/// rejected.
SymmetryCertificate check_variational_symmetry(
    const SystemModel& sys, const Eigen::MatrixXd& S,
    const std::vector<Eigen::VectorXd>& samples,
    double tau_sym = kDefaultSymmetryTol);

/// Default probe set: the base trajectory's snapshots subsampled to at most
/// 100 states, plus the origin.
std::vector<Eigen::VectorXd> default_symmetry_samples(const Trajectory& base);

/// Impulse response of the dual variational system on channel `channel`
/// (0-based, 0..p-1), realized as the state jump dz(t0+) = jac_h(x(t0))^T e_i
/// and propagated with A(t) = jac_f(x(t))^T. dY holds B^T dz. Requires a
/// positive certificate for S over the base trajectory.
VariationalTrajectory dual_variational_response(const SystemModel& sys,
                                                const Eigen::MatrixXd& S,
                                                const Trajectory& base, Index channel,
                                                Scheme scheme = Scheme::rk4);

/// Dual reachability Gramian assembled from the p dual impulse responses,
/// plus both constant-S congruences of the primal reachability Gramian and
/// their relative mismatches against the simulated dual. For symmetric S the
/// two congruences coincide; for non-symmetric S the mismatches say which
/// convention the simulation matches.
struct DualGramianResult {
    Gramian W;                        // kind = dual_reachability
    Gramian primal_reach;             // W_R on the same interval
    double mismatch_St_W_S = 0.0;     // ||W* - S^T W_R S||_F / ||W*||_F
    double mismatch_S_W_St = 0.0;     // ||W* - S W_R S^T||_F / ||W*||_F
};
DualGramianResult dual_reachability_gramian(const SystemModel& sys,
                                            const Eigen::MatrixXd& S,
                                            const Trajectory& base,
                                            const Interval& interval,
                                            Scheme scheme = Scheme::rk4,
                                            double tau_sym = kDefaultSymmetryTol);

} // namespace diffbal

#endif // DIFFBAL_SYMMETRY_HPP
