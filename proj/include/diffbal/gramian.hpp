#ifndef DIFFBAL_GRAMIAN_HPP
#define DIFFBAL_GRAMIAN_HPP

#include <utility>
#include <vector>

#include "diffbal/simulate.hpp"
#include "diffbal/system.hpp"
#include "diffbal/trajectory.hpp"

namespace diffbal {

enum class GramianKind { reachability, observability, dual_reachability };
enum class GramianMethod { exact_variational, frechet_approx, lti_analytic };

/// Subinterval of a base trajectory; endpoints must be grid points.
struct Interval {
    double t1 = 0.0;
    double t2 = 0.0;
};

/// Symmetric PSD n-by-n matrix assembled by composite trapezoid quadrature
/// over the simulation grid. Symmetrized after assembly; assembly fails if
/// lambda_min < -1e-8 * lambda_max.
struct Gramian {
    Eigen::MatrixXd W;
    GramianKind kind = GramianKind::reachability;
    Interval interval;
    GramianMethod method = GramianMethod::exact_variational;
    std::string base_id;
    std::string quadrature = "trapezoid";
};

struct GramianOptions {
    GramianMethod method = GramianMethod::exact_variational;
    Scheme scheme = Scheme::rk4;
    double s = 0.01;  // Frechet perturbation size
    /// Diagnostic: realize the impulse as a height-1/dt width-dt pulse
    /// instead of the exact state jump (exact_variational reachability only).
    bool finite_pulse = false;
};

inline constexpr double kDefaultPdThreshold = 1e-9;

/// Input-to-perturbation energy Gramian along `base` over `interval`.
/// The impulse through the constant B is realized exactly as the state jump
/// dx(t1+) = B_i (exact path) or as the initial offset x(t1) + s*B_i
/// (Frechet path). `u` is the input that produced `base`; it is re-applied
/// when the Frechet path re-simulates perturbed trajectories and is unused
/// on the exact path.
Gramian reachability_gramian(const SystemModel& sys, const Trajectory& base,
                             const InputSignal& u, const Interval& interval,
                             const GramianOptions& opts = {});

/// Perturbation-to-output energy Gramian along `base` over `interval`,
/// assembled from the n initial-state responses.
Gramian observability_gramian(const SystemModel& sys, const Trajectory& base,
                              const InputSignal& u, const Interval& interval,
                              const GramianOptions& opts = {});

/// Both Gramians in one pass. The exact path streams a single flow-Jacobian
/// propagation; the Frechet path shares the unperturbed trajectory so the
/// pair costs n + m + 1 nonlinear simulations in total (counting the base).
struct GramianPair {
    Gramian reach;
    Gramian obs;
};
GramianPair gramian_pair(const SystemModel& sys, const Trajectory& base,
                         const InputSignal& u, const Interval& interval,
                         const GramianOptions& opts = {});

/// Difference-quotient approximation of the impulse response on channel
/// `channel` (0-based): dX = (x2 - x1)/s with x2 started at x0 + s*B_i,
/// dY = (h(x2) - h(x1))/s.
VariationalTrajectory frechet_impulse_response(const SystemModel& sys,
                                               const Eigen::VectorXd& x0,
                                               const InputSignal& u,
                                               const TimeGrid& grid, Index channel,
                                               double s, Scheme scheme = Scheme::rk4);

/// Difference-quotient approximation of the initial-state output response
/// for coordinate `coord` (0-based): rows are (h(x2(t)) - h(x1(t)))/s with
/// x2 started at x0 + s*e_coord. Returns an (N+1) x p matrix.
Eigen::MatrixXd frechet_initial_state_response(const SystemModel& sys,
                                               const Eigen::VectorXd& x0,
                                               const InputSignal& u,
                                               const TimeGrid& grid, Index coord,
                                               double s, Scheme scheme = Scheme::rk4);

/// Finite-horizon LTI Gramian pair (reachability, observability) computed by
/// rk4 on the coupled system Phi' = A Phi, Wc' = (Phi B)(Phi B)^T,
/// Wo' = (C Phi)^T (C Phi). Independent of the empirical assembly path; used
/// as the linear-case reference.
std::pair<Gramian, Gramian> lti_gramian_oracle(const Eigen::MatrixXd& A,
                                               const Eigen::MatrixXd& B,
                                               const Eigen::MatrixXd& C,
                                               const Interval& interval);

struct PDSubinterval {
    double t1 = 0.0;
    double t2 = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    bool positive = false;
};

/// Positive-definiteness sweep: Gramians on a dyadic family of subintervals
/// (1, 2, 4, ... equal parts per level, levels added until at least
/// `subinterval_count` subintervals are probed). The verdict is positive iff
/// lambda_min > tau_pd * lambda_max on every probed subinterval.
struct PDReport {
    GramianKind kind = GramianKind::reachability;
    double threshold = kDefaultPdThreshold;
    std::vector<PDSubinterval> subintervals;
    bool all_positive = false;
};
PDReport pd_probe(const SystemModel& sys, const Trajectory& base, GramianKind kind,
                  Index subinterval_count, Scheme scheme = Scheme::rk4,
                  double tau_pd = kDefaultPdThreshold);

/// Shared near-null directions of the summed Gramians over several input
/// probes. Columns of `basis` are eigenvectors of sum_i W_i with eigenvalue
/// <= tau_pd * lambda_max; an empty basis means no common near-null
/// direction was found.
struct NullspaceReport {
    Eigen::MatrixXd basis;       // n x q, q possibly 0
    Eigen::VectorXd eigenvalues; // of the summed Gramian, descending
    double threshold = kDefaultPdThreshold;
};
NullspaceReport common_nullspace_probe(const SystemModel& sys,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<InputSignal>& inputs,
                                       const TimeGrid& grid, GramianKind kind,
                                       Scheme scheme = Scheme::rk4,
                                       double tau_pd = kDefaultPdThreshold);

/// Eigenvalues of a Gramian, descending.
Eigen::VectorXd gramian_eigenvalues(const Gramian& g);

namespace detail {

/// Deterministic eigenvector sign convention: the largest-magnitude entry of
/// each column is made positive (ties broken by lowest row index).
void fix_column_signs(Eigen::MatrixXd& V);

/// Symmetrize and PSD-check a raw quadrature sum; throws GramianError.
Gramian make_gramian(Eigen::MatrixXd W, GramianKind kind, Interval interval,
                     GramianMethod method, std::string base_id);

} // namespace detail

} // namespace diffbal

#endif // DIFFBAL_GRAMIAN_HPP
