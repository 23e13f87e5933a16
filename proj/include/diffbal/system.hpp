#ifndef DIFFBAL_SYSTEM_HPP
#define DIFFBAL_SYSTEM_HPP

#include <functional>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "diffbal/errors.hpp"

namespace diffbal {

using Index = Eigen::Index;

enum class JacobianMode { analytic, finite_difference };

/// Control-affine system with constant input matrix:
///
///     x' = f(x) + B u,    y = h(x)
///
/// The input matrix B must be constant; the impulse-as-state-jump identity
/// used by the Gramian assembly breaks for state-dependent input maps.
/// Instances are immutable after construction and safe to share across
/// threads; all evaluation methods are pure.
class SystemModel {
public:
    using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
    using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

    /// System with caller-supplied Jacobians for both f and h.
    static SystemModel analytic(Index n, Index m, Index p, VectorFn f,
                                Eigen::MatrixXd B, VectorFn h, MatrixFn jac_f,
                                MatrixFn jac_h, std::string name = "model");

    /// System whose Jacobians are computed by central differences with a
    /// per-coordinate step fd_step * (1 + |x_j|).
    static SystemModel finite_difference(Index n, Index m, Index p, VectorFn f,
                                         Eigen::MatrixXd B, VectorFn h,
                                         double fd_step = 1e-6,
                                         std::string name = "model");

    Index n() const { return n_; }
    Index m() const { return m_; }
    Index p() const { return p_; }
    const Eigen::MatrixXd& B() const { return B_; }
    JacobianMode jacobian_mode() const { return mode_; }
    double fd_step() const { return fd_step_; }
    const std::string& name() const { return name_; }

    /// Drift term f(x), without the B*u contribution.
    Eigen::VectorXd eval_f(const Eigen::VectorXd& x) const;

    /// Output map h(x).
    Eigen::VectorXd eval_h(const Eigen::VectorXd& x) const;

    /// n-by-n Jacobian of f at x.
    Eigen::MatrixXd jac_f(const Eigen::VectorXd& x) const;

    /// p-by-n Jacobian of h at x.
    Eigen::MatrixXd jac_h(const Eigen::VectorXd& x) const;

private:
    SystemModel(Index n, Index m, Index p, VectorFn f, Eigen::MatrixXd B,
                VectorFn h, MatrixFn jac_f, MatrixFn jac_h, JacobianMode mode,
                double fd_step, std::string name);

    Eigen::MatrixXd fd_jacobian(const VectorFn& fn, Index rows,
                                const Eigen::VectorXd& x) const;

    Index n_, m_, p_;
    VectorFn f_;
    Eigen::MatrixXd B_;
    VectorFn h_;
    MatrixFn jac_f_;
    MatrixFn jac_h_;
    JacobianMode mode_;
    double fd_step_;
    std::string name_;
};

} // namespace diffbal

#endif // DIFFBAL_SYSTEM_HPP
