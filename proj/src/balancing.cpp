#include "diffbal/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace diffbal {

namespace {

/// Square root of a PSD matrix via symmetric eigendecomposition, eigenvalues
/// clamped from below at kClampThreshold * lambda_max. Near-singular
/// Gramians are the normal case here; Cholesky would fail on them. `rank`
/// receives the count of eigenvalues above the clamp.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& W, Index& rank) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0.0)) {
        throw GramianError("cannot balance: Gramian has no positive eigenvalue");
    }
    const double floor = kClampThreshold * lmax;
    Eigen::VectorXd d = es.eigenvalues();
    rank = 0;
    for (Index i = 0; i < d.size(); ++i) {
        if (d[i] > floor) ++rank;
        d[i] = std::sqrt(std::max(d[i], floor));
    }
    return es.eigenvectors() * d.asDiagonal();
}

double offdiag_norm(const Eigen::MatrixXd& M) {
    Eigen::MatrixXd off = M;
    off.diagonal().setZero();
    return off.norm();
}

} // namespace

BalancingResult balance(const Gramian& WR, const Gramian& WO) {
    const Index n = WR.W.rows();
    if (WO.W.rows() != n || WO.W.cols() != n || WR.W.cols() != n) {
        throw ConfigError("balance: Gramian dimensions differ");
    }

    Index rank_r = 0, rank_o = 0;
    const Eigen::MatrixXd LR = psd_sqrt(WR.W, rank_r);
    const Eigen::MatrixXd LO = psd_sqrt(WO.W, rank_o);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(LO.transpose() * LR,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd U = svd.matrixU();
    Eigen::MatrixXd V = svd.matrixV();
    const Eigen::VectorXd sv = svd.singularValues();

    // Shared sign convention with eigen_truncate_basis; V follows U so the
    // product U S V^T is unchanged.
    for (Index j = 0; j < U.cols(); ++j) {
        Index imax = 0;
        for (Index i = 1; i < U.rows(); ++i) {
            if (std::abs(U(i, j)) > std::abs(U(imax, j))) imax = i;
        }
        if (U(imax, j) < 0.0) {
            U.col(j) = -U.col(j);
            V.col(j) = -V.col(j);
        }
    }

    const double smax = sv.maxCoeff();
    if (!(smax > 0.0)) {
        throw GramianError("cannot balance: zero cross factor");
    }
    const double floor = kClampThreshold * smax;
    Eigen::VectorXd sigma = sv;
    for (Index i = 0; i < n; ++i) {
        sigma[i] = std::max(sigma[i], floor);
    }
    // Directions clamped away in either Gramian are not trustworthy for
    // truncation, however their cross-factor singular values come out.
    const Index effective_rank = std::min(rank_r, rank_o);

    const Eigen::VectorXd inv_sqrt = sigma.array().sqrt().inverse();
    BalancingResult res;
    res.T = inv_sqrt.asDiagonal() * U.transpose() * LO.transpose();
    res.Tinv = LR * V * inv_sqrt.asDiagonal();
    res.sigma = sigma;
    res.effective_rank = effective_rank;
    res.residual_reach = offdiag_norm(res.T * WR.W * res.T.transpose());
    res.residual_obs = offdiag_norm(res.Tinv.transpose() * WO.W * res.Tinv);
    return res;
}

EigenBasis eigen_truncate_basis(const Gramian& W) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W.W);
    EigenBasis basis;
    basis.eigenvalues = es.eigenvalues().reverse();
    basis.U = es.eigenvectors().rowwise().reverse();
    detail::fix_column_signs(basis.U);
    return basis;
}

ReducedModel::ReducedModel(SystemModel parent, Eigen::MatrixXd T,
                           Eigen::MatrixXd Tinv, Index k)
    : parent_(std::move(parent)), T_(std::move(T)), Tinv_(std::move(Tinv)), k_(k) {
    const Index n = parent_.n();
    if (T_.rows() != n || T_.cols() != n || Tinv_.rows() != n || Tinv_.cols() != n) {
        throw ConfigError("reduced model: transform must be n x n");
    }
    if (k_ < 1 || k_ > n) {
        throw RankError("reduction order k=" + std::to_string(k_) +
                        " out of range 1.." + std::to_string(n));
    }
}

SystemModel ReducedModel::reduced_system() const {
    const Index k = k_;
    const Eigen::MatrixXd Tk = T_.topRows(k);          // P T
    const Eigen::MatrixXd Tinvk = Tinv_.leftCols(k);   // Tinv E
    const SystemModel parent = parent_;

    auto f = [parent, Tk, Tinvk](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return Tk * parent.eval_f(Tinvk * z);
    };
    auto h = [parent, Tinvk](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return parent.eval_h(Tinvk * z);
    };
    const Eigen::MatrixXd Bred = Tk * parent.B();
    const std::string name = parent.name() + "_reduced" + std::to_string(k);

    if (parent.jacobian_mode() == JacobianMode::analytic) {
        auto jf = [parent, Tk, Tinvk](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
            return Tk * parent.jac_f(Tinvk * z) * Tinvk;
        };
        auto jh = [parent, Tinvk](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
            return parent.jac_h(Tinvk * z) * Tinvk;
        };
        return SystemModel::analytic(k, parent.m(), parent.p(), f, Bred, h, jf, jh,
                                     name);
    }
    return SystemModel::finite_difference(k, parent.m(), parent.p(), f, Bred, h,
                                          parent.fd_step(), name);
}

Eigen::VectorXd ReducedModel::project_state(const Eigen::VectorXd& x) const {
    return T_.topRows(k_) * x;
}

Eigen::VectorXd ReducedModel::lift_state(const Eigen::VectorXd& z) const {
    return Tinv_.leftCols(k_) * z;
}

ReducedModel truncate(const SystemModel& sys, const BalancingResult& bal, Index k) {
    if (k > bal.effective_rank) {
        throw RankError("requested order k=" + std::to_string(k) +
                        " exceeds effective rank " +
                        std::to_string(bal.effective_rank));
    }
    return ReducedModel(sys, bal.T, bal.Tinv, k);
}

ReducedModel truncate(const SystemModel& sys, const EigenBasis& basis, Index k) {
    return ReducedModel(sys, basis.U.transpose(), basis.U, k);
}

namespace {

OutputErrorReport compare_outputs_impl(const Trajectory& reference,
                                       const Eigen::MatrixXd& Ycand) {
    const TimeGrid& grid = reference.grid;
    const Index p = reference.p();
    OutputErrorReport rep;
    rep.per_channel_rel_l2 = Eigen::VectorXd::Zero(p);

    double num = 0.0, den = 0.0;
    Eigen::VectorXd num_ch = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd den_ch = Eigen::VectorXd::Zero(p);
    for (Index k = 0; k <= grid.N; ++k) {
        const double w = ((k == 0 || k == grid.N) ? 0.5 : 1.0) * grid.dt;
        for (Index j = 0; j < p; ++j) {
            const double y = reference.Y(k, j);
            const double e = y - Ycand(k, j);
            num += w * e * e;
            den += w * y * y;
            num_ch[j] += w * e * e;
            den_ch[j] += w * y * y;
            if (std::abs(e) > rep.max_abs) {
                rep.max_abs = std::abs(e);
                rep.argmax_t = grid.time(k);
            }
        }
    }
    if (den > 0.0) {
        rep.rel_l2 = std::sqrt(num / den);
    } else {
        rep.rel_l2 = 0.0;
        rep.degenerate = true;
    }
    for (Index j = 0; j < p; ++j) {
        rep.per_channel_rel_l2[j] =
            den_ch[j] > 0.0 ? std::sqrt(num_ch[j] / den_ch[j]) : 0.0;
    }
    return rep;
}

} // namespace

OutputErrorReport compare_outputs(const Trajectory& full, const ReducedModel& reduced,
                                  const InputSignal& u, const TimeGrid& grid,
                                  Scheme scheme) {
    if (!full.grid.same_as(grid, 1e-9)) {
        throw ConfigError("compare_outputs: trajectory grid differs from requested grid");
    }
    const SystemModel red_sys = reduced.reduced_system();
    const Eigen::VectorXd z0 = reduced.project_state(full.state(0));
    Trajectory red_traj;
    try {
        red_traj = integrate(red_sys, z0, u, grid, scheme);
    } catch (const DivergenceError& e) {
        OutputErrorReport rep;
        rep.diverged = true;
        rep.diverged_step = e.step;
        rep.rel_l2 = std::numeric_limits<double>::infinity();
        rep.max_abs = std::numeric_limits<double>::infinity();
        rep.per_channel_rel_l2 = Eigen::VectorXd::Zero(full.p());
        return rep;
    }
    return compare_outputs_impl(full, red_traj.Y);
}

OutputErrorReport compare_trajectories(const Trajectory& reference,
                                       const Trajectory& candidate) {
    if (!reference.grid.same_as(candidate.grid, 1e-9)) {
        throw ConfigError("compare: trajectories are on different grids");
    }
    if (reference.p() != candidate.p()) {
        throw ConfigError("compare: trajectories have different output dimensions");
    }
    return compare_outputs_impl(reference, candidate.Y);
}

} // namespace diffbal
