#include "diffbal/symmetry.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace diffbal {

namespace {

std::string residual_summary(const SymmetryCertificate& cert) {
    return "res_dyn=" + std::to_string(cert.res_dyn) +
           ", res_out=" + std::to_string(cert.res_out) +
           ", tol=" + std::to_string(cert.tolerance);
}

void require_certificate(const SystemModel& sys, const Eigen::MatrixXd& S,
                         const Trajectory& base, double tau_sym) {
    const SymmetryCertificate cert =
        check_variational_symmetry(sys, S, default_symmetry_samples(base), tau_sym);
    if (!cert.positive) {
        throw GramianError("variational symmetry certificate failed (" +
                           residual_summary(cert) + ")");
    }
}

} // namespace

SymmetryCertificate check_variational_symmetry(
    const SystemModel& sys, const Eigen::MatrixXd& S,
    const std::vector<Eigen::VectorXd>& samples, double tau_sym) {
    if (S.rows() != sys.n() || S.cols() != sys.n()) {
        throw ConfigError("symmetry matrix S must be n x n");
    }
    if (samples.empty()) {
        throw ConfigError("symmetry check requires at least one sample state");
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (!(smin > 0.0) || !std::isfinite(smax / smin)) {
        throw ConfigError("symmetry matrix S is singular");
    }

    SymmetryCertificate cert;
    cert.S = S;
    cert.cond_S = smax / smin;
    cert.tolerance = tau_sym;
    cert.sample_count = static_cast<int>(samples.size());

    double jac_scale = 0.0;
    for (const auto& x : samples) {
        const Eigen::MatrixXd Jf = sys.jac_f(x);
        const Eigen::MatrixXd Jh = sys.jac_h(x);
        cert.res_dyn = std::max(cert.res_dyn,
                                (S * Jf - Jf.transpose() * S).norm());
        cert.res_out = std::max(cert.res_out, (S * sys.B() - Jh.transpose()).norm());
        jac_scale = std::max(jac_scale, Jf.norm());
    }
    const double bound = tau_sym * (1.0 + jac_scale);
    cert.positive = cert.res_dyn <= bound && cert.res_out <= bound;
    return cert;
}

std::vector<Eigen::VectorXd> default_symmetry_samples(const Trajectory& base) {
    std::vector<Eigen::VectorXd> samples;
    const Index rows = base.X.rows();
    const Index stride = std::max<Index>(1, (rows + 99) / 100);
    for (Index k = 0; k < rows; k += stride) {
        samples.push_back(base.state(k));
    }
    samples.push_back(Eigen::VectorXd::Zero(base.n()));
    return samples;
}

VariationalTrajectory dual_variational_response(const SystemModel& sys,
                                                const Eigen::MatrixXd& S,
                                                const Trajectory& base, Index channel,
                                                Scheme scheme) {
    if (channel < 0 || channel >= sys.p()) {
        throw ConfigError("dual response channel out of range 0..p-1");
    }
    require_certificate(sys, S, base, kDefaultSymmetryTol);

    const TimeGrid& grid = base.grid;
    VariationalTrajectory var;
    var.grid = grid;
    var.base_id = base.model_id;
    var.dX.resize(grid.N + 1, sys.n());
    var.dY.resize(grid.N + 1, sys.m());

    detail::VariationalStepper stepper(sys, base, scheme, /*transpose_jacobian=*/true);
    Eigen::MatrixXd M = sys.jac_h(base.state(0)).transpose().col(channel);
    for (Index k = 0;; ++k) {
        var.dX.row(k) = M.transpose();
        var.dY.row(k) = (sys.B().transpose() * M).transpose();
        if (k == grid.N) break;
        stepper.step(k, M, nullptr);
        detail::check_state_ok(M, k + 1);
    }
    return var;
}

DualGramianResult dual_reachability_gramian(const SystemModel& sys,
                                            const Eigen::MatrixXd& S,
                                            const Trajectory& base,
                                            const Interval& interval, Scheme scheme,
                                            double tau_sym) {
    require_certificate(sys, S, base, tau_sym);

    const Index k1 = base.grid.index_of(interval.t1);
    const Index k2 = base.grid.index_of(interval.t2);
    if (k1 > k2) {
        throw ConfigError("Gramian interval has t1 > t2");
    }
    const double dt = base.grid.dt;

    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(sys.n(), sys.n());
    if (k2 > k1) {
        detail::VariationalStepper stepper(sys, base, scheme,
                                           /*transpose_jacobian=*/true);
        Eigen::MatrixXd M = sys.jac_h(base.state(k1)).transpose();
        for (Index k = k1;; ++k) {
            const double c = ((k == k1 || k == k2) ? 0.5 : 1.0) * dt;
            W.selfadjointView<Eigen::Lower>().rankUpdate(M, c);
            if (k == k2) break;
            stepper.step(k, M, nullptr);
            detail::check_state_ok(M, k + 1);
        }
        W = W.selfadjointView<Eigen::Lower>();
    }

    DualGramianResult res;
    res.W = detail::make_gramian(std::move(W), GramianKind::dual_reachability,
                                 interval, GramianMethod::exact_variational,
                                 base.model_id);

    GramianOptions opts;
    opts.scheme = scheme;
    res.primal_reach =
        reachability_gramian(sys, base, InputSignal::zero(sys.m()), interval, opts);

    const double scale = res.W.W.norm();
    const Eigen::MatrixXd congr_t = S.transpose() * res.primal_reach.W * S;
    const Eigen::MatrixXd congr = S * res.primal_reach.W * S.transpose();
    if (scale > 0.0) {
        res.mismatch_St_W_S = (res.W.W - congr_t).norm() / scale;
        res.mismatch_S_W_St = (res.W.W - congr).norm() / scale;
    }
    return res;
}

} // namespace diffbal
