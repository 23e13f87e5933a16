#include "diffbal/simulate.hpp"

#include <atomic>
#include <cmath>

namespace diffbal {

TimeGrid TimeGrid::make(double t0, double tf, double dt) {
    if (!(tf > t0)) {
        throw ConfigError("time grid requires tf > t0");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ConfigError("time grid requires dt > 0");
    }
    const double span = tf - t0;
    const auto N = static_cast<Index>(std::llround(span / dt));
    if (N < 1 || std::abs(static_cast<double>(N) * dt - span) > 1e-9 * span) {
        throw ConfigError("dt does not divide tf - t0 (t0, tf, dt inconsistent)");
    }
    return TimeGrid{t0, tf, dt, N};
}

Index TimeGrid::index_of(double t) const {
    const auto k = static_cast<Index>(std::llround((t - t0) / dt));
    if (k < 0 || k > N || std::abs(time(k) - t) > 1e-9 * std::max(1.0, tf - t0)) {
        throw ConfigError("time " + std::to_string(t) + " is not a grid point");
    }
    return k;
}

bool TimeGrid::same_as(const TimeGrid& other, double tol) const {
    return N == other.N && std::abs(t0 - other.t0) <= tol &&
           std::abs(dt - other.dt) <= tol;
}

InputSignal InputSignal::zero(Index m) {
    InputSignal s;
    s.kind_ = InputKind::zero;
    s.m_ = m;
    s.description_ = "zero";
    return s;
}

InputSignal InputSignal::from_function(Index m, Fn fn, std::string description) {
    InputSignal s;
    s.kind_ = InputKind::expression_of_time;
    s.m_ = m;
    s.fn_ = std::move(fn);
    s.description_ = std::move(description);
    return s;
}

InputSignal InputSignal::sampled_zoh(const TimeGrid& grid, Eigen::MatrixXd samples) {
    if (samples.rows() != grid.N + 1) {
        throw ConfigError("sampled input needs one row per grid point");
    }
    InputSignal s;
    s.kind_ = InputKind::sampled_zoh;
    s.m_ = samples.cols();
    s.grid_ = grid;
    s.samples_ = std::move(samples);
    s.description_ = "sampled_zoh";
    return s;
}

Eigen::VectorXd InputSignal::operator()(double t) const {
    switch (kind_) {
        case InputKind::zero:
            return Eigen::VectorXd::Zero(m_);
        case InputKind::expression_of_time: {
            Eigen::VectorXd v = fn_(t);
            if (v.size() != m_) {
                throw ConfigError("input signal returned wrong dimension");
            }
            return v;
        }
        case InputKind::sampled_zoh: {
            auto k = static_cast<Index>(
                std::floor((t - grid_.t0) / grid_.dt + 1e-9));
            k = std::max<Index>(0, std::min(k, grid_.N));
            return samples_.row(k).transpose();
        }
    }
    throw ConfigError("unknown input kind");
}

namespace {

std::atomic<std::uint64_t> g_integrate_calls{0};

void require_input_compatible(const InputSignal& u, const SystemModel& sys,
                              const TimeGrid& grid) {
    if (u.dim() != sys.m()) {
        throw ConfigError("input signal has " + std::to_string(u.dim()) +
                          " channels, system expects " + std::to_string(sys.m()));
    }
    if (u.kind() == InputKind::sampled_zoh && !u.sample_grid().same_as(grid, 1e-9)) {
        throw ConfigError("sampled input is not on the simulation grid");
    }
}

} // namespace

namespace sim_stats {
void reset() { g_integrate_calls.store(0); }
std::uint64_t integrate_calls() { return g_integrate_calls.load(); }
} // namespace sim_stats

namespace detail {

void check_state_ok(const Eigen::MatrixXd& M, Index step_index) {
    for (Index j = 0; j < M.cols(); ++j) {
        for (Index i = 0; i < M.rows(); ++i) {
            const double v = M(i, j);
            if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) {
                throw DivergenceError(
                    "state diverged at step " + std::to_string(step_index) +
                        " (entry " + std::to_string(i) + " = " + std::to_string(v) + ")",
                    step_index);
            }
        }
    }
}

VariationalStepper::VariationalStepper(const SystemModel& sys, const Trajectory& base,
                                       Scheme scheme, bool transpose_jacobian)
    : sys_(sys), base_(base), scheme_(scheme), transpose_(transpose_jacobian) {}

Eigen::MatrixXd VariationalStepper::system_matrix(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd A = sys_.jac_f(x);
    if (transpose_) A.transposeInPlace();
    return A;
}

void VariationalStepper::step(Index k, Eigen::MatrixXd& M,
                              const std::function<Eigen::MatrixXd(double)>* forcing) const {
    const double dt = base_.grid.dt;
    const double tk = base_.grid.time(k);
    const Eigen::VectorXd xk = base_.state(k);
    const Eigen::MatrixXd Ak = system_matrix(xk);

    if (scheme_ == Scheme::euler) {
        Eigen::MatrixXd dM = Ak * M;
        if (forcing) dM += (*forcing)(tk);
        M += dt * dM;
        return;
    }

    const Eigen::VectorXd xk1 = base_.state(k + 1);
    const Eigen::MatrixXd Amid = system_matrix(0.5 * (xk + xk1));
    const Eigen::MatrixXd Ak1 = system_matrix(xk1);

    Eigen::MatrixXd F0, Fmid, F1;
    if (forcing) {
        F0 = (*forcing)(tk);
        Fmid = (*forcing)(tk + 0.5 * dt);
        F1 = (*forcing)(tk + dt);
    }
    auto rhs = [&](const Eigen::MatrixXd& A, const Eigen::MatrixXd& V,
                   const Eigen::MatrixXd* F) {
        Eigen::MatrixXd r = A * V;
        if (F) r += *F;
        return r;
    };
    const Eigen::MatrixXd* pF0 = forcing ? &F0 : nullptr;
    const Eigen::MatrixXd* pFm = forcing ? &Fmid : nullptr;
    const Eigen::MatrixXd* pF1 = forcing ? &F1 : nullptr;

    const Eigen::MatrixXd k1 = rhs(Ak, M, pF0);
    const Eigen::MatrixXd k2 = rhs(Amid, M + 0.5 * dt * k1, pFm);
    const Eigen::MatrixXd k3 = rhs(Amid, M + 0.5 * dt * k2, pFm);
    const Eigen::MatrixXd k4 = rhs(Ak1, M + dt * k3, pF1);
    M += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace detail

Trajectory integrate(const SystemModel& sys, const Eigen::VectorXd& x0,
                     const InputSignal& u, const TimeGrid& grid, Scheme scheme) {
    if (x0.size() != sys.n()) {
        throw ConfigError("initial state has length " + std::to_string(x0.size()) +
                          ", system expects " + std::to_string(sys.n()));
    }
    require_input_compatible(u, sys, grid);
    g_integrate_calls.fetch_add(1, std::memory_order_relaxed);

    Trajectory traj;
    traj.grid = grid;
    traj.model_id = sys.name();
    traj.X.resize(grid.N + 1, sys.n());
    traj.U.resize(grid.N + 1, sys.m());
    traj.Y.resize(grid.N + 1, sys.p());

    Eigen::VectorXd x = x0;
    detail::check_state_ok(x, 0);
    auto rhs = [&](const Eigen::VectorXd& xs, double t) -> Eigen::VectorXd {
        return sys.eval_f(xs) + sys.B() * u(t);
    };

    for (Index k = 0;; ++k) {
        traj.X.row(k) = x.transpose();
        traj.U.row(k) = u(grid.time(k)).transpose();
        traj.Y.row(k) = sys.eval_h(x).transpose();
        if (k == grid.N) break;

        const double t = grid.time(k);
        const double dt = grid.dt;
        try {
            if (scheme == Scheme::euler) {
                x += dt * rhs(x, t);
            } else {
                const Eigen::VectorXd k1 = rhs(x, t);
                const Eigen::VectorXd k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt);
                const Eigen::VectorXd k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt);
                const Eigen::VectorXd k4 = rhs(x + dt * k3, t + dt);
                x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        } catch (const EvalError& e) {
            throw DivergenceError("state diverged at step " + std::to_string(k + 1) +
                                      ": " + e.what(),
                                  k + 1);
        }
        detail::check_state_ok(x, k + 1);
    }
    return traj;
}

VariationalTrajectory integrate_variational(const SystemModel& sys,
                                            const Trajectory& base,
                                            const Eigen::VectorXd& dx0,
                                            const InputSignal& du, Scheme scheme) {
    if (base.n() != sys.n()) {
        throw ConfigError("base trajectory dimension does not match system");
    }
    if (dx0.size() != sys.n()) {
        throw ConfigError("dx0 has wrong length");
    }
    require_input_compatible(du, sys, base.grid);

    const TimeGrid& grid = base.grid;
    VariationalTrajectory var;
    var.grid = grid;
    var.base_id = base.model_id;
    var.dX.resize(grid.N + 1, sys.n());
    var.dY.resize(grid.N + 1, sys.p());

    const bool zero_du = du.kind() == InputKind::zero;
    std::function<Eigen::MatrixXd(double)> forcing = [&](double t) -> Eigen::MatrixXd {
        return sys.B() * du(t);
    };
    const auto* forcing_ptr = zero_du ? nullptr : &forcing;

    detail::VariationalStepper stepper(sys, base, scheme);
    Eigen::MatrixXd M = dx0;
    detail::check_state_ok(M, 0);
    for (Index k = 0;; ++k) {
        var.dX.row(k) = M.transpose();
        var.dY.row(k) = (sys.jac_h(base.state(k)) * M).transpose();
        if (k == grid.N) break;
        stepper.step(k, M, forcing_ptr);
        detail::check_state_ok(M, k + 1);
    }
    return var;
}

FundamentalMatrix fundamental_matrix(const SystemModel& sys, const Trajectory& base,
                                     Scheme scheme) {
    if (base.n() != sys.n()) {
        throw ConfigError("base trajectory dimension does not match system");
    }
    const TimeGrid& grid = base.grid;
    FundamentalMatrix fm;
    fm.grid = grid;
    fm.base_id = base.model_id;
    fm.Phi.reserve(grid.N + 1);

    detail::VariationalStepper stepper(sys, base, scheme);
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(sys.n(), sys.n());
    for (Index k = 0;; ++k) {
        fm.Phi.push_back(Phi);
        if (k == grid.N) break;
        stepper.step(k, Phi, nullptr);
        detail::check_state_ok(Phi, k + 1);
    }
    return fm;
}

} // namespace diffbal
