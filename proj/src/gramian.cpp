#include "diffbal/gramian.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace diffbal {

namespace {

struct IndexRange {
    Index k1;
    Index k2;
};

IndexRange to_indices(const TimeGrid& grid, const Interval& iv) {
    const Index k1 = grid.index_of(iv.t1);
    const Index k2 = grid.index_of(iv.t2);
    if (k1 > k2) {
        throw ConfigError("Gramian interval has t1 > t2");
    }
    return {k1, k2};
}

double trap_weight(Index k, Index k1, Index k2) {
    return (k == k1 || k == k2) ? 0.5 : 1.0;
}

/// Exact-path accumulation streaming one variational block propagation from
/// t1 to t2. Never materializes the flow-Jacobian sequence.
struct ExactAssembly {
    Eigen::MatrixXd reach;  // empty unless requested
    Eigen::MatrixXd obs;
};

ExactAssembly assemble_exact(const SystemModel& sys, const Trajectory& base,
                             IndexRange r, bool want_reach, bool want_obs,
                             Scheme scheme, bool finite_pulse) {
    const Index n = sys.n();
    const double dt = base.grid.dt;
    ExactAssembly out;
    if (want_reach) out.reach = Eigen::MatrixXd::Zero(n, n);
    if (want_obs) out.obs = Eigen::MatrixXd::Zero(n, n);
    if (r.k1 == r.k2) return out;

    detail::VariationalStepper stepper(sys, base, scheme);

    // The full flow Jacobian is only propagated when the observability side
    // needs it; the reachability-only case streams the narrower B block.
    const bool need_full_phi = want_obs;
    Eigen::MatrixXd M;
    std::function<Eigen::MatrixXd(double)> pulse;
    const std::function<Eigen::MatrixXd(double)>* forcing = nullptr;
    if (need_full_phi) {
        M = Eigen::MatrixXd::Identity(n, n);
    } else if (finite_pulse) {
        M = Eigen::MatrixXd::Zero(n, sys.m());
        const double t_on = base.grid.time(r.k1);
        const double t_off = t_on + dt;
        pulse = [&sys, t_on, t_off, dt](double t) -> Eigen::MatrixXd {
            if (t >= t_on && t < t_off) return sys.B() / dt;
            return Eigen::MatrixXd::Zero(sys.B().rows(), sys.B().cols());
        };
        forcing = &pulse;
    } else {
        M = sys.B();
    }

    for (Index k = r.k1;; ++k) {
        const double c = trap_weight(k, r.k1, r.k2) * dt;
        if (want_reach) {
            if (need_full_phi) {
                const Eigen::MatrixXd PhiB = M * sys.B();
                out.reach.selfadjointView<Eigen::Lower>().rankUpdate(PhiB, c);
            } else {
                out.reach.selfadjointView<Eigen::Lower>().rankUpdate(M, c);
            }
        }
        if (want_obs) {
            const Eigen::MatrixXd JhPhi = sys.jac_h(base.state(k)) * M;
            out.obs.selfadjointView<Eigen::Lower>().rankUpdate(JhPhi.transpose(), c);
        }
        if (k == r.k2) break;
        stepper.step(k, M, forcing);
        detail::check_state_ok(M, k + 1);
    }
    if (want_reach) out.reach = out.reach.selfadjointView<Eigen::Lower>();
    if (want_obs) out.obs = out.obs.selfadjointView<Eigen::Lower>();
    return out;
}

TimeGrid subgrid(const TimeGrid& grid, IndexRange r) {
    return TimeGrid::make(grid.time(r.k1), grid.time(r.k2), grid.dt);
}

/// Frechet-path accumulation. The unperturbed trajectory is the stored base
/// restricted to the interval, so the pair costs m + n fresh simulations.
struct FrechetAssembly {
    Eigen::MatrixXd reach;
    Eigen::MatrixXd obs;
};

FrechetAssembly assemble_frechet(const SystemModel& sys, const Trajectory& base,
                                 const InputSignal& u, IndexRange r, bool want_reach,
                                 bool want_obs, Scheme scheme, double s) {
    if (!(s > 0.0)) {
        throw ConfigError("Frechet perturbation s must be positive");
    }
    const Index n = sys.n();
    const Index m = sys.m();
    const Index p = sys.p();
    const double dt = base.grid.dt;
    FrechetAssembly out;
    if (want_reach) out.reach = Eigen::MatrixXd::Zero(n, n);
    if (want_obs) out.obs = Eigen::MatrixXd::Zero(n, n);
    if (r.k1 == r.k2) return out;

    const TimeGrid sg = subgrid(base.grid, r);
    const Eigen::VectorXd x_start = base.state(r.k1);

    if (want_reach) {
        for (Index i = 0; i < m; ++i) {
            const Trajectory x2 =
                integrate(sys, x_start + s * sys.B().col(i), u, sg, scheme);
            for (Index k = 0; k <= sg.N; ++k) {
                const Eigen::VectorXd d =
                    (x2.X.row(k) - base.X.row(r.k1 + k)).transpose() / s;
                out.reach.selfadjointView<Eigen::Lower>().rankUpdate(
                    d, trap_weight(k, 0, sg.N) * dt);
            }
        }
        out.reach = out.reach.selfadjointView<Eigen::Lower>();
    }

    if (want_obs) {
        // The quadrature needs all n output-deviation columns at each grid
        // point, so the per-coordinate responses are collected first.
        std::vector<Eigen::MatrixXd> dy(sg.N + 1, Eigen::MatrixXd(p, n));
        for (Index j = 0; j < n; ++j) {
            const Trajectory x2 = integrate(
                sys, x_start + s * Eigen::VectorXd::Unit(n, j), u, sg, scheme);
            for (Index k = 0; k <= sg.N; ++k) {
                dy[k].col(j) = (x2.Y.row(k) - base.Y.row(r.k1 + k)).transpose() / s;
            }
        }
        for (Index k = 0; k <= sg.N; ++k) {
            out.obs.selfadjointView<Eigen::Lower>().rankUpdate(
                dy[k].transpose(), trap_weight(k, 0, sg.N) * dt);
        }
        out.obs = out.obs.selfadjointView<Eigen::Lower>();
    }
    return out;
}

} // namespace

namespace detail {

void fix_column_signs(Eigen::MatrixXd& V) {
    for (Index j = 0; j < V.cols(); ++j) {
        Index imax = 0;
        double best = -1.0;
        for (Index i = 0; i < V.rows(); ++i) {
            const double a = std::abs(V(i, j));
            if (a > best) {
                best = a;
                imax = i;
            }
        }
        if (V(imax, j) < 0.0) V.col(j) = -V.col(j);
    }
}

Gramian make_gramian(Eigen::MatrixXd W, GramianKind kind, Interval interval,
                     GramianMethod method, std::string base_id) {
    W = 0.5 * (W + W.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin < -1e-8 * std::max(lmax, 0.0)) {
        throw GramianError("assembled Gramian is not PSD within tolerance (lambda_min=" +
                           std::to_string(lmin) + ", lambda_max=" + std::to_string(lmax) +
                           ")");
    }
    Gramian g;
    g.W = std::move(W);
    g.kind = kind;
    g.interval = interval;
    g.method = method;
    g.base_id = std::move(base_id);
    return g;
}

} // namespace detail

Gramian reachability_gramian(const SystemModel& sys, const Trajectory& base,
                             const InputSignal& u, const Interval& interval,
                             const GramianOptions& opts) {
    const IndexRange r = to_indices(base.grid, interval);
    Eigen::MatrixXd W;
    if (opts.method == GramianMethod::frechet_approx) {
        W = assemble_frechet(sys, base, u, r, true, false, opts.scheme, opts.s).reach;
    } else {
        W = assemble_exact(sys, base, r, true, false, opts.scheme, opts.finite_pulse)
                .reach;
    }
    return detail::make_gramian(std::move(W), GramianKind::reachability, interval,
                                opts.method, base.model_id);
}

Gramian observability_gramian(const SystemModel& sys, const Trajectory& base,
                              const InputSignal& u, const Interval& interval,
                              const GramianOptions& opts) {
    const IndexRange r = to_indices(base.grid, interval);
    Eigen::MatrixXd W;
    if (opts.method == GramianMethod::frechet_approx) {
        W = assemble_frechet(sys, base, u, r, false, true, opts.scheme, opts.s).obs;
    } else {
        W = assemble_exact(sys, base, r, false, true, opts.scheme, false).obs;
    }
    return detail::make_gramian(std::move(W), GramianKind::observability, interval,
                                opts.method, base.model_id);
}

GramianPair gramian_pair(const SystemModel& sys, const Trajectory& base,
                         const InputSignal& u, const Interval& interval,
                         const GramianOptions& opts) {
    const IndexRange r = to_indices(base.grid, interval);
    Eigen::MatrixXd Wr, Wo;
    if (opts.method == GramianMethod::frechet_approx) {
        auto a = assemble_frechet(sys, base, u, r, true, true, opts.scheme, opts.s);
        Wr = std::move(a.reach);
        Wo = std::move(a.obs);
    } else {
        auto a = assemble_exact(sys, base, r, true, true, opts.scheme, false);
        Wr = std::move(a.reach);
        Wo = std::move(a.obs);
    }
    GramianPair pair{
        detail::make_gramian(std::move(Wr), GramianKind::reachability, interval,
                             opts.method, base.model_id),
        detail::make_gramian(std::move(Wo), GramianKind::observability, interval,
                             opts.method, base.model_id)};
    return pair;
}

VariationalTrajectory frechet_impulse_response(const SystemModel& sys,
                                               const Eigen::VectorXd& x0,
                                               const InputSignal& u,
                                               const TimeGrid& grid, Index channel,
                                               double s, Scheme scheme) {
    if (channel < 0 || channel >= sys.m()) {
        throw ConfigError("impulse channel out of range");
    }
    if (!(s > 0.0)) {
        throw ConfigError("Frechet perturbation s must be positive");
    }
    const Trajectory x1 = integrate(sys, x0, u, grid, scheme);
    const Trajectory x2 = integrate(sys, x0 + s * sys.B().col(channel), u, grid, scheme);
    VariationalTrajectory var;
    var.grid = grid;
    var.base_id = sys.name();
    var.dX = (x2.X - x1.X) / s;
    var.dY = (x2.Y - x1.Y) / s;
    return var;
}

Eigen::MatrixXd frechet_initial_state_response(const SystemModel& sys,
                                               const Eigen::VectorXd& x0,
                                               const InputSignal& u,
                                               const TimeGrid& grid, Index coord,
                                               double s, Scheme scheme) {
    if (coord < 0 || coord >= sys.n()) {
        throw ConfigError("initial-state coordinate out of range");
    }
    if (!(s > 0.0)) {
        throw ConfigError("Frechet perturbation s must be positive");
    }
    const Trajectory x1 = integrate(sys, x0, u, grid, scheme);
    const Trajectory x2 =
        integrate(sys, x0 + s * Eigen::VectorXd::Unit(sys.n(), coord), u, grid, scheme);
    return (x2.Y - x1.Y) / s;
}

std::pair<Gramian, Gramian> lti_gramian_oracle(const Eigen::MatrixXd& A,
                                               const Eigen::MatrixXd& B,
                                               const Eigen::MatrixXd& C,
                                               const Interval& interval) {
    const Index n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n) {
        throw ConfigError("lti_gramian_oracle: inconsistent matrix dimensions");
    }
    const double span = interval.t2 - interval.t1;
    if (span < 0.0) {
        throw ConfigError("lti_gramian_oracle: interval has t1 > t2");
    }

    Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd Wc = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd Wo = Eigen::MatrixXd::Zero(n, n);

    if (span > 0.0) {
        const auto steps = std::max<Index>(2000, static_cast<Index>(
                                                     std::ceil(span / 5e-4)));
        const double h = span / static_cast<double>(steps);
        struct State {
            Eigen::MatrixXd Phi, Wc, Wo;
        };
        auto deriv = [&](const State& s) {
            State d;
            d.Phi = A * s.Phi;
            const Eigen::MatrixXd PB = s.Phi * B;
            const Eigen::MatrixXd CP = C * s.Phi;
            d.Wc = PB * PB.transpose();
            d.Wo = CP.transpose() * CP;
            return d;
        };
        auto axpy = [](const State& s, double a, const State& d) {
            return State{s.Phi + a * d.Phi, s.Wc + a * d.Wc, s.Wo + a * d.Wo};
        };
        State s{Phi, Wc, Wo};
        for (Index k = 0; k < steps; ++k) {
            const State k1 = deriv(s);
            const State k2 = deriv(axpy(s, 0.5 * h, k1));
            const State k3 = deriv(axpy(s, 0.5 * h, k2));
            const State k4 = deriv(axpy(s, h, k3));
            s.Phi += (h / 6.0) * (k1.Phi + 2.0 * k2.Phi + 2.0 * k3.Phi + k4.Phi);
            s.Wc += (h / 6.0) * (k1.Wc + 2.0 * k2.Wc + 2.0 * k3.Wc + k4.Wc);
            s.Wo += (h / 6.0) * (k1.Wo + 2.0 * k2.Wo + 2.0 * k3.Wo + k4.Wo);
        }
        Wc = s.Wc;
        Wo = s.Wo;
    }

    return {detail::make_gramian(std::move(Wc), GramianKind::reachability, interval,
                                 GramianMethod::lti_analytic, "lti_oracle"),
            detail::make_gramian(std::move(Wo), GramianKind::observability, interval,
                                 GramianMethod::lti_analytic, "lti_oracle")};
}

PDReport pd_probe(const SystemModel& sys, const Trajectory& base, GramianKind kind,
                  Index subinterval_count, Scheme scheme, double tau_pd) {
    if (subinterval_count < 1) {
        throw ConfigError("pd_probe requires subinterval_count >= 1");
    }
    if (kind == GramianKind::dual_reachability) {
        throw ConfigError("pd_probe supports reachability and observability kinds");
    }
    const Index N = base.grid.N;

    PDReport report;
    report.kind = kind;
    report.threshold = tau_pd;
    report.all_positive = true;

    std::vector<IndexRange> ranges;
    for (Index parts = 1; static_cast<Index>(ranges.size()) < subinterval_count &&
                          parts <= N;
         parts *= 2) {
        for (Index j = 0; j < parts; ++j) {
            const Index lo = (N * j) / parts;
            const Index hi = (N * (j + 1)) / parts;
            if (hi > lo) ranges.push_back({lo, hi});
        }
    }

    const bool want_reach = kind == GramianKind::reachability;
    for (const auto& r : ranges) {
        const auto a =
            assemble_exact(sys, base, r, want_reach, !want_reach, scheme, false);
        const Eigen::MatrixXd& W = want_reach ? a.reach : a.obs;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
        PDSubinterval sub;
        sub.t1 = base.grid.time(r.k1);
        sub.t2 = base.grid.time(r.k2);
        sub.lambda_min = es.eigenvalues().minCoeff();
        sub.lambda_max = es.eigenvalues().maxCoeff();
        sub.positive = sub.lambda_min > tau_pd * sub.lambda_max;
        report.all_positive = report.all_positive && sub.positive;
        report.subintervals.push_back(sub);
    }
    return report;
}

NullspaceReport common_nullspace_probe(const SystemModel& sys,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<InputSignal>& inputs,
                                       const TimeGrid& grid, GramianKind kind,
                                       Scheme scheme, double tau_pd) {
    if (inputs.empty()) {
        throw ConfigError("common_nullspace_probe requires at least one input");
    }
    const Interval full{grid.t0, grid.tf};
    Eigen::MatrixXd Wsum = Eigen::MatrixXd::Zero(sys.n(), sys.n());
    GramianOptions opts;
    opts.scheme = scheme;
    for (const auto& u : inputs) {
        const Trajectory base = integrate(sys, x0, u, grid, scheme);
        const Gramian g = kind == GramianKind::reachability
                              ? reachability_gramian(sys, base, u, full, opts)
                              : observability_gramian(sys, base, u, full, opts);
        Wsum += g.W;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Wsum + Wsum.transpose()));
    const Eigen::VectorXd lam = es.eigenvalues();  // ascending
    const double lmax = lam.maxCoeff();
    const double thr = tau_pd * std::max(lmax, 0.0);

    Index q = 0;
    while (q < lam.size() && lam[q] <= thr) ++q;

    NullspaceReport report;
    report.threshold = tau_pd;
    report.eigenvalues = lam.reverse();
    report.basis = es.eigenvectors().leftCols(q);
    detail::fix_column_signs(report.basis);
    return report;
}

Eigen::VectorXd gramian_eigenvalues(const Gramian& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.W, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

} // namespace diffbal
