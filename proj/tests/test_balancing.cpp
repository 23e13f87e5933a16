#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "diffbal/balancing.hpp"
#include "diffbal/models.hpp"
#include "oracle_utils.hpp"

using namespace diffbal;

namespace {

Gramian as_gramian(const Eigen::MatrixXd& W, GramianKind kind) {
    return detail::make_gramian(W, kind, {0.0, 1.0},
                                GramianMethod::exact_variational, "test");
}

/// Eigenvalues of WO*WR sorted descending (real spectrum for SPD factors).
Eigen::VectorXd product_eigenvalues(const Eigen::MatrixXd& WO,
                                    const Eigen::MatrixXd& WR) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(WO * WR);
    Eigen::VectorXd ev = es.eigenvalues().real();
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<double>());
    return ev;
}

} // namespace

TEST_CASE("scalar balancing closed form") {
    const Gramian WR = as_gramian(4.0 * Eigen::MatrixXd::Identity(1, 1),
                                  GramianKind::reachability);
    const Gramian WO = as_gramian(9.0 * Eigen::MatrixXd::Identity(1, 1),
                                  GramianKind::observability);
    const BalancingResult bal = balance(WR, WO);
    CHECK(bal.sigma[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(std::abs(bal.T(0, 0)) == doctest::Approx(std::sqrt(6.0 / 4.0)).epsilon(1e-12));
    CHECK(bal.Tinv(0, 0) * bal.Tinv(0, 0) * 9.0 == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("equal diagonal Gramians are already balanced") {
    Eigen::VectorXd d(3);
    d << 3.0, 2.0, 1.0;
    const Gramian W = as_gramian(d.asDiagonal(), GramianKind::reachability);
    const BalancingResult bal = balance(W, W);
    CHECK((bal.sigma - d).norm() <= 1e-12);
    CHECK((bal.T - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);
}

TEST_CASE("squared singular values equal the product eigenvalues") {
    std::mt19937 rng(31);
    const Eigen::MatrixXd WR = oracle::random_spd(5, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(5, rng);
    const BalancingResult bal = balance(as_gramian(WR, GramianKind::reachability),
                                        as_gramian(WO, GramianKind::observability));
    const Eigen::VectorXd want = product_eigenvalues(WO, WR);
    for (Index i = 0; i < 5; ++i) {
        CHECK(bal.sigma[i] * bal.sigma[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
}

TEST_CASE("balancing result invariants") {
    std::mt19937 rng(37);
    const Eigen::MatrixXd WR = oracle::random_spd(6, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(6, rng);
    const BalancingResult bal = balance(as_gramian(WR, GramianKind::reachability),
                                        as_gramian(WO, GramianKind::observability));
    CHECK((bal.T * bal.Tinv - Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-8 * 6);
    for (Index i = 1; i < 6; ++i) CHECK(bal.sigma[i] <= bal.sigma[i - 1]);
    CHECK(bal.sigma.minCoeff() > 0.0);
    CHECK(bal.effective_rank == 6);
    CHECK(bal.residual_reach <= 1e-8 * bal.sigma[0]);
    CHECK(bal.residual_obs <= 1e-8 * bal.sigma[0]);
    const Eigen::MatrixXd br = bal.T * WR * bal.T.transpose();
    CHECK((br.diagonal() - bal.sigma).norm() <= 1e-8 * bal.sigma[0]);
    const Eigen::MatrixXd bo = bal.Tinv.transpose() * WO * bal.Tinv;
    CHECK((bo.diagonal() - bal.sigma).norm() <= 1e-8 * bal.sigma[0]);
}

TEST_CASE("sigma is invariant under coordinate permutation") {
    std::mt19937 rng(41);
    const Eigen::MatrixXd WR = oracle::random_spd(5, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(5, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(5);
    P.setIdentity();
    std::shuffle(P.indices().data(), P.indices().data() + 5, rng);
    const Eigen::MatrixXd Pm = P.toDenseMatrix().cast<double>();

    const BalancingResult a = balance(as_gramian(WR, GramianKind::reachability),
                                      as_gramian(WO, GramianKind::observability));
    const BalancingResult b =
        balance(as_gramian(Pm * WR * Pm.transpose(), GramianKind::reachability),
                as_gramian(Pm * WO * Pm.transpose(), GramianKind::observability));
    CHECK((a.sigma - b.sigma).norm() <= 1e-10 * a.sigma[0]);
}

TEST_CASE("sigma scales linearly with the reachability Gramian scale") {
    std::mt19937 rng(43);
    const Eigen::MatrixXd WR = oracle::random_spd(4, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(4, rng);
    const double alpha = 2.5;
    const BalancingResult a = balance(as_gramian(WR, GramianKind::reachability),
                                      as_gramian(WO, GramianKind::observability));
    const BalancingResult b =
        balance(as_gramian(alpha * alpha * WR, GramianKind::reachability),
                as_gramian(WO, GramianKind::observability));
    CHECK((b.sigma - alpha * a.sigma).norm() <= 1e-10 * b.sigma[0]);
}

TEST_CASE("balance is deterministic across calls") {
    std::mt19937 rng(49);
    const Eigen::MatrixXd WR = oracle::random_spd(5, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(5, rng);
    const Gramian gr = as_gramian(WR, GramianKind::reachability);
    const Gramian go = as_gramian(WO, GramianKind::observability);
    const BalancingResult a = balance(gr, go);
    const BalancingResult b = balance(gr, go);
    CHECK((a.T - b.T).norm() == 0.0);
    CHECK((a.Tinv - b.Tinv).norm() == 0.0);
}

TEST_CASE("rank-deficient balancing reports effective rank and blocks truncation") {
    std::mt19937 rng(47);
    Eigen::MatrixXd WR = Eigen::MatrixXd::Zero(4, 4);
    WR.topLeftCorner(2, 2) = oracle::random_spd(2, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(4, rng);
    const BalancingResult bal = balance(as_gramian(WR, GramianKind::reachability),
                                        as_gramian(WO, GramianKind::observability));
    CHECK(bal.effective_rank == 2);
    const SystemModel sys = rl_network(4);
    CHECK_NOTHROW(truncate(sys, bal, 2));
    CHECK_THROWS_AS(truncate(sys, bal, 3), RankError);
}

TEST_CASE("eigen basis ordering and deterministic signs") {
    Eigen::VectorXd d(3);
    d << 3.0, 1.0, 2.0;
    const Gramian W = as_gramian(d.asDiagonal(), GramianKind::reachability);
    const EigenBasis basis = eigen_truncate_basis(W);
    Eigen::VectorXd want(3);
    want << 3.0, 2.0, 1.0;
    CHECK((basis.eigenvalues - want).norm() <= 1e-14);
    CHECK((basis.U.col(0) - Eigen::VectorXd::Unit(3, 0)).norm() <= 1e-14);
    CHECK((basis.U.col(1) - Eigen::VectorXd::Unit(3, 2)).norm() <= 1e-14);
    CHECK((basis.U.col(2) - Eigen::VectorXd::Unit(3, 1)).norm() <= 1e-14);
}

TEST_CASE("rank-one Gramian eigenbasis") {
    Eigen::VectorXd v(4);
    v << 1.0, -2.0, 0.5, 3.0;
    const Gramian W = as_gramian(v * v.transpose(), GramianKind::observability);
    const EigenBasis basis = eigen_truncate_basis(W);
    CHECK(basis.eigenvalues[0] == doctest::Approx(v.squaredNorm()).epsilon(1e-12));
    CHECK(basis.eigenvalues.tail(3).cwiseAbs().maxCoeff() <= 1e-12 * v.squaredNorm());
    // sign convention: the largest-magnitude entry of v is positive already
    CHECK((basis.U.col(0) - v.normalized()).norm() <= 1e-12);
}

TEST_CASE("truncation nesting: leading rows agree across orders") {
    std::mt19937 rng(53);
    const Eigen::MatrixXd WR = oracle::random_spd(5, rng);
    const Eigen::MatrixXd WO = oracle::random_spd(5, rng);
    const BalancingResult bal = balance(as_gramian(WR, GramianKind::reachability),
                                        as_gramian(WO, GramianKind::observability));
    const SystemModel sys = rl_network(5);
    const ReducedModel r3 = truncate(sys, bal, 3);
    const ReducedModel r2 = truncate(sys, bal, 2);
    CHECK((r3.T().topRows(2) - r2.T().topRows(2)).norm() == 0.0);
}

TEST_CASE("full-order truncation reproduces the parent output") {
    const SystemModel sys = rl_network(6);
    const InputSignal u = input_from_text("sin(t)+sin(3*t)", 1);
    const TimeGrid grid = TimeGrid::make(0.0, 5.0, 0.01);
    const Trajectory full = integrate(sys, Eigen::VectorXd::Zero(6), u, grid);
    const auto [wr, wo] = gramian_pair(sys, full, u, {0.0, 5.0});
    const BalancingResult bal = balance(wr, wo);
    REQUIRE(bal.effective_rank == 6);
    const ReducedModel reduced = truncate(sys, bal, 6);
    const OutputErrorReport rep = compare_outputs(full, reduced, u, grid);
    CHECK(rep.rel_l2 <= 1e-10);
    CHECK_FALSE(rep.degenerate);
    CHECK_FALSE(rep.diverged);
}

TEST_CASE("truncating an LTI parent matches the matrix-arithmetic reduction") {
    std::mt19937 rng(59);
    const Eigen::MatrixXd A = oracle::random_stable(5, rng);
    const Eigen::MatrixXd B = oracle::random_matrix(5, 1, rng);
    const Eigen::MatrixXd C = oracle::random_matrix(1, 5, rng);
    const SystemModel sys = lti(A, B, C);
    const auto [wr, wo] = lti_gramian_oracle(A, B, C, {0.0, 20.0});
    const BalancingResult bal = balance(wr, wo);
    const Index k = 3;
    const ReducedModel reduced = truncate(sys, bal, k);
    const SystemModel red_sys = reduced.reduced_system();

    const Eigen::MatrixXd Tk = bal.T.topRows(k);
    const Eigen::MatrixXd Tik = bal.Tinv.leftCols(k);
    const Eigen::MatrixXd Ared = Tk * A * Tik;
    const Eigen::MatrixXd Bred = Tk * B;
    const Eigen::MatrixXd Cred = C * Tik;

    const Eigen::VectorXd z = oracle::random_matrix(k, 1, rng);
    CHECK((red_sys.eval_f(z) - Ared * z).norm() <= 1e-12 * std::max(1.0, z.norm()));
    CHECK((red_sys.B() - Bred).norm() <= 1e-14);
    CHECK((red_sys.eval_h(z) - Cred * z).norm() <= 1e-12 * std::max(1.0, z.norm()));
    CHECK((red_sys.jac_f(z) - Ared).norm() <= 1e-12);
}

TEST_CASE("sigma from balance matches the Hankel product route on an oracle pair") {
    std::mt19937 rng(61);
    const Eigen::MatrixXd A = oracle::random_stable(6, rng);
    const Eigen::MatrixXd B = oracle::random_matrix(6, 1, rng);
    const Eigen::MatrixXd C = oracle::random_matrix(1, 6, rng);
    const auto [wr, wo] = lti_gramian_oracle(A, B, C, {0.0, 30.0});
    const BalancingResult bal = balance(wr, wo);
    const Eigen::VectorXd want = product_eigenvalues(wo.W, wr.W);
    for (Index i = 0; i < 6; ++i) {
        if (want[i] <= 1e-18 * want[0]) continue;  // below the clamp floor
        CHECK(bal.sigma[i] * bal.sigma[i] == doctest::Approx(want[i]).epsilon(1e-7));
    }
}

TEST_CASE("compare_outputs flags the degenerate zero-output case") {
    const SystemModel sys = rl_network(4);
    const InputSignal u = InputSignal::zero(1);
    const TimeGrid grid = TimeGrid::make(0.0, 1.0, 0.01);
    const Trajectory full = integrate(sys, Eigen::VectorXd::Zero(4), u, grid);
    const EigenBasis basis{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Ones(4)};
    const ReducedModel reduced = truncate(sys, basis, 4);
    const OutputErrorReport rep = compare_outputs(full, reduced, u, grid);
    CHECK(rep.degenerate);
    CHECK(rep.rel_l2 == 0.0);
    CHECK(rep.max_abs == 0.0);
}

TEST_CASE("compare_outputs reports divergence instead of throwing") {
    auto f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return x.array().square().matrix();
    };
    auto h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.head(1); };
    const SystemModel sys = SystemModel::finite_difference(
        2, 1, 1, f, Eigen::MatrixXd::Zero(2, 1), h);
    const TimeGrid grid = TimeGrid::make(0.0, 3.0, 0.05);
    Eigen::VectorXd x0(2);
    x0 << 0.1, 0.1;
    const Trajectory full = integrate(sys, x0, InputSignal::zero(1), grid);

    // mismatched transform pair: the "reduced" dynamics z' = f(100 z) blow up
    const Eigen::MatrixXd T = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd Tinv = 100.0 * Eigen::MatrixXd::Identity(2, 2);
    const ReducedModel reduced(sys, T, Tinv, 2);
    const OutputErrorReport rep =
        compare_outputs(full, reduced, InputSignal::zero(1), grid, Scheme::euler);
    CHECK(rep.diverged);
    CHECK(rep.diverged_step > 0);
}
