#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <random>

#include "diffbal/models.hpp"
#include "diffbal/system.hpp"
#include "oracle_utils.hpp"

using namespace diffbal;

TEST_CASE("rl network drift at the origin is zero") {
    const SystemModel sys = rl_network(3);
    const Eigen::VectorXd f = sys.eval_f(Eigen::VectorXd::Zero(3));
    CHECK(f.isZero(0.0));
}

TEST_CASE("rl network drift at e1") {
    const SystemModel sys = rl_network(3);
    Eigen::VectorXd x(3);
    x << 1.0, 0.0, 0.0;
    const Eigen::VectorXd f = sys.eval_f(x);
    CHECK(f[0] == doctest::Approx(-17.0 / 6.0).epsilon(1e-15));
    CHECK(f[1] == 1.0);
    CHECK(f[2] == 0.0);
}

TEST_CASE("lti drift is A x") {
    std::mt19937 rng(7);
    const Eigen::MatrixXd A = oracle::random_matrix(4, 4, rng);
    const Eigen::MatrixXd B = oracle::random_matrix(4, 2, rng);
    const Eigen::MatrixXd C = oracle::random_matrix(1, 4, rng);
    const SystemModel sys = lti(A, B, C);
    const Eigen::VectorXd x = oracle::random_matrix(4, 1, rng);
    CHECK((sys.eval_f(x) - A * x).norm() == 0.0);
    CHECK((sys.jac_h(x) - C).norm() == 0.0);
}

TEST_CASE("rl network Jacobian at the origin is tridiagonal(1,-2,1)") {
    const SystemModel sys = rl_network(4);
    const Eigen::MatrixXd J = sys.jac_f(Eigen::VectorXd::Zero(4));
    for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 4; ++j) {
            const double want = i == j ? -2.0 : (std::abs(i - j) == 1 ? 1.0 : 0.0);
            CHECK(J(i, j) == want);
        }
    }
}

TEST_CASE("rl network Jacobian diagonal at all-ones is -4") {
    const SystemModel sys = rl_network(5);
    const Eigen::MatrixXd J = sys.jac_f(Eigen::VectorXd::Ones(5));
    for (Index i = 0; i < 5; ++i) {
        CHECK(J(i, i) == -4.0);
        if (i > 0) CHECK(J(i, i - 1) == 1.0);
    }
}

TEST_CASE("finite-difference Jacobian matches analytic within the truncation bound") {
    const SystemModel analytic = rl_network(6);
    const double fd_step = 1e-4;
    const SystemModel fd = SystemModel::finite_difference(
        6, 1, 1, [&](const Eigen::VectorXd& x) { return analytic.eval_f(x); },
        analytic.B(), [&](const Eigen::VectorXd& x) { return analytic.eval_h(x); },
        fd_step);

    std::mt19937 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd x = oracle::random_matrix(6, 1, rng);
        const double gap =
            (fd.jac_f(x) - analytic.jac_f(x)).cwiseAbs().maxCoeff();
        const double scale = std::pow(1.0 + x.cwiseAbs().maxCoeff(), 3);
        CHECK(gap <= 10.0 * fd_step * fd_step * scale);
    }
}

TEST_CASE("halving fd_step quarters the Jacobian gap") {
    const SystemModel analytic = rl_network(4);
    Eigen::VectorXd x(4);
    x << 0.7, -0.4, 1.1, 0.2;
    auto gap_at = [&](double step) {
        const SystemModel fd = SystemModel::finite_difference(
            4, 1, 1, [&](const Eigen::VectorXd& v) { return analytic.eval_f(v); },
            analytic.B(),
            [&](const Eigen::VectorXd& v) { return analytic.eval_h(v); }, step);
        return (fd.jac_f(x) - analytic.jac_f(x)).cwiseAbs().maxCoeff();
    };
    const double ratio = gap_at(1e-2) / gap_at(5e-3);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
}

TEST_CASE("finite-difference output Jacobian") {
    auto f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x; };
    auto h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd y(2);
        y << x[0] * x[0], x[1];
        return y;
    };
    const SystemModel sys = SystemModel::finite_difference(
        2, 1, 2, f, Eigen::MatrixXd::Identity(2, 1), h, 1e-6);
    Eigen::VectorXd x(2);
    x << 3.0, 4.0;
    const Eigen::MatrixXd J = sys.jac_h(x);
    CHECK(J(0, 0) == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(J(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(J(1, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(J(1, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rl network output Jacobian is e1^T") {
    const SystemModel sys = rl_network(7);
    std::mt19937 rng(3);
    const Eigen::VectorXd x = oracle::random_matrix(7, 1, rng);
    const Eigen::MatrixXd J = sys.jac_h(x);
    CHECK(J.rows() == 1);
    CHECK(J(0, 0) == 1.0);
    CHECK(J.rightCols(6).isZero(0.0));
}

TEST_CASE("evaluation is pure: repeated calls are bitwise equal") {
    const SystemModel sys = rl_network(5);
    std::mt19937 rng(11);
    const Eigen::VectorXd x = oracle::random_matrix(5, 1, rng);
    const Eigen::VectorXd f1 = sys.eval_f(x);
    const Eigen::VectorXd f2 = sys.eval_f(x);
    CHECK(std::memcmp(f1.data(), f2.data(), sizeof(double) * 5) == 0);
    const Eigen::MatrixXd J1 = sys.jac_f(x);
    const Eigen::MatrixXd J2 = sys.jac_f(x);
    CHECK(std::memcmp(J1.data(), J2.data(), sizeof(double) * 25) == 0);
}

TEST_CASE("non-finite drift surfaces as EvalError with the offending index") {
    auto f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd r(2);
        r << x[0], std::numeric_limits<double>::infinity();
        return r;
    };
    auto h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.head(1); };
    const SystemModel sys = SystemModel::finite_difference(
        2, 1, 1, f, Eigen::MatrixXd::Zero(2, 1), h);
    try {
        sys.eval_f(Eigen::VectorXd::Zero(2));
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK(e.index == 1);
    }
}

TEST_CASE("construction validates dimensions and Jacobian presence") {
    auto f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x; };
    auto h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; };
    CHECK_THROWS_AS(SystemModel::finite_difference(2, 1, 2, f,
                                                   Eigen::MatrixXd::Zero(3, 1), h),
                    ConfigError);
    CHECK_THROWS_AS(SystemModel::analytic(2, 1, 2, f, Eigen::MatrixXd::Zero(2, 1),
                                          h, nullptr, nullptr),
                    ConfigError);
    CHECK_THROWS_AS(rl_network(1), ConfigError);
}
