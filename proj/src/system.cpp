#include "diffbal/system.hpp"

#include <cmath>

namespace diffbal {

namespace {

void check_finite(const Eigen::VectorXd& v, const char* what) {
    for (Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw EvalError(std::string(what) + " produced a non-finite value at index " +
                                std::to_string(i),
                            i);
        }
    }
}

void check_finite(const Eigen::MatrixXd& a, const char* what) {
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            if (!std::isfinite(a(i, j))) {
                throw EvalError(std::string(what) + " produced a non-finite entry (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")",
                                i);
            }
        }
    }
}

} // namespace

SystemModel::SystemModel(Index n, Index m, Index p, VectorFn f, Eigen::MatrixXd B,
                         VectorFn h, MatrixFn jac_f, MatrixFn jac_h,
                         JacobianMode mode, double fd_step, std::string name)
    : n_(n),
      m_(m),
      p_(p),
      f_(std::move(f)),
      B_(std::move(B)),
      h_(std::move(h)),
      jac_f_(std::move(jac_f)),
      jac_h_(std::move(jac_h)),
      mode_(mode),
      fd_step_(fd_step),
      name_(std::move(name)) {
    if (n_ < 1 || m_ < 1 || p_ < 1) {
        throw ConfigError("system dimensions must be positive (n=" + std::to_string(n_) +
                          ", m=" + std::to_string(m_) + ", p=" + std::to_string(p_) + ")");
    }
    if (B_.rows() != n_ || B_.cols() != m_) {
        throw ConfigError("input matrix B must be " + std::to_string(n_) + "x" +
                          std::to_string(m_) + ", got " + std::to_string(B_.rows()) + "x" +
                          std::to_string(B_.cols()));
    }
    if (!f_ || !h_) {
        throw ConfigError("system requires both f and h maps");
    }
    if (mode_ == JacobianMode::analytic && (!jac_f_ || !jac_h_)) {
        throw ConfigError("analytic Jacobian mode requires jac_f and jac_h");
    }
    if (mode_ == JacobianMode::finite_difference && !(fd_step_ > 0.0)) {
        throw ConfigError("finite-difference step must be positive");
    }
}

SystemModel SystemModel::analytic(Index n, Index m, Index p, VectorFn f,
                                  Eigen::MatrixXd B, VectorFn h, MatrixFn jac_f,
                                  MatrixFn jac_h, std::string name) {
    return SystemModel(n, m, p, std::move(f), std::move(B), std::move(h),
                       std::move(jac_f), std::move(jac_h), JacobianMode::analytic,
                       1e-6, std::move(name));
}

SystemModel SystemModel::finite_difference(Index n, Index m, Index p, VectorFn f,
                                           Eigen::MatrixXd B, VectorFn h,
                                           double fd_step, std::string name) {
    return SystemModel(n, m, p, std::move(f), std::move(B), std::move(h), nullptr,
                       nullptr, JacobianMode::finite_difference, fd_step,
                       std::move(name));
}

Eigen::VectorXd SystemModel::eval_f(const Eigen::VectorXd& x) const {
    if (x.size() != n_) {
        throw ConfigError("eval_f: state has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n_));
    }
    Eigen::VectorXd r = f_(x);
    if (r.size() != n_) {
        throw ConfigError("f returned a vector of length " + std::to_string(r.size()) +
                          ", expected " + std::to_string(n_));
    }
    check_finite(r, "f");
    return r;
}

Eigen::VectorXd SystemModel::eval_h(const Eigen::VectorXd& x) const {
    if (x.size() != n_) {
        throw ConfigError("eval_h: state has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n_));
    }
    Eigen::VectorXd r = h_(x);
    if (r.size() != p_) {
        throw ConfigError("h returned a vector of length " + std::to_string(r.size()) +
                          ", expected " + std::to_string(p_));
    }
    check_finite(r, "h");
    return r;
}

Eigen::MatrixXd SystemModel::fd_jacobian(const VectorFn& fn, Index rows,
                                         const Eigen::VectorXd& x) const {
    Eigen::MatrixXd J(rows, n_);
    Eigen::VectorXd xp = x, xm = x;
    for (Index j = 0; j < n_; ++j) {
        const double hj = fd_step_ * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + hj;
        xm[j] = x[j] - hj;
        J.col(j) = (fn(xp) - fn(xm)) / (2.0 * hj);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return J;
}

Eigen::MatrixXd SystemModel::jac_f(const Eigen::VectorXd& x) const {
    if (x.size() != n_) {
        throw ConfigError("jac_f: state has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n_));
    }
    Eigen::MatrixXd J = mode_ == JacobianMode::analytic ? jac_f_(x)
                                                        : fd_jacobian(f_, n_, x);
    if (J.rows() != n_ || J.cols() != n_) {
        throw ConfigError("jac_f has wrong shape");
    }
    check_finite(J, "jac_f");
    return J;
}

Eigen::MatrixXd SystemModel::jac_h(const Eigen::VectorXd& x) const {
    if (x.size() != n_) {
        throw ConfigError("jac_h: state has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(n_));
    }
    Eigen::MatrixXd J = mode_ == JacobianMode::analytic ? jac_h_(x)
                                                        : fd_jacobian(h_, p_, x);
    if (J.rows() != p_ || J.cols() != n_) {
        throw ConfigError("jac_h has wrong shape");
    }
    check_finite(J, "jac_h");
    return J;
}

} // namespace diffbal
