#include "diffbal/models.hpp"

#include <fstream>

#include <json.hpp>

namespace diffbal {

SystemModel rl_network(Index n) {
    if (n < 2) {
        throw ConfigError("rl_network requires n >= 2");
    }
    auto f = [n](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd dx(n);
        for (Index i = 0; i < n; ++i) {
            double v = -2.0 * x[i] - (x[i] * x[i] / 2.0 + x[i] * x[i] * x[i] / 3.0);
            if (i > 0) v += x[i - 1];
            if (i + 1 < n) v += x[i + 1];
            dx[i] = v;
        }
        return dx;
    };
    auto h = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return x.head(1);
    };
    auto jf = [n](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
            J(i, i) = -2.0 - x[i] - x[i] * x[i];
            if (i > 0) J(i, i - 1) = 1.0;
            if (i + 1 < n) J(i, i + 1) = 1.0;
        }
        return J;
    };
    auto jh = [n](const Eigen::VectorXd&) -> Eigen::MatrixXd {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(1, n);
        J(0, 0) = 1.0;
        return J;
    };
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, 1);
    B(0, 0) = 1.0;
    return SystemModel::analytic(n, 1, 1, f, B, h, jf, jh,
                                 "rl_network_" + std::to_string(n));
}

SystemModel lti(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                const Eigen::MatrixXd& C) {
    const Index n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n) {
        throw ConfigError("lti: inconsistent matrix dimensions");
    }
    auto f = [A](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x; };
    auto h = [C](const Eigen::VectorXd& x) -> Eigen::VectorXd { return C * x; };
    auto jf = [A](const Eigen::VectorXd&) -> Eigen::MatrixXd { return A; };
    auto jh = [C](const Eigen::VectorXd&) -> Eigen::MatrixXd { return C; };
    return SystemModel::analytic(n, B.cols(), C.rows(), f, B, h, jf, jh, "lti");
}

SystemModel gradient_family(const Eigen::VectorXd& S_diag,
                            const Eigen::Vector3d& coeffs,
                            const Eigen::VectorXd& c) {
    const Index n = S_diag.size();
    if (n < 1 || c.size() != n) {
        throw ConfigError("gradient_family: S_diag and c must have equal length");
    }
    if (S_diag.minCoeff() <= 0.0) {
        throw ConfigError("gradient_family: S must be diagonal positive");
    }
    const double a = coeffs[0], b = coeffs[1], g = coeffs[2];
    const Eigen::VectorXd Sinv = S_diag.cwiseInverse();

    auto grad_v = [n, a, b, g](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd gv(n);
        for (Index i = 0; i < n; ++i) {
            double v = 2.0 * a * x[i] + b * x[i] * x[i] * x[i];
            if (i > 0) v += g * x[i - 1];
            if (i + 1 < n) v += g * x[i + 1];
            gv[i] = v;
        }
        return gv;
    };
    auto f = [Sinv, grad_v](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return Sinv.asDiagonal() * grad_v(x);
    };
    auto h = [c](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd y(1);
        y[0] = c.dot(x);
        return y;
    };
    auto jf = [n, a, b, g, Sinv](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
            H(i, i) = 2.0 * a + 3.0 * b * x[i] * x[i];
            if (i > 0) H(i, i - 1) = g;
            if (i + 1 < n) H(i, i + 1) = g;
        }
        return Sinv.asDiagonal() * H;
    };
    auto jh = [c](const Eigen::VectorXd&) -> Eigen::MatrixXd {
        return c.transpose();
    };
    const Eigen::MatrixXd B = Sinv.asDiagonal() * c;
    return SystemModel::analytic(n, 1, 1, f, B, h, jf, jh, "gradient_family");
}

namespace {

std::vector<Expr> parse_component_list(const std::vector<std::string>& texts,
                                       Index n_states, const char* what) {
    std::vector<Expr> exprs;
    exprs.reserve(texts.size());
    for (const auto& text : texts) {
        Expr e;
        try {
            e = parse(text);
        } catch (const ParseError& pe) {
            throw ConfigError(std::string(what) + " component \"" + text +
                              "\": " + pe.what());
        }
        if (e.uses_time()) {
            throw ConfigError(std::string(what) +
                              " components may not reference t; inputs enter only "
                              "through B");
        }
        if (e.max_var_index() > n_states) {
            throw ConfigError(std::string(what) + " component \"" + text +
                              "\" references x" + std::to_string(e.max_var_index()) +
                              " but n=" + std::to_string(n_states));
        }
        exprs.push_back(std::move(e));
    }
    return exprs;
}

} // namespace

SystemModel expression_model(const std::string& name, Index n, Index m, Index p,
                             const std::vector<std::string>& f_exprs,
                             const Eigen::MatrixXd& B,
                             const std::vector<std::string>& h_exprs) {
    if (static_cast<Index>(f_exprs.size()) != n) {
        throw ConfigError("expression model needs exactly n components for f");
    }
    if (static_cast<Index>(h_exprs.size()) != p) {
        throw ConfigError("expression model needs exactly p components for h");
    }
    auto fe = parse_component_list(f_exprs, n, "f");
    auto he = parse_component_list(h_exprs, n, "h");

    auto f = [fe, n](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd dx(n);
        for (Index i = 0; i < n; ++i) dx[i] = fe[i].eval(x, 0.0);
        return dx;
    };
    auto h = [he, p](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd y(p);
        for (Index i = 0; i < p; ++i) y[i] = he[i].eval(x, 0.0);
        return y;
    };
    return SystemModel::finite_difference(n, m, p, f, B, h, 1e-6, name);
}

InputSignal input_from_text(const std::string& text, Index m) {
    if (text == "zero") {
        return InputSignal::zero(m);
    }
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t sep = text.find(';', start);
        parts.push_back(text.substr(start, sep - start));
        if (sep == std::string::npos) break;
        start = sep + 1;
    }
    if (static_cast<Index>(parts.size()) != m) {
        throw ConfigError("input has " + std::to_string(parts.size()) +
                          " expression(s), system expects m=" + std::to_string(m));
    }
    std::vector<Expr> exprs;
    for (const auto& part : parts) {
        Expr e;
        try {
            e = parse(part);
        } catch (const ParseError& pe) {
            throw ConfigError("input expression \"" + part + "\": " + pe.what());
        }
        if (e.max_var_index() > 0) {
            throw ConfigError("input expressions may reference t only");
        }
        exprs.push_back(std::move(e));
    }
    const Eigen::VectorXd no_state;
    auto fn = [exprs, m, no_state](double t) -> Eigen::VectorXd {
        Eigen::VectorXd u(m);
        for (Index i = 0; i < m; ++i) u[i] = exprs[i].eval(no_state, t);
        return u;
    };
    return InputSignal::from_function(m, fn, text);
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw ConfigError(std::string(what) + " must be an array of rows");
    }
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j[i].size()) != cols) {
            throw ConfigError(std::string(what) + " has ragged rows");
        }
        for (Index k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) {
        throw ConfigError(std::string(what) + " must be an array");
    }
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

} // namespace

SystemModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open model file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model file " + path + " is not valid JSON: " + e.what());
    }

    try {
        if (j.contains("builtin")) {
            const std::string which = j["builtin"].get<std::string>();
            if (which == "rl_network") {
                return rl_network(j.at("n").get<Index>());
            }
            if (which == "lti") {
                return lti(matrix_from_json(j.at("A"), "A"),
                           matrix_from_json(j.at("B"), "B"),
                           matrix_from_json(j.at("C"), "C"));
            }
            if (which == "gradient_family") {
                const Eigen::VectorXd coeffs =
                    vector_from_json(j.at("V_coeffs"), "V_coeffs");
                if (coeffs.size() != 3) {
                    throw ConfigError("V_coeffs must have 3 entries (a, b, g)");
                }
                return gradient_family(vector_from_json(j.at("S_diag"), "S_diag"),
                                       Eigen::Vector3d(coeffs),
                                       vector_from_json(j.at("c"), "c"));
            }
            throw ConfigError("unknown builtin model: " + which);
        }
        const auto n = j.at("n").get<Index>();
        const auto m = j.at("m").get<Index>();
        const auto p = j.at("p").get<Index>();
        const std::string name = j.value("name", std::string("model"));
        return expression_model(name, n, m, p,
                                j.at("f").get<std::vector<std::string>>(),
                                matrix_from_json(j.at("B"), "B"),
                                j.at("h").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model file " + path + ": " + e.what());
    }
}

SystemModel model_from_designator(const std::string& designator) {
    if (designator.rfind("rl:", 0) == 0) {
        const std::string num = designator.substr(3);
        try {
            return rl_network(static_cast<Index>(std::stol(num)));
        } catch (const std::logic_error&) {
            throw ConfigError("bad rl dimension: " + designator);
        }
    }
    return load_model_file(designator);
}

} // namespace diffbal
