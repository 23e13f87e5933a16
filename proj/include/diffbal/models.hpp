#ifndef DIFFBAL_MODELS_HPP
#define DIFFBAL_MODELS_HPP

#include <string>
#include <vector>

#include "diffbal/expr.hpp"
#include "diffbal/system.hpp"
#include "diffbal/trajectory.hpp"

namespace diffbal {

/// Chain of nonlinear RL cells: tridiagonal (1, -2, 1) linear coupling with a
/// per-cell x^2/2 + x^3/3 resistive term subtracted, single input on the
/// first cell, output y = x1. Jacobian is tridiagonal with diagonal
/// -2 - x_i - x_i^2 and is exactly symmetric.
SystemModel rl_network(Index n);

/// Linear time-invariant system x' = Ax + Bu, y = Cx.
SystemModel lti(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                const Eigen::MatrixXd& C);

/// Gradient system f = S^{-1} grad V with diagonal positive S,
///
///     V(x) = a * sum x_i^2 + (b/4) * sum x_i^4 + g * sum x_i x_{i+1},
///
/// B = S^{-1} c and h = c^T x. Variationally symmetric with respect to S by
/// construction (S jac_f is the Hessian of V). coeffs = (a, b, g).
SystemModel gradient_family(const Eigen::VectorXd& S_diag,
                            const Eigen::Vector3d& coeffs,
                            const Eigen::VectorXd& c);

/// System assembled from expression strings; Jacobians by central
/// differences. f and h components may reference x1..xn only.
SystemModel expression_model(const std::string& name, Index n, Index m, Index p,
                             const std::vector<std::string>& f_exprs,
                             const Eigen::MatrixXd& B,
                             const std::vector<std::string>& h_exprs);

/// Input signal from expression text in t only; `text` holds one expression
/// per channel separated by ';', or the word "zero".
InputSignal input_from_text(const std::string& text, Index m);

/// Loads a model config JSON file:
///   {"builtin": "rl_network", "n": 100}
///   {"builtin": "lti", "A": [[..]], "B": [[..]], "C": [[..]]}
///   {"builtin": "gradient_family", "S_diag": [..], "V_coeffs": [a,b,g], "c": [..]}
///   {"name": .., "n": .., "m": .., "p": .., "B": [[..]], "f": [".."], "h": [".."]}
SystemModel load_model_file(const std::string& path);

/// Model from a CLI-style designator: "rl:<n>" or a JSON config path.
SystemModel model_from_designator(const std::string& designator);

} // namespace diffbal

#endif // DIFFBAL_MODELS_HPP
