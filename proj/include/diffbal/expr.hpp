#ifndef DIFFBAL_EXPR_HPP
#define DIFFBAL_EXPR_HPP

#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "diffbal/errors.hpp"

namespace diffbal {

using Index = Eigen::Index;

/// Arithmetic expression over state variables x1..xn and time t.
///
/// Grammar (whitespace-insensitive):
///
///     expr   := term (('+'|'-') term)*
///     term   := unary (('*'|'/') power)*
///     unary  := '-' unary | power
///     power  := atom ('^' unsigned-integer)?
///     atom   := number | 'x'index | 't' | '(' expr ')' | func '(' expr ')'
///     func   := sin | cos | tan | exp | log | tanh | sqrt
///
/// Unary minus binds a whole leading factor, so "-x1^2" is -(x1^2) while
/// "2*-3" is a parse error ("2*(-3)" is the accepted spelling). Exponents
/// are non-negative integers; there is no implicit multiplication.
class Expr {
public:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    Expr() = default;
    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    /// IEEE double evaluation, left-to-right association. Throws EvalError
    /// (carrying the source position) on log of a non-positive value, sqrt
    /// of a negative value, or a variable index beyond x.size().
    double eval(const Eigen::VectorXd& x, double t) const;

    /// Largest variable index referenced (1-based), 0 if none.
    Index max_var_index() const;

    bool uses_time() const;

    const NodePtr& root() const { return root_; }

private:
    NodePtr root_;
};

/// Parses `text` or throws ParseError with the byte offset of the offending
/// character and the expected-token set in the message.
Expr parse(std::string_view text);

/// Minimal-parenthesis rendering; reparsing yields a structurally identical
/// tree.
std::string to_string(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

} // namespace diffbal

#endif // DIFFBAL_EXPR_HPP
