#include "diffbal/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace diffbal {

enum class Func { sin, cos, tan, exp, log, tanh, sqrt };

struct Expr::Node {
    enum class Kind { number, var, time, neg, add, sub, mul, div, pow_int, call };

    Kind kind;
    std::size_t pos = 0;  // source byte offset

    double value = 0.0;   // number
    Index var_index = 0;  // var, 1-based
    int exponent = 0;     // pow_int
    Func func = Func::sin;

    NodePtr a;
    NodePtr b;
};

namespace {

using Node = Expr::Node;
using NodePtr = Expr::NodePtr;
using Kind = Node::Kind;

std::shared_ptr<Node> make_node(Kind kind, std::size_t pos) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->pos = pos;
    return n;
}

const char* func_name(Func f) {
    switch (f) {
        case Func::sin: return "sin";
        case Func::cos: return "cos";
        case Func::tan: return "tan";
        case Func::exp: return "exp";
        case Func::log: return "log";
        case Func::tanh: return "tanh";
        case Func::sqrt: return "sqrt";
    }
    return "?";
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr run() {
        NodePtr e = parse_expr();
        skip_ws();
        if (pos_ < text_.size()) {
            fail("trailing input; expected end of expression, '+', '-', '*' or '/'");
        }
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& expected) const {
        const std::string got =
            pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'"
                                : "end of input";
        throw ParseError("parse error at offset " + std::to_string(pos_) + ": " +
                             expected + " (got " + got + ")",
                         pos_);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    NodePtr parse_expr() {
        NodePtr left = parse_term();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (accept('+')) {
                auto n = make_node(Kind::add, at);
                n->a = left;
                n->b = parse_term();
                left = n;
            } else if (accept('-')) {
                auto n = make_node(Kind::sub, at);
                n->a = left;
                n->b = parse_term();
                left = n;
            } else {
                return left;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr left = parse_unary();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (accept('*')) {
                auto n = make_node(Kind::mul, at);
                n->a = left;
                n->b = parse_power();
                left = n;
            } else if (accept('/')) {
                auto n = make_node(Kind::div, at);
                n->a = left;
                n->b = parse_power();
                left = n;
            } else {
                return left;
            }
        }
    }

    NodePtr parse_unary() {
        skip_ws();
        const std::size_t at = pos_;
        if (accept('-')) {
            auto n = make_node(Kind::neg, at);
            n->a = parse_unary();
            return n;
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '^') {
            const std::size_t at = pos_;
            ++pos_;
            skip_ws();
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                fail("expected a non-negative integer exponent after '^'");
            }
            long v = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                v = v * 10 + (text_[pos_] - '0');
                if (v > 1000000) fail("exponent too large");
                ++pos_;
            }
            auto n = make_node(Kind::pow_int, at);
            n->a = base;
            n->exponent = static_cast<int>(v);
            return n;
        }
        return base;
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("expected a number, variable 'x<i>', 't', '(' or a function");
        }
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            return parse_number();
        }
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!accept(')')) {
                fail("expected ')'");
            }
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return parse_identifier();
        }
        fail("expected a number, variable 'x<i>', 't', '(' or a function");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
                ++pos_;
            }
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() &&
                       std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                    ++pos_;
                }
            } else {
                // not an exponent after all ("1e" could start an identifier
                // elsewhere, which the grammar does not allow -> error)
                pos_ = mark;
                fail("expected digits in exponent");
            }
        }
        const std::string token(text_.substr(start, pos_ - start));
        auto n = make_node(Kind::number, start);
        n->value = std::strtod(token.c_str(), nullptr);
        return n;
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        const std::string_view name = text_.substr(start, pos_ - start);

        if (name == "x") {
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                pos_ = start;
                fail("expected a 1-based index after 'x'");
            }
            long idx = 0;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                idx = idx * 10 + (text_[pos_] - '0');
                if (idx > 1000000) fail("variable index too large");
                ++pos_;
            }
            if (idx < 1) {
                pos_ = start;
                fail("variable indices are 1-based ('x1' is the first state)");
            }
            auto n = make_node(Kind::var, start);
            n->var_index = static_cast<Index>(idx);
            return n;
        }
        if (name == "t") {
            return make_node(Kind::time, start);
        }

        static constexpr Func kFuncs[] = {Func::sin, Func::cos, Func::tan, Func::exp,
                                          Func::log, Func::tanh, Func::sqrt};
        for (Func f : kFuncs) {
            if (name == func_name(f)) {
                if (!accept('(')) {
                    fail("expected '(' after function name");
                }
                NodePtr arg = parse_expr();
                if (!accept(')')) {
                    fail("expected ')'");
                }
                auto n = make_node(Kind::call, start);
                n->func = f;
                n->a = arg;
                return n;
            }
        }
        pos_ = start;
        fail("unknown identifier '" + std::string(name) +
             "'; expected x<i>, t, or one of sin, cos, tan, exp, log, tanh, sqrt");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

double eval_node(const Node& n, const Eigen::VectorXd& x, double t) {
    switch (n.kind) {
        case Kind::number:
            return n.value;
        case Kind::var:
            if (n.var_index > x.size()) {
                throw EvalError("variable x" + std::to_string(n.var_index) +
                                    " out of bounds at offset " + std::to_string(n.pos),
                                static_cast<std::ptrdiff_t>(n.pos));
            }
            return x[n.var_index - 1];
        case Kind::time:
            return t;
        case Kind::neg:
            return -eval_node(*n.a, x, t);
        case Kind::add:
            return eval_node(*n.a, x, t) + eval_node(*n.b, x, t);
        case Kind::sub:
            return eval_node(*n.a, x, t) - eval_node(*n.b, x, t);
        case Kind::mul:
            return eval_node(*n.a, x, t) * eval_node(*n.b, x, t);
        case Kind::div:
            return eval_node(*n.a, x, t) / eval_node(*n.b, x, t);
        case Kind::pow_int: {
            const double v = eval_node(*n.a, x, t);
            double r = 1.0;
            for (int i = 0; i < n.exponent; ++i) r *= v;
            return r;
        }
        case Kind::call: {
            const double v = eval_node(*n.a, x, t);
            switch (n.func) {
                case Func::sin: return std::sin(v);
                case Func::cos: return std::cos(v);
                case Func::tan: return std::tan(v);
                case Func::exp: return std::exp(v);
                case Func::tanh: return std::tanh(v);
                case Func::log:
                    if (!(v > 0.0)) {
                        throw EvalError("log of non-positive value at offset " +
                                            std::to_string(n.pos),
                                        static_cast<std::ptrdiff_t>(n.pos));
                    }
                    return std::log(v);
                case Func::sqrt:
                    if (v < 0.0) {
                        throw EvalError("sqrt of negative value at offset " +
                                            std::to_string(n.pos),
                                        static_cast<std::ptrdiff_t>(n.pos));
                    }
                    return std::sqrt(v);
            }
            break;
        }
    }
    throw EvalError("corrupt expression node", 0);
}

int precedence(Kind k) {
    switch (k) {
        case Kind::add:
        case Kind::sub:
            return 1;
        case Kind::mul:
        case Kind::div:
            return 2;
        case Kind::neg:
            return 3;
        case Kind::pow_int:
            return 4;
        default:
            return 5;
    }
}

void print_node(const Node& n, int min_prec, std::string& out) {
    const bool parens = precedence(n.kind) < min_prec;
    if (parens) out += '(';
    switch (n.kind) {
        case Kind::number: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", n.value);
            out += buf;
            break;
        }
        case Kind::var:
            out += 'x';
            out += std::to_string(n.var_index);
            break;
        case Kind::time:
            out += 't';
            break;
        case Kind::neg:
            out += '-';
            print_node(*n.a, 3, out);
            break;
        case Kind::add:
        case Kind::sub:
            print_node(*n.a, 1, out);
            out += n.kind == Kind::add ? '+' : '-';
            print_node(*n.b, 2, out);
            break;
        case Kind::mul:
        case Kind::div:
            print_node(*n.a, 2, out);
            out += n.kind == Kind::mul ? '*' : '/';
            print_node(*n.b, 4, out);
            break;
        case Kind::pow_int:
            print_node(*n.a, 5, out);
            out += '^';
            out += std::to_string(n.exponent);
            break;
        case Kind::call:
            out += func_name(n.func);
            out += '(';
            print_node(*n.a, 0, out);
            out += ')';
            break;
    }
    if (parens) out += ')';
}

bool equal_nodes(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Kind::number:
            return a.value == b.value;
        case Kind::var:
            return a.var_index == b.var_index;
        case Kind::time:
            return true;
        case Kind::neg:
            return equal_nodes(*a.a, *b.a);
        case Kind::pow_int:
            return a.exponent == b.exponent && equal_nodes(*a.a, *b.a);
        case Kind::call:
            return a.func == b.func && equal_nodes(*a.a, *b.a);
        default:
            return equal_nodes(*a.a, *b.a) && equal_nodes(*a.b, *b.b);
    }
}

void scan_vars(const Node& n, Index& max_var, bool& time_used) {
    if (n.kind == Kind::var) max_var = std::max(max_var, n.var_index);
    if (n.kind == Kind::time) time_used = true;
    if (n.a) scan_vars(*n.a, max_var, time_used);
    if (n.b) scan_vars(*n.b, max_var, time_used);
}

} // namespace

double Expr::eval(const Eigen::VectorXd& x, double t) const {
    if (!root_) throw EvalError("empty expression", 0);
    return eval_node(*root_, x, t);
}

Index Expr::max_var_index() const {
    Index max_var = 0;
    bool time_used = false;
    if (root_) scan_vars(*root_, max_var, time_used);
    return max_var;
}

bool Expr::uses_time() const {
    Index max_var = 0;
    bool time_used = false;
    if (root_) scan_vars(*root_, max_var, time_used);
    return time_used;
}

Expr parse(std::string_view text) {
    return Expr(Parser(text).run());
}

std::string to_string(const Expr& e) {
    std::string out;
    if (e.root()) print_node(*e.root(), 0, out);
    return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (!a.root() || !b.root()) return !a.root() && !b.root();
    return equal_nodes(*a.root(), *b.root());
}

} // namespace diffbal
