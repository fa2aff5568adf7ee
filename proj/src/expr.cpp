#include "gcalc/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

namespace gcalc::expr {

ParseError::ParseError(std::size_t offset, std::string expected, std::string message)
    : std::runtime_error(std::move(message)), offset_(offset), expected_(std::move(expected))
{
}

UnknownIdentifier::UnknownIdentifier(std::size_t offset, std::string name)
    : ParseError(offset, "one of t, x, a, sin, cos, exp, tanh",
                 "unknown identifier '" + name + "' at offset " + std::to_string(offset)),
      name_(std::move(name))
{
}

struct Expr::Node {
    Op op = Op::constant;
    double value = 0.0;
    Var var = Var::x;
    int exponent = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

bool is_unary(Op op)
{
    return op == Op::neg || op == Op::sin || op == Op::cos || op == Op::exp || op == Op::tanh ||
           op == Op::pow;
}

bool is_binary(Op op)
{
    return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div;
}

}  // namespace

Expr::Expr() : Expr(std::make_shared<const Node>()) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value)
{
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(Var v)
{
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->var = v;
    return Expr(std::move(n));
}

Expr Expr::unary(Op op, Expr arg)
{
    if (!is_unary(op) || op == Op::pow) {
        throw std::invalid_argument("Expr::unary: not a unary operator");
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(arg.node_);
    return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs)
{
    if (!is_binary(op)) {
        throw std::invalid_argument("Expr::binary: not a binary operator");
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs.node_);
    n->rhs = std::move(rhs.node_);
    return Expr(std::move(n));
}

Expr Expr::power(Expr base, int exponent)
{
    auto n = std::make_shared<Node>();
    n->op = Op::pow;
    n->exponent = exponent;
    n->lhs = std::move(base.node_);
    return Expr(std::move(n));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
Var Expr::var() const noexcept { return node_->var; }
int Expr::exponent() const noexcept { return node_->exponent; }
Expr Expr::lhs() const
{
    if (!node_->lhs) throw std::logic_error("Expr::lhs: leaf node");
    return Expr(node_->lhs);
}

Expr Expr::rhs() const
{
    if (!node_->rhs) throw std::logic_error("Expr::rhs: node has no right operand");
    return Expr(node_->rhs);
}

//---------------------------------------------------------------------------//
// Parser
//---------------------------------------------------------------------------//

namespace {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Expr parse_all()
    {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) {
            fail("operator or end of input");
        }
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& expected) const
    {
        std::string found = pos_ < src_.size() ? "'" + std::string(1, src_[pos_]) + "'"
                                               : std::string("end of input");
        throw ParseError(pos_, expected,
                         "syntax error at offset " + std::to_string(pos_) + ": expected " +
                             expected + ", found " + found);
    }

    void skip_ws()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr parse_expr()
    {
        Expr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = Expr::binary(Op::add, lhs, parse_term());
            } else if (accept('-')) {
                lhs = Expr::binary(Op::sub, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_term()
    {
        Expr lhs = parse_factor();
        for (;;) {
            if (accept('*')) {
                lhs = Expr::binary(Op::mul, lhs, parse_factor());
            } else if (accept('/')) {
                lhs = Expr::binary(Op::div, lhs, parse_factor());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_factor()
    {
        Expr base = parse_base();
        if (accept('^')) {
            return Expr::power(base, parse_integer());
        }
        return base;
    }

    int parse_integer()
    {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
            ++pos_;
        }
        if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            fail("integer exponent");
        }
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
        const char* first = src_.data() + start;
        if (*first == '+') {
            ++first;
        }
        int value = 0;
        auto [ptr, ec] = std::from_chars(first, src_.data() + pos_, value);
        if (ec != std::errc() || ptr != src_.data() + pos_) {
            pos_ = start;
            fail("integer exponent in int range");
        }
        return value;
    }

    Expr parse_number()
    {
        std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t n = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) {
            pos_ = start;
            fail("number");
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                ++pos_;
            }
            if (digits() == 0) {
                pos_ = mark;  // not an exponent; let the caller report
            }
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (ec != std::errc() || ptr != src_.data() + pos_) {
            pos_ = start;
            fail("finite number");
        }
        return Expr::constant(value);
    }

    Expr parse_base()
    {
        skip_ws();
        if (pos_ >= src_.size()) {
            fail("number, variable, function or '('");
        }
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return parse_number();
        }
        if (c == '(') {
            ++pos_;
            Expr inner = parse_expr();
            if (!accept(')')) {
                fail("')'");
            }
            return inner;
        }
        if (c == '-') {
            ++pos_;
            return Expr::unary(Op::neg, parse_base());
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                          src_[pos_] == '_')) {
                ++pos_;
            }
            std::string_view name = src_.substr(start, pos_ - start);
            if (name == "t") return Expr::variable(Var::t);
            if (name == "x") return Expr::variable(Var::x);
            if (name == "a") return Expr::variable(Var::a);
            Op fn;
            if (name == "sin") {
                fn = Op::sin;
            } else if (name == "cos") {
                fn = Op::cos;
            } else if (name == "exp") {
                fn = Op::exp;
            } else if (name == "tanh") {
                fn = Op::tanh;
            } else {
                throw UnknownIdentifier(start, std::string(name));
            }
            if (!accept('(')) {
                fail("'(' after function name");
            }
            Expr arg = parse_expr();
            if (!accept(')')) {
                fail("')'");
            }
            return Expr::unary(fn, arg);
        }
        fail("number, variable, function or '('");
    }
};

}  // namespace

Expr parse(std::string_view source)
{
    return Parser(source).parse_all();
}

//---------------------------------------------------------------------------//
// Evaluation
//---------------------------------------------------------------------------//

double ipow(double base, int n)
{
    if (n < 0) {
        if (base == 0.0) {
            throw DomainError("zero raised to a negative power");
        }
        return 1.0 / ipow(base, -n);
    }
    double result = 1.0;
    unsigned k = static_cast<unsigned>(n);
    while (k != 0) {
        if (k & 1u) {
            result *= base;
        }
        k >>= 1u;
        if (k != 0) {
            base *= base;
        }
    }
    return result;
}

namespace {

inline double divide(double num, double den)
{
    if (den == 0.0) {
        throw DomainError("division by zero");
    }
    return num / den;
}

inline double apply_unary(Op op, double u)
{
    switch (op) {
    case Op::neg: return -u;
    case Op::sin: return std::sin(u);
    case Op::cos: return std::cos(u);
    case Op::exp: return std::exp(u);
    case Op::tanh: return std::tanh(u);
    default: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline double apply_binary(Op op, double u, double v)
{
    switch (op) {
    case Op::add: return u + v;
    case Op::sub: return u - v;
    case Op::mul: return u * v;
    case Op::div: return divide(u, v);
    default: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline double variable_value(Var v, double t, double x, double a)
{
    switch (v) {
    case Var::t: return t;
    case Var::x: return x;
    case Var::a: return a;
    }
    return 0.0;
}

}  // namespace

double eval(const Expr& e, double t, double x, double a)
{
    switch (e.op()) {
    case Op::constant: return e.value();
    case Op::variable: return variable_value(e.var(), t, x, a);
    case Op::pow: return ipow(eval(e.lhs(), t, x, a), e.exponent());
    case Op::neg:
    case Op::sin:
    case Op::cos:
    case Op::exp:
    case Op::tanh: return apply_unary(e.op(), eval(e.lhs(), t, x, a));
    default: {
        double u = eval(e.lhs(), t, x, a);
        double v = eval(e.rhs(), t, x, a);
        return apply_binary(e.op(), u, v);
    }
    }
}

//---------------------------------------------------------------------------//
// Folding constructors and differentiation
//---------------------------------------------------------------------------//

Expr make_neg(Expr u)
{
    if (u.is_constant()) return Expr::constant(-u.value());
    if (u.op() == Op::neg) return u.lhs();
    return Expr::unary(Op::neg, std::move(u));
}

Expr make_add(Expr u, Expr v)
{
    if (u.is_constant() && v.is_constant()) return Expr::constant(u.value() + v.value());
    if (u.is_constant(0.0)) return v;
    if (v.is_constant(0.0)) return u;
    return Expr::binary(Op::add, std::move(u), std::move(v));
}

Expr make_sub(Expr u, Expr v)
{
    if (u.is_constant() && v.is_constant()) return Expr::constant(u.value() - v.value());
    if (v.is_constant(0.0)) return u;
    if (u.is_constant(0.0)) return make_neg(std::move(v));
    return Expr::binary(Op::sub, std::move(u), std::move(v));
}

Expr make_mul(Expr u, Expr v)
{
    if (u.is_constant() && v.is_constant()) return Expr::constant(u.value() * v.value());
    if (u.is_constant(0.0) || v.is_constant(0.0)) return Expr::constant(0.0);
    if (u.is_constant(1.0)) return v;
    if (v.is_constant(1.0)) return u;
    if (u.is_constant(-1.0)) return make_neg(std::move(v));
    if (v.is_constant(-1.0)) return make_neg(std::move(u));
    return Expr::binary(Op::mul, std::move(u), std::move(v));
}

Expr make_div(Expr u, Expr v)
{
    if (u.is_constant() && v.is_constant() && v.value() != 0.0) {
        return Expr::constant(u.value() / v.value());
    }
    if (u.is_constant(0.0) && !v.is_constant(0.0)) return Expr::constant(0.0);
    if (v.is_constant(1.0)) return u;
    return Expr::binary(Op::div, std::move(u), std::move(v));
}

Expr make_pow(Expr u, int n)
{
    if (n == 0) return Expr::constant(1.0);
    if (n == 1) return u;
    if (u.is_constant() && (n > 0 || u.value() != 0.0)) {
        return Expr::constant(ipow(u.value(), n));
    }
    return Expr::power(std::move(u), n);
}

Expr make_fn(Op fn, Expr u)
{
    if (u.is_constant()) return Expr::constant(apply_unary(fn, u.value()));
    return Expr::unary(fn, std::move(u));
}

Expr differentiate(const Expr& e, Var var)
{
    switch (e.op()) {
    case Op::constant: return Expr::constant(0.0);
    case Op::variable: return Expr::constant(e.var() == var ? 1.0 : 0.0);
    case Op::neg: return make_neg(differentiate(e.lhs(), var));
    case Op::sin:
        return make_mul(make_fn(Op::cos, e.lhs()), differentiate(e.lhs(), var));
    case Op::cos:
        return make_mul(make_neg(make_fn(Op::sin, e.lhs())), differentiate(e.lhs(), var));
    case Op::exp:
        return make_mul(make_fn(Op::exp, e.lhs()), differentiate(e.lhs(), var));
    case Op::tanh:
        return make_mul(make_sub(Expr::constant(1.0), make_pow(make_fn(Op::tanh, e.lhs()), 2)),
                        differentiate(e.lhs(), var));
    case Op::add:
        return make_add(differentiate(e.lhs(), var), differentiate(e.rhs(), var));
    case Op::sub:
        return make_sub(differentiate(e.lhs(), var), differentiate(e.rhs(), var));
    case Op::mul:
        return make_add(make_mul(differentiate(e.lhs(), var), e.rhs()),
                        make_mul(e.lhs(), differentiate(e.rhs(), var)));
    case Op::div: {
        Expr num = make_sub(make_mul(differentiate(e.lhs(), var), e.rhs()),
                            make_mul(e.lhs(), differentiate(e.rhs(), var)));
        return make_div(std::move(num), make_pow(e.rhs(), 2));
    }
    case Op::pow: {
        int n = e.exponent();
        return make_mul(make_mul(Expr::constant(static_cast<double>(n)), make_pow(e.lhs(), n - 1)),
                        differentiate(e.lhs(), var));
    }
    }
    return Expr::constant(0.0);
}

bool depends_on(const Expr& e, Var var)
{
    switch (e.op()) {
    case Op::constant: return false;
    case Op::variable: return e.var() == var;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: return depends_on(e.lhs(), var) || depends_on(e.rhs(), var);
    default: return depends_on(e.lhs(), var);
    }
}

//---------------------------------------------------------------------------//
// Printing
//---------------------------------------------------------------------------//

namespace {

void print(const Expr& e, std::string& out)
{
    switch (e.op()) {
    case Op::constant: {
        double v = e.value();
        std::array<char, 32> buf{};
        auto res = std::to_chars(buf.data(), buf.data() + buf.size(), std::fabs(v));
        std::string digits(buf.data(), res.ptr);
        if (std::signbit(v)) {
            out += "(-" + digits + ")";
        } else {
            out += digits;
        }
        return;
    }
    case Op::variable:
        out += e.var() == Var::t ? "t" : e.var() == Var::x ? "x" : "a";
        return;
    case Op::neg:
        out += "(-";
        print(e.lhs(), out);
        out += ")";
        return;
    case Op::sin:
    case Op::cos:
    case Op::exp:
    case Op::tanh:
        out += e.op() == Op::sin ? "sin(" : e.op() == Op::cos ? "cos(" : e.op() == Op::exp ? "exp(" : "tanh(";
        print(e.lhs(), out);
        out += ")";
        return;
    case Op::pow:
        out += "(";
        print(e.lhs(), out);
        out += ")^" + std::to_string(e.exponent());
        return;
    default: {
        const char* sym = e.op() == Op::add ? " + " : e.op() == Op::sub ? " - " : e.op() == Op::mul ? "*" : "/";
        out += "(";
        print(e.lhs(), out);
        out += sym;
        print(e.rhs(), out);
        out += ")";
        return;
    }
    }
}

}  // namespace

std::string to_string(const Expr& e)
{
    std::string out;
    print(e, out);
    return out;
}

//---------------------------------------------------------------------------//
// Program
//---------------------------------------------------------------------------//

Program::Program(const Expr& e)
{
    // Post-order walk; operands are pushed in the same order eval() visits them.
    std::size_t depth = 0;
    auto walk = [&](auto&& self, const Expr& node) -> void {
        switch (node.op()) {
        case Op::constant:
            code_.push_back({Op::constant, node.value(), 0});
            ++depth;
            break;
        case Op::variable:
            code_.push_back({Op::variable, 0.0, static_cast<int>(node.var())});
            ++depth;
            break;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div:
            self(self, node.lhs());
            self(self, node.rhs());
            code_.push_back({node.op(), 0.0, 0});
            --depth;
            break;
        default:
            self(self, node.lhs());
            code_.push_back({node.op(), 0.0, node.exponent()});
            break;
        }
        max_depth_ = std::max(max_depth_, depth);
    };
    walk(walk, e);
}

double Program::operator()(double t, double x, double a) const
{
    constexpr std::size_t kInline = 32;
    std::array<double, kInline> fixed;
    std::vector<double> heap;
    double* stack = fixed.data();
    if (max_depth_ > kInline) {
        heap.resize(max_depth_);
        stack = heap.data();
    }
    std::size_t sp = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::constant: stack[sp++] = in.value; break;
        case Op::variable: stack[sp++] = variable_value(static_cast<Var>(in.arg), t, x, a); break;
        case Op::pow: stack[sp - 1] = ipow(stack[sp - 1], in.arg); break;
        case Op::neg:
        case Op::sin:
        case Op::cos:
        case Op::exp:
        case Op::tanh: stack[sp - 1] = apply_unary(in.op, stack[sp - 1]); break;
        default:
            --sp;
            stack[sp - 1] = apply_binary(in.op, stack[sp - 1], stack[sp]);
            break;
        }
    }
    return sp == 0 ? 0.0 : stack[0];
}

}  // namespace gcalc::expr
