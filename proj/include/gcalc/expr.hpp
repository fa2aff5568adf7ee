#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gcalc::expr {

/// Variables understood by the coefficient language: time, state, parameter.
enum class Var { t, x, a };

enum class Op {
    constant,
    variable,
    neg,
    sin,
    cos,
    exp,
    tanh,
    add,
    sub,
    mul,
    div,
    pow,
};

/// Raised by parse() with the byte offset of the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, std::string expected, std::string message);

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

/// Raised by parse() for identifiers outside {t, x, a, sin, cos, exp, tanh}.
class UnknownIdentifier : public ParseError {
public:
    UnknownIdentifier(std::size_t offset, std::string name);

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// Division by zero (or a zero base under a negative power) during evaluation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Immutable expression tree. Copies share nodes; safe to read from any thread.
class Expr {
public:
    Expr();  // the constant 0

    static Expr constant(double value);
    static Expr variable(Var v);
    static Expr unary(Op op, Expr arg);
    static Expr binary(Op op, Expr lhs, Expr rhs);
    static Expr power(Expr base, int exponent);

    Op op() const noexcept;
    double value() const noexcept;  // constant nodes
    Var var() const noexcept;       // variable nodes
    int exponent() const noexcept;  // pow nodes
    Expr lhs() const;  // unary argument or left operand
    Expr rhs() const;

    bool is_constant() const noexcept { return op() == Op::constant; }
    bool is_constant(double v) const noexcept { return is_constant() && value() == v; }

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> node);
    std::shared_ptr<const Node> node_;
};

Expr parse(std::string_view source);

double eval(const Expr& e, double t, double x, double a);

/// Exact partial derivative, simplified by constant folding and identity
/// elimination only.
Expr differentiate(const Expr& e, Var var);

/// Prints in the input grammar; parse(to_string(e)) evaluates like e.
std::string to_string(const Expr& e);

bool depends_on(const Expr& e, Var var);

// Folding constructors used by differentiate(); exposed for callers that
// assemble coefficients programmatically.
Expr make_neg(Expr u);
Expr make_add(Expr u, Expr v);
Expr make_sub(Expr u, Expr v);
Expr make_mul(Expr u, Expr v);
Expr make_div(Expr u, Expr v);
Expr make_pow(Expr u, int n);
Expr make_fn(Op fn, Expr u);

/// Integer power by repeated squaring, shared by both evaluators.
double ipow(double base, int n);

/// Flat postfix form of an Expr. Evaluates bit-identically to eval(), several
/// times faster.
class Program {
public:
    Program() = default;
    explicit Program(const Expr& e);

    double operator()(double t, double x, double a) const;

private:
    struct Instr {
        Op op;
        double value;  // constant
        int arg;       // variable index or exponent
    };
    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
};

}  // namespace gcalc::expr
