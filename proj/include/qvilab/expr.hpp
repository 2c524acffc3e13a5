// Scalar expression parser and evaluator for problem data (H, h, ell, g).
//
// Grammar (whitespace insensitive):
//
//   expr    := term { ('+' | '-') term }
//   term    := unary { ('*' | '/') unary }
//   unary   := ('-' | '+') unary | power
//   power   := primary [ '^' unary ]          right associative
//   primary := number | name | name '(' expr { ',' expr } ')' | '(' expr ')'
//
// Expressions compile to a postfix program over numbered variable slots, so
// evaluation allocates nothing and an Expr can be shared between threads.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qvi {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " at position " + std::to_string(position)),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class UndeclaredVariable : public ParseError {
public:
    UndeclaredVariable(const std::string& name, std::size_t position)
        : ParseError("undeclared variable '" + name + "'", position), name_(name) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// Raised when a function or operator is applied outside its domain.
class DomainError : public std::runtime_error {
public:
    DomainError(std::string function, double argument)
        : std::runtime_error(describe(function, argument)),
          function_(std::move(function)), argument_(argument) {}

    DomainError(const DomainError& cause, const std::string& context)
        : std::runtime_error(std::string(cause.what()) + " " + context),
          function_(cause.function_), argument_(cause.argument_) {}

    const std::string& function() const noexcept { return function_; }
    double argument() const noexcept { return argument_; }

private:
    static std::string describe(const std::string& function, double argument) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", argument);
        return "domain error in " + function + " (argument " + buf + ")";
    }

    std::string function_;
    double argument_;
};

/// Shortest decimal form that parses back to the same double.
inline std::string format_real(double value) {
    char buf[32];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

class Expr {
public:
    enum class Op : unsigned char {
        constant, variable, neg, add, sub, mul, div, pow,
        exp, log, sqrt, abs, sin, cos, sign, min, max
    };

    static constexpr std::size_t max_stack = 64;

    /// The constant zero with no variables.
    Expr() : Expr(std::make_shared<Impl>()) {
        impl_->nodes.push_back({Op::constant, 0.0, -1, -1, -1});
        impl_->root = 0;
        compile();
    }

    /// Parses `source`; every identifier must appear in `variables`, and the
    /// position of a name in that list is its evaluation slot.
    static Expr parse(std::string_view source, std::vector<std::string> variables) {
        auto impl = std::make_shared<Impl>();
        impl->source = std::string(source);
        impl->variables = std::move(variables);
        Parser parser{source, *impl};
        impl->root = parser.run();
        Expr e(std::move(impl));
        e.compile();
        return e;
    }

    double eval(std::span<const double> values) const {
        std::array<double, max_stack> stack;
        std::size_t top = 0;
        for (const Instr& ins : impl_->program) {
            switch (ins.op) {
            case Op::constant: stack[top++] = ins.value; break;
            case Op::variable: stack[top++] = values[static_cast<std::size_t>(ins.slot)]; break;
            case Op::neg: stack[top - 1] = -stack[top - 1]; break;
            case Op::add: --top; stack[top - 1] = stack[top - 1] + stack[top]; break;
            case Op::sub: --top; stack[top - 1] = stack[top - 1] - stack[top]; break;
            case Op::mul: --top; stack[top - 1] = stack[top - 1] * stack[top]; break;
            case Op::div:
                --top;
                if (stack[top] == 0.0) throw DomainError("division", stack[top - 1]);
                stack[top - 1] = stack[top - 1] / stack[top];
                break;
            case Op::pow: --top; stack[top - 1] = power(stack[top - 1], stack[top]); break;
            case Op::min: --top; stack[top - 1] = std::min(stack[top - 1], stack[top]); break;
            case Op::max: --top; stack[top - 1] = std::max(stack[top - 1], stack[top]); break;
            default: stack[top - 1] = apply(ins.op, stack[top - 1]); break;
            }
        }
        double result = stack[0];
        if (!std::isfinite(result)) throw DomainError("evaluation", result);
        return result;
    }

    double eval(std::initializer_list<double> values) const {
        return eval(std::span<const double>(values.begin(), values.size()));
    }

    /// Evaluates with named bindings; every variable must be bound.
    double eval(const std::map<std::string, double>& env) const {
        std::vector<double> values(impl_->variables.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            auto it = env.find(impl_->variables[i]);
            if (it == env.end()) {
                if (!depends_on(i)) continue;
                throw std::invalid_argument("unbound variable '" + impl_->variables[i] + "'");
            }
            values[i] = it->second;
        }
        return eval(values);
    }

    const std::vector<std::string>& variables() const noexcept { return impl_->variables; }
    const std::string& source() const noexcept { return impl_->source; }

    bool depends_on(std::size_t slot) const noexcept {
        for (const Instr& ins : impl_->program)
            if (ins.op == Op::variable && ins.slot == static_cast<int>(slot)) return true;
        return false;
    }

    bool depends_on(std::string_view name) const noexcept {
        for (std::size_t i = 0; i < impl_->variables.size(); ++i)
            if (impl_->variables[i] == name && depends_on(i)) return true;
        return false;
    }

    bool is_constant() const noexcept {
        for (const Instr& ins : impl_->program)
            if (ins.op == Op::variable) return false;
        return true;
    }

    /// Substitutes constants for the named variables. The bound names are
    /// removed from the variable list; the remaining slots keep their order.
    Expr bind(const std::map<std::string, double>& constants) const {
        auto impl = std::make_shared<Impl>(*impl_);
        std::vector<int> remap(impl->variables.size(), -1);
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < impl->variables.size(); ++i) {
            if (!constants.count(impl->variables[i])) {
                remap[i] = static_cast<int>(kept.size());
                kept.push_back(impl->variables[i]);
            }
        }
        for (Node& node : impl->nodes) {
            if (node.op != Op::variable) continue;
            const std::string& name = impl_->variables[static_cast<std::size_t>(node.slot)];
            if (auto it = constants.find(name); it != constants.end()) {
                node.op = Op::constant;
                node.value = it->second;
                node.slot = -1;
            } else {
                node.slot = remap[static_cast<std::size_t>(node.slot)];
            }
        }
        impl->variables = std::move(kept);
        Expr e(std::move(impl));
        e.impl_->source = e.to_string();
        e.compile();
        return e;
    }

    /// Fully parenthesised rendering; reparsing it reproduces evaluation
    /// bit for bit.
    std::string to_string() const { return render(impl_->root); }

private:
    struct Node {
        Op op;
        double value;
        int slot;
        int lhs;
        int rhs;
    };

    struct Instr {
        Op op;
        double value;
        int slot;
    };

    struct Impl {
        std::string source;
        std::vector<std::string> variables;
        std::vector<Node> nodes;
        int root = -1;
        std::vector<Instr> program;
    };

    explicit Expr(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    static double power(double base, double exponent) {
        if (base < 0.0 && std::floor(exponent) != exponent) throw DomainError("^", base);
        if (base == 0.0 && exponent < 0.0) throw DomainError("^", base);
        return std::pow(base, exponent);
    }

    static double apply(Op op, double x) {
        switch (op) {
        case Op::exp: return std::exp(x);
        case Op::log:
            if (x <= 0.0) throw DomainError("log", x);
            return std::log(x);
        case Op::sqrt:
            if (x < 0.0) throw DomainError("sqrt", x);
            return std::sqrt(x);
        case Op::abs: return std::fabs(x);
        case Op::sin: return std::sin(x);
        case Op::cos: return std::cos(x);
        case Op::sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        default: return x;
        }
    }

    static const char* name_of(Op op) {
        switch (op) {
        case Op::exp: return "exp";
        case Op::log: return "log";
        case Op::sqrt: return "sqrt";
        case Op::abs: return "abs";
        case Op::sin: return "sin";
        case Op::cos: return "cos";
        case Op::sign: return "sign";
        case Op::min: return "min";
        case Op::max: return "max";
        case Op::add: return "+";
        case Op::sub: return "-";
        case Op::mul: return "*";
        case Op::div: return "/";
        case Op::pow: return "^";
        default: return "?";
        }
    }

    std::string render(int index) const {
        const Node& n = impl_->nodes[static_cast<std::size_t>(index)];
        switch (n.op) {
        case Op::constant: {
            std::string digits = format_real(std::fabs(n.value));
            return std::signbit(n.value) ? "(-" + digits + ")" : digits;
        }
        case Op::variable: return impl_->variables[static_cast<std::size_t>(n.slot)];
        case Op::neg: return "(-" + render(n.lhs) + ")";
        case Op::add: case Op::sub: case Op::mul: case Op::div: case Op::pow:
            return "(" + render(n.lhs) + name_of(n.op) + render(n.rhs) + ")";
        case Op::min: case Op::max:
            return std::string(name_of(n.op)) + "(" + render(n.lhs) + "," + render(n.rhs) + ")";
        default: return std::string(name_of(n.op)) + "(" + render(n.lhs) + ")";
        }
    }

    void compile() {
        impl_->program.clear();
        std::size_t depth = 0, peak = 0;
        emit(impl_->root, depth, peak);
        if (peak > max_stack) throw ParseError("expression nested too deeply", 0);
    }

    void emit(int index, std::size_t& depth, std::size_t& peak) {
        const Node& n = impl_->nodes[static_cast<std::size_t>(index)];
        if (n.lhs >= 0) emit(n.lhs, depth, peak);
        if (n.rhs >= 0) emit(n.rhs, depth, peak);
        if (n.op == Op::constant || n.op == Op::variable) ++depth;
        else if (n.rhs >= 0) --depth;
        peak = std::max(peak, depth);
        impl_->program.push_back({n.op, n.value, n.slot});
    }

    struct Parser {
        std::string_view text;
        Impl& impl;
        std::size_t pos = 0;

        int run() {
            if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
                throw ParseError("empty expression", 0);
            int root = parse_sum();
            skip();
            if (pos != text.size())
                throw ParseError(std::string("unexpected '") + text[pos] + "'", pos);
            return root;
        }

        void skip() {
            while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' ||
                                         text[pos] == '\r' || text[pos] == '\n'))
                ++pos;
        }

        bool accept(char c) {
            skip();
            if (pos < text.size() && text[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        void expect(char c) {
            if (!accept(c)) {
                if (pos >= text.size())
                    throw ParseError(std::string("expected '") + c + "' but input ended", pos);
                throw ParseError(std::string("expected '") + c + "'", pos);
            }
        }

        int node(Op op, double value = 0.0, int slot = -1, int lhs = -1, int rhs = -1) {
            impl.nodes.push_back({op, value, slot, lhs, rhs});
            return static_cast<int>(impl.nodes.size()) - 1;
        }

        int parse_sum() {
            int lhs = parse_product();
            for (;;) {
                if (accept('+')) lhs = node(Op::add, 0, -1, lhs, parse_product());
                else if (accept('-')) lhs = node(Op::sub, 0, -1, lhs, parse_product());
                else return lhs;
            }
        }

        int parse_product() {
            int lhs = parse_unary();
            for (;;) {
                if (accept('*')) lhs = node(Op::mul, 0, -1, lhs, parse_unary());
                else if (accept('/')) lhs = node(Op::div, 0, -1, lhs, parse_unary());
                else return lhs;
            }
        }

        int parse_unary() {
            if (accept('-')) return node(Op::neg, 0, -1, parse_unary());
            if (accept('+')) return parse_unary();
            return parse_power();
        }

        int parse_power() {
            int base = parse_primary();
            if (accept('^')) return node(Op::pow, 0, -1, base, parse_unary());
            return base;
        }

        static bool is_digit(char c) { return c >= '0' && c <= '9'; }
        static bool is_alpha(char c) {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
        }

        int parse_primary() {
            skip();
            if (pos >= text.size()) throw ParseError("unexpected end of input", pos);
            char c = text[pos];
            if (c == '(') {
                ++pos;
                int inner = parse_sum();
                expect(')');
                return inner;
            }
            if (is_digit(c) || c == '.') return parse_number();
            if (is_alpha(c)) return parse_name();
            throw ParseError(std::string("unexpected '") + c + "'", pos);
        }

        int parse_number() {
            std::size_t start = pos;
            while (pos < text.size() && is_digit(text[pos])) ++pos;
            if (pos < text.size() && text[pos] == '.') {
                ++pos;
                while (pos < text.size() && is_digit(text[pos])) ++pos;
            }
            if (pos == start + 1 && text[start] == '.') throw ParseError("malformed number", start);
            if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
                std::size_t mark = pos++;
                if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
                if (pos >= text.size() || !is_digit(text[pos]))
                    throw ParseError("malformed exponent", mark);
                while (pos < text.size() && is_digit(text[pos])) ++pos;
            }
            std::string literal(text.substr(start, pos - start));
            double value = std::strtod(literal.c_str(), nullptr);
            if (!std::isfinite(value)) throw ParseError("number out of range", start);
            return node(Op::constant, value);
        }

        int parse_name() {
            std::size_t start = pos;
            while (pos < text.size() && (is_alpha(text[pos]) || is_digit(text[pos]))) ++pos;
            std::string name(text.substr(start, pos - start));
            skip();
            if (pos < text.size() && text[pos] == '(') {
                ++pos;
                return parse_call(name, start);
            }
            for (std::size_t i = 0; i < impl.variables.size(); ++i)
                if (impl.variables[i] == name) return node(Op::variable, 0, static_cast<int>(i));
            throw UndeclaredVariable(name, start);
        }

        int parse_call(const std::string& name, std::size_t start) {
            static const std::pair<const char*, Op> unary[] = {
                {"exp", Op::exp}, {"log", Op::log}, {"sqrt", Op::sqrt}, {"abs", Op::abs},
                {"sin", Op::sin}, {"cos", Op::cos}, {"sign", Op::sign}};
            std::vector<int> args{parse_sum()};
            while (accept(',')) args.push_back(parse_sum());
            expect(')');
            for (auto& [fname, op] : unary) {
                if (name == fname) {
                    if (args.size() != 1)
                        throw ParseError(name + " takes one argument", start);
                    return node(op, 0, -1, args[0]);
                }
            }
            if (name == "min" || name == "max") {
                if (args.size() < 2) throw ParseError(name + " takes at least two arguments", start);
                Op op = name == "min" ? Op::min : Op::max;
                int acc = args[0];
                for (std::size_t i = 1; i < args.size(); ++i) acc = node(op, 0, -1, acc, args[i]);
                return acc;
            }
            throw ParseError("unknown function '" + name + "'", start);
        }
    };

    std::shared_ptr<Impl> impl_;
};

/// Expression combinator used to build offset problems: (lhs) + (rhs).
inline Expr sum(const Expr& lhs, const Expr& rhs, std::vector<std::string> variables) {
    return Expr::parse("(" + lhs.to_string() + ")+(" + rhs.to_string() + ")", std::move(variables));
}

} // namespace qvi
