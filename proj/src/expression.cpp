#include "extinct/expression.hpp"

#include "extinct/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace extinct {

struct Expression::Node {
    enum class Op { Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Abs, Sqrt, Exp, Log, Sin, Cos, Norm };
    Op op = Op::Constant;
    double value = 0.0;
    int index = 0;
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::ParseError, what + " at offset " + std::to_string(pos_) + " in \"" + s_ + "\"");
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Node::Op::Add, lhs, term());
            else if (accept('-')) lhs = make(Node::Op::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Node::Op::Mul, lhs, unary());
            else if (accept('/')) lhs = make(Node::Op::Div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Node::Op::Neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Node::Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of expression");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            auto n = std::make_shared<Node>();
            n->op = Node::Op::Constant;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                ++pos_;
            }
            const std::string name = s_.substr(start, pos_ - start);
            skip();
            if (pos_ < s_.size() && s_[pos_] == '(') {
                ++pos_;
                return call(name);
            }
            for (std::size_t i = 0; i < vars_.size(); ++i) {
                if (vars_[i] == name) {
                    auto n = std::make_shared<Node>();
                    n->op = Node::Op::Variable;
                    n->index = static_cast<int>(i);
                    return n;
                }
            }
            if (name == "pi") {
                auto n = std::make_shared<Node>();
                n->value = M_PI;
                return n;
            }
            pos_ = start;
            fail("unknown name '" + name + "'");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr call(const std::string& name) {
        if (name == "norm") {
            expect(')');
            return make(Node::Op::Norm);
        }
        NodePtr a = expr();
        if (name == "pow") {
            expect(',');
            NodePtr b = expr();
            expect(')');
            return make(Node::Op::Pow, a, b);
        }
        expect(')');
        if (name == "abs") return make(Node::Op::Abs, a);
        if (name == "sqrt") return make(Node::Op::Sqrt, a);
        if (name == "exp") return make(Node::Op::Exp, a);
        if (name == "log") return make(Node::Op::Log, a);
        if (name == "sin") return make(Node::Op::Sin, a);
        if (name == "cos") return make(Node::Op::Cos, a);
        fail("unknown function '" + name + "'");
    }

    std::string s_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

double checked(double v) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonfiniteValue, "expression produced a non-finite value");
    return v;
}

double evaluate(const Node& n, std::span<const double> x, int vb, int vc) {
    switch (n.op) {
        case Node::Op::Constant: return n.value;
        case Node::Op::Variable: return x[static_cast<std::size_t>(n.index)];
        case Node::Op::Neg: return -evaluate(*n.lhs, x, vb, vc);
        case Node::Op::Add: return evaluate(*n.lhs, x, vb, vc) + evaluate(*n.rhs, x, vb, vc);
        case Node::Op::Sub: return evaluate(*n.lhs, x, vb, vc) - evaluate(*n.rhs, x, vb, vc);
        case Node::Op::Mul: return evaluate(*n.lhs, x, vb, vc) * evaluate(*n.rhs, x, vb, vc);
        case Node::Op::Div: return checked(evaluate(*n.lhs, x, vb, vc) / evaluate(*n.rhs, x, vb, vc));
        case Node::Op::Pow: return checked(std::pow(evaluate(*n.lhs, x, vb, vc), evaluate(*n.rhs, x, vb, vc)));
        case Node::Op::Abs: return std::abs(evaluate(*n.lhs, x, vb, vc));
        case Node::Op::Sqrt: return checked(std::sqrt(evaluate(*n.lhs, x, vb, vc)));
        case Node::Op::Exp: return checked(std::exp(evaluate(*n.lhs, x, vb, vc)));
        case Node::Op::Log: return checked(std::log(evaluate(*n.lhs, x, vb, vc)));
        case Node::Op::Sin: return std::sin(evaluate(*n.lhs, x, vb, vc));
        case Node::Op::Cos: return std::cos(evaluate(*n.lhs, x, vb, vc));
        case Node::Op::Norm: {
            double s = 0.0;
            for (int i = 0; i < vc; ++i) s += x[static_cast<std::size_t>(vb + i)] * x[static_cast<std::size_t>(vb + i)];
            return std::sqrt(s);
        }
    }
    return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text, std::vector<std::string> variables,
                             int vector_begin, int vector_count) {
    Expression e;
    e.text_ = text;
    e.root_ = Parser(text, variables).parse();
    e.vector_begin_ = vector_begin;
    e.vector_count_ = vector_count;
    return e;
}

double Expression::eval(std::span<const double> values) const {
    return checked(evaluate(*root_, values, vector_begin_, vector_count_));
}

}  // namespace extinct
