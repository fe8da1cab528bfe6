#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace extinct {

/// Small arithmetic language used by configuration files for custom H and f.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?
///   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Names are bound positionally to the variables passed at parse time. The
/// functions are abs, sqrt, exp, log, pow, sin, cos and norm; `norm` with no
/// arguments is the Euclidean norm of the vector variables (x1..xn or y1..yn).
/// Evaluation rejects non-finite intermediate results, e.g. a negative base
/// raised to a fractional power.
class Expression {
public:
    struct Node;

    /// `variables`: scalar names in binding order. `vector_variables`: the
    /// contiguous sub-range of `variables` that `norm()` acts on.
    static Expression parse(const std::string& text, std::vector<std::string> variables,
                            int vector_begin, int vector_count);

    [[nodiscard]] double eval(std::span<const double> values) const;
    [[nodiscard]] const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
    int vector_begin_ = 0;
    int vector_count_ = 0;
};

}  // namespace extinct
