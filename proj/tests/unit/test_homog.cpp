#include "doctest.h"
#include "support/battery.hpp"

#include "extinct/error.hpp"
#include "extinct/expression.hpp"
#include "extinct/homog.hpp"

#include <cmath>

using namespace extinct;
using battery::mat;
using battery::vec;

TEST_CASE("checked evaluation") {
    CHECK(eval(catalog::power_norm(2, 1.0, 1.0), vec({3, 4})) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(eval(catalog::root_sum(), vec({1, 0})) == doctest::Approx(1.0).epsilon(1e-15));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(eval(catalog::root_sum(), vec({r, r})) == doctest::Approx(std::pow(2.0, 0.75)).epsilon(1e-14));
    CHECK_THROWS_AS(eval(catalog::root_sum(), vec({0, 0})), Error);
    CHECK_THROWS_AS(eval(catalog::root_sum(), vec({1, 0, 0})), Error);
}

TEST_CASE("homogeneity degree of catalog entries") {
    CHECK(estimate_degree(catalog::power_norm(3, 2.0, 0.5)).degree == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::abs(estimate_degree(catalog::nested_power()).degree + 1.0 / 16.0) < 1e-9);
    CHECK(std::abs(estimate_degree(catalog::root_sum()).degree + 0.5) < 1e-9);
    CHECK(std::abs(estimate_degree(catalog::quartic()).degree + 12.0) < 1e-9);
    CHECK(std::abs(estimate_degree(catalog::weighted_pnorm({1, 2, 3}, 3.0, 1.5)).degree + 1.5) < 1e-9);
}

TEST_CASE("a non-homogeneous expression is rejected") {
    bool raised = false;
    try {
        from_expression("1/(abs(x1) + 1) + norm()^(-1)", 2, 1.0);
    } catch (const Error& e) {
        raised = e.kind() == ErrorKind::NotHomogeneous;
    }
    CHECK(raised);
}

TEST_CASE("sphere extrema") {
    const auto s = sphere_extrema(catalog::power_norm(3, 2.5, 1.0));
    CHECK(s.c1 == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(s.c2 == doctest::Approx(2.5).epsilon(1e-14));
    const auto c = sphere_extrema(catalog::root_sum());
    CHECK(c.c1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.c2 == doctest::Approx(std::pow(2.0, 0.75)).epsilon(1e-9));
    // On the unit circle x1^4 + 5 x2^4 ranges over [5/6, 5].
    const auto a1 = sphere_extrema(catalog::quartic());
    CHECK(a1.c1 == doctest::Approx(0.008).epsilon(1e-9));
    CHECK(a1.c2 == doctest::Approx(1.728).epsilon(1e-9));
    const auto negative = HomogeneousFn("negative", 2, 1.0, [](const Vector& x) { return -1.0 / x.norm(); });
    bool raised = false;
    try {
        sphere_extrema(negative);
    } catch (const Error& e) {
        raised = e.kind() == ErrorKind::NonpositiveValue;
    }
    CHECK(raised);
}

TEST_CASE("Hoelder probes") {
    for (const Vector& x0 : {vec({1, 0}), vec({0, -1})}) {
        const auto p = probe_holder(catalog::root_sum(), x0);
        CHECK(p.gamma_est >= 0.45);
        CHECK(p.gamma_est <= 0.55);
        CHECK_FALSE(p.degenerate);
    }
    const Vector generic = vec({0.6, 0.8});
    CHECK(probe_holder(catalog::quartic(), generic).gamma_est >= 0.9);
    CHECK(probe_holder(catalog::nested_power(), generic).gamma_est >= 0.9);
    const auto flat = probe_holder(catalog::power_norm(2, 1.0, 1.0), generic);
    CHECK(flat.degenerate);
    CHECK(flat.C_est == 0.0);
}

TEST_CASE("composition with a linear map") {
    const auto H = catalog::root_sum();
    const auto same = compose_linear(H, Matrix::Identity(2, 2));
    const auto inv = compose_linear(catalog::power_norm(2, 1.0, 1.0), 2.0 * Matrix::Identity(2, 2));
    const Matrix S = mat(2, {2, 1, 0.5, 3});
    const auto Ht = compose_linear(H, S.inverse());
    for (const auto& x : random_unit_vectors(2, 20, 3)) {
        CHECK(same(x) == H(x));
        CHECK(inv(x) == doctest::Approx(0.5 / x.norm()).epsilon(1e-14));
        CHECK(Ht(S * x) == doctest::Approx(H(x)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(compose_linear(H, mat(2, {1, 2, 2, 4})), Error);
}

TEST_CASE("expression H agrees with the catalog") {
    const auto e = from_expression("(sqrt(abs(x1)) + sqrt(abs(x2))) / norm()", 2, 0.5);
    const auto c = catalog::root_sum();
    for (const auto& x : random_unit_vectors(2, 20, 9)) {
        CHECK(e(3.0 * x) == doctest::Approx(c(3.0 * x)).epsilon(1e-14));
    }
}

TEST_CASE("expression language") {
    const std::vector<std::string> vars{"t", "y1", "y2"};
    const auto ev = [&](const std::string& s, std::vector<double> v) {
        return Expression::parse(s, vars, 1, 2).eval(v);
    };
    CHECK(ev("1 + 2 * 3", {0, 0, 0}) == 7.0);
    CHECK(ev("-2^2", {0, 0, 0}) == -4.0);
    CHECK(ev("2^-1", {0, 0, 0}) == 0.5);
    CHECK(ev("(1 + 2) * 3 - 4 / 2", {0, 0, 0}) == 7.0);
    CHECK(ev("norm()", {5, 3, 4}) == 5.0);
    CHECK(ev("pow(y1, 2) + cos(t)", {0, 3, 0}) == 10.0);
    CHECK(ev("exp(log(y2))", {0, 0, 2}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(Expression::parse("1 +", vars, 1, 2), Error);
    CHECK_THROWS_AS(Expression::parse("z1", vars, 1, 2), Error);
    CHECK_THROWS_AS(Expression::parse("foo(1)", vars, 1, 2), Error);
    CHECK_THROWS_AS(ev("y1^0.5", {0, -1, 0}), Error);
    CHECK_THROWS_AS(ev("1 / y1", {0, 0, 0}), Error);
}
