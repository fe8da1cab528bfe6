#include "doctest.h"
#include "support/battery.hpp"

#include "extinct/analysis.hpp"
#include "extinct/error.hpp"
#include "extinct/oracle.hpp"

#include <cmath>

using namespace extinct;
using battery::mat;
using battery::vec;

TEST_CASE("scalar closed form") {
    CHECK(oracle::scalar_closed_form(1.0, 2.0, 2.0, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(oracle::scalar_closed_form(1.0, 2.0, 2.0, 0.0) == 2.0);
    CHECK(oracle::scalar_closed_form(1.0, 2.0, 2.0, 2.0) == 0.0);
    CHECK(oracle::scalar_closed_form(1.0, 2.0, -2.0, 1.0) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
    CHECK(oracle::scalar_extinction_time(1.0, 2.0, 2.0) == 2.0);
    CHECK(oracle::scalar_closed_form_remaining(1.0, 2.0, 2.0, 1.0) == doctest::Approx(std::sqrt(2.0)));
    bool raised = false;
    try {
        oracle::scalar_closed_form(1.0, 2.0, 2.0, 2.5);
    } catch (const Error& e) {
        raised = e.kind() == ErrorKind::BeyondExtinction;
    }
    CHECK(raised);
}

TEST_CASE("special-case profile without forcing") {
    const double a = 1.0, alpha = 2.0;
    const auto sys = make_system(validate_and_decompose(Matrix::Identity(2, 2)), catalog::power_norm(2, a, alpha));
    const Vector y0 = vec({2, 0});
    const auto tr = integrate_desingularized(sys, y0, 0.0);
    const auto p = oracle::special_case_profile(a, alpha, y0, tr, perturbation::none());
    CHECK(p.J_star == 0.0);
    CHECK(p.eta_star.norm() == 0.0);
    for (double g : p.g_of_t) CHECK(g == 0.0);
    CHECK((p.xi_star - vec({std::sqrt(2.0), 0})).norm() < 1e-9);
    CHECK(p.xi_star.norm() == doctest::Approx(std::pow(alpha * a, 1.0 / alpha)).epsilon(1e-9));
}

TEST_CASE("special-case profile with rate-bounded forcing keeps the norm law") {
    struct Run {
        double a, alpha;
        PerturbationSpec pert;
        Vector y0;
    };
    const std::vector<Run> runs{
        {1.0, 1.0, perturbation::fixed_direction(vec({1, 0}), 0.2, 1.0, 0.5), vec({0.6, 0.8})},
        {2.0, 0.5, perturbation::rotational(2, 0.3, 0.5, 1.0), vec({-0.5, 0.4})},
        {0.5, 2.0, perturbation::oscillating(vec({1, 1}), 0.1, 3.0, 2.0, 0.5), vec({1.0, -0.2})},
    };
    for (const auto& r : runs) {
        const auto sd = validate_and_decompose(Matrix::Identity(2, 2));
        const auto H = catalog::power_norm(2, r.a, r.alpha);
        const auto sys = make_system(sd, H, r.pert);
        const auto tr = integrate_desingularized(sys, r.y0, 0.0);
        const auto p = oracle::special_case_profile(r.a, r.alpha, r.y0, tr, r.pert);
        const double expected = std::pow(r.alpha * r.a, 1.0 / r.alpha);
        CHECK(p.xi_star.norm() == doctest::Approx(expected).epsilon(1e-6));
        // xi_err does not cover the error of the trajectory itself.
        CHECK(std::abs(p.xi_star.norm() - expected) <= p.xi_err + 10.0 * tr.rel_tol * expected);
        CHECK(p.quadrature_err < 1e-9);

        // The fitted profile agrees with the quadrature.
        const auto T = analysis::estimate_extinction_time(tr);
        const auto series = analysis::dirichlet_quotient_series(tr, sd);
        const auto match = analysis::identify_eigenvalue(series, sd);
        const auto prof = analysis::estimate_profile(tr, T.T_star, sd, match, H);
        CHECK((prof.xi_star - p.xi_star).norm() < 1e-5 * expected);
    }
}

TEST_CASE("reference integrator") {
    const double a = 1.0, alpha = 2.0;
    const auto sys = make_system(validate_and_decompose(mat(1, {1})), catalog::power_norm(1, a, alpha));
    const auto tr = oracle::reference_integrate(sys, vec({2}), 0.0);
    CHECK(tr.scheme == Scheme::reference);
    const std::size_t stride = std::max<std::size_t>(1, tr.size() / 20);
    int checked = 0;
    for (std::size_t i = 0; i < tr.size(); i += stride, ++checked) {
        const auto& s = tr.samples[i];
        const double exact = oracle::scalar_closed_form_remaining(a, alpha, 2.0, s.remaining);
        CHECK(std::abs(s.y(0) - exact) <= 1e-10 * std::abs(exact));
    }
    CHECK(checked >= 20);
    CHECK(tr.t_star_est == doctest::Approx(2.0).epsilon(1e-10));

    const auto ds = integrate_desingularized(sys, vec({2}), 0.0);
    CHECK(std::abs(ds.t_star_est - tr.t_star_est) <= ds.t_star_err + tr.t_star_err);

    CHECK_THROWS_AS(oracle::reference_integrate(sys, vec({2}), 0.0, 1e-6), Error);
}

TEST_CASE("reference run pins the profile of diag(1, 2)") {
    const auto sd = validate_and_decompose(mat(2, {1, 0, 0, 2}));
    const auto H = catalog::power_norm(2, 1.0, 1.0);
    const auto tr = oracle::reference_integrate(make_system(sd, H), vec({1, 1}), 0.0);
    const auto T = analysis::estimate_extinction_time(tr);
    const auto series = analysis::dirichlet_quotient_series(tr, sd);
    const auto match = analysis::identify_eigenvalue(series, sd);
    CHECK(match.Lambda == 1.0);
    const auto prof = analysis::estimate_profile(tr, T.T_star, sd, match, H);
    CHECK((prof.xi_star - vec({1, 0})).norm() < 1e-4);
    CHECK(prof.residual_xiHA <= 1e-4);
}
