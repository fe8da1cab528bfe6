#include "doctest.h"
#include "support/battery.hpp"

#include "extinct/dynamics.hpp"
#include "extinct/error.hpp"
#include "extinct/oracle.hpp"

#include <cmath>

using namespace extinct;
using battery::mat;
using battery::vec;

namespace {

SystemSpec scalar_system(double a, double alpha) {
    return make_system(validate_and_decompose(mat(1, {1})), catalog::power_norm(1, a, alpha));
}

}  // namespace

TEST_CASE("right-hand side") {
    const auto sys = make_system(validate_and_decompose(Matrix::Identity(2, 2)), catalog::power_norm(2, 1.0, 1.0));
    const Vector r = rhs(sys, 0.0, vec({3, 4}));
    CHECK((r - vec({-0.6, -0.8})).norm() < 1e-15);
    CHECK_THROWS_AS(rhs(sys, 0.0, vec({0, 0})), Error);

    const auto diag = make_system(validate_and_decompose(mat(2, {1, 0, 0, 2})), catalog::root_sum());
    const Vector e = vec({0, 0.7});
    const Vector re = rhs(diag, 0.0, e);
    CHECK((re + 2.0 * eval(diag.H, e) * e).norm() < 1e-15);

    const double alpha = 0.5, delta = 0.5, M = 0.3;
    const auto forced = make_system(validate_and_decompose(mat(2, {2, 1, 1, 3})), catalog::root_sum(),
                                    perturbation::oscillating(vec({1, 2}), M, 3.0, alpha, delta));
    for (const auto& x : random_unit_vectors(2, 20, 4)) {
        for (double scale : {1e-3, 0.1, 2.0}) {
            const Vector y = scale * x;
            const Vector f = rhs(forced, 1.3, y) + eval(forced.H, y) * (forced.sd.A * y);
            CHECK(f.norm() <= M * std::pow(y.norm(), 1.0 - alpha + delta) * (1 + 1e-12));
        }
    }
}

TEST_CASE("make_system validates dimensions") {
    CHECK_THROWS_AS(make_system(validate_and_decompose(Matrix::Identity(3, 3)), catalog::root_sum()), Error);
}

TEST_CASE("transformed system is equivariant") {
    const auto sys = make_system(validate_and_decompose(mat(2, {2, 1, 0, 3})), catalog::root_sum(),
                                 perturbation::fixed_direction(vec({1, 1}), 0.2, 0.5, 0.5));
    const auto zsys = transformed_system(sys);
    for (const auto& x : random_unit_vectors(2, 10, 8)) {
        const Vector z = sys.sd.S * x;
        CHECK(eval(zsys.H, z) == doctest::Approx(eval(sys.H, x)).epsilon(1e-12));
        CHECK((rhs(zsys, 0.4, z) - sys.sd.S * rhs(sys, 0.4, x)).norm() < 1e-12 * z.norm());
    }
}

TEST_CASE("direct integration of the scalar problem") {
    const auto sys = scalar_system(1.0, 2.0);
    const auto tr = integrate_direct(sys, vec({2}), 0.0);
    CHECK(tr.stop_reason == StopReason::extinction_floor);
    CHECK(tr.samples.front().t == 0.0);
    CHECK(tr.t_star_est == doctest::Approx(2.0).epsilon(1e-9));
    for (const auto& s : tr.samples) {
        if (s.t > 1.5) break;
        CHECK(s.y(0) == doctest::Approx(oracle::scalar_closed_form(1.0, 2.0, 2.0, s.t)).epsilon(1e-6));
    }
}

TEST_CASE("eigenvector rays are preserved") {
    const auto sys = make_system(validate_and_decompose(mat(2, {1, 0, 0, 2})), catalog::power_norm(2, 1.0, 1.0));
    for (Scheme scheme : {Scheme::direct, Scheme::desingularized}) {
        const auto tr = scheme == Scheme::direct ? integrate_direct(sys, vec({0, 1}), 0.0)
                                                 : integrate_desingularized(sys, vec({0, 1}), 0.0);
        for (const auto& s : tr.samples) CHECK(std::abs(s.v(0)) < 1e-14);
        CHECK(tr.samples.back().lambda == doctest::Approx(2.0).epsilon(1e-14));
    }
}

TEST_CASE("two-sided envelope over the last two decades") {
    for (const auto& c : battery::systems()) {
        const auto sd = validate_and_decompose(c.A);
        const auto sys = make_system(sd, c.H, c.pert);
        IntegratorOptions opts;
        opts.rho_floor = c.rho_floor;
        const auto tr = integrate_desingularized(sys, c.y0, 0.0, opts);
        const double s_hi = tr.samples[tr.size() / 2].remaining;
        double lo = kInfinity, hi = 0.0;
        for (const auto& s : tr.samples) {
            if (s.remaining > s_hi || s.remaining < 1e-2 * s_hi || s.rho < 1e2 * tr.rho_floor) continue;
            const double ratio = s.y.norm() / std::pow(s.remaining, 1.0 / tr.alpha);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        INFO(c.name);
        CHECK(lo > 0.0);
        CHECK(hi < kInfinity);
        CHECK(hi / lo < 10.0);
    }
}

TEST_CASE("desingularized scalar extinction time") {
    const double a = 1.5, alpha = 0.75, t0 = 0.5;
    const auto sys = scalar_system(a, alpha);
    const Vector y0 = vec({-0.8});
    const auto tr = integrate_desingularized(sys, y0, t0);
    const double rho0 = std::pow(0.8, alpha);
    CHECK(tr.t_star_est == doctest::Approx(t0 + rho0 / (a * alpha)).epsilon(1e-10));
    CHECK(tr.scheme == Scheme::desingularized);
    const auto direct = integrate_direct(sys, y0, t0);
    CHECK(std::abs(direct.t_star_est - tr.t_star_est) <= direct.t_star_err + tr.t_star_err);
}

TEST_CASE("quotient decreases in free symmetric runs") {
    const auto sys = make_system(validate_and_decompose(mat(2, {1, 0, 0, 2})), catalog::power_norm(2, 1.0, 1.0));
    const double r = 1.0 / std::sqrt(2.0);
    const auto tr = integrate_desingularized(sys, vec({r, r}), 0.0);
    CHECK(tr.samples.front().lambda == doctest::Approx(1.5).epsilon(1e-14));
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.samples[i].lambda - tr.samples[i - 1].lambda <= 1e-8);
    CHECK(std::abs(tr.samples.back().v(0)) == doctest::Approx(1.0).epsilon(1e-9));

    for (const auto& c : battery::systems()) {
        const auto sd = validate_and_decompose(c.A);
        if (!sd.is_symmetric || c.pert.active()) continue;
        IntegratorOptions opts;
        opts.rho_floor = c.rho_floor;
        const auto t2 = integrate_desingularized(make_system(sd, c.H), c.y0, 0.0, opts);
        double rise = 0.0;
        for (std::size_t i = 1; i < t2.size(); ++i) {
            rise = std::max(rise, t2.samples[i].lambda - t2.samples[i - 1].lambda);
        }
        INFO(c.name);
        CHECK(rise <= 1e-8);
    }
}

TEST_CASE("extinction radius") {
    const auto sd = validate_and_decompose(2.0 * Matrix::Identity(2, 2));
    auto pert = perturbation::rotational(2, 1.0, 1.0, 1.0);
    pert.c_star = 1.0;
    const auto rad = extinction_radius(make_system(sd, catalog::power_norm(2, 1.0, 1.0), pert));
    CHECK(rad.a0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rad.r0 == doctest::Approx(0.5).epsilon(1e-12));

    const auto free = extinction_radius(make_system(sd, catalog::power_norm(2, 1.0, 1.0)));
    CHECK(free.r0 == kInfinity);

    PerturbationSpec missing;
    missing.kind = PerturbationSpec::Kind::custom;
    missing.evaluator = [](double, const Vector& y) { return Vector(Vector::Zero(y.size())); };
    bool raised = false;
    try {
        extinction_radius(make_system(sd, catalog::power_norm(2, 1.0, 1.0), missing));
    } catch (const Error& e) {
        raised = e.kind() == ErrorKind::MissingBoundConstants;
    }
    CHECK(raised);
}

TEST_CASE("decay bound holds inside the radius") {
    const auto sd = validate_and_decompose(mat(2, {2, 1, 1, 3}));
    const auto sys = make_system(sd, catalog::power_norm(2, 1.0, 1.0), perturbation::rotational(2, 1.0, 1.0, 1.0));
    const auto rad = extinction_radius(sys);
    const Vector y0 = 0.95 * rad.r0 * vec({0.6, 0.8});
    const auto tr = integrate_direct(sys, y0, 0.0);
    CHECK(tr.stop_reason == StopReason::extinction_floor);
    for (const auto& s : tr.samples) {
        CHECK(std::pow(s.y.norm(), 1.0) <= rad.bound(sd, y0, 1.0, s.t - tr.t0) + 1e-9);
    }
}

TEST_CASE("declared bound violations are flagged") {
    const auto sd = validate_and_decompose(Matrix::Identity(2, 2));
    // Actual size 0.5 |y|, declared constant 0.1.
    const auto pert = perturbation::custom({"0.5*y2", "-0.5*y1"}, 0.1, 1.0);
    const auto tr = integrate_direct(make_system(sd, catalog::power_norm(2, 1.0, 1.0), pert), vec({1, 0}), 0.0);
    CHECK(tr.bound_violation);
    const auto ok = perturbation::custom({"0.5*y2", "-0.5*y1"}, 0.5, 1.0);
    const auto t2 = integrate_direct(make_system(sd, catalog::power_norm(2, 1.0, 1.0), ok), vec({1, 0}), 0.0);
    CHECK_FALSE(t2.bound_violation);
}

TEST_CASE("remaining time is consistent with the extinction estimate") {
    const auto sys = scalar_system(2.0, 1.0);
    const auto tr = integrate_desingularized(sys, vec({1}), 0.0);
    for (const auto& s : tr.samples) CHECK(s.remaining >= 0.0);
    CHECK(tr.samples.front().remaining == doctest::Approx(tr.t_star_est - tr.t0).epsilon(1e-14));
    auto shifted = tr;
    shifted.shift_extinction(1e-3);
    CHECK(shifted.t_star_est == tr.t_star_est + 1e-3);
    CHECK(shifted.samples.back().remaining == doctest::Approx(tr.samples.back().remaining + 1e-3));
}

TEST_CASE("step budget stops the integration") {
    IntegratorOptions opts;
    opts.max_steps = 5;
    const auto tr = integrate_direct(scalar_system(1.0, 1.0), vec({1}), 0.0, opts);
    CHECK(tr.stop_reason == StopReason::max_steps);
}
