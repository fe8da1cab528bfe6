#include "doctest.h"
#include "support/battery.hpp"

#include "extinct/analysis.hpp"
#include "extinct/error.hpp"

#include <cmath>

using namespace extinct;
using namespace extinct::analysis;
using battery::mat;
using battery::vec;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::IoError;
}

std::vector<QuotientPoint> synthetic_series(double limit, double start_offset, int count) {
    std::vector<QuotientPoint> out;
    for (int k = 0; k < count; ++k) {
        const double s = std::pow(0.8, k);
        out.push_back({1.0 - s, s, limit + start_offset * s});
    }
    return out;
}

struct Pipeline {
    SpectralData sd;
    Trajectory traj;
    ExtinctionEstimate T;
    EigenvalueMatch match;
    AsymptoticProfile profile;
};

Pipeline pipeline(const Matrix& A, const HomogeneousFn& H, const Vector& y0,
                  const PerturbationSpec& pert = perturbation::none(), const ProfileOptions& po = {}) {
    Pipeline p{validate_and_decompose(A), {}, {}, {}, {}};
    IntegratorOptions opts;
    opts.frame = p.sd.is_symmetric ? Frame::original : Frame::z_coordinates;
    p.traj = integrate_desingularized(make_system(p.sd, H, pert), y0, 0.0, opts);
    p.T = estimate_extinction_time(p.traj);
    p.match = identify_eigenvalue(dirichlet_quotient_series(p.traj, p.sd), p.sd);
    p.profile = estimate_profile(p.traj, p.T.T_star, p.sd, p.match, H, po);
    return p;
}

}  // namespace

TEST_CASE("extinction time of the scalar problem") {
    const auto sys = make_system(validate_and_decompose(mat(1, {1})), catalog::power_norm(1, 1.0, 2.0));
    for (Scheme scheme : {Scheme::direct, Scheme::desingularized}) {
        const auto tr = scheme == Scheme::direct ? integrate_direct(sys, vec({2}), 0.0)
                                                 : integrate_desingularized(sys, vec({2}), 0.0);
        const auto T = estimate_extinction_time(tr);
        CHECK(std::abs(T.T_star - 2.0) <= 1e-8);
        CHECK(std::abs(T.T_star - 2.0) <= T.err + 1e-15);
    }
    auto tr = integrate_desingularized(sys, vec({2}), 0.0);
    tr.samples.resize(10);
    CHECK(kind_of([&] { estimate_extinction_time(tr); }) == ErrorKind::InsufficientSamples);
}

TEST_CASE("halving the tolerance moves T* by less than its error") {
    const auto sd = validate_and_decompose(mat(2, {2, 1, 1, 3}));
    const auto sys = make_system(sd, catalog::root_sum(), perturbation::fixed_direction(vec({1, 0.5}), 0.2, 0.5, 0.5));
    IntegratorOptions coarse, fine;
    fine.rel_tol = coarse.rel_tol / 2;
    const auto a = estimate_extinction_time(integrate_desingularized(sys, vec({0.5, 0.3}), 0.0, coarse));
    const auto b = estimate_extinction_time(integrate_desingularized(sys, vec({0.5, 0.3}), 0.0, fine));
    CHECK(std::abs(a.T_star - b.T_star) < a.err);
}

TEST_CASE("quotient series") {
    const auto sd = validate_and_decompose(mat(2, {1, 0, 0, 2}));
    const auto sys = make_system(sd, catalog::power_norm(2, 1.0, 1.0));
    const auto ray = integrate_desingularized(sys, vec({0, 0.5}), 0.0);
    for (const auto& p : dirichlet_quotient_series(ray, sd)) CHECK(p.lambda == doctest::Approx(2.0).epsilon(1e-15));

    const double r = 1.0 / std::sqrt(2.0);
    const auto tr = integrate_desingularized(sys, vec({r, r}), 0.0);
    const auto series = dirichlet_quotient_series(tr, sd);
    CHECK(series.front().lambda == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(series.back().lambda == doctest::Approx(1.0).epsilon(1e-6));

    const auto nsd = validate_and_decompose(mat(2, {2, 1, 0, 3}));
    const auto orig = integrate_direct(make_system(nsd, catalog::power_norm(2, 1.0, 1.0)), vec({1, 0.5}), 0.0);
    CHECK(kind_of([&] { dirichlet_quotient_series(orig, nsd); }) == ErrorKind::FrameMismatch);
}

TEST_CASE("eigenvalue identification") {
    const auto sd13 = validate_and_decompose(mat(2, {1, 0, 0, 3}));
    const auto m = identify_eigenvalue(synthetic_series(1.0, 0.01, 60), sd13);
    CHECK(m.Lambda == 1.0);
    CHECK(m.index == 0);
    CHECK(m.mu == 2.0);
    CHECK(std::abs(m.tail_average - 1.0) < 1e-3);

    const auto far = synthetic_series(1.9, 0.0, 40);
    CHECK(kind_of([&] { identify_eigenvalue(far, sd13); }) == ErrorKind::AmbiguousEigenvalue);
    const auto middle = synthetic_series(2.0, 0.0, 40);
    CHECK(kind_of([&] { identify_eigenvalue(middle, sd13); }) == ErrorKind::AmbiguousEigenvalue);

    auto drifting = synthetic_series(1.0, 0.0, 60);
    for (std::size_t k = 0; k < drifting.size(); ++k) drifting[k].lambda = 1.0 + 1e-5 * static_cast<double>(k);
    CHECK(kind_of([&] { identify_eigenvalue(drifting, sd13); }) == ErrorKind::NotConverged);

    const auto sd1 = validate_and_decompose(2.0 * Matrix::Identity(2, 2));
    auto noisy = synthetic_series(2.0, 0.0, 40);
    for (std::size_t k = 0; k < noisy.size(); ++k) noisy[k].lambda += (k % 2 ? 0.3 : -0.3);
    CHECK(identify_eigenvalue(noisy, sd1).Lambda == 2.0);
    CHECK(identify_eigenvalue(noisy, sd1).mu == kInfinity);
}

TEST_CASE("power-law fits") {
    std::vector<double> t, lin, root;
    const double T = 3.0;
    for (int k = 0; k < 40; ++k) {
        const double s = std::pow(10.0, -0.1 * k);
        t.push_back(T - s);
        lin.push_back(s);
        root.push_back(3.0 * std::sqrt(s));
    }
    const auto f1 = fit_power_law(t, lin, T);
    CHECK(f1.exponent == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f1.coefficient == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f1.r2 == doctest::Approx(1.0).epsilon(1e-12));
    const auto f2 = fit_power_law(t, root, T);
    CHECK(f2.exponent == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(f2.coefficient == doctest::Approx(3.0).epsilon(1e-9));

    const std::vector<double> short_t(t.begin(), t.begin() + 8), short_m(lin.begin(), lin.begin() + 8);
    CHECK(kind_of([&] { fit_power_law(short_t, short_m, T); }) == ErrorKind::InsufficientRange);
    const std::vector<double> narrow_t(t.begin(), t.begin() + 12), narrow_m(lin.begin(), lin.begin() + 12);
    CHECK(kind_of([&] { fit_power_law(narrow_t, narrow_m, T); }) == ErrorKind::InsufficientRange);
    auto bad = lin;
    bad[5] = 0.0;
    CHECK(kind_of([&] { fit_power_law(t, bad, T); }) == ErrorKind::NonpositiveValues);

    const auto sys = make_system(validate_and_decompose(mat(1, {1})), catalog::power_norm(1, 1.0, 2.0));
    const auto tr = integrate_desingularized(sys, vec({2}), 0.0);
    std::vector<double> rem, norm;
    for (const auto& s : tr.samples) {
        if (s.remaining > 0.02 || s.remaining < 2e-4) continue;
        rem.push_back(s.remaining);
        norm.push_back(std::abs(s.y(0)));
    }
    CHECK(fit_power_law_remaining(rem, norm).exponent == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("profile of A = I follows the norm law") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        const double a = 1.5;
        const auto p = pipeline(Matrix::Identity(2, 2), catalog::power_norm(2, a, alpha), vec({0.3, -0.4}));
        CHECK(p.profile.xi_star.norm() == doctest::Approx(std::pow(alpha * a, 1.0 / alpha)).epsilon(1e-4));
    }
}

TEST_CASE("profile of diag(1, 2)") {
    const auto p = pipeline(mat(2, {1, 0, 0, 2}), catalog::power_norm(2, 1.0, 1.0), vec({1, 1}));
    CHECK(p.match.Lambda == 1.0);
    CHECK((p.profile.xi_star - vec({1, 0})).norm() < 1e-4);
    CHECK(p.profile.residual_xiHA <= 1e-4);
    CHECK(p.profile.eps_ir > 0.0);
    CHECK(p.profile.eps_v > 0.0);

    const auto ray = pipeline(mat(2, {1, 0, 0, 2}), catalog::power_norm(2, 1.0, 1.0), vec({0.7, 0}));
    CHECK(ray.profile.eps_ir == kInfinity);
    CHECK(ray.profile.ir.below_noise);
}

TEST_CASE("a projection that misses the data is degenerate") {
    const auto sd = validate_and_decompose(mat(2, {1, 0, 0, 2}));
    const auto H = catalog::power_norm(2, 1.0, 1.0);
    const auto tr = integrate_desingularized(make_system(sd, H), vec({0, 1}), 0.0);
    const auto T = estimate_extinction_time(tr);
    EigenvalueMatch wrong{1.0, 0, 1.0, 1.0};
    CHECK(kind_of([&] { estimate_profile(tr, T.T_star, sd, wrong, H); }) == ErrorKind::DegenerateProjection);
}

TEST_CASE("verification of the main statement") {
    const auto scalar = pipeline(mat(1, {1}), catalog::power_norm(1, 1.0, 2.0), vec({2}));
    const auto rep = verify_main_theorem(scalar.profile, scalar.traj, catalog::power_norm(1, 1.0, 2.0));
    CHECK(rep.passed());
    CHECK(scalar.profile.residual_xiHA <= 1e-8);

    const auto H = catalog::power_norm(2, 1.0, 1.0);
    ProfileOptions small_alpha;
    small_alpha.alpha = 0.5;
    const auto bad = pipeline(mat(2, {1, 0, 0, 2}), H, vec({1, 1}), perturbation::none(), small_alpha);
    const auto bad_rep = verify_main_theorem(bad.profile, bad.traj, H);
    CHECK_FALSE(bad_rep.passed());
    const auto failed = bad_rep.failed_clauses();
    CHECK(std::find(failed.begin(), failed.end(), "correction_exponents") != failed.end());

    // Too large an alpha drives the fitted profile to zero, which the eigenvalue relation rejects.
    ProfileOptions large_alpha;
    large_alpha.alpha = 2.0;
    const auto zero = pipeline(mat(2, {1, 0, 0, 2}), H, vec({1, 1}), perturbation::none(), large_alpha);
    const auto zero_failed = verify_main_theorem(zero.profile, zero.traj, H).failed_clauses();
    CHECK(std::find(zero_failed.begin(), zero_failed.end(), "xiHA") != zero_failed.end());

    const auto ns = pipeline(mat(2, {2, 1, 0, 3}), H, vec({1, 0.5}));
    const auto ns_rep = verify_main_theorem(ns.profile, ns.traj, H);
    CHECK(ns_rep.passed());
    CHECK(ns.profile.frame == Frame::z_coordinates);
    CHECK((mat(2, {2, 1, 0, 3}) * ns.profile.xi_star - ns.profile.Lambda * ns.profile.xi_star).norm() <
          1e-6 * ns.profile.xi_star.norm());
}

TEST_CASE("scaling H leaves the eigenvalue and direction unchanged") {
    const Matrix A = mat(3, {3, 1, 0, 1, 4, 1, 0, 1, 5});
    const auto H = catalog::weighted_pnorm({1, 2, 3}, 3.0, 1.5);
    const Vector y0 = vec({0.4, 0.3, -0.2});
    const auto base = pipeline(A, H, y0);
    for (double c : {0.1, 10.0}) {
        const auto p = pipeline(A, scaled(H, c), y0);
        CHECK(p.match.Lambda == base.match.Lambda);
        CHECK((p.profile.v_star - base.profile.v_star).norm() < 1e-6);
        CHECK(p.profile.residual_xiHA <= 1e-3);
    }
}

TEST_CASE("the battery verifies") {
    for (const auto& c : battery::systems()) {
        const auto o = battery::run(c);
        INFO(c.name);
        CHECK(o.report.passed());
        CHECK(o.profile.residual_xiHA <= 1e-3);
        if (!o.profile.v.below_noise) CHECK(o.profile.eps_v > 0.0);
    }
}
