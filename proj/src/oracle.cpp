#include "extinct/oracle.hpp"

#include "extinct/compensated.hpp"
#include "extinct/error.hpp"

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

namespace extinct::oracle {

double scalar_extinction_time(double a, double alpha, double y0) {
    if (!(a > 0.0) || !(alpha > 0.0)) throw Error(ErrorKind::NonpositiveValue, "a and alpha must be positive");
    if (!(y0 != 0.0) || !std::isfinite(y0)) throw Error(ErrorKind::ZeroVector, "y0 must be nonzero and finite");
    return std::pow(std::abs(y0), alpha) / (alpha * a);
}

double scalar_closed_form(double a, double alpha, double y0, double t) {
    const double T = scalar_extinction_time(a, alpha, y0);
    if (t < 0.0) throw Error(ErrorKind::ConfigInvalid, "t must be >= 0");
    if (t > T) throw Error(ErrorKind::BeyondExtinction, "t is past the extinction time");
    if (t == T) return 0.0;
    return y0 * std::pow(1.0 - t / T, 1.0 / alpha);
}

double scalar_closed_form_remaining(double a, double alpha, double y0, double remaining) {
    scalar_extinction_time(a, alpha, y0);
    if (remaining < 0.0) throw Error(ErrorKind::BeyondExtinction, "remaining time is negative");
    return std::copysign(std::pow(alpha * a * remaining, 1.0 / alpha), y0);
}

namespace {

using Gauss8 = boost::math::quadrature::gauss<double, 8>;

// Gauss-Legendre on [lo, hi] with Boost's 8-point nodes; works for scalar and vector integrands.
template <class F>
auto gauss8(F&& f, double lo, double hi) {
    const auto& x = Gauss8::abscissa();
    const auto& w = Gauss8::weights();
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    using R = std::decay_t<decltype(f(c))>;
    R acc = R(w[0] * (f(c - r * x[0]) + f(c + r * x[0])));
    for (std::size_t i = 1; i < x.size(); ++i) acc += R(w[i] * (f(c - r * x[i]) + f(c + r * x[i])));
    return R(acc * r);
}

// w(sigma) = s^{-1/alpha} y(T* - s) with sigma = log s, interpolated between samples and held
// constant below the last one.
class ScaledPath {
public:
    ScaledPath(double a, double alpha, const Trajectory& traj, const PerturbationSpec& pert, double shift)
        : alpha_(alpha), n_(static_cast<int>(traj.samples.front().y.size())) {
        const auto& smp = traj.samples;
        const std::size_t k = smp.size();
        std::vector<double> sigma(k);
        std::vector<std::vector<double>> w(static_cast<std::size_t>(n_), std::vector<double>(k));
        std::vector<std::vector<double>> dw = w;
        for (std::size_t j = 0; j < k; ++j) {
            const Sample& sm = smp[k - 1 - j];
            const double s = sm.remaining + shift;
            if (!(s > 0.0)) throw Error(ErrorKind::NonpositiveValues, "remaining time must be positive");
            sigma[j] = std::log(s);
            const double scale = std::pow(s, -1.0 / alpha);
            const Vector dy = -a * std::pow(sm.y.stableNorm(), -alpha) * sm.y + pert(sm.t, sm.y);
            for (int c = 0; c < n_; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                w[cc][j] = scale * sm.y(c);
                dw[cc][j] = scale * (-sm.y(c) / alpha - s * dy(c));
            }
        }
        for (std::size_t j = 1; j < k; ++j) {
            if (!(sigma[j] > sigma[j - 1])) {
                throw Error(ErrorKind::NonpositiveValues, "remaining times must decrease strictly along the trajectory");
            }
        }
        sigma_lo_ = sigma.front();
        sigma_hi_ = sigma.back();
        w_lo_.resize(n_);
        w_hi_.resize(n_);
        for (int c = 0; c < n_; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            w_lo_(c) = w[cc].front();
            w_hi_(c) = w[cc].back();
            interp_.emplace_back(std::vector<double>(sigma), std::move(w[cc]), std::move(dw[cc]));
        }
    }

    /// y at remaining time s.
    [[nodiscard]] Vector y(double s) const {
        const double sigma = std::log(s);
        Vector w(n_);
        if (sigma <= sigma_lo_) w = w_lo_;
        else if (sigma >= sigma_hi_) w = w_hi_;
        else
            for (int c = 0; c < n_; ++c) w(c) = interp_[static_cast<std::size_t>(c)](sigma);
        return std::pow(s, 1.0 / alpha_) * w;
    }

private:
    using Interp = boost::math::interpolators::cubic_hermite<std::vector<double>>;
    double alpha_;
    int n_;
    double sigma_lo_ = 0.0, sigma_hi_ = 0.0;
    Vector w_lo_, w_hi_;
    std::vector<Interp> interp_;
};

struct ProfileLevel {
    double J_star = 0.0;
    Vector eta_raw;                 // integral of e^{-h1} s^{-1/alpha} f
    Vector xi;
    std::vector<double> G_at;       // g at base breakpoints
    std::vector<double> H1_at;      // h1 at base breakpoints
};

constexpr int kGradedPanels = 40;

class ProfileQuadrature {
public:
    ProfileQuadrature(double a, double alpha, double p, const Vector& y0, double t_star, double s0,
                      const ScaledPath& path, const PerturbationSpec& pert, std::vector<double> base)
        : a_(a), alpha_(alpha), p_(p), y0_(y0), t_star_(t_star), s0_(s0), path_(path), pert_(pert),
          base_(std::move(base)) {}

    ProfileLevel run(int level) const {
        const int split = 1 << level;
        ProfileLevel out;
        out.eta_raw = Vector::Zero(y0_.size());
        out.G_at.assign(base_.size(), 0.0);
        out.H1_at.assign(base_.size(), 0.0);
        CompensatedSum G, H1;
        std::vector<CompensatedSum> eta(static_cast<std::size_t>(y0_.size()));
        for (std::size_t b = 0; b + 1 < base_.size(); ++b) {
            const double width = (base_[b + 1] - base_[b]) / split;
            for (int m = 0; m < split; ++m) {
                const double lo = base_[b] + m * width;
                const double hi = m + 1 == split ? base_[b + 1] : lo + width;
                const double g0 = G.value(), h0 = H1.value();
                auto G_of = [&](double x) { return g0 + gauss8([&](double u) { return phi_g(u); }, lo, x); };
                auto H1_of = [&](double x) {
                    return h0 + gauss8([&](double u) { return phi_h(u, G_of(u)); }, lo, x);
                };
                const Vector piece = gauss8([&](double u) -> Vector { return phi_eta(u, H1_of(u)); }, lo, hi);
                for (int c = 0; c < piece.size(); ++c) eta[static_cast<std::size_t>(c)].add(piece(c));
                H1.add(H1_of(hi) - h0);
                G.add(gauss8([&](double u) { return phi_g(u); }, lo, hi));
            }
            out.G_at[b + 1] = G.value();
            out.H1_at[b + 1] = H1.value();
        }
        for (int c = 0; c < out.eta_raw.size(); ++c) out.eta_raw(c) = eta[static_cast<std::size_t>(c)].value();
        out.J_star = H1.value();
        out.xi = std::exp(-out.J_star) * std::pow(s0_, -1.0 / alpha_) * y0_ + out.eta_raw;
        return out;
    }

private:
    [[nodiscard]] double s_of(double u) const { return std::pow(u, 1.0 / p_); }


    // d s / d u = s / (p u)
    [[nodiscard]] double phi_g(double u) const {
        const double s = s_of(u);
        const Vector y = path_.y(s);
        const double r = y.stableNorm();
        return -alpha_ * std::pow(r, alpha_ - 2.0) * pert_(t_star_ - s, y).dot(y) * s / (p_ * u);
    }

    [[nodiscard]] double phi_h(double u, double g) const {
        const double q = g / s_of(u);
        return -q / (alpha_ * (a_ * alpha_ + q) * p_ * u);
    }

    [[nodiscard]] Vector phi_eta(double u, double h1) const {
        const double s = s_of(u);
        const Vector y = path_.y(s);
        return std::exp(-h1) * std::pow(s, 1.0 - 1.0 / alpha_) / (p_ * u) * pert_(t_star_ - s, y);
    }

    double a_, alpha_, p_;
    Vector y0_;
    double t_star_, s0_;
    const ScaledPath& path_;
    const PerturbationSpec& pert_;
    std::vector<double> base_;
};

double level_distance(const ProfileLevel& x, const ProfileLevel& y) {
    return std::max({std::abs(x.J_star - y.J_star), (x.eta_raw - y.eta_raw).lpNorm<Eigen::Infinity>(),
                     (x.xi - y.xi).lpNorm<Eigen::Infinity>()});
}

}  // namespace

SpecialCaseProfile special_case_profile(double a, double alpha, const Vector& y0, const Trajectory& traj,
                                        const PerturbationSpec& pert, double tol) {
    if (!(a > 0.0) || !(alpha > 0.0)) throw Error(ErrorKind::NonpositiveValue, "a and alpha must be positive");
    if (traj.samples.size() < 4) throw Error(ErrorKind::InsufficientSamples, "trajectory has fewer than 4 samples");
    if (traj.samples.front().y.size() != y0.size()) throw Error(ErrorKind::DimensionMismatch, "y0 size");
    if (!(y0.norm() > 0.0)) throw Error(ErrorKind::ZeroVector, "y0 = 0");

    const auto& smp = traj.samples;
    const double s0 = smp.front().remaining;
    const double t_star = traj.t0 + s0;

    SpecialCaseProfile out;
    out.a = a;
    out.alpha = alpha;
    out.T_star = t_star;
    for (const Sample& sm : smp) {
        out.g_times.push_back(sm.t);
        out.h_remaining.push_back(sm.remaining);
    }

    if (!pert.active()) {
        out.J_star = 0.0;
        out.eta_star = Vector::Zero(y0.size());
        out.xi_star = std::pow(s0, -1.0 / alpha) * y0;
        out.g_of_t.assign(smp.size(), 0.0);
        out.h_values.assign(smp.size(), 0.0);
        out.j2_partial.assign(smp.size(), 0.0);
        out.xi_err = out.xi_star.norm() * traj.t_star_err / (alpha * s0);
        return out;
    }
    if (!(pert.delta > 0.0)) throw Error(ErrorKind::MissingBoundConstants, "perturbation delta must be positive");
    const double p = pert.delta / alpha;

    auto solve = [&](double shift, int fixed_level, double& achieved, int& level_used) -> ProfileLevel {
        const ScaledPath path(a, alpha, traj, pert, shift);
        // Breakpoints in u = s^p: a geometric grading below the last sample, then every sample.
        std::vector<double> base{0.0};
        const double u_last = std::pow(smp.back().remaining + shift, p);
        for (int k = kGradedPanels; k >= 1; --k) base.push_back(std::ldexp(u_last, -k));
        for (std::size_t i = smp.size(); i-- > 0;) base.push_back(std::pow(smp[i].remaining + shift, p));
        const ProfileQuadrature quad(a, alpha, p, y0, t_star + shift, s0 + shift, path, pert, base);
        if (fixed_level >= 0) {
            level_used = fixed_level;
            return quad.run(fixed_level);
        }
        ProfileLevel prev = quad.run(0);
        achieved = kInfinity;
        constexpr int kMaxLevel = 5;
        for (int level = 1; level <= kMaxLevel; ++level) {
            ProfileLevel cur = quad.run(level);
            achieved = level_distance(cur, prev);
            prev = std::move(cur);
            level_used = level;
            if (achieved <= tol * std::max(1.0, prev.xi.norm())) return prev;
        }
        std::ostringstream os;
        os << "profile integrals changed by " << achieved << " at the finest mesh (tolerance " << tol << ")";
        throw Error(ErrorKind::QuadratureNotConverged, os.str());
    };

    double achieved = 0.0;
    int level = 0;
    const ProfileLevel best = solve(0.0, -1, achieved, level);
    out.J_star = best.J_star;
    out.eta_star = std::exp(best.J_star) * best.eta_raw;
    out.xi_star = best.xi;
    out.quadrature_err = achieved;
    out.panels = static_cast<int>((kGradedPanels + smp.size()) << level);

    const std::size_t k = smp.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t b = kGradedPanels + 1 + (k - 1 - i);
        const double g = best.G_at[b];
        out.g_of_t.push_back(g);
        const double s = smp[i].remaining;
        out.h_values.push_back(-g / (alpha * s * (a * alpha * s + g)));
        out.j2_partial.push_back(best.J_star - best.H1_at[b]);
    }

    out.xi_err = achieved;
    if (traj.t_star_err > 0.0) {
        double unused = 0.0;
        int lvl = level;
        const ProfileLevel shifted = solve(traj.t_star_err, level, unused, lvl);
        out.xi_err += (shifted.xi - best.xi).norm();
    }
    return out;
}

namespace {

struct ReferenceRun {
    std::vector<Vector> states;       // (log rho, v, .) at checkpoints
    std::vector<double> increments;   // elapsed t between checkpoints
};

ReferenceRun run_rk4(const SystemSpec& zsys, const Vector& x0, double t0, double h0, int substeps,
                     std::size_t max_checkpoints, double log_floor, bool stop_at_floor) {
    const int n = zsys.dimension();
    detail::DesingularizedField field{&zsys, zsys.sd.eigenvalues, t0};
    CompensatedSum clock(t0);
    ReferenceRun run;
    Vector x = x0, lo = Vector::Zero(x0.size());
    Vector k1(n + 2), k2(n + 2), k3(n + 2), k4(n + 2);
    const double h = h0 / substeps;
    run.states.push_back(x);
    auto eval = [&](const Vector& at, Vector& out) {
        if (!field(0.0, at, out)) throw Error(ErrorKind::NonfiniteState, "desingularized field is not finite");
    };
    for (std::size_t c = 0; c < max_checkpoints; ++c) {
        for (int s = 0; s < substeps; ++s) {
            eval(x, k1);
            eval(Vector(x + 0.5 * h * k1), k2);
            eval(Vector(x + 0.5 * h * k2), k3);
            eval(Vector(x + h * k3), k4);
            // Compensated update of the state.
            const Vector inc = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) + lo;
            const Vector next = x + inc;
            lo = inc - (next - x);
            x = next;
        }
        const double dt = x(n + 1) + lo(n + 1);
        clock.add(dt);
        run.increments.push_back(dt);
        x(n + 1) = 0.0;
        lo(n + 1) = 0.0;
        field.t_base = clock.value();
        run.states.push_back(x);
        if (stop_at_floor && x(0) <= log_floor) break;
    }
    return run;
}

double run_distance(const ReferenceRun& a, const ReferenceRun& b, int n) {
    double worst = 0.0;
    double rem_a = 0.0, rem_b = 0.0;
    for (std::size_t i = a.states.size(); i-- > 0;) {
        const Vector& xa = a.states[i];
        const Vector& xb = b.states[i];
        worst = std::max(worst, std::abs(xa(0) - xb(0)));
        worst = std::max(worst, (xa.segment(1, n).normalized() - xb.segment(1, n).normalized()).lpNorm<Eigen::Infinity>());
        if (i + 1 < a.states.size()) {
            rem_a += a.increments[i];
            rem_b += b.increments[i];
            worst = std::max(worst, std::abs(rem_a - rem_b) / rem_a);
        }
    }
    return worst;
}

}  // namespace

Trajectory reference_integrate(const SystemSpec& sys, const Vector& y0, double t0, double tol,
                               const ReferenceOptions& opts) {
    if (!(tol > 0.0) || tol > 1e-10) throw Error(ErrorKind::ConfigInvalid, "reference tolerance must be in (0, 1e-10]");
    if (!(opts.rho_floor > 0.0)) throw Error(ErrorKind::ConfigInvalid, "rho_floor must be positive");
    if (y0.size() != sys.dimension()) throw Error(ErrorKind::DimensionMismatch, "y0 size");
    if (!y0.allFinite() || !(y0.norm() > 0.0)) throw Error(ErrorKind::ZeroVector, "y0 must be nonzero and finite");

    const SystemSpec zsys = transformed_system(sys);
    const int n = sys.dimension();
    const double alpha = sys.alpha;
    const bool out_z = opts.frame == Frame::z_coordinates;
    const Vector z0 = sys.sd.S * y0;

    Vector x0(n + 2);
    x0(0) = alpha * std::log(z0.norm());
    x0.segment(1, n) = z0 / z0.norm();
    x0(n + 1) = 0.0;

    const double rho_floor = opts.rho_floor * std::pow(out_z ? z0.norm() : y0.norm(), alpha);
    // Stop on the z-frame log rho; the original-frame floor differs by at most the conditioning of S.
    const double log_floor = std::log(opts.rho_floor) + x0(0);
    const double h0 = 0.1 / (alpha * zsys.sd.largest());
    constexpr std::size_t kMaxCheckpoints = 2'000'000;

    ReferenceRun coarse = run_rk4(zsys, x0, t0, h0, 1, kMaxCheckpoints, log_floor, true);
    if (coarse.states.back()(0) > log_floor) {
        throw Error(ErrorKind::NoConvergence, "reference run did not reach rho_floor");
    }
    const std::size_t checkpoints = coarse.increments.size();
    double achieved = kInfinity;
    int substeps = 1;
    for (int halving = 1; halving <= opts.max_halvings; ++halving) {
        substeps *= 2;
        ReferenceRun fine = run_rk4(zsys, x0, t0, h0, substeps, checkpoints, log_floor, false);
        achieved = run_distance(fine, coarse, n);
        const bool done = achieved <= tol;
        if (done) {
            Trajectory traj;
            traj.t0 = t0;
            traj.scheme = Scheme::reference;
            traj.coordinate_frame = opts.frame;
            traj.alpha = alpha;
            traj.rho_floor = rho_floor;
            traj.rel_tol = tol;
            CompensatedSum clock(t0);
            std::vector<double> rho_errors;
            for (std::size_t i = 0; i < fine.states.size(); ++i) {
                Vector x = fine.states[i];
                x.segment(1, n).normalize();
                traj.samples.push_back(detail::sample_from_state(sys, zsys, clock.value(), x, opts.frame));
                if (i < checkpoints) {
                    clock.add(fine.increments[i]);
                    rho_errors.push_back(std::abs((fine.states[i + 1](0) - fine.states[i](0)) -
                                                  (coarse.states[i + 1](0) - coarse.states[i](0))));
                }
            }
            const Vector& last = fine.states.back();
            const Vector z_last = std::exp(last(0) / alpha) * last.segment(1, n).normalized();
            detail::finalize(traj, fine.increments, rho_errors,
                             detail::tail_estimate(zsys, traj.samples.back().t, z_last));
            CompensatedSum coarse_total(0.0);
            for (double dt : coarse.increments) coarse_total.add(dt);
            CompensatedSum fine_total(0.0);
            for (double dt : fine.increments) fine_total.add(dt);
            traj.t_star_err += std::abs(fine_total.value() - coarse_total.value());
            return traj;
        }
        coarse = std::move(fine);
    }
    std::ostringstream os;
    os << "successive reference runs differ by " << achieved << " after " << opts.max_halvings << " halvings";
    throw Error(ErrorKind::NoConvergence, os.str());
}

}  // namespace extinct::oracle
