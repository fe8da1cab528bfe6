#include "extinct/dynamics.hpp"

#include "extinct/compensated.hpp"
#include "extinct/error.hpp"
#include "extinct/expression.hpp"
#include "extinct/rk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace extinct {
namespace {

Vector unit(int n, const Vector& direction) {
    if (direction.size() != n) throw Error(ErrorKind::DimensionMismatch, "perturbation direction size");
    const double r = direction.norm();
    if (!(r > 0.0)) throw Error(ErrorKind::ZeroVector, "perturbation direction is zero");
    return direction / r;
}

void require_rate(double coeff, double delta) {
    if (!(coeff >= 0.0) || !std::isfinite(coeff)) {
        throw Error(ErrorKind::ConfigInvalid, "perturbation coefficient must be >= 0");
    }
    if (!(delta > 0.0)) throw Error(ErrorKind::ConfigInvalid, "perturbation delta must be > 0");
}

SpectralData diagonal_spectral_data(const SpectralData& sd) {
    SpectralData z;
    z.n = sd.n;
    z.A = sd.A0;
    z.A0 = sd.A0;
    z.eigenvalues = sd.eigenvalues;
    z.distinct_eigenvalues = sd.distinct_eigenvalues;
    z.multiplicity = sd.multiplicity;
    z.S = Matrix::Identity(sd.n, sd.n);
    z.S_inv = z.S;
    z.is_symmetric = true;
    z.cluster_tol = sd.cluster_tol;
    for (int j = 0; j < sd.distinct_count(); ++j) z.projections.push_back(sd.diagonal_selector(j));
    return z;
}

void check_bound(const SystemSpec& sys, Trajectory& traj, double t, const Vector& y) {
    if (!sys.pert.active() || traj.bound_violation) return;
    const double r = y.stableNorm();
    if (r > sys.pert.r_star) return;
    const double limit = sys.pert.M * std::pow(r, 1.0 - sys.alpha + sys.pert.delta);
    if (sys.pert(t, y).stableNorm() > limit * (1.0 + 1e-9) + 1e-300) {
        traj.bound_violation = true;
        std::ostringstream os;
        os << "perturbation exceeds its declared rate bound at t = " << t;
        traj.warnings.push_back(os.str());
    }
}

Sample make_sample(const SystemSpec& sys, Frame frame, double t, const Vector& y) {
    Sample s;
    s.t = t;
    s.y = y;
    const double r = y.stableNorm();
    s.rho = std::pow(r, sys.alpha);
    s.v = y / r;
    s.lambda = dirichlet_quotient(sys.sd, s.v, frame);
    return s;
}

}  // namespace

namespace perturbation {

PerturbationSpec none() { return {}; }

PerturbationSpec fixed_direction(Vector direction, double coeff, double alpha, double delta) {
    require_rate(coeff, delta);
    const Vector e = unit(static_cast<int>(direction.size()), direction);
    const double p = 1.0 - alpha + delta;
    PerturbationSpec spec;
    spec.kind = PerturbationSpec::Kind::bounded_builtin;
    spec.name = "fixed_direction";
    spec.M = coeff;
    spec.delta = delta;
    spec.evaluator = [e, coeff, p](double, const Vector& y) -> Vector {
        return coeff * std::pow(y.stableNorm(), p) * e;
    };
    return spec;
}

PerturbationSpec rotational(int n, double coeff, double alpha, double delta) {
    require_rate(coeff, delta);
    const double p = delta - alpha;
    PerturbationSpec spec;
    spec.kind = PerturbationSpec::Kind::bounded_builtin;
    spec.name = "rotational";
    spec.M = coeff;
    spec.delta = delta;
    spec.evaluator = [n, coeff, p](double, const Vector& y) -> Vector {
        Vector out = Vector::Zero(n);
        for (int k = 0; k + 1 < n; k += 2) {
            out(k) = -y(k + 1);
            out(k + 1) = y(k);
        }
        return coeff * std::pow(y.stableNorm(), p) * out;
    };
    return spec;
}

PerturbationSpec oscillating(Vector direction, double coeff, double omega, double alpha, double delta) {
    require_rate(coeff, delta);
    const Vector e = unit(static_cast<int>(direction.size()), direction);
    const double p = 1.0 - alpha + delta;
    PerturbationSpec spec;
    spec.kind = PerturbationSpec::Kind::bounded_builtin;
    spec.name = "oscillating";
    spec.M = coeff;
    spec.delta = delta;
    spec.evaluator = [e, coeff, omega, p](double t, const Vector& y) -> Vector {
        return coeff * std::cos(omega * t) * std::pow(y.stableNorm(), p) * e;
    };
    return spec;
}

PerturbationSpec custom(const std::vector<std::string>& components, double M, double delta, double r_star,
                        double c_star) {
    require_rate(M, delta);
    const int n = static_cast<int>(components.size());
    if (n < 1) throw Error(ErrorKind::ConfigInvalid, "custom perturbation needs one expression per coordinate");
    std::vector<std::string> vars{"t"};
    for (int i = 1; i <= n; ++i) vars.push_back("y" + std::to_string(i));
    std::vector<Expression> exprs;
    for (const auto& text : components) exprs.push_back(Expression::parse(text, vars, 1, n));
    PerturbationSpec spec;
    spec.kind = PerturbationSpec::Kind::custom;
    spec.name = "custom";
    spec.M = M;
    spec.delta = delta;
    spec.r_star = r_star;
    spec.c_star = c_star;
    spec.evaluator = [exprs, n](double t, const Vector& y) -> Vector {
        std::vector<double> args(static_cast<std::size_t>(n) + 1);
        args[0] = t;
        for (int i = 0; i < n; ++i) args[static_cast<std::size_t>(i) + 1] = y(i);
        Vector out(n);
        for (int i = 0; i < n; ++i) out(i) = exprs[static_cast<std::size_t>(i)].eval(args);
        return out;
    };
    return spec;
}

}  // namespace perturbation

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::direct: return "direct";
        case Scheme::desingularized: return "desingularized";
        case Scheme::reference: return "reference";
    }
    return "?";
}

std::string to_string(Frame f) { return f == Frame::original ? "original" : "z_coordinates"; }

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::extinction_floor: return "extinction_floor";
        case StopReason::max_steps: return "max_steps";
        case StopReason::blowup: return "blowup";
        case StopReason::user: return "user";
    }
    return "?";
}

SystemSpec make_system(SpectralData sd, HomogeneousFn H, PerturbationSpec pert) {
    if (H.dimension() != sd.n) {
        throw Error(ErrorKind::DimensionMismatch, "H has dimension " + std::to_string(H.dimension()) +
                                                      " but A is " + std::to_string(sd.n) + "x" +
                                                      std::to_string(sd.n));
    }
    if (pert.active() && !pert.evaluator) throw Error(ErrorKind::ConfigInvalid, "perturbation has no evaluator");
    if (!H.sphere_stats()) H = H.with_sphere_stats(sphere_extrema(H));
    const double alpha = H.alpha();
    return SystemSpec{std::move(sd), std::move(H), std::move(pert), alpha};
}

double transformed_bound_constant(double M, const SpectralData& sd, double alpha, double delta) {
    const double p = 1.0 - alpha + delta;
    if (p >= 0.0) return M * sd.norm_S * std::pow(sd.norm_S_inv, p);
    return M * std::pow(sd.norm_S, alpha - delta);
}

SystemSpec transformed_system(const SystemSpec& sys) {
    SpectralData zsd = diagonal_spectral_data(sys.sd);
    HomogeneousFn Hz = compose_linear(sys.H, sys.sd.S_inv);
    Hz = Hz.with_sphere_stats(sphere_extrema(Hz));
    PerturbationSpec fz = sys.pert;
    if (sys.pert.active()) {
        const Matrix S = sys.sd.S, S_inv = sys.sd.S_inv;
        fz.evaluator = [f = sys.pert.evaluator, S, S_inv](double t, const Vector& z) -> Vector {
            return S * f(t, Vector(S_inv * z));
        };
        fz.M = transformed_bound_constant(sys.pert.M, sys.sd, sys.alpha, sys.pert.delta);
        if (sys.pert.c_star > 0.0) {
            fz.c_star = transformed_bound_constant(sys.pert.c_star, sys.sd, sys.alpha, sys.pert.delta);
        }
        fz.r_star = sys.pert.r_star / sys.sd.norm_S_inv;
    }
    return SystemSpec{std::move(zsd), std::move(Hz), std::move(fz), sys.alpha};
}

Vector rhs(const SystemSpec& sys, double t, const Vector& y) {
    if (y.size() != sys.dimension()) throw Error(ErrorKind::DimensionMismatch, "rhs: state size");
    if (!(y.stableNorm() > 1e-300)) throw Error(ErrorKind::ZeroVector, "rhs evaluated at y = 0");
    Vector out = -sys.H(y) * (sys.sd.A * y);
    if (sys.pert.active()) out += sys.pert(t, y);
    return out;
}

double dirichlet_quotient(const SpectralData& sd, const Vector& v, Frame frame) {
    if (frame == Frame::z_coordinates) {
        double num = 0.0;
        for (int k = 0; k < sd.n; ++k) num += sd.eigenvalues[static_cast<std::size_t>(k)] * v(k) * v(k);
        return num / v.squaredNorm();
    }
    if (sd.is_symmetric) return v.dot(sd.A * v) / v.squaredNorm();
    return dirichlet_quotient(sd, Vector(sd.S * v), Frame::z_coordinates);
}

void Trajectory::shift_extinction(double dt) {
    t_star_est += dt;
    for (auto& s : samples) s.remaining += dt;
}

double ExtinctionRadius::bound(const SpectralData& sd, const Vector& y0, double alpha, double elapsed) const {
    if (symmetric) return std::pow(y0.norm(), alpha) - alpha * a0 * elapsed;
    return std::pow(norm_S_inv, alpha) * (std::pow((sd.S * y0).norm(), alpha) - alpha * a0_z * elapsed);
}

ExtinctionRadius extinction_radius(const SystemSpec& sys) {
    ExtinctionRadius out;
    out.symmetric = sys.sd.is_symmetric;
    out.norm_S = sys.sd.norm_S;
    out.norm_S_inv = sys.sd.norm_S_inv;
    const double lambda1 = sys.sd.smallest();
    const double alpha = sys.alpha;

    double c1 = 0.0;
    if (out.symmetric) {
        c1 = sys.H.sphere_stats() ? sys.H.sphere_stats()->c1 : sphere_extrema(sys.H).c1;
    } else {
        c1 = sphere_extrema(compose_linear(sys.H, sys.sd.S_inv)).c1;
    }
    const double a0 = c1 * lambda1 / 2.0;
    out.a0 = out.a0_z = a0;
    if (!sys.pert.active()) return out;

    const double delta = sys.pert.delta;
    const double c_star = sys.pert.bound_constant();
    if (!(delta > 0.0) || !(c_star > 0.0)) {
        throw Error(ErrorKind::MissingBoundConstants, "perturbation needs delta > 0 and c_star (or M) > 0");
    }
    if (out.symmetric) {
        out.r0 = 0.5 * std::pow(a0 / c_star, 1.0 / delta);
        if (std::isfinite(sys.pert.r_star)) out.r0 = std::min(out.r0, sys.pert.r_star / 2.0);
        out.r0_z = out.r0;
        return out;
    }
    const double c_star_z = transformed_bound_constant(c_star, sys.sd, alpha, delta);
    out.r0_z = 0.5 * std::pow(a0 / c_star_z, 1.0 / delta);
    if (std::isfinite(sys.pert.r_star)) out.r0_z = std::min(out.r0_z, sys.pert.r_star / (2.0 * out.norm_S_inv));
    out.r0 = out.r0_z / out.norm_S;
    return out;
}

namespace detail {

bool DesingularizedField::operator()(double, const Vector& x, Vector& dx) const {
    const SystemSpec& sys = *zsys;
    const int n = sys.dimension();
    const double alpha = sys.alpha;
    const double u = x(0);
    const Vector v = x.segment(1, n);
    const double vv = v.squaredNorm();
    if (!(vv > 0.0) || !std::isfinite(u)) return false;
    double lam = 0.0;
    for (int k = 0; k < n; ++k) lam += a0_diag[static_cast<std::size_t>(k)] * v(k) * v(k);
    lam /= vv;
    const double hv = sys.H(v);
    if (!(hv > 0.0) || !std::isfinite(hv)) return false;
    const double rho = std::exp(u);

    dx.resize(n + 2);
    dx(0) = -alpha * lam;
    for (int k = 0; k < n; ++k) dx(1 + k) = -(a0_diag[static_cast<std::size_t>(k)] - lam) * v(k);
    dx(n + 1) = rho / hv * std::pow(vv, -alpha / 2.0);

    if (sys.pert.active()) {
        const double r = std::sqrt(vv);
        const Vector vn = v / r;
        const double t = t_base + x(n + 1);
        const Vector z = std::exp(u / alpha) * vn;
        const Vector f = sys.pert(t, z);
        const double scale = std::exp(u * (1.0 - 1.0 / alpha)) / hv * std::pow(r, alpha);
        const double fv = f.dot(vn);
        dx(0) += alpha * scale * fv;
        dx.segment(1, n) += scale * r * (f - fv * vn);
    }
    return dx.allFinite();
}

TailEstimate tail_estimate(const SystemSpec& zsys, double t, const Vector& z) {
    const double alpha = zsys.alpha;
    const double r = z.stableNorm();
    const Vector v = z / r;
    const double rho = std::pow(r, alpha);
    const double hv = zsys.H(v);
    const double lam = dirichlet_quotient(zsys.sd, v, Frame::z_coordinates);
    double drift = 0.0, slack = 0.0;
    if (zsys.pert.active()) {
        drift = std::pow(rho, 1.0 - 1.0 / alpha) * zsys.pert(t, z).dot(v);
        slack = zsys.pert.M * std::pow(rho, zsys.pert.delta / alpha);
    }
    const double rate = alpha * (hv * lam - drift);
    const double rate_lo = alpha * (hv * zsys.sd.smallest() - slack);
    const double rate_hi = alpha * (hv * zsys.sd.largest() + slack);
    if (!(rate > 0.0) || !(rate_lo > 0.0)) {
        throw Error(ErrorKind::TailEstimateDiverged, "|y|^alpha is not decreasing at the last sample");
    }
    TailEstimate out;
    out.tail = rho / rate;
    out.err = std::max(rho / rate_lo - out.tail, out.tail - rho / rate_hi);
    return out;
}

Sample sample_from_state(const SystemSpec& sys, const SystemSpec& zsys, double t, const Vector& x, Frame frame) {
    const int n = sys.dimension();
    const Vector z = std::exp(x(0) / sys.alpha) * x.segment(1, n);
    Sample smp;
    smp.t = t;
    smp.y = frame == Frame::z_coordinates ? z : Vector(sys.sd.S_inv * z);
    const double r = smp.y.stableNorm();
    smp.v = smp.y / r;
    smp.rho = frame == Frame::z_coordinates ? std::exp(x(0)) : std::pow(r, sys.alpha);
    smp.lambda = dirichlet_quotient(zsys.sd, x.segment(1, n), Frame::z_coordinates);
    return smp;
}

void finalize(Trajectory& traj, const std::vector<double>& increments, const std::vector<double>& rho_errors,
              const TailEstimate& tail) {
    auto& s = traj.samples;
    CompensatedSum total(traj.t0);
    for (double dt : increments) total.add(dt);
    traj.t_star_est = total.value() + tail.tail;
    s.back().remaining = tail.tail;
    for (std::size_t i = s.size() - 1; i-- > 0;) s[i].remaining = s[i + 1].remaining + increments[i];
    // A relative error e in |y|^alpha shifts the extinction time by about e times the time to go.
    double drift = 0.0;
    for (std::size_t i = 0; i < rho_errors.size(); ++i) drift += rho_errors[i] * s[i + 1].remaining;
    traj.t_star_err = tail.err + drift + 16.0 * std::numeric_limits<double>::epsilon() * std::abs(traj.t_star_est);
    // Stored t never reaches the extinction estimate.
    if (!(traj.t_star_est > s.back().t)) traj.t_star_est = std::nextafter(s.back().t, kInfinity);
}

}  // namespace detail

namespace {

constexpr double kMaxStepFraction = 0.1;
constexpr double kTailExtension = 1e8;

void check_initial(const SystemSpec& sys, const Vector& y0) {
    if (y0.size() != sys.dimension()) throw Error(ErrorKind::DimensionMismatch, "y0 size");
    if (!y0.allFinite()) throw Error(ErrorKind::NonfiniteState, "y0 is not finite");
    if (!(y0.norm() > 1e-300)) throw Error(ErrorKind::ZeroVector, "y0 = 0");
}

void check_options(const IntegratorOptions& opts) {
    if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0) || !(opts.rho_floor > 0.0) || opts.max_steps == 0) {
        throw Error(ErrorKind::ConfigInvalid, "integrator tolerances, rho_floor and max_steps must be positive");
    }
}

}  // namespace

Trajectory integrate_direct(const SystemSpec& sys, const Vector& y0, double t0, const IntegratorOptions& opts) {
    check_initial(sys, y0);
    check_options(opts);
    const bool in_z = opts.frame == Frame::z_coordinates;
    const SystemSpec zsys = transformed_system(sys);
    const SystemSpec& work = in_z ? zsys : sys;
    const double alpha = sys.alpha;

    Trajectory traj;
    traj.t0 = t0;
    traj.scheme = Scheme::direct;
    traj.coordinate_frame = opts.frame;
    traj.alpha = alpha;
    traj.rel_tol = opts.rel_tol;

    Vector y = in_z ? Vector(sys.sd.S * y0) : y0;
    traj.rho_floor = opts.rho_floor * std::pow(y.norm(), alpha);

    auto field = [&work](double t, const Vector& x, Vector& dx) {
        const double r = x.norm();
        if (!(r > 1e-300) || !x.allFinite()) return false;
        const double h = work.H(x);
        if (!std::isfinite(h)) return false;
        dx = -h * (work.sd.A * x);
        if (work.pert.active()) dx += work.pert(t, x);
        return dx.allFinite();
    };

    Vector k1(y.size());
    if (!field(t0, y, k1)) throw Error(ErrorKind::NonfiniteState, "right-hand side is not finite at y0");

    CompensatedSum clock(t0);
    std::vector<double> increments, rho_errors;
    traj.samples.push_back(make_sample(work, opts.frame, t0, y));
    check_bound(work, traj, t0, y);

    const double tol = opts.rel_tol + opts.abs_tol;
    double h = 0.01 * y.norm() / std::max(k1.norm(), 1e-300);
    rk::PiController controller;
    std::size_t steps = 0;
    traj.stop_reason = StopReason::max_steps;

    struct Attempt {
        bool accepted = false;
        bool underflow = false;
        rk::StepResult step;
        double err = kInfinity;
    };
    // One step attempt from (t, y) with step h; adjusts h for the next attempt.
    auto attempt = [&](double t, double& step_h) {
        Attempt a;
        const double rho = std::pow(y.stableNorm(), alpha);
        const double lam = std::abs(y.dot(work.sd.A * y)) / y.squaredNorm();
        // Local time-to-extinction scale.
        const double scale = rho / std::max(alpha * work.H(y) * rho * lam, 1e-300);
        if (step_h < 1e-16 * scale) {
            a.underflow = true;
            return a;
        }
        // Never step across a sizable fraction of the local time to extinction.
        const double radial = std::abs(y.dot(k1)) / y.squaredNorm();
        if (radial > 0.0) step_h = std::min(step_h, kMaxStepFraction / (alpha * radial));
        a.step = rk::dopri_step(field, t, y, k1, step_h);
        a.accepted = a.step.finite;
        if (a.accepted) {
            const double sc = tol * std::max(y.stableNorm(), a.step.y.stableNorm());
            a.err = std::sqrt(a.step.error.squaredNorm() / static_cast<double>(y.size())) / sc;
            a.accepted = a.err <= 1.0 && a.step.y.dot(y) > 0.0 && std::pow(a.step.y.stableNorm(), alpha) >= 0.1 * rho;
        }
        return a;
    };

    while (steps < opts.max_steps) {
        Attempt a = attempt(clock.value(), h);
        if (a.underflow) {
            traj.stop_reason = StopReason::blowup;
            traj.warnings.push_back("StepSizeUnderflow: step size fell below 1e-16 of the time-to-extinction scale");
            break;
        }
        if (!a.accepted) {
            ++traj.rejected_steps;
            h = std::isfinite(a.err) && a.err > 1.0 ? controller.propose(h, a.err, false) : 0.25 * h;
            continue;
        }
        ++steps;
        clock.add(h);
        increments.push_back(h);
        rho_errors.push_back(alpha * a.step.error.stableNorm() / std::max(y.stableNorm(), a.step.y.stableNorm()));
        y = a.step.y;
        k1 = a.step.k_end;
        const double t_new = clock.value();
        traj.samples.push_back(make_sample(work, opts.frame, t_new, y));
        check_bound(work, traj, t_new, y);
        h = controller.propose(h, a.err, true);
        if (traj.samples.back().rho <= traj.rho_floor) {
            traj.stop_reason = StopReason::extinction_floor;
            break;
        }
    }

    auto to_z = [&](const Vector& v) { return in_z ? v : Vector(sys.sd.S * v); };
    detail::TailEstimate tail = detail::tail_estimate(zsys, clock.value(), to_z(y));
    if (traj.stop_reason == StopReason::extinction_floor) {
        // Keep integrating without recording until the leftover tail is negligible.
        const double rho_stop = traj.samples.back().rho / kTailExtension;
        const double bound = tail.tail + tail.err;
        CompensatedSum extra(0.0);
        double extra_err = 0.0;
        std::size_t ext_steps = 0;
        while (std::pow(y.stableNorm(), alpha) > rho_stop && ext_steps < opts.max_steps && y.stableNorm() > 1e-280) {
            Attempt a = attempt(clock.value() + extra.value(), h);
            if (a.underflow) break;
            if (!a.accepted) {
                h = std::isfinite(a.err) && a.err > 1.0 ? controller.propose(h, a.err, false) : 0.25 * h;
                continue;
            }
            ++ext_steps;
            extra.add(h);
            extra_err += alpha * a.step.error.stableNorm() / std::max(y.stableNorm(), a.step.y.stableNorm()) * bound;
            y = a.step.y;
            k1 = a.step.k_end;
            h = controller.propose(h, a.err, true);
        }
        const detail::TailEstimate rest = detail::tail_estimate(zsys, clock.value() + extra.value(), to_z(y));
        tail.tail = extra.value() + rest.tail;
        tail.err = extra_err + rest.err;
    }
    detail::finalize(traj, increments, rho_errors, tail);
    return traj;
}

Trajectory integrate_desingularized(const SystemSpec& sys, const Vector& y0, double t0,
                                    const IntegratorOptions& opts) {
    check_initial(sys, y0);
    check_options(opts);
    const SystemSpec zsys = transformed_system(sys);
    const int n = sys.dimension();
    const double alpha = sys.alpha;
    const bool out_z = opts.frame == Frame::z_coordinates;

    Trajectory traj;
    traj.t0 = t0;
    traj.scheme = Scheme::desingularized;
    traj.coordinate_frame = opts.frame;
    traj.alpha = alpha;
    traj.rel_tol = opts.rel_tol;

    const Vector z0 = sys.sd.S * y0;
    traj.rho_floor = opts.rho_floor * std::pow(out_z ? z0.norm() : y0.norm(), alpha);

    detail::DesingularizedField field{&zsys, zsys.sd.eigenvalues, t0};
    Vector x(n + 2);
    x(0) = alpha * std::log(z0.norm());
    x.segment(1, n) = z0 / z0.norm();
    x(n + 1) = 0.0;

    auto state_z = [&](const Vector& s) -> Vector { return std::exp(s(0) / alpha) * s.segment(1, n); };
    auto record = [&](double t, const Vector& s) {
        traj.samples.push_back(detail::sample_from_state(sys, zsys, t, s, opts.frame));
        check_bound(out_z ? zsys : sys, traj, t, traj.samples.back().y);
    };

    Vector k1(n + 2);
    if (!field(0.0, x, k1)) throw Error(ErrorKind::NonfiniteState, "desingularized field is not finite at y0");

    CompensatedSum clock(t0);
    std::vector<double> increments, rho_errors;
    double time_error = 0.0;
    record(t0, x);

    auto step_error = [&](const rk::StepResult& step) {
        if (!step.finite) return kInfinity;
        double sum = 0.0;
        const double eu = step.error(0) / (opts.abs_tol + opts.rel_tol);
        sum += eu * eu;
        for (int k = 1; k <= n; ++k) {
            const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(x(k)), std::abs(step.y(k)));
            sum += (step.error(k) / sc) * (step.error(k) / sc);
        }
        const double et = step.error(n + 1) / (opts.rel_tol * std::abs(step.y(n + 1)) + 1e-300);
        sum += et * et;
        return std::sqrt(sum / (n + 2));
    };

    double tau = 0.0;
    double h = 0.05 / (alpha * zsys.sd.largest());
    rk::PiController controller;
    std::size_t steps = 0;
    traj.stop_reason = StopReason::max_steps;

    while (steps < opts.max_steps) {
        if (tau >= opts.tau_max) {
            traj.stop_reason = StopReason::user;
            break;
        }
        if (h < 1e-14) {
            traj.stop_reason = StopReason::blowup;
            traj.warnings.push_back("StepSizeUnderflow: desingularized step size underflow");
            break;
        }
        const double step_h = std::min(h, opts.tau_max - tau);
        const rk::StepResult step = rk::dopri_step(field, tau, x, k1, step_h);
        const double err = step_error(step);
        if (!(err <= 1.0)) {
            ++traj.rejected_steps;
            h = std::isfinite(err) ? controller.propose(step_h, err, false) : 0.25 * step_h;
            continue;
        }
        ++steps;
        tau += step_h;
        const double dt = step.y(n + 1);
        clock.add(dt);
        increments.push_back(dt);
        rho_errors.push_back(std::abs(step.error(0)));
        time_error += std::abs(step.error(n + 1));
        x = step.y;
        x.segment(1, n).normalize();
        x(n + 1) = 0.0;
        field.t_base = clock.value();
        record(field.t_base, x);
        h = controller.propose(step_h, err, true);
        if (traj.samples.back().rho <= traj.rho_floor) {
            traj.stop_reason = StopReason::extinction_floor;
            break;
        }
        if (!field(tau, x, k1)) throw Error(ErrorKind::NonfiniteState, "desingularized field is not finite");
    }

    detail::TailEstimate tail = detail::tail_estimate(zsys, clock.value(), state_z(x));
    if (traj.stop_reason == StopReason::extinction_floor) {
        // Keep integrating without recording until the leftover tail is negligible.
        const double u_stop = x(0) - std::log(kTailExtension);
        const double bound = tail.tail + tail.err;
        CompensatedSum extra(0.0);
        double extra_err = 0.0;
        std::size_t ext_steps = 0;
        bool ok = true;
        while (x(0) > u_stop && ext_steps < opts.max_steps && h >= 1e-14 && std::exp(x(0) / alpha) > 1e-280) {
            if (!field(tau, x, k1)) {
                ok = false;
                break;
            }
            const rk::StepResult step = rk::dopri_step(field, tau, x, k1, h);
            const double err = step_error(step);
            if (!(err <= 1.0)) {
                h = std::isfinite(err) ? controller.propose(h, err, false) : 0.25 * h;
                continue;
            }
            ++ext_steps;
            tau += h;
            extra.add(step.y(n + 1));
            extra_err += std::abs(step.error(n + 1)) + std::abs(step.error(0)) * bound;
            x = step.y;
            x.segment(1, n).normalize();
            x(n + 1) = 0.0;
            field.t_base = clock.value() + extra.value();
            h = controller.propose(h, err, true);
        }
        if (ok) {
            const detail::TailEstimate rest = detail::tail_estimate(zsys, field.t_base, state_z(x));
            tail.tail = extra.value() + rest.tail;
            tail.err = extra_err + rest.err;
        }
    }
    detail::finalize(traj, increments, rho_errors, tail);
    traj.t_star_err += time_error;
    return traj;
}

}  // namespace extinct
