#include "extinct/analysis.hpp"

#include "extinct/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace extinct::analysis {
namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Weighted least squares of y = slope x + intercept.
LineFit weighted_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

// Shift c such that rho ~ k (s + c) on the given samples, weighting residuals relative to rho.
double extrapolation_shift(const std::vector<Sample>& smp, std::size_t begin, std::size_t end) {
    std::vector<double> x, y, w;
    for (std::size_t i = begin; i < end; ++i) {
        x.push_back(smp[i].remaining);
        y.push_back(smp[i].rho);
        w.push_back(1.0 / (smp[i].rho * smp[i].rho));
    }
    const LineFit f = weighted_line(x, y, w);
    return f.intercept / f.slope;
}

}  // namespace

ExtinctionEstimate estimate_extinction_time(const Trajectory& traj) {
    const auto& smp = traj.samples;
    constexpr std::size_t kMinSamples = 20;
    if (smp.size() < kMinSamples) {
        throw Error(ErrorKind::InsufficientSamples, "extinction-time refinement needs at least 20 samples");
    }
    const double rho_last = smp.back().rho;
    std::size_t begin = smp.size();
    while (begin > 0 && smp[begin - 1].rho <= 10.0 * rho_last) --begin;
    begin = std::min(begin, smp.size() - kMinSamples);
    const std::size_t end = smp.size();
    const std::size_t mid = begin + (end - begin) / 2;

    const double c = extrapolation_shift(smp, begin, end);
    const double spread = std::abs(extrapolation_shift(smp, begin, mid) - extrapolation_shift(smp, mid, end));

    ExtinctionEstimate out;
    out.T_star = traj.t_star_est;
    out.err = traj.t_star_err + (std::isfinite(spread) ? spread : 0.0);
    // Apply the extrapolated shift only when it falls outside the integrator bracket.
    if (std::isfinite(c) && std::abs(c) > traj.t_star_err && traj.t_star_est + c > smp.back().t) {
        out.T_star = traj.t_star_est + c;
        out.err = std::abs(c) + (std::isfinite(spread) ? spread : 0.0);
    }
    return out;
}

std::vector<QuotientPoint> dirichlet_quotient_series(const Trajectory& traj, const SpectralData& sd) {
    const bool in_z = traj.coordinate_frame == Frame::z_coordinates;
    if (!in_z && !sd.is_symmetric) {
        throw Error(ErrorKind::FrameMismatch,
                    "the quotient needs the symmetric frame; integrate nonsymmetric systems in z-coordinates");
    }
    const Matrix& M = in_z ? sd.A0 : sd.A;
    std::vector<QuotientPoint> out;
    out.reserve(traj.samples.size());
    for (const Sample& s : traj.samples) {
        if (s.y.size() != sd.n) throw Error(ErrorKind::DimensionMismatch, "sample dimension differs from A");
        const Vector v = s.y.stableNormalized();
        out.push_back({s.t, s.remaining, v.dot(M * v)});
    }
    return out;
}

EigenvalueMatch identify_eigenvalue(const std::vector<QuotientPoint>& series, const SpectralData& sd,
                                    double tail_fraction) {
    if (series.empty()) throw Error(ErrorKind::InsufficientSamples, "empty quotient series");
    if (!(tail_fraction > 0.0) || tail_fraction > 0.5) {
        throw Error(ErrorKind::ConfigInvalid, "tail_fraction must lie in (0, 1/2]");
    }
    const std::size_t count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(series.size()))));
    const std::size_t begin = series.size() - count;
    double sum = 0.0;
    for (std::size_t i = begin; i < series.size(); ++i) sum += series[i].lambda;

    EigenvalueMatch out;
    out.tail_average = sum / static_cast<double>(count);

    const auto& ev = sd.distinct_eigenvalues;
    std::vector<double> dist(ev.size());
    for (std::size_t j = 0; j < ev.size(); ++j) dist[j] = std::abs(out.tail_average - ev[j]);
    const auto best = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
    out.index = static_cast<int>(best);
    out.Lambda = ev[best];
    out.mu = spectral_gap(sd, out.Lambda);
    if (ev.size() == 1) return out;

    for (std::size_t j = 0; j < ev.size(); ++j) {
        if (j != best && std::abs(dist[j] - dist[best]) <= 1e-12) {
            std::ostringstream os;
            os << "tail average " << out.tail_average << " is equidistant from " << ev[best] << " and " << ev[j];
            throw Error(ErrorKind::AmbiguousEigenvalue, os.str());
        }
    }
    if (!(dist[best] < out.mu / 4.0)) {
        std::ostringstream os;
        os << "tail average " << out.tail_average << " is " << dist[best] << " from the nearest eigenvalue "
           << out.Lambda << ", not within mu/4 = " << out.mu / 4.0;
        throw Error(ErrorKind::AmbiguousEigenvalue, os.str());
    }
    if (count >= 2) {
        const std::size_t mid = begin + count / 2;
        double early = 0.0, late = 0.0;
        for (std::size_t i = begin; i < mid; ++i) early += std::abs(series[i].lambda - out.Lambda);
        for (std::size_t i = mid; i < series.size(); ++i) late += std::abs(series[i].lambda - out.Lambda);
        early /= static_cast<double>(mid - begin);
        late /= static_cast<double>(series.size() - mid);
        const double slack = 1e-10 * std::max(1.0, std::abs(out.Lambda));
        if (late > early + slack) {
            std::ostringstream os;
            os << "|lambda - Lambda| grows over the tail (" << early << " -> " << late << ")";
            throw Error(ErrorKind::NotConverged, os.str());
        }
    }
    return out;
}

PowerLawFit fit_power_law_remaining(std::span<const double> remaining, std::span<const double> m) {
    if (remaining.size() != m.size()) throw Error(ErrorKind::DimensionMismatch, "power-law inputs differ in length");
    constexpr std::size_t kMinPoints = 10;
    if (remaining.size() < kMinPoints) throw Error(ErrorKind::InsufficientRange, "power-law fit needs at least 10 points");
    std::vector<double> x(m.size()), y(m.size()), w(m.size(), 1.0);
    double lo = kInfinity, hi = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!(m[i] > 0.0) || !(remaining[i] > 0.0)) {
            throw Error(ErrorKind::NonpositiveValues, "power-law fit needs positive values and positive time to go");
        }
        x[i] = std::log(remaining[i]);
        y[i] = std::log(m[i]);
        lo = std::min(lo, remaining[i]);
        hi = std::max(hi, remaining[i]);
    }
    if (!(std::log10(hi / lo) >= 1.5)) {
        throw Error(ErrorKind::InsufficientRange, "time to go spans less than 1.5 decades");
    }
    const LineFit f = weighted_line(x, y, w);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    PowerLawFit out;
    out.exponent = f.slope;
    out.coefficient = std::exp(f.intercept);
    out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    out.points = y.size();
    return out;
}

PowerLawFit fit_power_law(std::span<const double> t, std::span<const double> m, double T_star) {
    std::vector<double> s(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = T_star - t[i];
    return fit_power_law_remaining(s, m);
}

namespace {

struct XiFit {
    Vector xi;
    double exponent = 0.0;  // 0 when the constant model was kept
};

// Least squares of W (rows = samples) against [1, x^q, ..., x^{terms q}]; returns the residual sum of squares.
double power_model(const std::vector<double>& x, const Matrix& W, double q, int terms, Vector* intercept) {
    const auto m = static_cast<Eigen::Index>(x.size());
    Matrix X(m, terms + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double xq = std::pow(x[static_cast<std::size_t>(i)], q);
        X(i, 0) = 1.0;
        for (int j = 1; j <= terms; ++j) X(i, j) = X(i, j - 1) * xq;
    }
    const Matrix coef = X.colPivHouseholderQr().solve(W);
    if (intercept) *intercept = coef.row(0).transpose();
    return (X * coef - W).squaredNorm();
}

struct ExponentScan {
    double q = 0.0;
    double ss = kInfinity;
};

// Best q for a given number of power terms: log grid, then golden section.
ExponentScan scan_exponent(const std::vector<double>& x, const Matrix& W, int terms) {
    constexpr int kGrid = 61;
    const double log_lo = std::log(1e-2), log_hi = std::log(1e1);
    auto ss_at = [&](double lq) { return power_model(x, W, std::exp(lq), terms, nullptr); };
    int best = 0;
    double best_ss = kInfinity;
    for (int k = 0; k < kGrid; ++k) {
        const double ss = ss_at(log_lo + (log_hi - log_lo) * k / (kGrid - 1));
        if (ss < best_ss) {
            best_ss = ss;
            best = k;
        }
    }
    const double step = (log_hi - log_lo) / (kGrid - 1);
    double a = log_lo + step * std::max(0, best - 1), b = log_lo + step * std::min(kGrid - 1, best + 1);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = ss_at(c), fd = ss_at(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = ss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = ss_at(d);
        }
    }
    ExponentScan out;
    out.q = std::exp(0.5 * (a + b));
    out.ss = power_model(x, W, out.q, terms, nullptr);
    return out;
}

// w(s) ~ xi + b s^q (+ c s^{2q} when the second term clearly helps).
XiFit fit_constant_plus_power(const std::vector<double>& s, const Matrix& W) {
    const double s_hi = *std::max_element(s.begin(), s.end());
    std::vector<double> x(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) x[i] = s[i] / s_hi;

    XiFit out;
    const Vector mean = W.colwise().mean().transpose();
    const double ss_const = (W.rowwise() - mean.transpose()).squaredNorm();
    out.xi = mean;
    if (!(ss_const > 0.0)) return out;

    const ExponentScan one = scan_exponent(x, W, 1);
    if (!(one.ss < 0.25 * ss_const)) return out;
    out.exponent = one.q;
    power_model(x, W, one.q, 1, &out.xi);
    if (x.size() < 12) return out;
    const ExponentScan two = scan_exponent(x, W, 2);
    if (two.ss < 0.25 * one.ss) {
        out.exponent = two.q;
        power_model(x, W, two.q, 2, &out.xi);
    }
    return out;
}

CorrectionFit correction_fit(const std::vector<double>& s, const std::vector<double>& residual,
                             const std::vector<double>& scale, double noise, double offset) {
    std::vector<double> ss, rr;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (residual[i] > noise * scale[i]) {
            ss.push_back(s[i]);
            rr.push_back(residual[i]);
        }
    }
    CorrectionFit out;
    out.points = ss.size();
    if (ss.size() < 10) return out;
    const auto [lo, hi] = std::minmax_element(ss.begin(), ss.end());
    if (!(std::log10(*hi / *lo) >= 1.0)) return out;
    std::vector<double> lx(ss.size()), ly(ss.size()), w(ss.size(), 1.0);
    for (std::size_t i = 0; i < ss.size(); ++i) {
        lx[i] = std::log(ss[i]);
        ly[i] = std::log(rr[i]);
    }
    const LineFit f = weighted_line(lx, ly, w);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < ly.size(); ++i) {
        const double r = ly[i] - (f.slope * lx[i] + f.intercept);
        ss_res += r * r;
        ss_tot += (ly[i] - my) * (ly[i] - my);
    }
    out.below_noise = false;
    out.eps = f.slope - offset;
    out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

}  // namespace

AsymptoticProfile estimate_profile(const Trajectory& traj, double T_star, const SpectralData& sd,
                                   const EigenvalueMatch& Lambda, const HomogeneousFn& H,
                                   const ProfileOptions& opts) {
    if (Lambda.index < 0 || Lambda.index >= sd.distinct_count()) {
        throw Error(ErrorKind::UnknownEigenvalue, "eigenvalue index outside the spectrum");
    }
    const double alpha = opts.alpha > 0.0 ? opts.alpha : traj.alpha;
    if (!(alpha > 0.0)) throw Error(ErrorKind::ConfigInvalid, "alpha must be positive");
    if (!(opts.fit_decades > 0.0)) throw Error(ErrorKind::ConfigInvalid, "fit_decades must be positive");
    const bool in_z = traj.coordinate_frame == Frame::z_coordinates;
    const Matrix P = in_z ? sd.diagonal_selector(Lambda.index) : sd.projections[static_cast<std::size_t>(Lambda.index)];
    const Matrix Q = Matrix::Identity(sd.n, sd.n) - P;
    const double shift = T_star - traj.t_star_est;

    double s_cut = kInfinity;
    for (const Sample& smp : traj.samples) {
        const double s = smp.remaining + shift;
        if (s > 0.0 && smp.rho >= opts.floor_guard * traj.rho_floor) s_cut = std::min(s_cut, s);
    }
    if (!std::isfinite(s_cut)) throw Error(ErrorKind::InsufficientSamples, "no samples above the roundoff guard");
    const double s_top = s_cut * std::pow(10.0, opts.fit_decades);

    std::vector<const Sample*> win;
    std::vector<double> s;
    for (const Sample& smp : traj.samples) {
        const double si = smp.remaining + shift;
        if (si >= s_cut && si <= s_top && smp.rho >= opts.floor_guard * traj.rho_floor) {
            win.push_back(&smp);
            s.push_back(si);
        }
    }
    if (win.size() < 10) {
        std::ostringstream os;
        os << "fit window holds " << win.size() << " samples, need at least 10";
        throw Error(ErrorKind::InsufficientSamples, os.str());
    }

    const auto m = static_cast<Eigen::Index>(win.size());
    Matrix W(m, sd.n);
    double max_ratio = 0.0;
    std::vector<double> ynorm(win.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const Vector& y = win[k]->y;
        const Vector Py = P * y;
        ynorm[k] = y.stableNorm();
        max_ratio = std::max(max_ratio, Py.stableNorm() / ynorm[k]);
        W.row(i) = (std::pow(s[k], -1.0 / alpha) * Py).transpose();
    }
    if (!(max_ratio > opts.noise_floor)) {
        throw Error(ErrorKind::DegenerateProjection, "the spectral projection of y stays below noise in the fit window");
    }

    const XiFit xf = fit_constant_plus_power(s, W);
    const Vector xi_frame = xf.xi;
    const Vector v_frame = xi_frame.normalized();

    std::vector<double> r_main(win.size()), r_ir(win.size()), r_ry(win.size()), r_v(win.size()), ones(win.size(), 1.0);
    for (std::size_t k = 0; k < win.size(); ++k) {
        const Vector& y = win[k]->y;
        const Vector target = std::pow(s[k], 1.0 / alpha) * xi_frame;
        r_main[k] = (y - target).stableNorm();
        r_ir[k] = (Q * y).stableNorm();
        r_ry[k] = (P * y - target).stableNorm();
        r_v[k] = (y / ynorm[k] - v_frame).stableNorm();
    }

    AsymptoticProfile out;
    out.Lambda = Lambda.Lambda;
    out.mu = Lambda.mu;
    out.T_star = T_star;
    out.alpha = alpha;
    out.frame = traj.coordinate_frame;
    out.xi_exponent = xf.exponent;
    out.window_lo = s.front() < s.back() ? s.front() : s.back();
    out.window_hi = s.front() < s.back() ? s.back() : s.front();
    out.window_points = win.size();
    out.xi_star = in_z ? Vector(sd.S_inv * xi_frame) : xi_frame;
    out.v_star = out.xi_star.normalized();

    out.main = correction_fit(s, r_main, ynorm, opts.noise_floor, 1.0 / alpha);
    out.ir = correction_fit(s, r_ir, ynorm, opts.noise_floor, 1.0 / alpha);
    out.ry = correction_fit(s, r_ry, ynorm, opts.noise_floor, 1.0 / alpha);
    out.v = correction_fit(s, r_v, ones, opts.noise_floor, 0.0);
    out.eps_main = out.main.eps;
    out.eps_ir = out.ir.eps;
    out.eps_ry = out.ry.eps;
    out.eps_v = out.v.eps;
    if (!out.main.below_noise) out.fit_quality["main"] = out.main.r2;
    if (!out.ir.below_noise) out.fit_quality["ir"] = out.ir.r2;
    if (!out.ry.below_noise) out.fit_quality["ry"] = out.ry.r2;
    if (!out.v.below_noise) out.fit_quality["v"] = out.v.r2;

    out.residual_xiHA = std::abs(alpha * out.Lambda * eval(H, out.xi_star) - 1.0);
    out.eigen_residual = (sd.A * out.xi_star - out.Lambda * out.xi_star).norm() / out.xi_star.norm();
    return out;
}

bool VerificationReport::passed() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const ClauseResult& c) { return c.passed; });
}

std::vector<std::string> VerificationReport::failed_clauses() const {
    std::vector<std::string> out;
    for (const auto& c : clauses)
        if (!c.passed) out.push_back(c.name);
    return out;
}

VerificationReport verify_main_theorem(const AsymptoticProfile& profile, const Trajectory& traj,
                                       const HomogeneousFn& H, const VerificationThresholds& thr) {
    VerificationReport rep;

    ClauseResult xiha{"xiHA", false, 0.0, thr.xiHA, ""};
    xiha.value = std::abs(profile.alpha * profile.Lambda * eval(H, profile.xi_star) - 1.0);
    xiha.passed = xiha.value <= thr.xiHA;
    rep.clauses.push_back(xiha);

    ClauseResult eps{"correction_exponents", true, kInfinity, thr.eps_min, ""};
    std::ostringstream detail;
    const std::pair<const char*, const CorrectionFit*> fits[] = {
        {"main", &profile.main}, {"ir", &profile.ir}, {"ry", &profile.ry}};
    for (const auto& [name, f] : fits) {
        if (f->below_noise) {
            detail << name << "=below_noise ";
            continue;
        }
        eps.value = std::min(eps.value, f->eps);
        detail << name << "=" << f->eps << " (R2 " << f->r2 << ") ";
        if (!(f->eps >= thr.eps_min) || !(f->r2 >= thr.r2_min)) eps.passed = false;
    }
    eps.detail = detail.str();
    rep.clauses.push_back(eps);

    ClauseResult eig{"eigenvector", false, profile.eigen_residual, thr.eigen, ""};
    eig.passed = profile.eigen_residual <= thr.eigen;
    rep.clauses.push_back(eig);

    ClauseResult vlim{"direction_limit", false, profile.eps_v, 0.0, ""};
    vlim.passed = profile.eps_v > 0.0;
    vlim.detail = profile.v.below_noise ? "below_noise" : "fitted";
    rep.clauses.push_back(vlim);

    if (traj.bound_violation) {
        rep.clauses.push_back({"perturbation_bound", false, 0.0, 0.0, "f exceeded its declared rate bound"});
    }
    return rep;
}

}  // namespace extinct::analysis
