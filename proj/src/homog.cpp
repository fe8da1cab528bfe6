#include "extinct/homog.hpp"

#include "extinct/error.hpp"
#include "extinct/expression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace extinct {

HomogeneousFn::HomogeneousFn(std::string name, int dimension, double alpha, Evaluator evaluator)
    : name_(std::move(name)),
      dimension_(dimension),
      alpha_(alpha),
      evaluator_(std::make_shared<const Evaluator>(std::move(evaluator))) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorKind::ConfigInvalid, "alpha must be a positive finite number");
    }
    if (dimension < 1) throw Error(ErrorKind::DimensionMismatch, "dimension must be >= 1");
}

HomogeneousFn HomogeneousFn::with_sphere_stats(SphereStats stats) const {
    HomogeneousFn out = *this;
    out.stats_ = stats;
    return out;
}

double eval(const HomogeneousFn& H, const Vector& x) {
    if (x.size() != H.dimension()) throw Error(ErrorKind::DimensionMismatch, "H: vector size");
    if (!(x.stableNorm() > 1e-300)) throw Error(ErrorKind::ZeroVector, "H evaluated at 0");
    const double v = H(x);
    if (!std::isfinite(v)) throw Error(ErrorKind::NonfiniteValue, "H(" + H.name() + ") is not finite");
    return v;
}

namespace catalog {

namespace {
void require_two(int n, const char* name) {
    if (n != 2) throw Error(ErrorKind::DimensionMismatch, std::string(name) + " is defined for n = 2");
}
}  // namespace

HomogeneousFn power_norm(int n, double a, double alpha) {
    if (!(a > 0.0)) throw Error(ErrorKind::ConfigInvalid, "power_norm: a must be positive");
    return HomogeneousFn("power_norm", n, alpha,
                         [a, alpha](const Vector& x) { return a * std::pow(x.stableNorm(), -alpha); });
}

HomogeneousFn quartic() {
    return HomogeneousFn("quartic", 2, 12.0, [](const Vector& x) {
        const double q = std::pow(x(0), 4) + 5.0 * std::pow(x(1), 4);
        return std::pow(q, -3.0);
    });
}

HomogeneousFn nested_power() {
    return HomogeneousFn("nested_power", 2, 1.0 / 16.0, [](const Vector& x) {
        const double a1 = std::abs(x(0)), a2 = std::abs(x(1));
        const double first = std::cbrt(3.0 * std::pow(a1, 1.5) + std::pow(a2, 1.5));
        const double second = std::pow(2.0 * std::pow(a1, 5.0 / 3.0) + 7.0 * std::pow(a2, 5.0 / 3.0), 0.3);
        return std::pow(first + second, -0.125);
    });
}

HomogeneousFn root_sum() {
    return HomogeneousFn("root_sum", 2, 0.5, [](const Vector& x) {
        return (std::sqrt(std::abs(x(0))) + std::sqrt(std::abs(x(1)))) / x.stableNorm();
    });
}

HomogeneousFn weighted_pnorm(std::vector<double> weights, double p, double alpha) {
    if (weights.empty()) throw Error(ErrorKind::ConfigInvalid, "weighted_pnorm: empty weights");
    if (!(p > 0.0)) throw Error(ErrorKind::ConfigInvalid, "weighted_pnorm: p must be positive");
    for (double w : weights) {
        if (!(w > 0.0)) throw Error(ErrorKind::ConfigInvalid, "weighted_pnorm: weights must be positive");
    }
    const int n = static_cast<int>(weights.size());
    return HomogeneousFn("weighted_pnorm", n, alpha, [w = std::move(weights), p, alpha](const Vector& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::pow(std::abs(x(static_cast<int>(i))), p);
        return std::pow(s, -alpha / p);
    });
}

HomogeneousFn by_name(const std::string& name, int n, double alpha, double a,
                      const std::vector<double>& weights, double p) {
    if (name == "power_norm") return power_norm(n, a, alpha);
    if (name == "quartic") return require_two(n, "quartic"), quartic();
    if (name == "nested_power") return require_two(n, "nested_power"), nested_power();
    if (name == "root_sum") return require_two(n, "root_sum"), root_sum();
    if (name == "weighted_pnorm") {
        if (static_cast<int>(weights.size()) != n) {
            throw Error(ErrorKind::DimensionMismatch, "weighted_pnorm: need one weight per coordinate");
        }
        return weighted_pnorm(weights, p, alpha);
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown catalog entry '" + name + "'");
}

}  // namespace catalog

HomogeneousFn scaled(const HomogeneousFn& H, double c) {
    if (!(c > 0.0)) throw Error(ErrorKind::ConfigInvalid, "scale factor must be positive");
    HomogeneousFn out(H.name(), H.dimension(), H.alpha(), [H, c](const Vector& x) { return c * H(x); });
    if (H.sphere_stats()) return out.with_sphere_stats({c * H.sphere_stats()->c1, c * H.sphere_stats()->c2});
    return out;
}

HomogeneousFn from_expression(const std::string& text, int n, double alpha) {
    std::vector<std::string> vars;
    for (int i = 1; i <= n; ++i) vars.push_back("x" + std::to_string(i));
    const Expression expr = Expression::parse(text, vars, 0, n);
    HomogeneousFn H("custom", n, alpha, [expr](const Vector& x) {
        return expr.eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    });
    estimate_degree(H);
    return H;
}

std::vector<Vector> random_unit_vectors(int n, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(out.size()) < count) {
        Vector x(n);
        for (int i = 0; i < n; ++i) x(i) = normal(rng);
        const double r = x.norm();
        if (r < 1e-8) continue;
        out.push_back(x / r);
    }
    return out;
}

DegreeEstimate estimate_degree(const HomogeneousFn& H, int samples, double t_min, double t_max,
                               std::uint64_t seed) {
    if (samples < 1) throw Error(ErrorKind::ConfigInvalid, "estimate_degree: samples must be >= 1");
    if (!(t_min > 0.0) || !(t_max > t_min)) {
        throw Error(ErrorKind::ConfigInvalid, "estimate_degree: need 0 < t_min < t_max");
    }
    std::vector<double> ts;
    constexpr int kTs = 7;
    for (int k = 0; k < kTs; ++k) {
        const double t = std::exp(std::log(t_min) + (std::log(t_max) - std::log(t_min)) * k / (kTs - 1));
        if (std::abs(std::log(t)) > 1e-2) ts.push_back(t);
    }
    if (ts.empty()) ts.push_back(t_max);

    std::vector<double> betas;
    for (const Vector& x : random_unit_vectors(H.dimension(), samples, seed)) {
        const double hx = eval(H, x);
        for (double t : ts) {
            const double htx = eval(H, Vector(t * x));
            if (!(hx > 0.0) || !(htx > 0.0)) {
                throw Error(ErrorKind::NotHomogeneous, H.name() + " is not positive on samples");
            }
            betas.push_back(std::log(htx / hx) / std::log(t));
        }
    }
    DegreeEstimate est;
    double sum = 0.0;
    for (double b : betas) sum += b;
    est.degree = sum / static_cast<double>(betas.size());
    for (double b : betas) est.max_deviation = std::max(est.max_deviation, std::abs(b - est.degree));
    if (est.max_deviation > 1e-6) {
        throw Error(ErrorKind::NotHomogeneous,
                    H.name() + ": log-ratio spread " + std::to_string(est.max_deviation));
    }
    if (std::abs(est.degree + H.alpha()) > 1e-6) {
        throw Error(ErrorKind::NotHomogeneous, H.name() + ": measured degree " + std::to_string(est.degree) +
                                                   " but declared " + std::to_string(-H.alpha()));
    }
    return est;
}

namespace {

// Golden-section search of a scalar function on [lo, hi]; sign = +1 for min, -1 for max.
double golden(const std::function<double(double)>& f, double lo, double hi, double sign) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = sign * f(c), fd = sign * f(d);
    double best = std::min({sign * f(lo), sign * f(hi), fc, fd});
    for (int it = 0; it < 200 && (b - a) > 1e-13; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sign * f(d);
        }
        best = std::min({best, fc, fd});
    }
    return sign * best;
}

// Pattern search on the sphere starting from x; sign = +1 minimizes, -1 maximizes.
double refine_on_sphere(const HomogeneousFn& H, Vector x, double sign) {
    const int n = static_cast<int>(x.size());
    double fx = sign * H(x);
    double step = 0.05;
    double previous = fx;
    while (step > 1e-10) {
        bool improved = false;
        for (int i = 0; i < n; ++i) {
            for (double dir : {1.0, -1.0}) {
                Vector trial = x;
                trial(i) += dir * step;
                trial.normalize();
                const double ft = sign * H(trial);
                if (ft < fx) {
                    x = trial;
                    fx = ft;
                    improved = true;
                }
            }
        }
        if (!improved) {
            if (std::abs(fx - previous) <= 1e-6 * std::abs(fx) && step < 1e-6) break;
            previous = fx;
            step *= 0.5;
        }
    }
    return sign * fx;
}

std::vector<Vector> sphere_candidates(int n, int resolution, std::uint64_t seed) {
    if (n == 3) {
        std::vector<Vector> pts;
        const int count = std::max(resolution, 2000);
        const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            const double z = 1.0 - 2.0 * (k + 0.5) / count;
            const double r = std::sqrt(1.0 - z * z);
            const double phi = golden_angle * k;
            Vector x(3);
            x << r * std::cos(phi), r * std::sin(phi), z;
            pts.push_back(x);
        }
        return pts;
    }
    std::vector<Vector> pts = random_unit_vectors(n, std::max(resolution, 4000), seed);
    for (int i = 0; i < n; ++i) {
        for (double s : {1.0, -1.0}) {
            Vector e = Vector::Zero(n);
            e(i) = s;
            pts.push_back(e);
        }
    }
    return pts;
}

}  // namespace

SphereStats sphere_extrema(const HomogeneousFn& H, int resolution, std::uint64_t seed) {
    const int n = H.dimension();
    auto positive = [&](const Vector& x) {
        const double v = eval(H, x);
        if (!(v > 0.0)) throw Error(ErrorKind::NonpositiveValue, H.name() + " is not positive on the sphere");
        return v;
    };

    if (n == 1) {
        const double hp = positive(Vector::Constant(1, 1.0));
        const double hm = positive(Vector::Constant(1, -1.0));
        return {std::min(hp, hm), std::max(hp, hm)};
    }

    if (n == 2) {
        const int m = std::max(resolution, 100);
        const double dtheta = 2.0 * std::numbers::pi / m;
        auto at = [&](double theta) {
            Vector x(2);
            x << std::cos(theta), std::sin(theta);
            return positive(x);
        };
        std::vector<double> values(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) values[static_cast<std::size_t>(k)] = at(k * dtheta);
        const auto kmin = std::min_element(values.begin(), values.end()) - values.begin();
        const auto kmax = std::max_element(values.begin(), values.end()) - values.begin();
        const double c1 = std::min(values[static_cast<std::size_t>(kmin)],
                                   golden(at, (kmin - 1) * dtheta, (kmin + 1) * dtheta, 1.0));
        const double c2 = std::max(values[static_cast<std::size_t>(kmax)],
                                   golden(at, (kmax - 1) * dtheta, (kmax + 1) * dtheta, -1.0));
        return {c1, c2};
    }

    const std::vector<Vector> pts = sphere_candidates(n, resolution, seed);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < pts.size(); ++i) ranked.emplace_back(positive(pts[i]), i);
    std::sort(ranked.begin(), ranked.end());
    double c1 = ranked.front().first, c2 = ranked.back().first;
    const std::size_t tries = std::min<std::size_t>(4, ranked.size());
    for (std::size_t k = 0; k < tries; ++k) {
        c1 = std::min(c1, refine_on_sphere(H, pts[ranked[k].second], 1.0));
        c2 = std::max(c2, refine_on_sphere(H, pts[ranked[ranked.size() - 1 - k].second], -1.0));
    }
    if (!(c1 > 0.0)) throw Error(ErrorKind::NonpositiveValue, H.name() + " is not positive on the sphere");
    return {c1, c2};
}

std::vector<double> default_probe_radii() {
    std::vector<double> r;
    for (int k = 4; k <= 20; ++k) r.push_back(std::ldexp(1.0, -k));
    return r;
}

HolderProbe probe_holder(const HomogeneousFn& H, const Vector& x0_in, const std::vector<double>& radii,
                         int directions, std::uint64_t seed) {
    const int n = H.dimension();
    if (x0_in.size() != n) throw Error(ErrorKind::DimensionMismatch, "probe_holder: x0 size");
    HolderProbe probe;
    probe.x0 = x0_in.normalized();
    probe.r = radii.empty() ? 0.0 : *std::min_element(radii.begin(), radii.end());
    const double h0 = eval(H, probe.x0);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> log_d, log_diff;
    double largest = 0.0;
    std::vector<std::pair<double, double>> envelope;
    if (n >= 2) {
        for (double r : radii) {
            double worst = 0.0;
            for (int k = 0; k < directions; ++k) {
                Vector u(n);
                for (int i = 0; i < n; ++i) u(i) = normal(rng);
                u -= u.dot(probe.x0) * probe.x0;
                if (u.norm() < 1e-12) continue;
                u.normalize();
                const Vector x = std::cos(r) * probe.x0 + std::sin(r) * u;
                worst = std::max(worst, std::abs(eval(H, x) - h0));
            }
            largest = std::max(largest, worst);
            envelope.emplace_back(2.0 * std::sin(r / 2.0), worst);
        }
    }
    if (largest < 1e-14) {
        probe.degenerate = true;
        probe.gamma_est = 1.0;
        probe.C_est = 0.0;
        return probe;
    }
    for (const auto& [d, diff] : envelope) {
        if (diff > 1e-14) {
            log_d.push_back(std::log(d));
            log_diff.push_back(std::log(diff));
        }
    }
    const std::size_t m = log_d.size();
    double slope = 1.0, intercept = std::log(largest);
    if (m >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < m; ++i) {
            mx += log_d[i];
            my += log_diff[i];
        }
        mx /= m;
        my /= m;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < m; ++i) {
            sxx += (log_d[i] - mx) * (log_d[i] - mx);
            sxy += (log_d[i] - mx) * (log_diff[i] - my);
        }
        slope = sxy / sxx;
        intercept = my - slope * mx;
    }
    for (std::size_t i = 0; i < m; ++i) {
        probe.residual = std::max(probe.residual, std::abs(log_diff[i] - (intercept + slope * log_d[i])));
    }
    if (slope > 1.0) {
        probe.gamma_est = 1.0;
        probe.C_est = 0.0;
        for (const auto& [d, diff] : envelope) probe.C_est = std::max(probe.C_est, diff / d);
    } else {
        probe.gamma_est = std::max(slope, 1e-12);
        probe.C_est = std::exp(intercept);
    }
    return probe;
}

HomogeneousFn compose_linear(const HomogeneousFn& H, const Matrix& K) {
    const int n = H.dimension();
    if (K.rows() != n || K.cols() != n) throw Error(ErrorKind::DimensionMismatch, "compose_linear: K size");
    Eigen::JacobiSVD<Matrix> svd(K);
    const auto& sv = svd.singularValues();
    if (!(sv(n - 1) > 1e-12 * sv(0))) throw Error(ErrorKind::SingularMatrix, "compose_linear: K is singular");
    HomogeneousFn out(H.name() + "∘K", n, H.alpha(), [H, K](const Vector& x) { return H(K * x); });
    estimate_degree(out);
    return out;
}

}  // namespace extinct
