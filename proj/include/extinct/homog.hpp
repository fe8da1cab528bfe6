#pragma once

#include "extinct/spectral.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace extinct {

struct SphereStats {
    double c1 = 0.0;  // min of H over the unit sphere
    double c2 = 0.0;  // max of H over the unit sphere
};

/// A positive function on R^n \ {0}, positively homogeneous of degree -alpha.
class HomogeneousFn {
public:
    using Evaluator = std::function<double(const Vector&)>;

    HomogeneousFn(std::string name, int dimension, double alpha, Evaluator evaluator);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int dimension() const noexcept { return dimension_; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] const std::optional<SphereStats>& sphere_stats() const noexcept { return stats_; }

    /// Unchecked evaluation; callers guarantee x != 0.
    [[nodiscard]] double operator()(const Vector& x) const { return (*evaluator_)(x); }

    [[nodiscard]] HomogeneousFn with_sphere_stats(SphereStats stats) const;

private:
    std::string name_;
    int dimension_;
    double alpha_;
    std::shared_ptr<const Evaluator> evaluator_;
    std::optional<SphereStats> stats_;
};

/// Checked evaluation. Throws ZeroVector, DimensionMismatch or NonfiniteValue.
double eval(const HomogeneousFn& H, const Vector& x);

namespace catalog {

/// a |x|^{-alpha}
HomogeneousFn power_norm(int n, double a, double alpha);
/// (x1^4 + 5 x2^4)^{-3}; degree -12.
HomogeneousFn quartic();
/// [(3|x1|^{3/2} + |x2|^{3/2})^{1/3} + (2|x1|^{5/3} + 7|x2|^{5/3})^{3/10}]^{-1/8}; degree -1/16.
HomogeneousFn nested_power();
/// (sqrt|x1| + sqrt|x2|) / |x|; degree -1/2, only Hoelder-1/2 at the axes.
HomogeneousFn root_sum();
/// (sum_i w_i |x_i|^p)^{-alpha/p}
HomogeneousFn weighted_pnorm(std::vector<double> weights, double p, double alpha);

/// Catalog lookup by name. Parameters: power_norm {a}, weighted_pnorm
/// {weights, p}. `alpha` is ignored by the fixed-degree entries.
HomogeneousFn by_name(const std::string& name, int n, double alpha, double a,
                      const std::vector<double>& weights, double p);

}  // namespace catalog

/// x -> c * H(x)
HomogeneousFn scaled(const HomogeneousFn& H, double c);

/// Custom H from an expression over x1..xn (see Expression), declared degree -alpha.
/// The declared degree is verified with estimate_degree.
HomogeneousFn from_expression(const std::string& text, int n, double alpha);

struct DegreeEstimate {
    double degree = 0.0;         // mean log-ratio estimate of -alpha
    double max_deviation = 0.0;  // largest per-sample departure from `degree`
};

/// Estimates the homogeneity degree from log(H(tx)/H(x))/log(t) over random
/// unit x and log-spaced t in [t_min, t_max]. Throws NotHomogeneous when a
/// sample deviates from the mean or from the declared -alpha by more than 1e-6.
DegreeEstimate estimate_degree(const HomogeneousFn& H, int samples = 64, double t_min = 1e-3,
                               double t_max = 1e3, std::uint64_t seed = 1);

/// Min and max of H over the unit sphere. Throws NonpositiveValue.
SphereStats sphere_extrema(const HomogeneousFn& H, int resolution = 720, std::uint64_t seed = 1);

struct HolderProbe {
    Vector x0;
    double gamma_est = 1.0;
    double C_est = 0.0;
    double r = 0.0;  // smallest probe distance used
    double residual = 0.0;
    bool degenerate = false;
};

/// Default multiplicative radius ladder 2^-k, k = 4..20.
std::vector<double> default_probe_radii();

/// Fits the upper envelope of |H(x) - H(x0)| against |x - x0| for sphere
/// perturbations of x0 at each radius. The exponent is capped at 1.
HolderProbe probe_holder(const HomogeneousFn& H, const Vector& x0,
                         const std::vector<double>& radii = default_probe_radii(),
                         int directions = 32, std::uint64_t seed = 7);

/// x -> H(Kx). Throws SingularMatrix.
HomogeneousFn compose_linear(const HomogeneousFn& H, const Matrix& K);

/// Random points on the unit sphere S^{n-1}.
std::vector<Vector> random_unit_vectors(int n, int count, std::uint64_t seed);

}  // namespace extinct
