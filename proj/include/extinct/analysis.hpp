#pragma once

#include "extinct/dynamics.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace extinct::analysis {

struct ExtinctionEstimate {
    double T_star = 0.0;
    double err = 0.0;
};

/// Refines t_star_est by a weighted linear fit of rho against the time to go over the
/// final decade of samples. Throws InsufficientSamples.
ExtinctionEstimate estimate_extinction_time(const Trajectory& traj);

struct QuotientPoint {
    double t = 0.0;
    double remaining = 0.0;
    double lambda = 0.0;
};

/// v . A0 v per sample, recomputed from the stored states. Throws FrameMismatch for
/// original-frame samples of a nonsymmetric matrix.
std::vector<QuotientPoint> dirichlet_quotient_series(const Trajectory& traj, const SpectralData& sd);

struct EigenvalueMatch {
    double Lambda = 0.0;
    int index = -1;            // into distinct_eigenvalues
    double mu = kInfinity;     // spectral gap at Lambda
    double tail_average = 0.0;
};

/// Matches the tail average of the quotient to the nearest eigenvalue.
/// Throws AmbiguousEigenvalue or NotConverged.
EigenvalueMatch identify_eigenvalue(const std::vector<QuotientPoint>& series, const SpectralData& sd,
                                    double tail_fraction = 0.25);

struct PowerLawFit {
    double exponent = 0.0;
    double coefficient = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

/// Least squares of log m against log(T* - t). Throws InsufficientRange or NonpositiveValues.
PowerLawFit fit_power_law(std::span<const double> t, std::span<const double> m, double T_star);
/// The same fit with the time to go supplied directly.
PowerLawFit fit_power_law_remaining(std::span<const double> remaining, std::span<const double> m);

/// A correction exponent. `eps` is +infinity when the residual stays below the noise floor.
struct CorrectionFit {
    double eps = kInfinity;
    double r2 = 1.0;
    std::size_t points = 0;
    bool below_noise = true;
};

struct ProfileOptions {
    double fit_decades = 2.0;
    double floor_guard = 1e2;         // drop samples with rho below floor_guard * rho_floor
    double noise_floor = 1e-7;        // residuals relative to |y| below this count as noise
    double alpha = 0.0;               // 0 means the trajectory's alpha
};

struct AsymptoticProfile {
    double Lambda = 0.0;
    double mu = kInfinity;
    double T_star = 0.0;
    double alpha = 0.0;
    Vector xi_star;  // original coordinates
    Vector v_star;
    double xi_exponent = 0.0;  // power in the constant-plus-power fit
    CorrectionFit main, ir, ry, v;
    double eps_main = kInfinity, eps_ir = kInfinity, eps_ry = kInfinity, eps_v = kInfinity;
    double residual_xiHA = 0.0;
    double eigen_residual = 0.0;  // |A xi - Lambda xi| / |xi|
    std::map<std::string, double> fit_quality;  // R^2 of the fits that were above noise
    Frame frame = Frame::original;
    double window_lo = 0.0, window_hi = 0.0;  // time-to-go range of the fit window
    std::size_t window_points = 0;
};

/// Limit profile of a trajectory. `T_star` shifts the stored time to go; `H` is the
/// original (untransformed) function. Throws DegenerateProjection or InsufficientSamples.
AsymptoticProfile estimate_profile(const Trajectory& traj, double T_star, const SpectralData& sd,
                                   const EigenvalueMatch& Lambda, const HomogeneousFn& H,
                                   const ProfileOptions& opts = {});

struct ClauseResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerificationReport {
    std::vector<ClauseResult> clauses;
    [[nodiscard]] bool passed() const;
    [[nodiscard]] std::vector<std::string> failed_clauses() const;
};

struct VerificationThresholds {
    double xiHA = 1e-3;
    double eps_min = 0.01;
    double r2_min = 0.99;
    double eigen = 1e-6;
};

VerificationReport verify_main_theorem(const AsymptoticProfile& profile, const Trajectory& traj,
                                       const HomogeneousFn& H, const VerificationThresholds& thr = {});

}  // namespace extinct::analysis
