#pragma once

#include "extinct/homog.hpp"
#include "extinct/spectral.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace extinct {

/// Forcing term f(t, y) with a rate bound |f| <= M |y|^{1 - alpha + delta}.
struct PerturbationSpec {
    enum class Kind { none, bounded_builtin, custom };
    using Evaluator = std::function<Vector(double t, const Vector& y)>;

    Kind kind = Kind::none;
    std::string name = "none";
    Evaluator evaluator;
    double M = 0.0;
    double delta = 0.0;
    double r_star = kInfinity;  // bound holds for 0 < |y| <= r_star
    double c_star = 0.0;        // 0 means "use M"

    [[nodiscard]] bool active() const noexcept { return kind != Kind::none; }
    [[nodiscard]] double bound_constant() const noexcept { return c_star > 0.0 ? c_star : M; }
    [[nodiscard]] Vector operator()(double t, const Vector& y) const {
        return active() ? evaluator(t, y) : Vector::Zero(y.size());
    }
};

namespace perturbation {

PerturbationSpec none();
/// coeff |y|^{1-alpha+delta} e with e a unit vector.
PerturbationSpec fixed_direction(Vector direction, double coeff, double alpha, double delta);
/// coeff |y|^{delta-alpha} J y, J rotating consecutive coordinate pairs by 90 degrees.
PerturbationSpec rotational(int n, double coeff, double alpha, double delta);
/// coeff cos(omega t) |y|^{1-alpha+delta} e.
PerturbationSpec oscillating(Vector direction, double coeff, double omega, double alpha, double delta);
/// Component expressions over t, y1..yn (see Expression) with declared bound constants.
PerturbationSpec custom(const std::vector<std::string>& components, double M, double delta,
                        double r_star = kInfinity, double c_star = 0.0);

}  // namespace perturbation

/// The right-hand side y' = -H(y) A y + f(t, y).
struct SystemSpec {
    SpectralData sd;
    HomogeneousFn H;
    PerturbationSpec pert;
    double alpha = 0.0;

    [[nodiscard]] int dimension() const noexcept { return sd.n; }
};

/// Validates dimensions and positivity of H on sphere samples; fills in the
/// sphere statistics of H when absent.
SystemSpec make_system(SpectralData sd, HomogeneousFn H, PerturbationSpec pert = perturbation::none());

/// The equivalent system for z = S y: A0, H o S^{-1}, S f(t, S^{-1} z).
SystemSpec transformed_system(const SystemSpec& sys);

/// -H(y) A y + f(t, y). Throws ZeroVector.
Vector rhs(const SystemSpec& sys, double t, const Vector& y);

enum class Scheme { direct, desingularized, reference };
enum class Frame { original, z_coordinates };
enum class StopReason { extinction_floor, max_steps, blowup, user };

std::string to_string(Scheme s);
std::string to_string(Frame f);
std::string to_string(StopReason r);

struct Sample {
    double t = 0.0;
    double remaining = 0.0;  // T*_est - t, accumulated backwards from the end
    Vector y;
    double rho = 0.0;     // |y|^alpha
    double lambda = 0.0;  // Dirichlet quotient in the symmetric frame
    Vector v;             // y / |y|
};

struct Trajectory {
    std::vector<Sample> samples;
    double t0 = 0.0;
    double t_star_est = 0.0;
    double t_star_err = 0.0;
    StopReason stop_reason = StopReason::extinction_floor;
    Scheme scheme = Scheme::direct;
    Frame coordinate_frame = Frame::original;
    double alpha = 0.0;
    double rho_floor = 0.0;  // absolute floor used to stop
    double rel_tol = 0.0;
    std::size_t rejected_steps = 0;
    bool bound_violation = false;  // f exceeded its declared rate bound on some sample
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    /// Shifts the extinction estimate by `dt`, keeping `remaining` consistent.
    void shift_extinction(double dt);
};

struct IntegratorOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double rho_floor = 1e-10;  // relative to |y0|^alpha
    std::size_t max_steps = 1'000'000;
    double tau_max = kInfinity;  // desingularized time budget
    /// Frame of the stored samples. The desingularized scheme always integrates
    /// in z-coordinates; the direct scheme integrates in the stored frame.
    Frame frame = Frame::original;
};

/// Adaptive Dormand-Prince integration of y' = -H(y)Ay + f in t until
/// |y|^alpha <= rho_floor |y0|^alpha.
Trajectory integrate_direct(const SystemSpec& sys, const Vector& y0, double t0,
                            const IntegratorOptions& opts = {});

/// Adaptive integration of (log rho, v, t) in the time tau with d tau = H(y) dt,
/// which maps the extinction time to tau = infinity.
Trajectory integrate_desingularized(const SystemSpec& sys, const Vector& y0, double t0,
                                    const IntegratorOptions& opts = {});

/// Small-data radius r0 and decay constant a0 for guaranteed extinction.
struct ExtinctionRadius {
    double r0 = kInfinity;
    double a0 = 0.0;
    bool symmetric = true;
    // z-frame constants, used for nonsymmetric A
    double r0_z = kInfinity;
    double a0_z = 0.0;
    double norm_S = 1.0;
    double norm_S_inv = 1.0;

    /// Upper bound on |y(t)|^alpha implied by the decay estimate.
    [[nodiscard]] double bound(const SpectralData& sd, const Vector& y0, double alpha, double elapsed) const;
};

/// Throws MissingBoundConstants when the perturbation lacks delta or a bound constant.
ExtinctionRadius extinction_radius(const SystemSpec& sys);

/// Constant of |S f| <= M~ |S y|^{1 - alpha + delta} given |f| <= M |y|^{1 - alpha + delta}.
double transformed_bound_constant(double M, const SpectralData& sd, double alpha, double delta);

/// Dirichlet quotient of the unit vector v in the symmetric frame.
double dirichlet_quotient(const SpectralData& sd, const Vector& v, Frame frame);

namespace detail {

/// Desingularized vector field in z-coordinates. State: (log rho, v[0..n), t - t_base).
struct DesingularizedField {
    const SystemSpec* zsys = nullptr;  // transformed system
    std::vector<double> a0_diag;
    double t_base = 0.0;

    bool operator()(double tau, const Vector& x, Vector& dx) const;
};

/// Time-to-extinction estimate from the last z-frame state, with error bracket.
struct TailEstimate {
    double tail = 0.0;
    double err = 0.0;
};
TailEstimate tail_estimate(const SystemSpec& zsys, double t, const Vector& z);

/// Sample for the desingularized state x = (log rho, v, .) of the z-frame system.
Sample sample_from_state(const SystemSpec& sys, const SystemSpec& zsys, double t, const Vector& x, Frame frame);

/// Fills remaining times and the extinction estimate. `increments[i]` is the
/// time between samples i and i+1; `rho_errors[i]` the local relative error
/// estimate of |y|^alpha on that step, converted into a time error.
void finalize(Trajectory& traj, const std::vector<double>& increments, const std::vector<double>& rho_errors,
              const TailEstimate& tail);

}  // namespace detail

}  // namespace extinct
