#pragma once

#include "extinct/dynamics.hpp"

#include <vector>

namespace extinct::oracle {

/// Exact solution of y' = -a |y|^{-alpha} y started at y0 at time 0:
/// y(t) = y0 (1 - t/T*)^{1/alpha} with T* = |y0|^alpha / (alpha a).
/// Throws BeyondExtinction for t > T*.
double scalar_closed_form(double a, double alpha, double y0, double t);

/// The same solution parametrized by the time left before extinction,
/// sign(y0) (alpha a s)^{1/alpha}; well conditioned as s -> 0.
double scalar_closed_form_remaining(double a, double alpha, double y0, double remaining);

/// Extinction time |y0|^alpha / (alpha a) of the scalar problem.
double scalar_extinction_time(double a, double alpha, double y0);

/// Profile machinery for A = I, H = a|x|^{-alpha}: variation of constants with
/// the weighted integrals J*, eta* and the radial correction g.
struct SpecialCaseProfile {
    double a = 0.0;
    double alpha = 0.0;
    double T_star = 0.0;
    double J_star = 0.0;
    Vector eta_star;
    Vector xi_star;
    std::vector<double> g_times;     // sample times
    std::vector<double> g_of_t;      // g at those times
    std::vector<double> h_remaining; // T* - t where the J2 integrand was tabulated
    std::vector<double> h_values;    // J2 integrand h at those points
    std::vector<double> j2_partial;  // J2(t) at h_remaining
    double quadrature_err = 0.0;     // change under mesh refinement
    double xi_err = 0.0;             // quadrature_err plus T* propagation; excludes the trajectory's own error
    int panels = 0;
};

/// Computes the profile from a trajectory of y' = -a|y|^{-alpha}y + f.
/// Throws QuadratureNotConverged.
SpecialCaseProfile special_case_profile(double a, double alpha, const Vector& y0, const Trajectory& traj,
                                        const PerturbationSpec& pert, double tol = 1e-10);

struct ReferenceOptions {
    double rho_floor = 1e-10;  // relative to |y0|^alpha
    Frame frame = Frame::original;
    int max_halvings = 12;
};

/// Fixed-step classical RK4 on the desingularized system, halving the step
/// until two successive runs agree to `tol` at common tau checkpoints.
/// Throws NoConvergence.
Trajectory reference_integrate(const SystemSpec& sys, const Vector& y0, double t0, double tol = 1e-10,
                               const ReferenceOptions& opts = {});

}  // namespace extinct::oracle
