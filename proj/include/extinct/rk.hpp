#pragma once

#include "extinct/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace extinct::rk {

// Dormand-Prince 5(4) tableau.
namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// b - b_hat
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

struct StepResult {
    Vector y;      // 5th-order solution
    Vector error;  // embedded error estimate
    Vector k_end;  // f(t + h, y), reusable as the next k1
    bool finite = true;
};

/// One Dormand-Prince step from (t, y) with slope k1 = f(t, y).
/// `f(t, y, out)` must write the derivative into `out` and return false if the
/// state lies outside the domain of the vector field.
template <class F>
StepResult dopri_step(F&& f, double t, const Vector& y, const Vector& k1, double h) {
    using namespace dp;
    const auto n = y.size();
    Vector k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    StepResult r;
    r.finite = f(t + c2 * h, Vector(y + h * a21 * k1), k2) &&
               f(t + c3 * h, Vector(y + h * (a31 * k1 + a32 * k2)), k3) &&
               f(t + c4 * h, Vector(y + h * (a41 * k1 + a42 * k2 + a43 * k3)), k4) &&
               f(t + c5 * h, Vector(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)), k5) &&
               f(t + h, Vector(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)), k6);
    if (!r.finite) return r;
    r.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    r.finite = r.y.allFinite() && f(t + h, r.y, k7);
    if (!r.finite) return r;
    r.error = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    r.k_end = std::move(k7);
    return r;
}

/// PI step-size controller for an order-5/4 pair.
class PiController {
public:
    /// Returns the proposed next step after an attempt with scaled error `err`.
    double propose(double h, double err, bool accepted) {
        constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
        constexpr double fac_min = 0.2, fac_max = 10.0;
        const double fac11 = std::pow(std::max(err, 1e-300), expo1);
        if (accepted) {
            double fac = fac11 / std::pow(previous_, beta) / safe;
            fac = std::clamp(fac, 1.0 / fac_max, 1.0 / fac_min);
            previous_ = std::max(err, 1e-4);
            return h / fac;
        }
        return h / std::min(1.0 / fac_min, fac11 / safe);
    }

private:
    double previous_ = 1e-4;
};

}  // namespace extinct::rk
