#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>

#include "kolmo/coefficient_field.hpp"
#include "kolmo/lyapunov.hpp"

namespace kolmo {

/// Time window 0 < a0 < a < b < b0 < t <= 1.
struct TimeWindow {
    double a0 = 0.3, a = 0.4, b = 0.6, b0 = 0.7, t = 1.0;
};

TimeWindow make_time_window(double a0, double a, double b, double b0, double t);

/// Exponential weight triple w <= W1 <= W2 with staggered rates
/// eps0 < eps1 < eps2 < delta, shared alpha and beta, plus the hypothesis
/// constants c1..c9 in the factored form c_i = cbar_i (t-b0)^{-gamma_i}.
struct WeightSystem {
    double k = 4.0;  // integrability parameter, k > d+2
    double eps0 = 0.05, eps1 = 0.065, eps2 = 0.08;
    double delta = 0.2;
    double alpha = 2.5;
    double beta = 4.0;
    double t = 1.0;
    TimeWindow window;
    /// Z^{1-sigma} domination pair: W2 <= c0 Z^{1-sigma}
    double c0 = 1.0;
    double sigma = 0.3;

    std::array<double, 10> c{};      // c[1]..c[9] valid
    std::array<double, 10> cbar{};   // interval-independent base constants
    std::array<double, 10> gamma{};  // (t-b0) exponents

    TimeDependentLyapunov w;   // rate eps0
    TimeDependentLyapunov w1;  // rate eps1
    TimeDependentLyapunov w2;  // rate eps2
};

/// Assembles the weight triple for the power family; validates
/// eps0 < eps1 < eps2 < delta < 1/beta and k > d+2, and fixes the
/// domination pair as sigma = (1 - eps2/delta)/2, c0 = 1.
WeightSystem make_weight_system(double m, double p, double r, double k, double eps0, double eps1,
                                double eps2, double delta, double alpha, double beta,
                                const TimeWindow& window, int dim);

struct WeightConstantsDiagnostics {
    /// argmax (s, |y|) of each normalised ratio, indices 2..9
    std::array<double, 10> argmax_s{};
    std::array<double, 10> argmax_radius{};
    /// the scan radius; an argmax on it means the ratio had not peaked
    double scan_radius = 0.0;
    std::array<bool, 10> argmax_on_boundary{};
    /// sup over the window of |w^-2 ds w| and |w^-2 grad w| (hypothesis part 1)
    double sup_wm2_dsw = 0.0;
    double sup_wm2_gradw = 0.0;
    std::string notes;
};

/// Fills c1..c9, cbar, gamma.  gamma_i follow the closed-form exponent table
/// (gamma2 = alpha (m-1)_+/beta, gamma3 = alpha (m-2)_+/beta, gamma4 = 1,
/// gamma5 = alpha m/beta, gamma6 = alpha p/beta, gamma7 = alpha r/(2 beta),
/// gamma8 = gamma9 = 0); the base constants are grid maxima of the
/// time-normalised hypothesis ratios, clamped below by 1.  Throws if a ratio
/// is non-finite; an argmax on the scan boundary is flagged, not fatal.
WeightConstantsDiagnostics compute_weight_constants(const CoefficientField& field,
                                                    WeightSystem& ws);

/// Ratio of inequality (i)..(vii) / (viii: Laplacian of w) / (ix: Q grad W1)
/// at one space-time point, computed in log space.  Exposed for tests.
double hypothesis_ratio(const CoefficientField& field, const WeightSystem& ws, int which, double s,
                        const Eigen::VectorXd& y);

}  // namespace kolmo
