#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "kolmo/kernel_solver.hpp"
#include "kolmo/weights.hpp"

namespace kolmo {

/// Closed-form upper bound for sup_{z>0} z^gamma exp(-tau z^beta):
/// tau^{-gamma/beta} (gamma/beta)^{gamma/beta} e^{-gamma/beta}, with 0^0 = 1.
double envelope_bound(double gamma, double tau, double beta);

/// Root bound for X^k <= (4/3) a^2 + (4/3) b X^{k-1} + (4/3) c X^{k-2}:
/// every nonnegative solution satisfies X <= (4/3) b + sqrt((4/3) c)
/// + ((4/3) a^2)^{1/k}.  Requires k > 2.
double x_root_bound(double a, double b, double c, double k);

struct GammaMoments {
    double gamma1 = 0.0;  ///< (integral |F|^{k/2} g)^{2/k} over the window
    double gamma2 = 0.0;  ///< (integral V^{k/2} g)^{2/k}
    bool finite = true;
};

/// Trapezoidal space-time moments of |F| and V against the slice over
/// (a0, b0) x box.  Non-finite results are flagged (truncation too small for
/// the coefficient growth).
GammaMoments compute_gamma_moments(const KernelSlice& slice, const CoefficientField& field,
                                   double k, const TimeWindow& window);

/// Kernel-weighted profile of a time dependent Lyapunov function:
/// zeta(s) = integral W(s,y) g(t,s,x,y) dy on the slice's s-grid.
struct ZetaProfile {
    double t = 1.0;
    Eigen::VectorXd x;
    std::vector<double> s;
    std::vector<double> zeta;
    /// sup and integral over (a0, b0)
    double sup_window = 0.0;
    double integral_window = 0.0;
};

ZetaProfile compute_zeta(const KernelSlice& slice, const TimeDependentLyapunov& w,
                         const TimeWindow& window);

struct ZetaBoundReport {
    bool pass = false;
    /// max over grid s of zeta(s) / (exp(int_s^t h) W(t,x))
    double worst_ratio = 0.0;
    double argmax_s = 0.0;
    /// Phi monotonicity: min over consecutive grid points of Phi_{j+1}-Phi_j,
    /// relative to max |Phi|
    double phi_min_increment = 0.0;
    bool phi_monotone = false;
};

/// Checks zeta(s) <= exp(int_s^t h) W(t,x) up to the tolerance, plus the
/// monotonicity of Phi(tau) = (zeta(t) + int_tau^t h zeta) exp(int_s^tau h).
/// Segment integrals of h are exact; zeta enters by the trapezoid rule.
ZetaBoundReport check_zeta_bound(const ZetaProfile& profile, const TimeDependentLyapunov& w,
                                 double tol = 0.02, double phi_slack = 1e-6);

struct MassBoundReport {
    bool pass = false;
    /// max over grid s of G(t,s)Z(x) / (Z(x) + M (t-s))
    double worst_ratio = 0.0;
    double argmax_s = 0.0;
};

/// Checks the mass bound G(t,s)Z(x) <= Z(x) + M (t-s) on the slice grid.
MassBoundReport check_mass_bound(const KernelSlice& slice, const StaticCertificate& cert,
                                 double M, double tol = 0.02);

enum class BoundVariant { BoundedDiffusion, General };  // eq. for c1..c7 / c1..c9

struct MainBoundAssembly {
    double coef_sup = 0.0;  ///< multiplies sup zeta_W1
    double coef_i1 = 0.0;   ///< multiplies int zeta_W1
    double coef_i2 = 0.0;   ///< multiplies int zeta_W2
    double total = 0.0;     ///< the assembled right-hand side (in units of C1)
};

/// Right-hand side of the main kernel bound as a multiple of the
/// non-constructive constant C1:
///   c1^{k/2} S + (c1^{k/2}/(b0-b)^{k/2} + c2^k + c3^{k/2} + c4^{k/2} [+ c8^{k/2}]) I1
///   + (c2^{k/2} c6^{k/2} + c5^k + c6^k + c7^k [+ c9^k]) I2,
/// the bracketed terms present in the General variant only.
MainBoundAssembly assemble_main_bound(const WeightSystem& ws, double sup_zeta1, double int_zeta1,
                                      double int_zeta2, BoundVariant variant);

struct RegimeSelection {
    int regime = 1;  ///< 1 iff p >= (m+r)/2
    double beta = 0.0;
    double alpha0 = 0.0;
    double eps_max = 0.0;
    double m = 0.0, p = 0.0, r = 0.0;
    /// decay prefactor exponent E(alpha, k) of (t-s)^E
    double exponent(double alpha, double k) const;
};

/// Chooses the parameter regime for the power family; parameter-domain
/// violations are rejected by name.
RegimeSelection select_regime(double m, double p, double r);

struct BoundVerdict {
    int regime = 1;
    double beta = 0.0;
    double alpha = 0.0;
    double eps = 0.0;
    double k = 0.0;
    double exponent = 0.0;
    double c_fit = 0.0;
    double c_fit_refined = 0.0;
    bool stable = false;
    bool pass = false;
    double argmax_s = 0.0;
    Eigen::VectorXd argmax_y;
    double margin_min = 0.0;
    double margin_max = 0.0;
    std::string notes;
};

/// Fits the constant of the pointwise kernel bound: C_fit is the max over
/// window grid points of g (t-s)^{-E} exp(eps (t-s)^alpha |y|_*^beta).
/// pass requires a finite fit; stability against a refined slice is judged
/// by apply_refinement.
BoundVerdict verify_theorem_bound(const KernelSlice& slice, const RegimeSelection& regime,
                                  double alpha, double eps, double k, const TimeWindow& window);

/// Fills c_fit_refined/stable from a slice at doubled resolution; the fitted
/// constant must move by at most 25% for the verdict to pass.
void apply_refinement(BoundVerdict& verdict, const KernelSlice& refined_slice,
                      const RegimeSelection& regime, const TimeWindow& window,
                      double stability_tol = 0.25);

}  // namespace kolmo
