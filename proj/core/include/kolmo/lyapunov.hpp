#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kolmo/coefficient_field.hpp"
#include "kolmo/smooth_power.hpp"

namespace kolmo {

/// Which pair of operators a static certificate controls.
enum class CertTarget {
    FullPair,         ///< A and  eta Laplace + F.grad - V
    NoPotentialPair,  ///< A + V and  eta Laplace + F.grad
};

/// Static Lyapunov certificate of the family Z(x) = exp(delta |x|_*^beta).
struct StaticCertificate {
    double delta = 0.1;
    double beta = 2.0;
    /// upper bound for both target operators applied to Z; 0 until estimated
    double bound_M = 0.0;
    CertTarget target = CertTarget::FullPair;
    SmoothPower power;

    double log_value(const Eigen::VectorXd& x) const { return delta * power.value(x); }
    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

    /// (A Z) / Z for the requested operator form; free of exponentials, so it
    /// stays finite where Z itself would overflow
    double applied_ratio(const CoefficientField& field, double s, const Eigen::VectorXd& x,
                         OperatorForm form) const;
};

StaticCertificate make_static_certificate(double delta, double beta,
                                          CertTarget target = CertTarget::FullPair);

/// Integrable rate h(s) = coeff * (t - s)^exponent with exponent > -1.
struct RateFunction {
    double coeff = 0.0;
    double exponent = 0.0;

    double operator()(double s, double t) const;
    /// integral of h over (s, t)
    double integral_to_terminal(double s, double t) const;
    /// integral of h over (s0, s1), s1 <= t
    double integral(double s0, double s1, double t) const;
};

/// Closed-form rate for the exponential family, following the two-case
/// construction (the cut radius scales like C (t-s)^{-1/(m+beta-2)} when
/// m + beta - 2 > 0 and like C (t-s)^{-1/(p-1)} otherwise).
RateFunction derive_h(double eps, double delta, double alpha, double beta, double m, double p,
                      int dim);

/// Time dependent Lyapunov function W(s,x) = exp(eps (t-s)^alpha |x|_*^beta).
struct TimeDependentLyapunov {
    double t = 1.0;
    double eps = 0.1;
    double alpha = 2.0;
    double beta = 2.0;
    /// delta of the dominating static certificate (eps < delta)
    double dominating_delta = 0.2;
    RateFunction h;
    SmoothPower power;

    double log_value(double s, const Eigen::VectorXd& x) const;
    double value(double s, const Eigen::VectorXd& x) const;
    /// (d/ds W) / W
    double ds_over_w(double s, const Eigen::VectorXd& x) const;
    /// grad W / W
    Eigen::VectorXd grad_over_w(double s, const Eigen::VectorXd& x) const;
    /// Hess W / W
    Eigen::MatrixXd hess_over_w(double s, const Eigen::VectorXd& x) const;
    /// (A W) / W for the requested operator form
    double applied_ratio(const CoefficientField& field, double s, const Eigen::VectorXd& x,
                         OperatorForm form) const;
};

enum class LyapunovCase { DriftDominated, PotentialDominated };  // cases (i) / (ii)

/// Builds W for the power family, validating the admissible parameter region
/// (beta fixed by the case, 0 < eps < delta < 1/beta, alpha > alpha0).
/// Violations are rejected with the specific constraint named.
TimeDependentLyapunov build_time_dependent_w(double m, double p, double r, LyapunovCase which,
                                             double eps, double delta, double alpha, double t,
                                             int dim);

/// W with explicitly chosen beta (used by the weight system, whose members
/// share beta but use staggered epsilons).
TimeDependentLyapunov make_exp_lyapunov(double t, double eps, double alpha, double beta,
                                        double delta, double m, double p, int dim);

/// threshold alpha0 for the power family
double alpha_threshold(double m, double p, double r, LyapunovCase which);

/// Deterministic sample cloud: tensor grid plus uniform random points over
/// [s_lo, s_hi] x [-radius, radius]^d.
struct SampleGrid {
    double radius = 2.0;
    double s_lo = 0.0;
    double s_hi = 1.0;
    int time_samples = 17;
    int space_samples_per_axis = 65;
    int random_samples = 1000;
    std::uint64_t seed = 0;
};

std::vector<std::pair<double, Eigen::VectorXd>> make_samples(const SampleGrid& grid, int dim);

struct CertificateReport {
    bool pass = false;
    double worst_margin = 0.0;
    double argmin_s = 0.0;
    Eigen::VectorXd argmin_x;
    std::size_t n_samples = 0;
    std::string notes;
};

struct StaticCertificateReport {
    CertificateReport report;
    /// grid estimate of M (max of both operators applied to Z, clamped at 0)
    double estimated_M = 0.0;
    bool asymptotic_pass = false;
    /// leading-power coefficient of the bracket for the power family;
    /// unset when the asymptotic behaviour was probed numerically
    std::optional<double> leading_coefficient;
};

/// Grid check of A Z <= M together with the comparison-operator inequality,
/// plus the asymptotic sign check.  For the power family the asymptotic check
/// compares the exponent table of the bracket and requires a negative leading
/// coefficient; for custom fields (A Z)/Z is probed along rays at growing
/// radii and must become negative and decreasing.
StaticCertificateReport check_static_certificate(const CoefficientField& field,
                                                 const StaticCertificate& cert,
                                                 const SampleGrid& grid);

struct TimeDependentReport {
    bool pass = false;
    double margin_star = 0.0;
    double margin_star_star = 0.0;
    double argmin_s = 0.0;
    Eigen::VectorXd argmin_x;
    std::size_t n_samples = 0;
};

/// Sampled verification of both defining inequalities of W against the given
/// field; margins are [ds W - A W + h W] / W.  Samples at s = t are rejected.
TimeDependentReport check_time_dependent(const CoefficientField& field,
                                         const TimeDependentLyapunov& w, const SampleGrid& grid);

}  // namespace kolmo
