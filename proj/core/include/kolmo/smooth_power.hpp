#pragma once

#include <Eigen/Dense>
#include <array>

namespace kolmo {

/// C^2 modification |x|_*^s of the s-th power of the euclidean norm.
///
/// For |x| >= 1 the value is exactly |x|^s.  For s = 0 the function is
/// identically 1 and for s >= 2 the plain power is already twice
/// continuously differentiable, so no modification is applied.  For
/// 0 < s < 2 the plain power has an unbounded second derivative at the
/// origin; inside the unit ball it is replaced by the unique quadratic
/// q(u) = a + b u + c u^2 in u = |x|^2 that matches u^{s/2} in value and
/// first and second u-derivative at u = 1.  The result is a polynomial in
/// |x|^2 near the origin, hence C^2 everywhere, positive, and radially
/// increasing.
struct SmoothPower {
    double exponent = 0.0;
    /// inner quadratic coefficients (a, b, c); meaningful for 0 < s < 2
    std::array<double, 3> inner{1.0, 0.0, 0.0};

    double value(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

    /// value as a function of the radius rho = |x| >= 0
    double radial_value(double rho) const;
};

/// Builds the smoothed power with the given exponent.  Throws
/// std::invalid_argument for negative exponents.
SmoothPower make_smooth_power(double s);

/// One-call evaluation used by tests and the expression language.
double smooth_power_value(double s, const Eigen::VectorXd& x);
Eigen::VectorXd smooth_power_gradient(double s, const Eigen::VectorXd& x);
Eigen::MatrixXd smooth_power_hessian(double s, const Eigen::VectorXd& x);

}  // namespace kolmo
