#include "kolmo/smooth_power.hpp"

#include <cmath>
#include <stdexcept>

namespace kolmo {

namespace {

bool uses_inner_patch(double s) { return s > 0.0 && s < 2.0; }

}  // namespace

SmoothPower make_smooth_power(double s) {
    if (s < 0.0) throw std::invalid_argument("smooth power: exponent must be nonnegative");
    SmoothPower sp;
    sp.exponent = s;
    if (uses_inner_patch(s)) {
        // match q(u) = a + b u + c u^2 to u^{s/2} at u = 1
        const double sigma = 0.5 * s;
        const double c = 0.5 * sigma * (sigma - 1.0);
        const double b = sigma - 2.0 * c;
        const double a = 1.0 - b - c;
        sp.inner = {a, b, c};
    } else {
        sp.inner = {0.0, 0.0, 0.0};
    }
    return sp;
}

double SmoothPower::radial_value(double rho) const {
    const double s = exponent;
    if (s == 0.0) return 1.0;
    if (rho >= 1.0 || !uses_inner_patch(s)) return std::pow(rho, s);
    const double u = rho * rho;
    return inner[0] + inner[1] * u + inner[2] * u * u;
}

double SmoothPower::value(const Eigen::VectorXd& x) const { return radial_value(x.norm()); }

Eigen::VectorXd SmoothPower::gradient(const Eigen::VectorXd& x) const {
    const double s = exponent;
    const auto d = x.size();
    if (s == 0.0) return Eigen::VectorXd::Zero(d);
    const double rho = x.norm();
    if (rho < 1.0 && uses_inner_patch(s)) {
        const double u = rho * rho;
        // d/dx (a + b u + c u^2) = (b + 2 c u) * 2 x
        return (2.0 * (inner[1] + 2.0 * inner[2] * u)) * x;
    }
    if (rho == 0.0) {
        // here s >= 2; gradient s|x|^{s-2} x vanishes
        return Eigen::VectorXd::Zero(d);
    }
    return (s * std::pow(rho, s - 2.0)) * x;
}

Eigen::MatrixXd SmoothPower::hessian(const Eigen::VectorXd& x) const {
    const double s = exponent;
    const auto d = x.size();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    if (s == 0.0) return Eigen::MatrixXd::Zero(d, d);
    const double rho = x.norm();
    if (rho < 1.0 && uses_inner_patch(s)) {
        const double u = rho * rho;
        return 2.0 * (inner[1] + 2.0 * inner[2] * u) * id +
               8.0 * inner[2] * (x * x.transpose());
    }
    if (rho == 0.0) {
        if (s == 2.0) return 2.0 * id;
        return Eigen::MatrixXd::Zero(d, d);  // s > 2
    }
    Eigen::MatrixXd h = s * std::pow(rho, s - 2.0) * id;
    if (s != 2.0) h += s * (s - 2.0) * std::pow(rho, s - 4.0) * (x * x.transpose());
    return h;
}

double smooth_power_value(double s, const Eigen::VectorXd& x) {
    return make_smooth_power(s).value(x);
}

Eigen::VectorXd smooth_power_gradient(double s, const Eigen::VectorXd& x) {
    return make_smooth_power(s).gradient(x);
}

Eigen::MatrixXd smooth_power_hessian(double s, const Eigen::VectorXd& x) {
    return make_smooth_power(s).hessian(x);
}

}  // namespace kolmo
