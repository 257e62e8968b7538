#include "kolmo/coefficient_field.hpp"

#include <cmath>
#include <stdexcept>

#include "kolmo/smooth_power.hpp"

namespace kolmo {

namespace {

void check_dim(const CoefficientField& field, const Eigen::VectorXd& x) {
    if (x.size() != field.dim)
        throw std::invalid_argument("operator/point dimension mismatch");
}

}  // namespace

CoefficientField CoefficientField::with_zero_potential() const {
    CoefficientField out = *this;
    out.V = [](double, const Eigen::VectorXd&) { return 0.0; };
    out.potential_is_zero = true;
    return out;
}

CoefficientField build_example_operator(double m, double p, double r, int dim) {
    if (p <= 1.0) throw std::invalid_argument("example operator requires p > 1");
    if (m < 0.0 || r < 0.0) throw std::invalid_argument("example operator requires m, r >= 0");
    if (dim < 1) throw std::invalid_argument("example operator requires dim >= 1");

    const SmoothPower pow_m = make_smooth_power(m);
    const SmoothPower pow_drift = make_smooth_power(p - 1.0);
    const SmoothPower pow_r = make_smooth_power(r);

    CoefficientField field;
    field.dim = dim;
    field.eta = 1.0;
    field.time_dependent = false;
    field.example = ExampleParams{m, p, r};
    field.Q = [pow_m, dim](double, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        return (1.0 + pow_m.value(x)) * Eigen::MatrixXd::Identity(dim, dim);
    };
    field.DQ = [pow_m, dim](double, const Eigen::VectorXd& x, int k) -> Eigen::MatrixXd {
        const Eigen::VectorXd g = pow_m.gradient(x);
        return g[k] * Eigen::MatrixXd::Identity(dim, dim);
    };
    field.F = [pow_drift](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return -pow_drift.value(x) * x;
    };
    field.V = [pow_r](double, const Eigen::VectorXd& x) { return pow_r.value(x); };
    field.potential_is_zero = false;
    return field;
}

double apply_operator(const CoefficientField& field, const TestFunction& f, double s,
                      const Eigen::VectorXd& x, OperatorForm form) {
    check_dim(field, x);
    const Eigen::VectorXd grad = f.gradient(x);
    const Eigen::MatrixXd hess = f.hessian(x);
    if (grad.size() != field.dim || hess.rows() != field.dim)
        throw std::invalid_argument("test function dimension mismatch");

    double diffusion = 0.0;
    if (form == OperatorForm::Full || form == OperatorForm::NoPotential) {
        diffusion = (field.Q(s, x) * hess).trace();
    } else {
        diffusion = field.eta * hess.trace();
    }
    double out = diffusion + field.F(s, x).dot(grad);
    if (form == OperatorForm::Full || form == OperatorForm::Comparison)
        out -= field.V(s, x) * f.value(x);
    return out;
}

EllipticityReport check_ellipticity(const CoefficientField& field,
                                    const std::vector<std::pair<double, Eigen::VectorXd>>& samples,
                                    double tol) {
    if (samples.empty()) throw std::invalid_argument("check_ellipticity: empty sample set");
    EllipticityReport report;
    report.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& [s, x] : samples) {
        const Eigen::MatrixXd q = field.Q(s, x);
        if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::runtime_error("check_ellipticity: Q not symmetric at a sample");
        if (field.V(s, x) < -tol)
            throw std::runtime_error("check_ellipticity: negative potential at a sample");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
        const double margin = es.eigenvalues().minCoeff() - field.eta;
        if (margin < report.min_margin) {
            report.min_margin = margin;
            report.argmin_s = s;
            report.argmin_x = x;
        }
        if (margin < -tol) report.violations.emplace_back(s, x);
    }
    report.pass = report.violations.empty();
    return report;
}

}  // namespace kolmo
