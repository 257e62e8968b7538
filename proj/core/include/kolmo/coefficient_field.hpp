#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kolmo/test_function.hpp"

namespace kolmo {

/// Parameters of the power-family operator
///   (1 + |x|_*^m) Laplace  -  |x|_*^{p-1} x . grad  -  |x|_*^r.
struct ExampleParams {
    double m = 0.0;
    double p = 2.0;
    double r = 0.0;
};

/// Evaluable coefficient triple (Q, F, V) of a Kolmogorov operator
///
///   A(t) f = Tr(Q(t,x) D^2 f) + F(t,x) . grad f - V(t,x) f.
///
/// All evaluation maps are pure; instances are immutable after construction
/// and safe to share across threads.
struct CoefficientField {
    int dim = 1;
    /// uniform ellipticity constant: Q(s,x) >= eta * Id
    double eta = 1.0;
    /// local Hoelder exponent of the coefficients; metadata only
    double holder = 0.5;
    bool time_dependent = false;
    bool potential_is_zero = false;
    std::optional<ExampleParams> example;

    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> Q;
    /// spatial derivative: DQ(s, x, k) = d/dx_k Q(s, x)
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&, int)> DQ;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> F;
    std::function<double(double, const Eigen::VectorXd&)> V;

    /// same field with the potential removed (the reference operator whose
    /// kernel dominates the original one)
    CoefficientField with_zero_potential() const;
};

/// Which operator is applied to a test function.
enum class OperatorForm {
    Full,                   ///< Tr(Q D^2 f) + F.grad f - V f
    NoPotential,            ///< Tr(Q D^2 f) + F.grad f
    Comparison,             ///< eta Laplace f + F.grad f - V f
    ComparisonNoPotential,  ///< eta Laplace f + F.grad f
};

/// Builds the power-family operator with Q = (1 + |x|_*^m) Id,
/// F = -|x|_*^{p-1} x, V = |x|_*^r, eta = 1 and exact DQ.
/// Requires p > 1 and m, r >= 0.
CoefficientField build_example_operator(double m, double p, double r, int dim = 1);

/// Pointwise application of the selected operator form.
double apply_operator(const CoefficientField& field, const TestFunction& f, double s,
                      const Eigen::VectorXd& x, OperatorForm form = OperatorForm::Full);

struct EllipticityReport {
    bool pass = false;
    /// min over samples of (smallest eigenvalue of Q - eta)
    double min_margin = 0.0;
    double argmin_s = 0.0;
    Eigen::VectorXd argmin_x;
    std::vector<std::pair<double, Eigen::VectorXd>> violations;
};

/// Smallest-eigenvalue margin of Q against eta over the given (s, x) samples.
/// Also rejects asymmetric Q and negative V.
EllipticityReport check_ellipticity(const CoefficientField& field,
                                    const std::vector<std::pair<double, Eigen::VectorXd>>& samples,
                                    double tol = 1e-10);

}  // namespace kolmo
