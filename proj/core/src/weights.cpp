#include "kolmo/weights.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kolmo {

TimeWindow make_time_window(double a0, double a, double b, double b0, double t) {
    if (!(0.0 < a0 && a0 < a && a < b && b < b0 && b0 < t && t <= 1.0))
        throw std::invalid_argument("time window requires 0 < a0 < a < b < b0 < t <= 1");
    return TimeWindow{a0, a, b, b0, t};
}

WeightSystem make_weight_system(double m, double p, double r, double k, double eps0, double eps1,
                                double eps2, double delta, double alpha, double beta,
                                const TimeWindow& window, int dim) {
    (void)r;
    if (!(k > dim + 2))
        throw std::invalid_argument("weight system requires k > d + 2");
    if (!(0.0 < eps0 && eps0 < eps1 && eps1 < eps2 && eps2 < delta))
        throw std::invalid_argument("weight system requires 0 < eps0 < eps1 < eps2 < delta");
    if (!(delta < 1.0 / beta))
        throw std::invalid_argument("weight system requires delta < 1/beta");
    WeightSystem ws;
    ws.k = k;
    ws.eps0 = eps0;
    ws.eps1 = eps1;
    ws.eps2 = eps2;
    ws.delta = delta;
    ws.alpha = alpha;
    ws.beta = beta;
    ws.t = window.t;
    ws.window = window;
    ws.sigma = 0.5 * (1.0 - eps2 / delta);
    ws.c0 = 1.0;
    ws.w = make_exp_lyapunov(window.t, eps0, alpha, beta, delta, m, p, dim);
    ws.w1 = make_exp_lyapunov(window.t, eps1, alpha, beta, delta, m, p, dim);
    ws.w2 = make_exp_lyapunov(window.t, eps2, alpha, beta, delta, m, p, dim);
    return ws;
}

double hypothesis_ratio(const CoefficientField& field, const WeightSystem& ws, int which, double s,
                        const Eigen::VectorXd& y) {
    const double tau = ws.t - s;
    const double sig = std::pow(tau, ws.alpha);
    const SmoothPower& pw = ws.w.power;
    const double u = pw.value(y);
    const Eigen::VectorXd gu = pw.gradient(y);
    const Eigen::MatrixXd hu = pw.hessian(y);
    // log(w / W1) = -(eps1-eps0) sig u, log(w / W2) = -(eps2-eps0) sig u
    const double lw1 = -(ws.eps1 - ws.eps0) * sig * u;
    const double lw2 = -(ws.eps2 - ws.eps0) * sig * u;
    switch (which) {
        case 1:
            return std::exp((2.0 / ws.k) * lw1);
        case 2: {
            const double qgw = (field.Q(s, y) * gu).norm() * ws.eps0 * sig;
            return qgw * std::exp(lw1 / ws.k);
        }
        case 3: {
            const Eigen::MatrixXd hw =
                ws.eps0 * sig * hu + ws.eps0 * ws.eps0 * sig * sig * (gu * gu.transpose());
            return std::abs((field.Q(s, y) * hw).trace()) * std::exp(2.0 * lw1 / ws.k);
        }
        case 4:
            return ws.eps0 * ws.alpha * std::pow(tau, ws.alpha - 1.0) * u *
                   std::exp(2.0 * lw1 / ws.k);
        case 5: {
            Eigen::VectorXd colsum = Eigen::VectorXd::Zero(field.dim);
            for (int i = 0; i < field.dim; ++i) colsum += field.DQ(s, y, i).row(i).transpose();
            return colsum.norm() * std::exp(lw2 / ws.k);
        }
        case 6:
            return field.F(s, y).norm() * std::exp(lw2 / ws.k);
        case 7:
            return std::sqrt(std::max(0.0, field.V(s, y))) * std::exp(lw2 / ws.k);
        case 8: {
            const double lap_w = ws.eps0 * sig * hu.trace() +
                                 ws.eps0 * ws.eps0 * sig * sig * gu.squaredNorm();
            return std::abs(lap_w) * std::exp(2.0 * lw1 / ws.k);
        }
        case 9: {
            const double qgw1 = (field.Q(s, y) * gu).norm() * ws.eps1 * sig;
            return qgw1 * std::exp(lw2 / ws.k);
        }
        default:
            throw std::invalid_argument("hypothesis_ratio: index must be 1..9");
    }
}

WeightConstantsDiagnostics compute_weight_constants(const CoefficientField& field,
                                                    WeightSystem& ws) {
    WeightConstantsDiagnostics diag;
    const double m = field.example ? field.example->m : 0.0;
    const double p = field.example ? field.example->p : 0.0;
    const double r = field.example ? field.example->r : 0.0;
    const double a = ws.alpha, b = ws.beta;

    ws.gamma.fill(0.0);
    ws.gamma[4] = 1.0;  // the ds w bound is weight-intrinsic
    if (field.example) {
        ws.gamma[2] = a * std::max(m - 1.0, 0.0) / b;
        ws.gamma[3] = a * std::max(m - 2.0, 0.0) / b;
        ws.gamma[5] = a * m / b;
        ws.gamma[6] = a * p / b;
        ws.gamma[7] = a * r / (2.0 * b);
    } else {
        diag.notes = "custom field: time exponents of c2,c3,c5,c6,c7 set to 0";
    }
    // gamma8 = gamma9 = 0: both bounds rerun the computation with m = 0

    // scan radius: past the envelope peak of the slowest-decaying ratio
    const double tau_min = ws.t - ws.window.b0;
    const double rate = (ws.eps1 - ws.eps0) / ws.k * std::pow(tau_min, a);
    const double top_power = b + m + std::max({p, r, 2.0}) + 4.0;
    const double peak = std::pow(top_power / (rate * b), 1.0 / b);
    diag.scan_radius = std::max(4.0, 4.0 * peak);

    const int n_radial = 4097;
    const int n_time = 33;
    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < field.dim; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(field.dim);
        e[i] = 1.0;
        dirs.push_back(e);
        dirs.push_back(-e);
    }
    if (field.dim > 1) dirs.push_back(Eigen::VectorXd::Ones(field.dim).normalized());

    std::array<double, 10> best{};
    best.fill(0.0);
    std::array<double, 10> raw{};
    for (int it = 0; it < n_time; ++it) {
        const double s =
            ws.window.a0 + (ws.window.b0 - ws.window.a0) * it / double(n_time - 1);
        const double tau = ws.t - s;
        const double sig = std::pow(tau, a);
        for (int ir = 0; ir < n_radial; ++ir) {
            const double rho = diag.scan_radius * ir / double(n_radial - 1);
            for (const auto& dir : dirs) {
                const Eigen::VectorXd y = rho * dir;
                const double u = ws.w.power.value(y);
                const Eigen::VectorXd gu = ws.w.power.gradient(y);
                const Eigen::MatrixXd hu = ws.w.power.hessian(y);
                const Eigen::MatrixXd q = field.Q(s, y);
                const double qgu = (q * gu).norm();
                Eigen::VectorXd colsum = Eigen::VectorXd::Zero(field.dim);
                for (int i = 0; i < field.dim; ++i) colsum += field.DQ(s, y, i).row(i).transpose();
                const double lw1 = -(ws.eps1 - ws.eps0) * sig * u;
                const double lw2 = -(ws.eps2 - ws.eps0) * sig * u;
                const Eigen::MatrixXd hw =
                    ws.eps0 * sig * hu + ws.eps0 * ws.eps0 * sig * sig * (gu * gu.transpose());
                raw[2] = ws.eps0 * sig * qgu * std::exp(lw1 / ws.k);
                raw[3] = std::abs((q * hw).trace()) * std::exp(2.0 * lw1 / ws.k);
                raw[4] = ws.eps0 * a * std::pow(tau, a - 1.0) * u * std::exp(2.0 * lw1 / ws.k);
                raw[5] = colsum.norm() * std::exp(lw2 / ws.k);
                raw[6] = field.F(s, y).norm() * std::exp(lw2 / ws.k);
                raw[7] = std::sqrt(std::max(0.0, field.V(s, y))) * std::exp(lw2 / ws.k);
                raw[8] = std::abs(hw.trace()) * std::exp(2.0 * lw1 / ws.k);
                raw[9] = ws.eps1 * sig * qgu * std::exp(lw2 / ws.k);
                for (int which = 2; which <= 9; ++which) {
                    const double normalised = raw[which] * std::pow(tau, ws.gamma[which]);
                    if (!std::isfinite(normalised)) {
                        std::ostringstream msg;
                        msg << "hypothesis ratio " << which << " non-finite at s=" << s
                            << ", |y|=" << rho << " (wrong exponent wiring?)";
                        throw std::runtime_error(msg.str());
                    }
                    if (normalised > best[which]) {
                        best[which] = normalised;
                        diag.argmax_s[which] = s;
                        diag.argmax_radius[which] = rho;
                    }
                }
                // hypothesis part 1 suprema
                const double lw = ws.eps0 * sig * u;
                diag.sup_wm2_dsw = std::max(
                    diag.sup_wm2_dsw, ws.eps0 * a * std::pow(tau, a - 1.0) * u * std::exp(-lw));
                diag.sup_wm2_gradw =
                    std::max(diag.sup_wm2_gradw, ws.eps0 * sig * gu.norm() * std::exp(-lw));
            }
        }
    }

    ws.c[1] = ws.cbar[1] = 1.0;  // w <= W1 pointwise
    for (int which = 2; which <= 9; ++which) {
        ws.cbar[which] = std::max(1.0, best[which]);
        ws.c[which] = ws.cbar[which] * std::pow(ws.t - ws.window.b0, -ws.gamma[which]);
        diag.argmax_on_boundary[which] =
            diag.argmax_radius[which] >= diag.scan_radius * (1.0 - 2.0 / (n_radial - 1));
    }
    return diag;
}

}  // namespace kolmo
