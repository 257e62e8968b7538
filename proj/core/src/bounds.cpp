#include "kolmo/bounds.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace kolmo {

namespace {

// Weighted quadratures stay on the inscribed ball: the certificate-driven
// radius controls the kernel tail outside B(0, R), while the box corners
// carry only scheme noise that an exponentially growing weight would amplify.
std::vector<bool> ball_mask(const SpaceTimeGrid& grid) {
    std::vector<bool> inside(grid.num_nodes());
    for (int i = 0; i < grid.num_nodes(); ++i)
        inside[i] = grid.node(i).norm() <= grid.radius + 1e-12;
    return inside;
}

}  // namespace

double envelope_bound(double gamma, double tau, double beta) {
    if (!(beta > 0.0) || !(tau > 0.0))
        throw std::invalid_argument("envelope_bound: requires tau > 0 and beta > 0");
    if (gamma < 0.0) throw std::invalid_argument("envelope_bound: requires gamma >= 0");
    if (gamma == 0.0) return 1.0;
    const double q = gamma / beta;
    return std::pow(tau, -q) * std::pow(q, q) * std::exp(-q);
}

double x_root_bound(double a, double b, double c, double k) {
    if (!(k > 2.0)) throw std::invalid_argument("x_root_bound: requires k > 2");
    if (a < 0.0 || b < 0.0 || c < 0.0)
        throw std::invalid_argument("x_root_bound: coefficients must be nonnegative");
    const double f = 4.0 / 3.0;
    return f * b + std::sqrt(f * c) + std::pow(f * a * a, 1.0 / k);
}

GammaMoments compute_gamma_moments(const KernelSlice& slice, const CoefficientField& field,
                                   double k, const TimeWindow& window) {
    const int j_lo = slice.time_index_nearest_at_or_above(window.a0);
    const int j_hi = slice.time_index_nearest_at_or_below(window.b0);
    if (j_lo >= j_hi) throw std::invalid_argument("gamma moments: window not inside slice range");
    const double half_k = 0.5 * k;
    const int nn = slice.grid.num_nodes();
    const std::vector<bool> inside = ball_mask(slice.grid);
    double int_f = 0.0, int_v = 0.0;
    double prev_f = 0.0, prev_v = 0.0;
    for (int j = j_lo; j <= j_hi; ++j) {
        const double s = slice.grid.s_at(j);
        double lvl_f = 0.0, lvl_v = 0.0;
        const double* g = slice.level(j);
        for (int i = 0; i < nn; ++i) {
            if (g[i] == 0.0 || !inside[i]) continue;
            const Eigen::VectorXd y = slice.grid.node(i);
            const double wq = slice.grid.quad_weight(i) * g[i];
            lvl_f += std::pow(field.F(s, y).norm(), half_k) * wq;
            lvl_v += std::pow(std::max(0.0, field.V(s, y)), half_k) * wq;
        }
        if (j > j_lo) {
            int_f += 0.5 * (prev_f + lvl_f) * slice.grid.ds();
            int_v += 0.5 * (prev_v + lvl_v) * slice.grid.ds();
        }
        prev_f = lvl_f;
        prev_v = lvl_v;
    }
    GammaMoments out;
    out.gamma1 = std::pow(int_f, 2.0 / k);
    out.gamma2 = std::pow(int_v, 2.0 / k);
    out.finite = std::isfinite(out.gamma1) && std::isfinite(out.gamma2);
    return out;
}

ZetaProfile compute_zeta(const KernelSlice& slice, const TimeDependentLyapunov& w,
                         const TimeWindow& window) {
    ZetaProfile profile;
    profile.t = slice.t;
    profile.x = slice.x;
    const int nn = slice.grid.num_nodes();
    const std::vector<bool> inside = ball_mask(slice.grid);
    profile.s.resize(slice.grid.steps + 1);
    profile.zeta.resize(slice.grid.steps + 1);
    for (int j = 0; j <= slice.grid.steps; ++j) {
        const double s = slice.grid.s_at(j);
        profile.s[j] = s;
        double acc = 0.0;
        const double* g = slice.level(j);
        for (int i = 0; i < nn; ++i) {
            if (g[i] == 0.0 || !inside[i]) continue;
            acc += w.value(s, slice.grid.node(i)) * g[i] * slice.grid.quad_weight(i);
        }
        if (!std::isfinite(acc))
            throw std::runtime_error(
                "zeta profile overflow: weight outgrows the kernel on the truncated box "
                "(truncation inadequate)");
        profile.zeta[j] = acc;
    }
    const int j_lo = slice.time_index_nearest_at_or_above(window.a0);
    const int j_hi = slice.time_index_nearest_at_or_below(window.b0);
    profile.sup_window = 0.0;
    profile.integral_window = 0.0;
    for (int j = j_lo; j <= j_hi; ++j) {
        profile.sup_window = std::max(profile.sup_window, profile.zeta[j]);
        if (j > j_lo)
            profile.integral_window +=
                0.5 * (profile.zeta[j - 1] + profile.zeta[j]) * slice.grid.ds();
    }
    return profile;
}

ZetaBoundReport check_zeta_bound(const ZetaProfile& profile, const TimeDependentLyapunov& w,
                                 double tol, double phi_slack) {
    ZetaBoundReport report;
    const double w_terminal = 1.0;  // W(t, x) = exp(0)
    report.worst_ratio = 0.0;
    const std::size_t n = profile.s.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double bound = std::exp(w.h.integral_to_terminal(profile.s[j], w.t)) * w_terminal;
        const double ratio = profile.zeta[j] / bound;
        if (ratio > report.worst_ratio) {
            report.worst_ratio = ratio;
            report.argmax_s = profile.s[j];
        }
    }

    // Phi(tau_j) = (zeta(t) + int_{tau_j}^t h zeta) exp(int_{s0}^{tau_j} h),
    // evaluated with exact segment integrals of h against trapezoid zeta
    const double zeta_t = profile.zeta[n - 1];
    std::vector<double> tail(n, 0.0);
    for (std::size_t j = n - 1; j-- > 0;) {
        const double hseg = w.h.integral(profile.s[j], profile.s[j + 1], w.t);
        tail[j] = tail[j + 1] + hseg * 0.5 * (profile.zeta[j] + profile.zeta[j + 1]);
    }
    double phi_max = 0.0;
    std::vector<double> phi(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double accum = w.h.integral(profile.s[0], profile.s[j], w.t);
        phi[j] = (zeta_t + tail[j]) * std::exp(accum);
        phi_max = std::max(phi_max, std::abs(phi[j]));
    }
    report.phi_min_increment = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < n; ++j)
        report.phi_min_increment = std::min(report.phi_min_increment, phi[j + 1] - phi[j]);
    report.phi_monotone = report.phi_min_increment >= -phi_slack * std::max(1.0, phi_max);
    report.pass = report.worst_ratio <= 1.0 + tol && report.phi_monotone;
    return report;
}

MassBoundReport check_mass_bound(const KernelSlice& slice, const StaticCertificate& cert,
                                 double M, double tol) {
    MassBoundReport report;
    const double zx = cert.value(slice.x);
    const int nn = slice.grid.num_nodes();
    const std::vector<bool> inside = ball_mask(slice.grid);
    for (int j = 0; j <= slice.grid.steps; ++j) {
        const double s = slice.grid.s_at(j);
        double lhs = 0.0;
        const double* g = slice.level(j);
        for (int i = 0; i < nn; ++i) {
            if (g[i] == 0.0 || !inside[i]) continue;
            lhs += cert.value(slice.grid.node(i)) * g[i] * slice.grid.quad_weight(i);
        }
        if (!std::isfinite(lhs))
            throw std::runtime_error("mass bound overflow: Z outgrows the kernel on the box");
        const double rhs = zx + M * (slice.t - s);
        const double ratio = lhs / rhs;
        if (ratio > report.worst_ratio) {
            report.worst_ratio = ratio;
            report.argmax_s = s;
        }
    }
    report.pass = report.worst_ratio <= 1.0 + tol;
    return report;
}

MainBoundAssembly assemble_main_bound(const WeightSystem& ws, double sup_zeta1, double int_zeta1,
                                      double int_zeta2, BoundVariant variant) {
    const double k = ws.k;
    const double hk = 0.5 * k;
    MainBoundAssembly out;
    out.coef_sup = std::pow(ws.c[1], hk);
    out.coef_i1 = std::pow(ws.c[1], hk) / std::pow(ws.window.b0 - ws.window.b, hk) +
                  std::pow(ws.c[2], k) + std::pow(ws.c[3], hk) + std::pow(ws.c[4], hk);
    out.coef_i2 = std::pow(ws.c[2], hk) * std::pow(ws.c[6], hk) + std::pow(ws.c[5], k) +
                  std::pow(ws.c[6], k) + std::pow(ws.c[7], k);
    if (variant == BoundVariant::General) {
        out.coef_i1 += std::pow(ws.c[8], hk);
        out.coef_i2 += std::pow(ws.c[9], k);
    }
    out.total = out.coef_sup * sup_zeta1 + out.coef_i1 * int_zeta1 + out.coef_i2 * int_zeta2;
    return out;
}

double RegimeSelection::exponent(double alpha, double k) const {
    if (regime == 1) return 1.0 - alpha * std::max(m, p) * k / (p + 1.0 - m);
    return 1.0 - alpha * std::max({2.0 * m, 2.0 * p, r}) * k / (r + 2.0 - m);
}

RegimeSelection select_regime(double m, double p, double r) {
    if (!(p > 1.0)) throw std::invalid_argument("regime selection requires p > 1");
    if (!(p > m - 1.0)) throw std::invalid_argument("regime selection requires p > m - 1");
    if (!(r > m - 2.0)) throw std::invalid_argument("regime selection requires r > m - 2");
    RegimeSelection sel;
    sel.m = m;
    sel.p = p;
    sel.r = r;
    if (p >= 0.5 * (m + r)) {
        sel.regime = 1;
        sel.beta = p + 1.0 - m;
        sel.eps_max = 1.0 / sel.beta;
        sel.alpha0 = (p + 1.0 - m) / (p - 1.0);
    } else {
        sel.regime = 2;
        sel.beta = 0.5 * (r + 2.0 - m);
        sel.eps_max = 2.0 / (r + 2.0 - m);
        sel.alpha0 = (r + m > 2.0) ? (r - m + 2.0) / (r + m - 2.0)
                                   : (r + 2.0 - m) / (2.0 * (p - 1.0));
    }
    return sel;
}

namespace {

struct FitResult {
    double c_fit = 0.0;
    double argmax_s = 0.0;
    Eigen::VectorXd argmax_y;
    double margin_min = 0.0;
    double margin_max = 0.0;
};

FitResult fit_constant(const KernelSlice& slice, double exponent, double eps, double alpha,
                       double beta, const TimeWindow& window) {
    const SmoothPower pw = make_smooth_power(beta);
    const int j_lo = slice.time_index_nearest_at_or_above(window.a0);
    const int j_hi = slice.time_index_nearest_at_or_below(window.b0);
    const int nn = slice.grid.num_nodes();
    FitResult fit;
    fit.argmax_y = Eigen::VectorXd::Zero(slice.grid.dim);
    const std::vector<bool> inside = ball_mask(slice.grid);
    double log_max = -std::numeric_limits<double>::infinity();
    double log_min = std::numeric_limits<double>::infinity();
    for (int j = j_lo; j <= j_hi; ++j) {
        const double s = slice.grid.s_at(j);
        const double tau = slice.t - s;
        const double* g = slice.level(j);
        for (int i = 0; i < nn; ++i) {
            if (g[i] <= 0.0 || !inside[i]) continue;
            const Eigen::VectorXd y = slice.grid.node(i);
            const double log_val = std::log(g[i]) - exponent * std::log(tau) +
                                   eps * std::pow(tau, alpha) * pw.value(y);
            if (log_val > log_max) {
                log_max = log_val;
                fit.argmax_s = s;
                fit.argmax_y = y;
            }
            log_min = std::min(log_min, log_val);
        }
    }
    fit.c_fit = std::exp(log_max);
    fit.margin_min = 0.0;  // zero at the argmax by construction
    fit.margin_max = log_max - log_min;
    return fit;
}

}  // namespace

BoundVerdict verify_theorem_bound(const KernelSlice& slice, const RegimeSelection& regime,
                                  double alpha, double eps, double k, const TimeWindow& window) {
    std::ostringstream why;
    if (!(alpha > regime.alpha0)) {
        why << "requires alpha > alpha0 = " << regime.alpha0;
        throw std::invalid_argument(why.str());
    }
    if (!(eps > 0.0 && eps < regime.eps_max)) {
        why << "requires 0 < eps < eps_max = " << regime.eps_max;
        throw std::invalid_argument(why.str());
    }
    if (!(k > slice.grid.dim + 2)) throw std::invalid_argument("requires k > d + 2");

    BoundVerdict verdict;
    verdict.regime = regime.regime;
    verdict.beta = regime.beta;
    verdict.alpha = alpha;
    verdict.eps = eps;
    verdict.k = k;
    verdict.exponent = regime.exponent(alpha, k);
    const FitResult fit = fit_constant(slice, verdict.exponent, eps, alpha, regime.beta, window);
    verdict.c_fit = fit.c_fit;
    verdict.argmax_s = fit.argmax_s;
    verdict.argmax_y = fit.argmax_y;
    verdict.margin_min = fit.margin_min;
    verdict.margin_max = fit.margin_max;
    if (!std::isfinite(verdict.c_fit)) {
        verdict.pass = false;
        verdict.notes = "fitted constant overflowed (truncation inadequate)";
    }
    return verdict;
}

void apply_refinement(BoundVerdict& verdict, const KernelSlice& refined_slice,
                      const RegimeSelection& regime, const TimeWindow& window,
                      double stability_tol) {
    const FitResult fit =
        fit_constant(refined_slice, verdict.exponent, verdict.eps, verdict.alpha, regime.beta,
                     window);
    verdict.c_fit_refined = fit.c_fit;
    const double change = std::abs(fit.c_fit - verdict.c_fit) / std::max(verdict.c_fit, 1e-300);
    verdict.stable = std::isfinite(fit.c_fit) && change <= stability_tol;
    verdict.pass = verdict.stable && std::isfinite(verdict.c_fit);
    if (!verdict.stable) {
        std::ostringstream note;
        note << "fitted constant moved by " << change * 100.0 << "% under refinement";
        verdict.notes = note.str();
    }
}

}  // namespace kolmo
