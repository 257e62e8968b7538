#include "kolmo/lyapunov.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kolmo {

namespace {

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

double guarded_exp(double log_value) {
    if (log_value > 709.0) return std::numeric_limits<double>::infinity();
    return std::exp(log_value);
}

}  // namespace

// ---------------------------------------------------------------------------
// static certificates

StaticCertificate make_static_certificate(double delta, double beta, CertTarget target) {
    if (delta <= 0.0) throw std::invalid_argument("certificate: delta must be positive");
    if (beta <= 0.0) throw std::invalid_argument("certificate: beta must be positive");
    StaticCertificate cert;
    cert.delta = delta;
    cert.beta = beta;
    cert.target = target;
    cert.power = make_smooth_power(beta);
    return cert;
}

double StaticCertificate::value(const Eigen::VectorXd& x) const {
    return guarded_exp(log_value(x));
}

Eigen::VectorXd StaticCertificate::gradient(const Eigen::VectorXd& x) const {
    return value(x) * delta * power.gradient(x);
}

Eigen::MatrixXd StaticCertificate::hessian(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd gu = power.gradient(x);
    return value(x) * (delta * power.hessian(x) + delta * delta * (gu * gu.transpose()));
}

double StaticCertificate::applied_ratio(const CoefficientField& field, double s,
                                        const Eigen::VectorXd& x, OperatorForm form) const {
    const Eigen::VectorXd gu = power.gradient(x);
    const Eigen::MatrixXd hu = power.hessian(x);
    const Eigen::MatrixXd hz = delta * hu + delta * delta * (gu * gu.transpose());
    double diffusion;
    if (form == OperatorForm::Full || form == OperatorForm::NoPotential)
        diffusion = (field.Q(s, x) * hz).trace();
    else
        diffusion = field.eta * hz.trace();
    double out = diffusion + delta * field.F(s, x).dot(gu);
    if (form == OperatorForm::Full || form == OperatorForm::Comparison) out -= field.V(s, x);
    return out;
}

// ---------------------------------------------------------------------------
// rate function and the time dependent family

double RateFunction::operator()(double s, double t) const {
    return coeff * std::pow(t - s, exponent);
}

double RateFunction::integral_to_terminal(double s, double t) const {
    return coeff * std::pow(t - s, exponent + 1.0) / (exponent + 1.0);
}

double RateFunction::integral(double s0, double s1, double t) const {
    return integral_to_terminal(s0, t) - integral_to_terminal(s1, t);
}

RateFunction derive_h(double eps, double delta, double alpha, double beta, double m, double p,
                      int dim) {
    if (!(eps > 0.0 && delta > eps)) throw std::invalid_argument("derive_h: requires 0 < eps < delta");
    const double d = static_cast<double>(dim);
    RateFunction h;
    if (m + beta - 2.0 > 0.0) {
        h.exponent = alpha - 1.0 - beta / (m + beta - 2.0);
        const double cut = std::pow((delta - eps) * beta * beta / alpha, -1.0 / (beta + m - 2.0));
        h.coeff = eps * alpha * std::pow(cut, beta) +
                  2.0 * eps * beta * std::pow(cut, m + beta - 2.0) * positive_part(d + beta - 2.0) +
                  2.0 * eps * eps * beta * beta * std::pow(cut, m + 2.0 * beta - 2.0);
    } else {
        if (p <= 1.0) throw std::invalid_argument("derive_h: requires p > 1 when m + beta - 2 <= 0");
        h.exponent = alpha - 1.0 - beta / (p - 1.0);
        const double cut = std::pow((alpha + 2.0 * beta) / beta, 1.0 / (p - 1.0));
        // the chain drops -2(d+beta-2) before the final display; keep it
        h.coeff = eps * std::pow(cut, beta) * (alpha + 2.0 * beta) +
                  2.0 * positive_part(d + beta - 2.0);
    }
    if (!(h.exponent > -1.0))
        throw std::invalid_argument("derive_h: rate not integrable (alpha too small)");
    return h;
}

double TimeDependentLyapunov::log_value(double s, const Eigen::VectorXd& x) const {
    return eps * std::pow(t - s, alpha) * power.value(x);
}

double TimeDependentLyapunov::value(double s, const Eigen::VectorXd& x) const {
    return guarded_exp(log_value(s, x));
}

double TimeDependentLyapunov::ds_over_w(double s, const Eigen::VectorXd& x) const {
    return -eps * alpha * std::pow(t - s, alpha - 1.0) * power.value(x);
}

Eigen::VectorXd TimeDependentLyapunov::grad_over_w(double s, const Eigen::VectorXd& x) const {
    return eps * std::pow(t - s, alpha) * power.gradient(x);
}

Eigen::MatrixXd TimeDependentLyapunov::hess_over_w(double s, const Eigen::VectorXd& x) const {
    const double sigma = eps * std::pow(t - s, alpha);
    const Eigen::VectorXd gu = power.gradient(x);
    return sigma * power.hessian(x) + sigma * sigma * (gu * gu.transpose());
}

double TimeDependentLyapunov::applied_ratio(const CoefficientField& field, double s,
                                            const Eigen::VectorXd& x, OperatorForm form) const {
    const Eigen::MatrixXd hw = hess_over_w(s, x);
    double diffusion;
    if (form == OperatorForm::Full || form == OperatorForm::NoPotential)
        diffusion = (field.Q(s, x) * hw).trace();
    else
        diffusion = field.eta * hw.trace();
    double out = diffusion + field.F(s, x).dot(grad_over_w(s, x));
    if (form == OperatorForm::Full || form == OperatorForm::Comparison) out -= field.V(s, x);
    return out;
}

double alpha_threshold(double m, double p, double r, LyapunovCase which) {
    if (which == LyapunovCase::PotentialDominated && m + r <= 2.0) {
        const double beta = 0.5 * (r + 2.0 - m);
        return beta / (p - 1.0);
    }
    const double beta =
        (which == LyapunovCase::DriftDominated) ? p + 1.0 - m : 0.5 * (r + 2.0 - m);
    return beta / (m + beta - 2.0);
}

TimeDependentLyapunov build_time_dependent_w(double m, double p, double r, LyapunovCase which,
                                             double eps, double delta, double alpha, double t,
                                             int dim) {
    std::ostringstream why;
    double beta = 0.0;
    if (which == LyapunovCase::DriftDominated) {
        if (!(p > m - 1.0)) {
            why << "case (i) requires p > m - 1 (p = " << p << ", m = " << m << ")";
            throw std::invalid_argument(why.str());
        }
        beta = p + 1.0 - m;
    } else {
        if (!(r > m - 2.0)) {
            why << "case (ii) requires r > m - 2 (r = " << r << ", m = " << m << ")";
            throw std::invalid_argument(why.str());
        }
        beta = 0.5 * (r + 2.0 - m);
    }
    if (!(eps > 0.0)) throw std::invalid_argument("requires eps > 0");
    if (!(eps < delta)) {
        why << "requires eps < delta (eps = " << eps << ", delta = " << delta << ")";
        throw std::invalid_argument(why.str());
    }
    if (!(delta < 1.0 / beta)) {
        why << "requires delta < 1/beta (delta = " << delta << ", 1/beta = " << 1.0 / beta << ")";
        throw std::invalid_argument(why.str());
    }
    const double alpha0 = alpha_threshold(m, p, r, which);
    if (!(alpha > alpha0)) {
        why << "requires alpha > alpha0 strictly (alpha = " << alpha << ", alpha0 = " << alpha0
            << ")";
        throw std::invalid_argument(why.str());
    }
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("requires terminal time t in (0, 1]");
    return make_exp_lyapunov(t, eps, alpha, beta, delta, m, p, dim);
}

TimeDependentLyapunov make_exp_lyapunov(double t, double eps, double alpha, double beta,
                                        double delta, double m, double p, int dim) {
    TimeDependentLyapunov w;
    w.t = t;
    w.eps = eps;
    w.alpha = alpha;
    w.beta = beta;
    w.dominating_delta = delta;
    w.h = derive_h(eps, delta, alpha, beta, m, p, dim);
    w.power = make_smooth_power(beta);
    return w;
}

// ---------------------------------------------------------------------------
// sampling and checks

std::vector<std::pair<double, Eigen::VectorXd>> make_samples(const SampleGrid& grid, int dim) {
    std::vector<std::pair<double, Eigen::VectorXd>> out;
    const int nt = std::max(grid.time_samples, 2);
    const int nx = std::max(grid.space_samples_per_axis, 3);
    std::vector<double> times(nt), axis(nx);
    for (int i = 0; i < nt; ++i)
        times[i] = grid.s_lo + (grid.s_hi - grid.s_lo) * i / double(nt - 1);
    for (int i = 0; i < nx; ++i) axis[i] = -grid.radius + 2.0 * grid.radius * i / double(nx - 1);

    // tensor points outside the ball B(0, radius) are dropped
    if (dim == 1) {
        for (double s : times)
            for (double v : axis) out.emplace_back(s, Eigen::VectorXd::Constant(1, v));
    } else if (dim == 2) {
        for (double s : times)
            for (double vx : axis)
                for (double vy : axis) {
                    Eigen::VectorXd x(2);
                    x << vx, vy;
                    if (x.norm() <= grid.radius) out.emplace_back(s, x);
                }
    } else {
        // tensor grids blow up in higher dimension; rely on random samples
    }

    std::mt19937_64 rng(grid.seed);
    std::uniform_real_distribution<double> us(grid.s_lo, grid.s_hi);
    std::uniform_real_distribution<double> ux(-grid.radius, grid.radius);
    for (int i = 0; i < grid.random_samples; ++i) {
        Eigen::VectorXd x(dim);
        do {
            for (int k = 0; k < dim; ++k) x[k] = ux(rng);
        } while (x.norm() > grid.radius);
        out.emplace_back(us(rng), x);
    }
    return out;
}

namespace {

// Sign analysis of the bracket of (A Z)/Z for the power family: the first
// term carries delta*beta at power m + 2 beta - 2, the drift -1 at power
// p - 1 + beta and the potential -1 at power r.
struct AsymptoticVerdict {
    bool pass = false;
    double lead_coefficient = 0.0;
};

AsymptoticVerdict example_asymptotic_check(const ExampleParams& ex, const StaticCertificate& cert) {
    const double tol = 1e-9;
    const double diffusion_power = ex.m + 2.0 * cert.beta - 2.0;
    const double drift_power = ex.p - 1.0 + cert.beta;
    const double lead = std::max({diffusion_power, drift_power, ex.r});
    double coeff = 0.0;
    if (diffusion_power > lead - tol) coeff += cert.delta * cert.beta;
    if (drift_power > lead - tol) coeff -= 1.0;
    if (ex.r > lead - tol) coeff -= 1.0;
    return {coeff < 0.0, coeff};
}

bool probe_asymptotics(const CoefficientField& field, const StaticCertificate& cert,
                       double base_radius, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < field.dim; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(field.dim);
        e[i] = 1.0;
        dirs.push_back(e);
        dirs.push_back(-e);
    }
    for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd v(field.dim);
        for (int k = 0; k < field.dim; ++k) v[k] = gauss(rng);
        if (v.norm() > 1e-12) dirs.push_back(v.normalized());
    }
    const std::vector<double> radii = {base_radius, 2.0 * base_radius, 4.0 * base_radius,
                                       8.0 * base_radius, 16.0 * base_radius};
    const std::vector<double> times = {0.0, 0.5, 1.0};
    std::vector<double> worst(radii.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t ri = 0; ri < radii.size(); ++ri)
        for (const auto& dir : dirs)
            for (double s : times) {
                const Eigen::VectorXd x = radii[ri] * dir;
                worst[ri] = std::max(worst[ri], cert.applied_ratio(field, s, x, OperatorForm::Full));
            }
    const std::size_t n = worst.size();
    return worst[n - 1] < 0.0 && worst[n - 2] < 0.0 && worst[n - 1] < worst[n - 2];
}

}  // namespace

StaticCertificateReport check_static_certificate(const CoefficientField& field,
                                                 const StaticCertificate& cert,
                                                 const SampleGrid& grid) {
    if (grid.radius < 2.0)
        throw std::invalid_argument("check_static_certificate: check radius must be >= 2");
    const OperatorForm primary =
        cert.target == CertTarget::FullPair ? OperatorForm::Full : OperatorForm::NoPotential;
    const OperatorForm comparison = cert.target == CertTarget::FullPair
                                        ? OperatorForm::Comparison
                                        : OperatorForm::ComparisonNoPotential;

    StaticCertificateReport out;
    const auto samples = make_samples(grid, field.dim);
    double max_applied = -std::numeric_limits<double>::infinity();
    double arg_s = 0.0;
    Eigen::VectorXd arg_x = Eigen::VectorXd::Zero(field.dim);
    bool overflow = false;
    for (const auto& [s, x] : samples) {
        const double log_z = cert.log_value(x);
        for (OperatorForm form : {primary, comparison}) {
            const double ratio = cert.applied_ratio(field, s, x, form);
            // A Z = ratio * Z; track the max without materialising huge Z.
            // Where Z alone overflows, the sign of the ratio decides whether
            // the point can carry the maximum at all.
            double applied;
            if (log_z > 700.0) {
                if (ratio > 0.0) {
                    overflow = true;
                    applied = std::numeric_limits<double>::infinity();
                } else {
                    applied = -std::numeric_limits<double>::infinity();
                }
            } else {
                applied = ratio * std::exp(log_z);
            }
            if (applied > max_applied) {
                max_applied = applied;
                arg_s = s;
                arg_x = x;
            }
        }
    }
    out.estimated_M = std::max(0.0, max_applied);

    if (field.example) {
        const auto verdict = example_asymptotic_check(*field.example, cert);
        out.asymptotic_pass = verdict.pass;
        out.leading_coefficient = verdict.lead_coefficient;
    } else {
        out.asymptotic_pass = probe_asymptotics(field, cert, grid.radius, grid.seed);
    }

    const double m_used = cert.bound_M > 0.0 ? cert.bound_M : out.estimated_M;
    out.report.n_samples = samples.size();
    out.report.worst_margin = m_used - max_applied;
    out.report.argmin_s = arg_s;
    out.report.argmin_x = arg_x;
    out.report.pass = out.asymptotic_pass && std::isfinite(out.estimated_M) &&
                      out.report.worst_margin >= -1e-10 * std::max(1.0, std::abs(m_used));
    if (overflow) out.report.notes = "certificate overflowed on the check grid";
    else if (!out.asymptotic_pass)
        out.report.notes = "negative leading coefficient violated";
    return out;
}

TimeDependentReport check_time_dependent(const CoefficientField& field,
                                         const TimeDependentLyapunov& w, const SampleGrid& grid) {
    if (grid.s_hi >= w.t)
        throw std::invalid_argument("check_time_dependent: samples at s = t are rejected");
    TimeDependentReport out;
    out.margin_star = std::numeric_limits<double>::infinity();
    out.margin_star_star = std::numeric_limits<double>::infinity();
    const auto samples = make_samples(grid, field.dim);
    for (const auto& [s, x] : samples) {
        const double hval = w.h(s, w.t);
        const double ds = w.ds_over_w(s, x);
        const double star = ds - w.applied_ratio(field, s, x, OperatorForm::Full) + hval;
        const double star_star =
            ds - w.applied_ratio(field, s, x, OperatorForm::Comparison) + hval;
        if (std::min(star, star_star) < std::min(out.margin_star, out.margin_star_star)) {
            out.argmin_s = s;
            out.argmin_x = x;
        }
        out.margin_star = std::min(out.margin_star, star);
        out.margin_star_star = std::min(out.margin_star_star, star_star);
    }
    out.n_samples = samples.size();
    out.pass = out.margin_star >= -1e-8 && out.margin_star_star >= -1e-8;
    return out;
}

}  // namespace kolmo
