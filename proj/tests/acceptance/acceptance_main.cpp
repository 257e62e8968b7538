// Acceptance suite: end-to-end checks of the laboratory at desk scale.
// Prints one [PASS]/[FAIL] line per criterion and exits nonzero if any fail.

#include <boost/multiprecision/cpp_int.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>
#include <vector>

#include "kolmo/bounds.hpp"
#include "kolmo/cutoff.hpp"
#include "kolmo/kernel_solver.hpp"
#include "kolmo/lyapunov.hpp"
#include "kolmo/truncation.hpp"
#include "kolmo/weights.hpp"

using namespace kolmo;
using Clock = std::chrono::steady_clock;
using Rational = boost::multiprecision::cpp_rational;

namespace {

int failures = 0;

void report(int criterion, const char* what, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %2d: %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL", criterion, what,
                detail.c_str(), seconds);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

CoefficientField constant_field(double q, double pot) {
    CoefficientField f;
    f.dim = 1;
    f.eta = q;
    f.Q = [q](double, const Eigen::VectorXd&) { return q * Eigen::MatrixXd::Identity(1, 1); };
    f.DQ = [](double, const Eigen::VectorXd&, int) { return Eigen::MatrixXd::Zero(1, 1); };
    f.F = [](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
    f.V = [pot](double, const Eigen::VectorXd&) { return pot; };
    f.potential_is_zero = pot == 0.0;
    return f;
}

double sup_normalised_error(const KernelSlice& slice,
                            const std::function<double(double, double)>& oracle, double tau_lo,
                            double tau_hi, double y_window) {
    double worst = 0.0;
    for (int j = 0; j <= slice.grid.steps; ++j) {
        const double tau = slice.t - slice.grid.s_at(j);
        if (tau < tau_lo || tau > tau_hi) continue;
        double emax = 0.0, omax = 0.0;
        for (int i = 0; i < slice.grid.num_nodes(); ++i) {
            const double y = slice.grid.node(i)[0];
            if (std::abs(y - slice.x[0]) > y_window) continue;
            const double o = oracle(tau, y);
            emax = std::max(emax, std::abs(slice.value(j, i) - o));
            omax = std::max(omax, o);
        }
        worst = std::max(worst, emax / omax);
    }
    return worst;
}

struct Example032 {
    CoefficientField field = build_example_operator(0, 3, 2, 1);
    StaticCertificate cert = make_static_certificate(0.2, 4.0);
    double radius = 0.0;
    SpaceTimeGrid grid;
    KernelSlice g, g0;
    double estimated_M = 0.0;
};

// shared (0,3,2) setup: certificate-driven radius, default-resolution solves
Example032 setup_032() {
    Example032 ex;
    SampleGrid provisional{2.0, 0.0, 1.0, 9, 33, 200, 42};
    const auto prov = check_static_certificate(ex.field, ex.cert, provisional);
    const auto tr = truncation_radius(ex.cert, vec1(0.0), prov.estimated_M, 2e-7);
    ex.radius = tr.radius;
    ex.estimated_M = prov.estimated_M;
    ex.grid = make_grid(1, ex.radius, 513, 0.0, 1.0, 512);
    const SolverConfig cfg;
    ex.g = solve_kernel_slice(ex.field, 1.0, vec1(0.0), cfg, ex.grid);
    ex.g0 = solve_reference_kernel_g0(ex.field, 1.0, vec1(0.0), cfg, ex.grid);
    return ex;
}

}  // namespace

// criterion 1: pure-diffusion slice against the closed-form heat kernel
static void criterion_1() {
    const auto start = Clock::now();
    const CoefficientField lap = constant_field(1.0, 0.0);
    const SpaceTimeGrid grid = make_grid(1, 8.0, 513, 0.0, 1.0, 512);
    const SolverConfig cfg;  // theta = 1/2, sigma_delta = 3 dx
    const KernelSlice slice = solve_kernel_slice(lap, 1.0, vec1(0.0), cfg, grid);
    const double err = sup_normalised_error(
        slice,
        [](double tau, double y) {
            return std::exp(-y * y / (4.0 * tau)) / std::sqrt(4.0 * M_PI * tau);
        },
        0.1, 0.9, 3.0);
    const double secs = seconds_since(start);
    char detail[128];
    std::snprintf(detail, sizeof detail, "max rel err %.3f%% vs 2%%", 100.0 * err);
    report(1, "heat kernel matches the gaussian oracle", err <= 0.02 && secs <= 30.0, detail,
           secs);
}

// criterion 2: constant potential multiplies the kernel by exp(-tau)
static void criterion_2() {
    const auto start = Clock::now();
    const CoefficientField killed = constant_field(1.0, 1.0);
    const SpaceTimeGrid grid = make_grid(1, 8.0, 513, 0.0, 1.0, 512);
    const SolverConfig cfg;
    const KernelSlice slice = solve_kernel_slice(killed, 1.0, vec1(0.0), cfg, grid);
    const double err = sup_normalised_error(
        slice,
        [](double tau, double y) {
            return std::exp(-tau) * std::exp(-y * y / (4.0 * tau)) /
                   std::sqrt(4.0 * M_PI * tau);
        },
        0.1, 0.9, 3.0);
    char detail[128];
    std::snprintf(detail, sizeof detail, "max rel err %.3f%% vs 2%%", 100.0 * err);
    report(2, "constant-potential factorisation", err <= 0.02, detail, seconds_since(start));
}

// criterion 3: sub-Markov property and domination by the potential-free kernel
static void criterion_3(const Example032& ex) {
    const auto start = Clock::now();
    double mass_max = 0.0;
    for (int j = 0; j <= ex.grid.steps; ++j) mass_max = std::max(mass_max, ex.g.mass(j));
    double violation = -1.0;
    for (std::size_t i = 0; i < ex.g.values.size(); ++i)
        violation = std::max(violation, ex.g.values[i] - ex.g0.values[i]);
    char detail[128];
    std::snprintf(detail, sizeof detail, "mass max %.9f, domination excess %.2e", mass_max,
                  violation);
    report(3, "sub-Markov mass and kernel domination",
           mass_max <= 1.0 + 1e-6 && violation <= 1e-6, detail, seconds_since(start));
}

// criterion 4: the evolution identity residual on both operators
static void criterion_4(const Example032& ex) {
    const auto start = Clock::now();
    const CoefficientField lap = constant_field(1.0, 0.0);
    const SpaceTimeGrid grid = make_grid(1, 8.0, 513, 0.0, 1.0, 512);
    const SolverConfig cfg;
    const KernelSlice lap_slice = solve_kernel_slice(lap, 1.0, vec1(0.0), cfg, grid);
    TestFunction bump = gaussian_bump(vec1(0.0), 1.0);
    const double res_lap = validate_evolution_identity(lap, bump, lap_slice, 0.25, 0.75);
    TestFunction bump2 = gaussian_bump(vec1(0.0), ex.radius / 8.0);
    const double s0 = ex.grid.s_at(ex.g.time_index_nearest_at_or_above(0.25));
    const double s1 = ex.grid.s_at(ex.g.time_index_nearest_at_or_below(0.75));
    const double res_ex = validate_evolution_identity(ex.field, bump2, ex.g, s0, s1);
    char detail[128];
    std::snprintf(detail, sizeof detail, "residual %.2e (laplacian, vs 2e-2), %.2e (example, vs 5e-2)",
                  res_lap, res_ex);
    report(4, "evolution identity", res_lap <= 2e-2 && res_ex <= 5e-2, detail,
           seconds_since(start));
}

// criterion 5: static + time dependent certificates, and their transfer to
// every truncated operator with the same rate
static void criterion_5(const Example032& ex) {
    const auto start = Clock::now();
    SampleGrid check_grid{2.0 * ex.radius, 0.0, 1.0, 33, 129, 1000, 42};
    const auto stat = check_static_certificate(ex.field, ex.cert, check_grid);
    const bool static_ok = stat.report.pass && stat.asymptotic_pass &&
                           std::isfinite(stat.estimated_M);

    const auto w = build_time_dependent_w(0, 3, 2, LyapunovCase::DriftDominated, 0.1, 0.2, 2.5,
                                          1.0, 1);
    SampleGrid td_grid{4.0, 0.0, 0.9, 64, 129, 1000, 42};
    const auto td = check_time_dependent(ex.field, w, td_grid);
    const bool td_ok = td.margin_star >= -1e-8 && td.margin_star_star >= -1e-8;

    // Lyapunov transfer: same W and same h for every truncated operator
    const auto cutoff = std::make_shared<const CutoffProfile>(build_cutoff_profile(0.05));
    const auto w1 = make_exp_lyapunov(1.0, 0.1 + 0.1 / 3.0, 2.5, 4.0, 0.2, 0, 3, 1);
    bool transfer_ok = true;
    double transfer_margin = 1e300;
    for (double level : {std::exp(2.0), std::exp(4.0), std::exp(8.0)}) {
        const CoefficientField trunc = build_truncated_operator(ex.field, level, w1, cutoff);
        const auto tdn = check_time_dependent(trunc, w, td_grid);
        transfer_ok = transfer_ok && tdn.margin_star >= -1e-8 && tdn.margin_star_star >= -1e-8;
        transfer_margin = std::min({transfer_margin, tdn.margin_star, tdn.margin_star_star});
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "M %.3e, star %.3f, star-star %.3f, transfer margin %.3f", stat.estimated_M,
                  td.margin_star, td.margin_star_star, transfer_margin);
    report(5, "certificate suite", static_ok && td_ok && transfer_ok, detail,
           seconds_since(start));
}

// criterion 6: kernel-weighted Lyapunov profile bound, Phi monotonicity and
// the mass bound
static void criterion_6(const Example032& ex) {
    const auto start = Clock::now();
    const auto w = build_time_dependent_w(0, 3, 2, LyapunovCase::DriftDominated, 0.1, 0.2, 2.5,
                                          1.0, 1);
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);
    const ZetaProfile profile = compute_zeta(ex.g, w, win);
    const ZetaBoundReport zeta = check_zeta_bound(profile, w);
    const MassBoundReport mass = check_mass_bound(ex.g, ex.cert, ex.estimated_M);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "zeta ratio %.4f vs 1.02, phi min increment %.2e, mass ratio %.4f",
                  zeta.worst_ratio, zeta.phi_min_increment, mass.worst_ratio);
    report(6, "zeta and mass bounds",
           zeta.worst_ratio <= 1.02 && zeta.phi_monotone && mass.pass, detail,
           seconds_since(start));
}

// criterion 7: envelope and root-bound properties on random draws
static void criterion_7() {
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int envelope_violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const double gamma = 4.0 * u(rng);
        const double tau = 0.01 + 5.0 * u(rng);
        const double beta = 0.1 + 4.0 * u(rng);
        const double z = 0.001 + 20.0 * u(rng);
        const double val = std::pow(z, gamma) * std::exp(-tau * std::pow(z, beta));
        if (val > envelope_bound(gamma, tau, beta) * (1.0 + 1e-12)) ++envelope_violations;
    }
    int root_violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const double a = 5.0 * u(rng), b = 5.0 * u(rng), c = 5.0 * u(rng);
        const double k = 2.5 + 5.0 * u(rng);
        const double bound = x_root_bound(a, b, c, k);
        auto f = [&](double r) {
            return std::pow(r, k) - (4.0 / 3.0) * b * std::pow(r, k - 1.0) -
                   (4.0 / 3.0) * c * std::pow(r, k - 2.0) - (4.0 / 3.0) * a * a;
        };
        double hi = std::max(bound, 1.0) * 2.0 + 1.0;
        while (f(hi) <= 0.0) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) <= 0.0 ? lo : hi) = mid;
        }
        if (lo > bound + 1e-9) ++root_violations;
    }
    const double secs = seconds_since(start);
    char detail[128];
    std::snprintf(detail, sizeof detail, "%d envelope / %d root violations", envelope_violations,
                  root_violations);
    report(7, "envelope and root-bound properties",
           envelope_violations == 0 && root_violations == 0 && secs <= 5.0, detail, secs);
}

// criterion 8: fitted kernel-bound constant is finite and refinement stable in
// both regimes; a forced wrong regime should destabilise it (negative control)
static void criterion_8(const Example032& ex) {
    const SolverConfig cfg;
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);

    {
        const auto start = Clock::now();
        const RegimeSelection regime = select_regime(0, 3, 2);
        BoundVerdict v = verify_theorem_bound(ex.g, regime, 2.5, 0.1, 4.0, win);
        const SpaceTimeGrid fine = make_grid(1, ex.radius, 1025, 0.0, 1.0, 1024);
        const KernelSlice refined = solve_kernel_slice(ex.field, 1.0, vec1(0.0), cfg, fine);
        apply_refinement(v, refined, regime, win);
        const double secs = seconds_since(start);
        char detail[160];
        std::snprintf(detail, sizeof detail, "C_fit %.4e -> %.4e (%.2f%% change) vs 25%%",
                      v.c_fit, v.c_fit_refined,
                      100.0 * std::abs(v.c_fit_refined - v.c_fit) / v.c_fit);
        report(8, "regime 1 fit stability on (0,3,2)", v.pass && secs <= 180.0, detail, secs);
    }
    {
        const auto start = Clock::now();
        const CoefficientField f26 = build_example_operator(0, 2, 6, 1);
        const StaticCertificate cert26 = make_static_certificate(0.12, 4.0);
        SampleGrid provisional{2.0, 0.0, 1.0, 9, 33, 200, 42};
        const auto prov = check_static_certificate(f26, cert26, provisional);
        const auto tr = truncation_radius(cert26, vec1(0.0), prov.estimated_M, 2e-7);
        const SpaceTimeGrid grid26 = make_grid(1, tr.radius, 513, 0.0, 1.0, 512);
        const KernelSlice g26 = solve_kernel_slice(f26, 1.0, vec1(0.0), cfg, grid26);
        const RegimeSelection regime = select_regime(0, 2, 6);
        BoundVerdict v = verify_theorem_bound(g26, regime, 2.5, 0.1, 4.0, win);
        const SpaceTimeGrid fine = make_grid(1, tr.radius, 1025, 0.0, 1.0, 1024);
        const KernelSlice refined = solve_kernel_slice(f26, 1.0, vec1(0.0), cfg, fine);
        apply_refinement(v, refined, regime, win);
        const double secs = seconds_since(start);
        char detail[160];
        std::snprintf(detail, sizeof detail, "C_fit %.4e -> %.4e (%.2f%% change) vs 25%%",
                      v.c_fit, v.c_fit_refined,
                      100.0 * std::abs(v.c_fit_refined - v.c_fit) / v.c_fit);
        report(8, "regime 2 fit stability on (0,2,6)", v.pass && secs <= 180.0, detail, secs);
    }
    {
        // negative control: regime 2 exponents forced onto the regime 1 operator
        const auto start = Clock::now();
        RegimeSelection wrong;
        wrong.regime = 2;
        wrong.m = 0;
        wrong.p = 3;
        wrong.r = 2;
        wrong.beta = 0.5 * (2.0 + 2.0 - 0.0);
        wrong.eps_max = 2.0 / (2.0 + 2.0 - 0.0);
        wrong.alpha0 = (2.0 + 2.0 - 0.0) / (2.0 * (3.0 - 1.0));  // r + m <= 2 branch
        BoundVerdict v = verify_theorem_bound(ex.g, wrong, 2.5, 0.1, 4.0, win);
        const SpaceTimeGrid fine = make_grid(1, ex.radius, 1025, 0.0, 1.0, 1024);
        const KernelSlice refined = solve_kernel_slice(ex.field, 1.0, vec1(0.0), cfg, fine);
        apply_refinement(v, refined, wrong, win);
        const double change = std::abs(v.c_fit_refined - v.c_fit) / v.c_fit;
        char detail[200];
        std::snprintf(detail, sizeof detail,
                      "C_fit change %.3f%% vs required > 50%%; the fit maximum sits at interior "
                      "grid points, so it converges under refinement for any fixed exponent set",
                      100.0 * change);
        report(8, "negative control: wrong regime destabilises the fit", change > 0.5, detail,
               seconds_since(start));
    }
}

// criterion 9: bounded-diffusion approximation converges and the cutoff obeys
// its derivative constraint
static void criterion_9() {
    const auto start = Clock::now();
    const auto cutoff = std::make_shared<const CutoffProfile>(build_cutoff_profile(0.05));
    double worst_tphi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double tt = 2.5 * i / 9999.0;
        worst_tphi = std::max(worst_tphi, std::abs(tt * cutoff->dphi(tt)));
    }

    const CoefficientField field = build_example_operator(1, 3, 2, 1);
    const StaticCertificate cert = make_static_certificate(0.3, 3.0);
    SampleGrid provisional{2.0, 0.0, 1.0, 9, 33, 200, 42};
    const auto prov = check_static_certificate(field, cert, provisional);
    const auto tr = truncation_radius(cert, vec1(0.0), prov.estimated_M, 2e-7);
    const SpaceTimeGrid grid = make_grid(1, tr.radius, 513, 0.0, 1.0, 512);
    const auto w1 = make_exp_lyapunov(1.0, 0.15 + 0.15 / 3.0, 1.7, 3.0, 0.3, 1, 3, 1);
    const SolverConfig cfg;
    const auto sweep =
        convergence_sweep(field, {std::exp(2.0), std::exp(4.0), std::exp(8.0)}, w1, cutoff, 1.0,
                          vec1(0.0), cfg, grid, tr.radius / 2.0, 0.3 + 0.07, 0.7);
    bool decreasing = true;
    for (std::size_t i = 1; i < sweep.rows.size(); ++i)
        decreasing = decreasing && sweep.rows[i].sup_diff < sweep.rows[i - 1].sup_diff;
    const double top_rel = sweep.rows.back().sup_rel_diff;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "sup diffs %.2e > %.2e > %.2e, top rel %.2e vs 5%%, max|t phi'| %.3f vs 2",
                  sweep.rows[0].sup_diff, sweep.rows[1].sup_diff, sweep.rows[2].sup_diff, top_rel,
                  worst_tphi);
    report(9, "approximation convergence and cutoff constraint",
           decreasing && top_rel <= 0.05 && worst_tphi <= 2.0, detail, seconds_since(start));
}

// criterion 10: exact arithmetic identities of the constant machinery
static void criterion_10() {
    const auto start = Clock::now();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(1.0, 10.0);

    bool remap_ok = true;
    for (int i = 0; i < 100; ++i) {
        const double c2 = u(rng), c3 = u(rng), c5 = u(rng), c8 = u(rng), c9 = u(rng);
        const double eta = u(rng) / 5.0;
        const auto m = remap_constants(c2, c3, c5, c8, c9, eta);
        remap_ok = remap_ok && m.c2 == 2.0 * c2 && m.c3 == c3 + eta * c8 && m.c5 == c5 + 4.0 * c9;
    }

    // thm45 - thm34 == c8^{k/2} I1 + c9^k I2, exactly in rational arithmetic
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);
    WeightSystem ws = make_weight_system(0, 3, 2, 4.0, 0.1, 0.13, 0.16, 0.2, 2.5, 4.0, win, 1);
    bool assembly_ok = true;
    for (int rep = 0; rep < 20; ++rep) {
        for (int i = 1; i <= 9; ++i) ws.c[i] = u(rng);
        const double s1 = u(rng), i1 = u(rng), i2 = u(rng);
        auto rq = [](double v) { return Rational(v); };
        auto group = [&](bool general) {
            Rational ci1 = rq(ws.c[1]) * rq(ws.c[1]) /
                               (rq(win.b0 - win.b) * rq(win.b0 - win.b)) +
                           rq(ws.c[2]) * rq(ws.c[2]) * rq(ws.c[2]) * rq(ws.c[2]) +
                           rq(ws.c[3]) * rq(ws.c[3]) + rq(ws.c[4]) * rq(ws.c[4]);
            Rational ci2 = rq(ws.c[2]) * rq(ws.c[2]) * rq(ws.c[6]) * rq(ws.c[6]) +
                           rq(ws.c[5]) * rq(ws.c[5]) * rq(ws.c[5]) * rq(ws.c[5]) +
                           rq(ws.c[6]) * rq(ws.c[6]) * rq(ws.c[6]) * rq(ws.c[6]) +
                           rq(ws.c[7]) * rq(ws.c[7]) * rq(ws.c[7]) * rq(ws.c[7]);
            if (general) {
                ci1 += rq(ws.c[8]) * rq(ws.c[8]);
                ci2 += rq(ws.c[9]) * rq(ws.c[9]) * rq(ws.c[9]) * rq(ws.c[9]);
            }
            return rq(ws.c[1]) * rq(ws.c[1]) * rq(s1) + ci1 * rq(i1) + ci2 * rq(i2);
        };
        const Rational diff = group(true) - group(false);
        const Rational expect = rq(ws.c[8]) * rq(ws.c[8]) * rq(i1) +
                                rq(ws.c[9]) * rq(ws.c[9]) * rq(ws.c[9]) * rq(ws.c[9]) * rq(i2);
        assembly_ok = assembly_ok && diff == expect;
        // double-precision evaluation agrees to rounding
        const auto lo = assemble_main_bound(ws, s1, i1, i2, BoundVariant::BoundedDiffusion);
        const auto hi = assemble_main_bound(ws, s1, i1, i2, BoundVariant::General);
        const double expect_d = std::pow(ws.c[8], 2.0) * i1 + std::pow(ws.c[9], 4.0) * i2;
        assembly_ok =
            assembly_ok && std::abs(hi.total - lo.total - expect_d) <= 1e-12 * hi.total;
    }

    // exponent table for (0,3,2), beta = 4, alpha = 2.5
    const CoefficientField field = build_example_operator(0, 3, 2, 1);
    WeightSystem table = make_weight_system(0, 3, 2, 4.0, 0.1, 0.13, 0.16, 0.2, 2.5, 4.0, win, 1);
    compute_weight_constants(field, table);
    const bool gamma_ok = table.gamma[2] == 0.0 && table.gamma[3] == 0.0 &&
                          table.gamma[4] == 1.0 && table.gamma[5] == 0.0 &&
                          table.gamma[6] == 1.875 && table.gamma[7] == 0.625;

    char detail[160];
    std::snprintf(detail, sizeof detail, "remap %s, assembly %s, gamma table %s",
                  remap_ok ? "exact" : "BROKEN", assembly_ok ? "exact" : "BROKEN",
                  gamma_ok ? "exact" : "BROKEN");
    report(10, "exact arithmetic identities", remap_ok && assembly_ok && gamma_ok, detail,
           seconds_since(start));
}

int main() {
    std::printf("acceptance suite: desk-scale verification of the kernel laboratory\n");
    const auto start = Clock::now();
    criterion_1();
    criterion_2();
    const Example032 ex = setup_032();
    criterion_3(ex);
    criterion_4(ex);
    criterion_5(ex);
    criterion_6(ex);
    criterion_7();
    criterion_8(ex);
    criterion_9();
    criterion_10();
    std::printf("total: %.1f s, %d failing check(s)\n", seconds_since(start), failures);
    return failures == 0 ? 0 : 1;
}
