#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "kolmo/bounds.hpp"
#include "kolmo/truncation.hpp"

using namespace kolmo;
using Rational = boost::multiprecision::cpp_rational;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

CoefficientField pure_laplacian_1d() {
    CoefficientField f;
    f.dim = 1;
    f.eta = 1.0;
    f.Q = [](double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(1, 1); };
    f.DQ = [](double, const Eigen::VectorXd&, int) { return Eigen::MatrixXd::Zero(1, 1); };
    f.F = [](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
    f.V = [](double, const Eigen::VectorXd&) { return 0.0; };
    f.potential_is_zero = true;
    return f;
}

WeightSystem unit_system(double k) {
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);
    WeightSystem ws = make_weight_system(0, 3, 2, k, 0.1, 0.13, 0.16, 0.2, 2.5, 4.0, win, 1);
    for (int i = 1; i <= 9; ++i) ws.c[i] = 1.0;
    return ws;
}

// exact rational evaluation of the assembly for even k
Rational rational_assembly(const std::array<double, 10>& c, double k, double gap, double sup1,
                           double i1, double i2, bool general) {
    const int ki = static_cast<int>(k);
    REQUIRE(ki % 2 == 0);
    auto rq = [](double v) { return Rational(v); };
    auto powr = [](Rational base, int e) {
        Rational out = 1;
        for (int i = 0; i < e; ++i) out *= base;
        return out;
    };
    const int hk = ki / 2;
    Rational coef_i1 = powr(rq(c[1]), hk) / powr(rq(gap), hk) + powr(rq(c[2]), ki) +
                       powr(rq(c[3]), hk) + powr(rq(c[4]), hk);
    Rational coef_i2 = powr(rq(c[2]), hk) * powr(rq(c[6]), hk) + powr(rq(c[5]), ki) +
                       powr(rq(c[6]), ki) + powr(rq(c[7]), ki);
    if (general) {
        coef_i1 += powr(rq(c[8]), hk);
        coef_i2 += powr(rq(c[9]), ki);
    }
    return powr(rq(c[1]), hk) * rq(sup1) + coef_i1 * rq(i1) + coef_i2 * rq(i2);
}

}  // namespace

TEST_CASE("envelope bound") {
    CHECK(envelope_bound(4.0, 1.0, 4.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(envelope_bound(0.0, 3.7, 2.0) == 1.0);
    CHECK(envelope_bound(2.0, 4.0, 2.0) == doctest::Approx(0.25 * std::exp(-1.0)));

    SUBCASE("matches a scan maximisation of z^gamma exp(-tau z^beta)") {
        const double gamma = 2.0, tau = 4.0, beta = 2.0;
        double best = 0.0;
        for (int i = 1; i < 200000; ++i) {
            const double z = i * 1e-4;
            best = std::max(best, std::pow(z, gamma) * std::exp(-tau * std::pow(z, beta)));
        }
        CHECK(best == doctest::Approx(envelope_bound(gamma, tau, beta)).epsilon(1e-8));
    }

    SUBCASE("dominates random samples") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 10000; ++i) {
            const double gamma = 4.0 * u(rng);
            const double tau = 0.01 + 5.0 * u(rng);
            const double beta = 0.1 + 4.0 * u(rng);
            const double z = 0.001 + 20.0 * u(rng);
            const double val = std::pow(z, gamma) * std::exp(-tau * std::pow(z, beta));
            CHECK(val <= envelope_bound(gamma, tau, beta) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("root bound for the X inequality") {
    CHECK(x_root_bound(0.0, 0.0, 0.0, 4.0) == 0.0);
    CHECK(x_root_bound(0.0, 3.0, 0.0, 4.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(x_root_bound(1.0, 1.0, 1.0, 2.0), std::invalid_argument);

    SUBCASE("dominates the largest root of the companion polynomial") {
        std::mt19937_64 rng(43);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int rep = 0; rep < 1000; ++rep) {
            const double a = 5.0 * u(rng), b = 5.0 * u(rng), c = 5.0 * u(rng);
            const double k = 2.5 + 5.0 * u(rng);
            const double bound = x_root_bound(a, b, c, k);
            auto f = [&](double r) {
                return std::pow(r, k) - (4.0 / 3.0) * b * std::pow(r, k - 1.0) -
                       (4.0 / 3.0) * c * std::pow(r, k - 2.0) - (4.0 / 3.0) * a * a;
            };
            // bisect for the largest root in (0, hi]
            double hi = std::max(bound, 1.0) * 2.0 + 1.0;
            while (f(hi) <= 0.0) hi *= 2.0;
            double lo = 0.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (f(mid) <= 0.0 ? lo : hi) = mid;
            }
            CHECK(lo <= bound + 1e-9);
            CHECK(f(bound) >= -1e-9);
            for (int probe = 1; probe <= 10; ++probe)
                CHECK(f(bound * (1.0 + 0.3 * probe)) >= -1e-9);
        }
    }
}

TEST_CASE("regime selection") {
    const RegimeSelection a = select_regime(0, 3, 2);
    CHECK(a.regime == 1);
    CHECK(a.beta == doctest::Approx(4.0));
    CHECK(a.alpha0 == doctest::Approx(2.0));
    CHECK(a.eps_max == doctest::Approx(0.25));
    CHECK(a.exponent(2.5, 4.0) == doctest::Approx(-6.5));

    const RegimeSelection b = select_regime(0, 2, 6);
    CHECK(b.regime == 2);
    CHECK(b.beta == doctest::Approx(4.0));
    CHECK(b.alpha0 == doctest::Approx(2.0));
    CHECK(b.eps_max == doctest::Approx(0.25));

    const RegimeSelection c = select_regime(1, 1.5, 0.5);
    CHECK(c.regime == 1);
    CHECK(c.beta == doctest::Approx(1.5));
    CHECK(c.alpha0 == doctest::Approx(3.0));

    CHECK_THROWS_WITH_AS(select_regime(0, 0.9, 2), doctest::Contains("p > 1"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(select_regime(3, 1.5, 4), doctest::Contains("p > m - 1"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(select_regime(4, 5, 1.5), doctest::Contains("r > m - 2"),
                         std::invalid_argument);
}

TEST_CASE("main bound assembly") {
    SUBCASE("unit constants collapse to the closed form") {
        WeightSystem ws = unit_system(4.0);
        const double gap = ws.window.b0 - ws.window.b;  // 0.1
        const auto a = assemble_main_bound(ws, 2.0, 3.0, 5.0, BoundVariant::General);
        CHECK(a.total == doctest::Approx(2.0 + (1.0 / (gap * gap) + 4.0) * 3.0 + 5.0 * 5.0));
    }

    SUBCASE("remapped constants reproduce the direct expansion") {
        std::mt19937_64 rng(53);
        std::uniform_real_distribution<double> u(1.0, 3.0);
        for (int rep = 0; rep < 25; ++rep) {
            WeightSystem ws = unit_system(4.0);
            for (int i = 2; i <= 9; ++i) ws.c[i] = u(rng);
            const double eta = 0.2 + u(rng);
            const auto m = remap_constants(ws.c[2], ws.c[3], ws.c[5], ws.c[8], ws.c[9], eta);
            WeightSystem mapped = ws;
            mapped.c[2] = m.c2;
            mapped.c[3] = m.c3;
            mapped.c[5] = m.c5;
            const double s1 = u(rng), i1 = u(rng), i2 = u(rng);
            const auto got = assemble_main_bound(mapped, s1, i1, i2,
                                                 BoundVariant::BoundedDiffusion);
            // hand-written expansion of the bounded-diffusion groups with the
            // substituted constants
            const double gap = ws.window.b0 - ws.window.b;
            const double ci1 = std::pow(ws.c[1], 2.0) / std::pow(gap, 2.0) +
                               std::pow(2.0 * ws.c[2], 4.0) +
                               std::pow(ws.c[3] + eta * ws.c[8], 2.0) + std::pow(ws.c[4], 2.0);
            const double ci2 = std::pow(2.0 * ws.c[2], 2.0) * std::pow(ws.c[6], 2.0) +
                               std::pow(ws.c[5] + 4.0 * ws.c[9], 4.0) + std::pow(ws.c[6], 4.0) +
                               std::pow(ws.c[7], 4.0);
            const double expect = std::pow(ws.c[1], 2.0) * s1 + ci1 * i1 + ci2 * i2;
            CHECK(got.total == expect);
        }
    }

    SUBCASE("general minus bounded-diffusion difference, exactly") {
        std::mt19937_64 rng(47);
        std::uniform_real_distribution<double> u(1.0, 3.0);
        for (int rep = 0; rep < 50; ++rep) {
            WeightSystem ws = unit_system(4.0);
            for (int i = 2; i <= 9; ++i) ws.c[i] = u(rng);
            const double s1 = u(rng), i1 = u(rng), i2 = u(rng);
            const auto lo = assemble_main_bound(ws, s1, i1, i2, BoundVariant::BoundedDiffusion);
            const auto hi = assemble_main_bound(ws, s1, i1, i2, BoundVariant::General);
            // exact rational arithmetic on the double inputs
            const Rational diff =
                rational_assembly(ws.c, 4.0, ws.window.b0 - ws.window.b, s1, i1, i2, true) -
                rational_assembly(ws.c, 4.0, ws.window.b0 - ws.window.b, s1, i1, i2, false);
            Rational expect = Rational(ws.c[8]) * Rational(ws.c[8]) * Rational(i1) +
                              Rational(ws.c[9]) * Rational(ws.c[9]) * Rational(ws.c[9]) *
                                  Rational(ws.c[9]) * Rational(i2);
            CHECK(diff == expect);
            // and the double-precision path agrees to rounding
            CHECK(hi.total - lo.total ==
                  doctest::Approx(std::pow(ws.c[8], 2.0) * i1 + std::pow(ws.c[9], 4.0) * i2)
                      .epsilon(1e-13));
        }
    }
}

TEST_CASE("zeta profiles and their bound") {
    const CoefficientField lap = pure_laplacian_1d();
    const SpaceTimeGrid grid = make_grid(1, 8.0, 257, 0.0, 1.0, 128);
    const SolverConfig cfg;
    const KernelSlice slice = solve_kernel_slice(lap, 1.0, vec1(0.0), cfg, grid);
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);

    SUBCASE("unit weight integrates to the mass") {
        TimeDependentLyapunov one;
        one.t = 1.0;
        one.eps = 0.0;
        one.alpha = 1.0;
        one.beta = 2.0;
        one.h = RateFunction{0.0, 0.0};
        one.power = make_smooth_power(2.0);
        const ZetaProfile z = compute_zeta(slice, one, win);
        for (std::size_t j = 0; j < z.s.size(); ++j)
            CHECK(z.zeta[j] == doctest::Approx(slice.mass(static_cast<int>(j))));
        CHECK(z.sup_window <= 1.0 + 1e-9);
        const ZetaBoundReport rep = check_zeta_bound(z, one);
        CHECK(rep.pass);
        CHECK(rep.worst_ratio <= 1.0 + 1e-9);
    }

    SUBCASE("gaussian-moment oracle for a quadratic weight") {
        TimeDependentLyapunov wq;
        wq.t = 1.0;
        wq.eps = 0.05;
        wq.alpha = 0.0;  // weight frozen in time: exp(0.05 |y|^2)
        wq.beta = 2.0;
        wq.h = RateFunction{0.0, 0.0};
        wq.power = make_smooth_power(2.0);
        const ZetaProfile z = compute_zeta(slice, wq, win);
        for (int j : {32, 64, 96}) {
            const double tau = 1.0 - grid.s_at(j);
            const double var = 2.0 * tau + 0.5 * slice.sigma_delta * slice.sigma_delta;
            const double oracle = 1.0 / std::sqrt(1.0 - 2.0 * 0.05 * var);
            CHECK(z.zeta[j] == doctest::Approx(oracle).epsilon(0.02));
        }
        // terminal normalisation: zeta(t) is the mollifier mass of W ~ 1
        CHECK(z.zeta.back() == doctest::Approx(1.0).epsilon(0.01));
    }

    SUBCASE("the checker detects an artificially halved rate") {
        // profile growing at 0.8 of the admissible rate: comfortably inside
        // the bound for h, far outside it once h is halved
        TimeDependentLyapunov w;
        w.t = 1.0;
        w.eps = 0.1;
        w.alpha = 2.5;
        w.beta = 4.0;
        w.h = RateFunction{1.0, -0.5};
        w.power = make_smooth_power(4.0);
        ZetaProfile profile;
        profile.t = 1.0;
        profile.x = vec1(0.0);
        for (int j = 0; j <= 128; ++j) {
            const double s = j / 128.0;
            profile.s.push_back(s);
            profile.zeta.push_back(std::exp(0.8 * w.h.integral_to_terminal(s, 1.0)));
        }
        const ZetaBoundReport good = check_zeta_bound(profile, w);
        CHECK(good.pass);
        CHECK(good.phi_monotone);
        TimeDependentLyapunov halved = w;
        halved.h.coeff *= 0.5;
        const ZetaBoundReport bad = check_zeta_bound(profile, halved);
        CHECK_FALSE(bad.pass);
        CHECK(bad.worst_ratio > 1.02);
    }
}

TEST_CASE("gamma moments") {
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);
    const SolverConfig cfg;

    SUBCASE("zero drift gives zero first moment") {
        const CoefficientField lap = pure_laplacian_1d();
        const SpaceTimeGrid grid = make_grid(1, 8.0, 129, 0.0, 1.0, 64);
        const KernelSlice slice = solve_kernel_slice(lap, 1.0, vec1(0.0), cfg, grid);
        const GammaMoments m = compute_gamma_moments(slice, lap, 4.0, win);
        CHECK(m.gamma1 == 0.0);
        CHECK(m.gamma2 == 0.0);
        CHECK(m.finite);
    }

    SUBCASE("constant potential factors out") {
        CoefficientField f = pure_laplacian_1d();
        const double c = 0.7;
        f.V = [c](double, const Eigen::VectorXd&) { return c; };
        f.potential_is_zero = false;
        const SpaceTimeGrid grid = make_grid(1, 8.0, 129, 0.0, 1.0, 64);
        const KernelSlice slice = solve_kernel_slice(f, 1.0, vec1(0.0), cfg, grid);
        const GammaMoments m = compute_gamma_moments(slice, f, 4.0, win);
        // Gamma2 = c * (mass-weighted time measure)^{2/k}
        const int j_lo = slice.time_index_nearest_at_or_above(win.a0);
        const int j_hi = slice.time_index_nearest_at_or_below(win.b0);
        double measure = 0.0;
        for (int j = j_lo; j < j_hi; ++j)
            measure += 0.5 * (slice.mass(j) + slice.mass(j + 1)) * grid.ds();
        CHECK(m.gamma2 == doctest::Approx(c * std::pow(measure, 0.5)).epsilon(1e-9));
    }

    SUBCASE("stable under refinement on the power family") {
        const CoefficientField ex = build_example_operator(0, 3, 2, 1);
        const SpaceTimeGrid coarse = make_grid(1, 3.3, 129, 0.0, 1.0, 64);
        const SpaceTimeGrid fine = make_grid(1, 3.3, 257, 0.0, 1.0, 128);
        const GammaMoments a = compute_gamma_moments(
            solve_kernel_slice(ex, 1.0, vec1(0.0), cfg, coarse), ex, 4.0, win);
        const GammaMoments b = compute_gamma_moments(
            solve_kernel_slice(ex, 1.0, vec1(0.0), cfg, fine), ex, 4.0, win);
        CHECK(a.finite);
        CHECK(b.finite);
        CHECK(std::abs(a.gamma1 - b.gamma1) / b.gamma1 < 0.10);
        CHECK(std::abs(a.gamma2 - b.gamma2) / b.gamma2 < 0.10);
    }
}

TEST_CASE("mass bound against the certificate") {
    const CoefficientField ex = build_example_operator(0, 3, 2, 1);
    const SpaceTimeGrid grid = make_grid(1, 3.3, 257, 0.0, 1.0, 128);
    const SolverConfig cfg;
    const KernelSlice slice = solve_kernel_slice(ex, 1.0, vec1(0.0), cfg, grid);
    const StaticCertificate cert = make_static_certificate(0.2, 4.0);

    SUBCASE("holds with a grid-estimated M") {
        const MassBoundReport rep = check_mass_bound(slice, cert, 1126.0);
        CHECK(rep.pass);
        CHECK(rep.worst_ratio <= 1.02);
    }

    SUBCASE("an almost-flat certificate is bounded by the mass alone") {
        const StaticCertificate flat = make_static_certificate(1e-6, 4.0);
        const MassBoundReport rep = check_mass_bound(slice, flat, 0.0);
        CHECK(rep.pass);  // LHS ~ mass <= 1 ~ Z(x)
    }

    SUBCASE("terminal limit is the anchor value") {
        // at s = t the kernel is the mollified point mass, so the weighted
        // mass approaches Z(x) and the bound right-hand side is Z(x) + 0
        const double lhs = kernel_quadrature(
            slice, [&](const Eigen::VectorXd& y) { return cert.value(y); }, grid.steps);
        CHECK(lhs == doctest::Approx(cert.value(vec1(0.0))).epsilon(0.02));
    }
}

TEST_CASE("theorem bound fit is finite and refinement stable") {
    const CoefficientField ex = build_example_operator(0, 3, 2, 1);
    const SpaceTimeGrid grid = make_grid(1, 3.3, 257, 0.0, 1.0, 128);
    const SolverConfig cfg;
    const KernelSlice slice = solve_kernel_slice(ex, 1.0, vec1(0.0), cfg, grid);
    const TimeWindow win = make_time_window(0.3, 0.4, 0.6, 0.7, 1.0);
    const RegimeSelection regime = select_regime(0, 3, 2);
    BoundVerdict v = verify_theorem_bound(slice, regime, 2.5, 0.1, 4.0, win);
    CHECK(std::isfinite(v.c_fit));
    CHECK(v.exponent == doctest::Approx(-6.5));
    CHECK(v.margin_min == 0.0);

    const SpaceTimeGrid fine = make_grid(1, 3.3, 513, 0.0, 1.0, 256);
    const KernelSlice refined = solve_kernel_slice(ex, 1.0, vec1(0.0), cfg, fine);
    apply_refinement(v, refined, regime, win);
    CHECK(v.stable);
    CHECK(v.pass);

    SUBCASE("parameter domain is enforced") {
        CHECK_THROWS_AS(verify_theorem_bound(slice, regime, 1.5, 0.1, 4.0, win),
                        std::invalid_argument);
        CHECK_THROWS_AS(verify_theorem_bound(slice, regime, 2.5, 0.3, 4.0, win),
                        std::invalid_argument);
    }
}
