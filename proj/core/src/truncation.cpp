#include "kolmo/truncation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <stdexcept>

namespace kolmo {

namespace {

// phi(W1/n) evaluated through log W1 so that huge W1 never overflows: the
// cutoff is exactly zero once log(W1/n) >= log 2.
double blend_factor(const CutoffProfile& cutoff, const TimeDependentLyapunov& w1, double level,
                    double s, const Eigen::VectorXd& x) {
    const double log_arg = w1.log_value(s, x) - std::log(level);
    if (log_arg >= std::log(2.0) + 1e-12) return 0.0;
    return cutoff.phi(std::exp(log_arg));
}

}  // namespace

CoefficientField build_truncated_operator(const CoefficientField& base, double level,
                                          const TimeDependentLyapunov& w1,
                                          std::shared_ptr<const CutoffProfile> cutoff) {
    if (!(level >= 1.0)) throw std::invalid_argument("truncation level must be >= 1");
    if (!cutoff) throw std::invalid_argument("truncated operator needs a cutoff profile");
    CoefficientField out = base;
    out.time_dependent = true;  // the blend depends on s through W1
    out.example.reset();        // no longer of the pure power family
    const double eta = base.eta;
    const int dim = base.dim;
    auto base_q = base.Q;
    auto base_dq = base.DQ;
    out.Q = [base_q, cutoff, w1, level, eta, dim](double s,
                                                  const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        const double phi = blend_factor(*cutoff, w1, level, s, x);
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
        if (phi == 0.0) return eta * id;
        return phi * base_q(s, x) + (1.0 - phi) * eta * id;
    };
    out.DQ = [base_q, base_dq, cutoff, w1, level, eta, dim](
                 double s, const Eigen::VectorXd& x, int k) -> Eigen::MatrixXd {
        const double log_arg = w1.log_value(s, x) - std::log(level);
        if (log_arg >= std::log(2.0) + 1e-12) return Eigen::MatrixXd::Zero(dim, dim);
        const double z = std::exp(log_arg);
        const double phi = cutoff->phi(z);
        const double dphi = cutoff->dphi(z);
        Eigen::MatrixXd d = phi * base_dq(s, x, k);
        if (dphi != 0.0) {
            // d/dx_k phi(W1/n) = phi'(z) z d/dx_k log W1
            const double dlogw1 = w1.grad_over_w(s, x)[k];
            d += dphi * z * dlogw1 *
                 (base_q(s, x) - eta * Eigen::MatrixXd::Identity(dim, dim));
        }
        return d;
    };
    return out;
}

RemappedConstants remap_constants(double c2, double c3, double c5, double c8, double c9,
                                  double eta) {
    if (c2 < 1.0 || c3 < 1.0 || c5 < 1.0 || c8 < 1.0 || c9 < 1.0)
        throw std::invalid_argument("remap_constants: hypothesis constants must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("remap_constants: eta must be positive");
    return RemappedConstants{2.0 * c2, c3 + eta * c8, c5 + 4.0 * c9};
}

ConvergenceSweep convergence_sweep(const CoefficientField& base, const std::vector<double>& levels,
                                   const TimeDependentLyapunov& w1,
                                   std::shared_ptr<const CutoffProfile> cutoff, double t,
                                   const Eigen::VectorXd& x, const SolverConfig& cfg,
                                   const SpaceTimeGrid& grid, double compact_radius,
                                   double window_lo, double window_hi) {
    if (levels.empty()) throw std::invalid_argument("convergence sweep: needs at least one level");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i] > levels[i - 1]))
            throw std::invalid_argument("convergence sweep: levels must be increasing");
    // K must already sit inside {W1 <= n_1}: W1 is largest at s_min on |y| = K
    {
        Eigen::VectorXd corner = Eigen::VectorXd::Zero(grid.dim);
        corner[0] = compact_radius;
        const double w1_max = w1.log_value(grid.s_min, corner);
        if (w1_max > std::log(levels.front()) + 1e-9)
            throw std::invalid_argument(
                "convergence sweep: compact set K is not contained in {W1 <= n_1}");
    }

    const KernelSlice reference = solve_kernel_slice(base, t, x, cfg, grid);

    ConvergenceSweep sweep;
    sweep.compact_radius = compact_radius;
    sweep.window_lo = window_lo;
    sweep.window_hi = window_hi;

    std::vector<std::future<SweepRow>> futures;
    for (double level : levels) {
        futures.push_back(std::async(std::launch::async, [&, level]() {
            const CoefficientField truncated = build_truncated_operator(base, level, w1, cutoff);
            const KernelSlice gn =
                solve_kernel_slice(truncated.with_zero_potential(), t, x, cfg, grid);
            const KernelSlice gn_killed = solve_kernel_slice(truncated, t, x, cfg, grid);
            SweepRow row;
            row.level = level;
            row.mass_defect = gn.truncation_defect.value_or(0.0);
            const int j_lo = reference.time_index_nearest_at_or_above(window_lo);
            const int j_hi = reference.time_index_nearest_at_or_below(window_hi);
            double sup_g = 0.0;
            for (int j = j_lo; j <= j_hi; ++j) {
                const double* gr = reference.level(j);
                const double* gl = gn_killed.level(j);
                for (int i = 0; i < grid.num_nodes(); ++i) {
                    if (grid.node(i).norm() > compact_radius) continue;
                    row.sup_diff = std::max(row.sup_diff, std::abs(gl[i] - gr[i]));
                    sup_g = std::max(sup_g, gr[i]);
                }
            }
            row.sup_rel_diff = sup_g > 0.0 ? row.sup_diff / sup_g : 0.0;
            return row;
        }));
    }
    for (auto& f : futures) sweep.rows.push_back(f.get());
    return sweep;
}

void write_sweep_csv(const ConvergenceSweep& sweep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "n,sup_diff,mass_defect\n";
    char buf[160];
    for (const auto& row : sweep.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", row.level, row.sup_diff,
                      row.mass_defect);
        out << buf;
    }
}

}  // namespace kolmo
