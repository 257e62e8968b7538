#pragma once

#include <memory>
#include <vector>

#include "kolmo/coefficient_field.hpp"
#include "kolmo/cutoff.hpp"
#include "kolmo/kernel_solver.hpp"
#include "kolmo/lyapunov.hpp"
#include "kolmo/weights.hpp"

namespace kolmo {

/// Bounded-diffusion approximation: the diffusion matrix is blended towards
/// eta * Id outside the Lyapunov sublevel set {W1 <= n},
///   q^(n) = phi(W1/n) Q + (1 - phi(W1/n)) eta Id,
/// while drift and potential stay untouched.  The blend keeps the ellipticity
/// constant eta and leaves q^(n) = Q wherever W1 <= n and q^(n) = eta Id
/// wherever W1 >= 2n.
CoefficientField build_truncated_operator(const CoefficientField& base, double level,
                                          const TimeDependentLyapunov& w1,
                                          std::shared_ptr<const CutoffProfile> cutoff);

/// Constant remapping for the truncated operator: (c2, c3, c5) become
/// (2 c2, c3 + eta c8, c5 + 4 c9); c1, c4, c6, c7 pass through unchanged.
struct RemappedConstants {
    double c2 = 0.0, c3 = 0.0, c5 = 0.0;
};
RemappedConstants remap_constants(double c2, double c3, double c5, double c8, double c9,
                                  double eta);

struct SweepRow {
    double level = 0.0;
    double sup_diff = 0.0;      ///< sup over K x window of |g_n - g|
    double sup_rel_diff = 0.0;  ///< sup_diff / sup over K x window of g
    double mass_defect = 0.0;   ///< potential-free defect of the level solve
};

struct ConvergenceSweep {
    std::vector<SweepRow> rows;
    double compact_radius = 0.0;  ///< K = B(0, compact_radius)
    double window_lo = 0.0, window_hi = 0.0;
};

/// Solves the slice for each truncated operator and for the base operator on
/// the same grid and reports sup over K x window of the difference.  K must
/// be contained in {W1 <= n} for the smallest level.
ConvergenceSweep convergence_sweep(const CoefficientField& base, const std::vector<double>& levels,
                                   const TimeDependentLyapunov& w1,
                                   std::shared_ptr<const CutoffProfile> cutoff, double t,
                                   const Eigen::VectorXd& x, const SolverConfig& cfg,
                                   const SpaceTimeGrid& grid, double compact_radius,
                                   double window_lo, double window_hi);

/// "n,sup_diff,mass_defect" rows
void write_sweep_csv(const ConvergenceSweep& sweep, const std::string& path);

}  // namespace kolmo
