#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "kolmo/coefficient_field.hpp"
#include "kolmo/grid.hpp"
#include "kolmo/lyapunov.hpp"
#include "kolmo/test_function.hpp"

namespace kolmo {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverConfig {
    /// theta-scheme weight in [1/2, 1]; 1/2 is trapezoidal, 1 fully implicit
    double theta = 0.5;
    /// mollifier width in cells: sigma_delta = cells * dx, cells >= 2
    double sigma_delta_cells = 3.0;
    /// residual tolerance of the iterative linear solver (dim 2)
    double linear_tol = 1e-10;
    int max_linear_iterations = 2000;
};

/// Discrete Green-kernel slice g(t, ., x, .) on a space-time grid, computed
/// by marching the adjoint (divergence-form) equation backward from a
/// mollified point mass at x.  Values are the kernel smoothed at scale
/// sigma_delta; negatives from scheme noise are clamped when stored.
struct KernelSlice {
    double t = 1.0;
    Eigen::VectorXd x;
    SpaceTimeGrid grid;
    /// time-major values, index j*num_nodes + node with s_j = s_min + j ds
    std::vector<double> values;
    double sigma_delta = 0.0;
    double theta_used = 0.5;
    double max_peclet = 0.0;
    bool peclet_warning = false;
    std::string scheme = "theta/divergence-form";
    /// max over s of (1 - mass); only recorded for potential-free solves
    std::optional<double> truncation_defect;
    double min_raw_value = 0.0;

    double value(int j, int node) const { return values[size_t(j) * grid.num_nodes() + node]; }
    const double* level(int j) const { return values.data() + size_t(j) * grid.num_nodes(); }
    /// trapezoid spatial mass at time index j
    double mass(int j) const;
    /// grid time index with s_at(j) == s (within half a step)
    int time_index(double s) const;
    /// smallest grid index whose time is >= s (clamped to the grid)
    int time_index_nearest_at_or_above(double s) const;
    /// largest grid index whose time is <= s (clamped to the grid)
    int time_index_nearest_at_or_below(double s) const;
};

/// Smallest truncation radius R >= max(2, |x|+1) such that the tail bound
/// (Z(x) + M) / inf_{|y| >= R} Z(y) drops below target_defect, evaluated in
/// closed form for the exponential certificate family.
struct TruncationRadius {
    double radius = 2.0;
    bool clamped = false;
};
TruncationRadius truncation_radius(const StaticCertificate& cert, const Eigen::VectorXd& x,
                                   double M, double target_defect);

/// Backward theta-scheme solve of the adjoint equation; one call produces the
/// whole slice.  Requires t - s_min >= 2 ds.  Emits a Peclet warning and
/// falls back to theta = 1 with per-interface upwinding when the cell Peclet
/// number |F| dx / (2 q) exceeds 2 anywhere.
KernelSlice solve_kernel_slice(const CoefficientField& field, double t, const Eigen::VectorXd& x,
                               const SolverConfig& cfg, const SpaceTimeGrid& grid);

/// Same solve with the potential removed (kernel of the dominating operator).
KernelSlice solve_reference_kernel_g0(const CoefficientField& field, double t,
                                      const Eigen::VectorXd& x, const SolverConfig& cfg,
                                      const SpaceTimeGrid& grid);

/// Forward theta-scheme solve of the Cauchy problem from time s to t with
/// initial datum f; returns the nodal solution at time t.
std::vector<double> solve_cauchy(const CoefficientField& field,
                                 const std::function<double(const Eigen::VectorXd&)>& f, double s,
                                 double t, const SolverConfig& cfg, const SpaceTimeGrid& grid);

/// multilinear interpolation of nodal values at an off-grid point
double interpolate(const SpaceTimeGrid& grid, const std::vector<double>& nodal,
                   const Eigen::VectorXd& x);

/// trapezoid quadrature of f against the slice at time index j
double kernel_quadrature(const KernelSlice& slice, const std::function<double(const Eigen::VectorXd&)>& f,
                         int j);
/// same, addressed by time value
double kernel_quadrature_at(const KernelSlice& slice,
                            const std::function<double(const Eigen::VectorXd&)>& f, double s);

/// Relative residual of the evolution identity
///   G(t,s1) f - G(t,s0) f = -int_{s0}^{s1} G(t,sigma) A(sigma) f dsigma
/// with both sides evaluated through the slice.
double validate_evolution_identity(const CoefficientField& field, const TestFunction& f,
                                   const KernelSlice& slice, double s0, double s1);

/// CSV ("s,y1[,y2],g", 17 significant digits) plus JSON sidecar.
void write_kernel_slice(const KernelSlice& slice, const std::string& csv_path,
                        const std::string& sidecar_path);
KernelSlice read_kernel_slice(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace kolmo
