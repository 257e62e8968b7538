#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace kolmo {

/// Uniform tensor grid on [-R, R]^d x [s_min, t] with homogeneous Dirichlet
/// boundary.  nodes_per_axis must be odd so that the origin and the box faces
/// are nodes (R / dx integral).
struct SpaceTimeGrid {
    int dim = 1;
    double radius = 1.0;
    int nodes_per_axis = 5;
    double s_min = 0.0;
    double t = 1.0;
    int steps = 2;

    double dx() const { return 2.0 * radius / (nodes_per_axis - 1); }
    double ds() const { return (t - s_min) / steps; }
    int num_nodes() const {
        return dim == 1 ? nodes_per_axis : nodes_per_axis * nodes_per_axis;
    }
    double axis_coord(int i) const { return -radius + i * dx(); }
    double s_at(int j) const { return (j == steps) ? t : s_min + j * ds(); }

    /// flattened node index -> coordinates (row-major over axes)
    Eigen::VectorXd node(int idx) const {
        Eigen::VectorXd x(dim);
        if (dim == 1) {
            x[0] = axis_coord(idx);
        } else {
            x[0] = axis_coord(idx / nodes_per_axis);
            x[1] = axis_coord(idx % nodes_per_axis);
        }
        return x;
    }
    bool on_boundary(int idx) const {
        if (dim == 1) return idx == 0 || idx == nodes_per_axis - 1;
        const int i = idx / nodes_per_axis, j = idx % nodes_per_axis;
        return i == 0 || j == 0 || i == nodes_per_axis - 1 || j == nodes_per_axis - 1;
    }
    /// trapezoid quadrature weight of the node (dx^d times 1/2 per boundary axis)
    double quad_weight(int idx) const {
        double w = dim == 1 ? dx() : dx() * dx();
        if (dim == 1) {
            if (idx == 0 || idx == nodes_per_axis - 1) w *= 0.5;
        } else {
            const int i = idx / nodes_per_axis, j = idx % nodes_per_axis;
            if (i == 0 || i == nodes_per_axis - 1) w *= 0.5;
            if (j == 0 || j == nodes_per_axis - 1) w *= 0.5;
        }
        return w;
    }
};

inline SpaceTimeGrid make_grid(int dim, double radius, int nodes_per_axis, double s_min, double t,
                               int steps) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
    if (!(radius > 0.0)) throw std::invalid_argument("grid: radius must be positive");
    if (nodes_per_axis < 5 || nodes_per_axis % 2 == 0)
        throw std::invalid_argument("grid: nodes_per_axis must be odd and >= 5");
    if (!(t > s_min)) throw std::invalid_argument("grid: needs t > s_min");
    if (steps < 2) throw std::invalid_argument("grid: needs at least 2 time steps");
    return SpaceTimeGrid{dim, radius, nodes_per_axis, s_min, t, steps};
}

}  // namespace kolmo
