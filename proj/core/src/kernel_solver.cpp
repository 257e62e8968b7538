#include "kolmo/kernel_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace kolmo {

namespace {

using Json = nlohmann::json;
using Sparse = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// tridiagonal helpers (dim 1)

struct Tridiag {
    std::vector<double> sub, diag, sup;  // sub[0] and sup[n-1] unused
    explicit Tridiag(int n = 0) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
    int size() const { return static_cast<int>(diag.size()); }
};

void tridiag_apply(const Tridiag& m, const std::vector<double>& v, std::vector<double>& out) {
    const int n = m.size();
    for (int i = 0; i < n; ++i) {
        double acc = m.diag[i] * v[i];
        if (i > 0) acc += m.sub[i] * v[i - 1];
        if (i + 1 < n) acc += m.sup[i] * v[i + 1];
        out[i] = acc;
    }
}

// Thomas algorithm; overwrites rhs with the solution.
void tridiag_solve(const Tridiag& m, std::vector<double>& rhs) {
    const int n = m.size();
    static thread_local std::vector<double> c_prime, d_prime;
    c_prime.assign(n, 0.0);
    d_prime.assign(n, 0.0);
    double beta = m.diag[0];
    if (beta == 0.0) throw SolverError("tridiagonal solve: zero pivot");
    c_prime[0] = m.sup[0] / beta;
    d_prime[0] = rhs[0] / beta;
    for (int i = 1; i < n; ++i) {
        beta = m.diag[i] - m.sub[i] * c_prime[i - 1];
        if (beta == 0.0) throw SolverError("tridiagonal solve: zero pivot");
        c_prime[i] = m.sup[i] / beta;
        d_prime[i] = (rhs[i] - m.sub[i] * d_prime[i - 1]) / beta;
    }
    rhs[n - 1] = d_prime[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = d_prime[i] - c_prime[i] * rhs[i + 1];
}

// ---------------------------------------------------------------------------
// coefficient snapshots at one time level

struct Level1D {
    std::vector<double> q, v, f_node;  // nodal, size n
    std::vector<double> f_iface;       // size n-1, at midpoints
};

Level1D sample_level_1d(const CoefficientField& field, double s, const SpaceTimeGrid& g) {
    const int n = g.nodes_per_axis;
    Level1D lv;
    lv.q.resize(n);
    lv.v.resize(n);
    lv.f_node.resize(n);
    lv.f_iface.resize(n - 1);
    Eigen::VectorXd x(1);
    for (int i = 0; i < n; ++i) {
        x[0] = g.axis_coord(i);
        lv.q[i] = field.Q(s, x)(0, 0);
        lv.v[i] = field.V(s, x);
        lv.f_node[i] = field.F(s, x)[0];
    }
    for (int i = 0; i + 1 < n; ++i) {
        x[0] = g.axis_coord(i) + 0.5 * g.dx();
        lv.f_iface[i] = field.F(s, x)[0];
    }
    return lv;
}

double level_max_peclet_1d(const Level1D& lv, double dx) {
    double pe = 0.0;
    for (size_t i = 0; i + 1 < lv.q.size(); ++i) {
        const double q = std::min(lv.q[i], lv.q[i + 1]);
        pe = std::max(pe, std::abs(lv.f_iface[i]) * dx / (2.0 * q));
    }
    return pe;
}

// interface weights of the advective flux; upwinded at high local Peclet
inline std::pair<double, double> advection_weights(double f, double dx, double q_lo, double q_hi) {
    if (std::abs(f) * dx / (2.0 * std::min(q_lo, q_hi)) > 2.0)
        return f > 0.0 ? std::make_pair(1.0, 0.0) : std::make_pair(0.0, 1.0);
    return {0.5, 0.5};
}

// Adjoint (divergence form) generator on interior nodes:
// du/dtau = [J_{i+1/2} - J_{i-1/2}]/dx - V_i u,  J = d(qu)/dy - F u.
Tridiag assemble_adjoint_1d(const Level1D& lv, const SpaceTimeGrid& g) {
    const int n = g.nodes_per_axis;
    const int ni = n - 2;
    const double dx = g.dx();
    const double idx2 = 1.0 / (dx * dx);
    Tridiag L(ni);
    for (int i = 1; i + 1 < n; ++i) {
        const int r = i - 1;
        double diag = -2.0 * lv.q[i] * idx2 - lv.v[i];
        double sub = lv.q[i - 1] * idx2;
        double sup = lv.q[i + 1] * idx2;
        const double f_hi = lv.f_iface[i];
        const double f_lo = lv.f_iface[i - 1];
        const auto [wl_hi, wh_hi] = advection_weights(f_hi, dx, lv.q[i], lv.q[i + 1]);
        const auto [wl_lo, wh_lo] = advection_weights(f_lo, dx, lv.q[i - 1], lv.q[i]);
        diag += (-f_hi * wl_hi + f_lo * wh_lo) / dx;
        sup += -f_hi * wh_hi / dx;
        sub += f_lo * wl_lo / dx;
        L.diag[r] = diag;
        if (r > 0) L.sub[r] = sub;
        if (r + 1 < ni) L.sup[r] = sup;
    }
    return L;
}

// Forward (nondivergence) generator: q u'' + F u' - V u on interior nodes.
Tridiag assemble_forward_1d(const Level1D& lv, const SpaceTimeGrid& g) {
    const int n = g.nodes_per_axis;
    const int ni = n - 2;
    const double dx = g.dx();
    const double idx2 = 1.0 / (dx * dx);
    Tridiag L(ni);
    for (int i = 1; i + 1 < n; ++i) {
        const int r = i - 1;
        double diag = -2.0 * lv.q[i] * idx2 - lv.v[i];
        double sub = lv.q[i] * idx2;
        double sup = lv.q[i] * idx2;
        const double f = lv.f_node[i];
        if (std::abs(f) * dx / (2.0 * lv.q[i]) > 2.0) {
            if (f > 0.0) {
                diag += -f / dx;
                sup += f / dx;
            } else {
                diag += f / dx;
                sub += -f / dx;
            }
        } else {
            sub += -f / (2.0 * dx);
            sup += f / (2.0 * dx);
        }
        L.diag[r] = diag;
        if (r > 0) L.sub[r] = sub;
        if (r + 1 < ni) L.sup[r] = sup;
    }
    return L;
}

// ---------------------------------------------------------------------------
// dim 2 coefficient snapshot and sparse generators over interior nodes

struct Level2D {
    std::vector<double> q11, q22, q12, v, f1, f2;  // nodal, size n*n
    std::vector<double> f1_iface;                  // (i+1/2, j): index i*n + j
    std::vector<double> f2_iface;                  // (i, j+1/2): index i*(n-1) + j
    bool has_cross = false;
};

Level2D sample_level_2d(const CoefficientField& field, double s, const SpaceTimeGrid& g) {
    const int n = g.nodes_per_axis;
    Level2D lv;
    const int nn = n * n;
    lv.q11.resize(nn);
    lv.q22.resize(nn);
    lv.q12.resize(nn);
    lv.v.resize(nn);
    lv.f1.resize(nn);
    lv.f2.resize(nn);
    lv.f1_iface.resize((n - 1) * n);
    lv.f2_iface.resize(n * (n - 1));
    Eigen::VectorXd x(2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            x << g.axis_coord(i), g.axis_coord(j);
            const Eigen::MatrixXd q = field.Q(s, x);
            const int idx = i * n + j;
            lv.q11[idx] = q(0, 0);
            lv.q22[idx] = q(1, 1);
            lv.q12[idx] = q(0, 1);
            if (std::abs(q(0, 1)) > 1e-14) lv.has_cross = true;
            lv.v[idx] = field.V(s, x);
            const Eigen::VectorXd f = field.F(s, x);
            lv.f1[idx] = f[0];
            lv.f2[idx] = f[1];
        }
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j < n; ++j) {
            x << g.axis_coord(i) + 0.5 * g.dx(), g.axis_coord(j);
            lv.f1_iface[i * n + j] = field.F(s, x)[0];
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j + 1 < n; ++j) {
            x << g.axis_coord(i), g.axis_coord(j) + 0.5 * g.dx();
            lv.f2_iface[i * (n - 1) + j] = field.F(s, x)[1];
        }
    return lv;
}

double level_max_peclet_2d(const Level2D& lv, int n, double dx) {
    double pe = 0.0;
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double q = std::min(lv.q11[i * n + j], lv.q11[(i + 1) * n + j]);
            pe = std::max(pe, std::abs(lv.f1_iface[i * n + j]) * dx / (2.0 * q));
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j + 1 < n; ++j) {
            const double q = std::min(lv.q22[i * n + j], lv.q22[i * n + j + 1]);
            pe = std::max(pe, std::abs(lv.f2_iface[i * (n - 1) + j]) * dx / (2.0 * q));
        }
    return pe;
}

inline int interior_index(int i, int j, int n) { return (i - 1) * (n - 2) + (j - 1); }

Sparse assemble_2d(const Level2D& lv, const SpaceTimeGrid& g, bool adjoint) {
    const int n = g.nodes_per_axis;
    const int ni = (n - 2) * (n - 2);
    const double dx = g.dx();
    const double idx2 = 1.0 / (dx * dx);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(ni) * (lv.has_cross ? 9 : 5));
    double diag = 0.0;
    int row = 0;
    auto add = [&](int ii, int jj, double val) {
        if (ii <= 0 || jj <= 0 || ii >= n - 1 || jj >= n - 1) return;  // Dirichlet boundary
        trips.emplace_back(row, interior_index(ii, jj, n), val);
    };
    for (int i = 1; i + 1 < n; ++i)
        for (int j = 1; j + 1 < n; ++j) {
            row = interior_index(i, j, n);
            const int idx = i * n + j;
            diag = -lv.v[idx];
            if (adjoint) {
                diag += -2.0 * (lv.q11[idx] + lv.q22[idx]) * idx2;
                add(i - 1, j, lv.q11[(i - 1) * n + j] * idx2);
                add(i + 1, j, lv.q11[(i + 1) * n + j] * idx2);
                add(i, j - 1, lv.q22[i * n + j - 1] * idx2);
                add(i, j + 1, lv.q22[i * n + j + 1] * idx2);
                const double fh1 = lv.f1_iface[i * n + j];
                const double fl1 = lv.f1_iface[(i - 1) * n + j];
                const double fh2 = lv.f2_iface[i * (n - 1) + j];
                const double fl2 = lv.f2_iface[i * (n - 1) + j - 1];
                {
                    const auto [wl, wh] = advection_weights(fh1, dx, lv.q11[idx], lv.q11[(i + 1) * n + j]);
                    diag += -fh1 * wl / dx;
                    add(i + 1, j, -fh1 * wh / dx);
                }
                {
                    const auto [wl, wh] = advection_weights(fl1, dx, lv.q11[(i - 1) * n + j], lv.q11[idx]);
                    diag += fl1 * wh / dx;
                    add(i - 1, j, fl1 * wl / dx);
                }
                {
                    const auto [wl, wh] = advection_weights(fh2, dx, lv.q22[idx], lv.q22[i * n + j + 1]);
                    diag += -fh2 * wl / dx;
                    add(i, j + 1, -fh2 * wh / dx);
                }
                {
                    const auto [wl, wh] = advection_weights(fl2, dx, lv.q22[i * n + j - 1], lv.q22[idx]);
                    diag += fl2 * wh / dx;
                    add(i, j - 1, fl2 * wl / dx);
                }
                if (lv.has_cross) {
                    // 2 d1 d2 (q12 u), four-corner stencil applied to (q12 u)
                    const double c = 2.0 / (4.0 * dx * dx);
                    add(i + 1, j + 1, c * lv.q12[(i + 1) * n + j + 1]);
                    add(i - 1, j - 1, c * lv.q12[(i - 1) * n + j - 1]);
                    add(i + 1, j - 1, -c * lv.q12[(i + 1) * n + j - 1]);
                    add(i - 1, j + 1, -c * lv.q12[(i - 1) * n + j + 1]);
                }
            } else {
                diag += -2.0 * (lv.q11[idx] + lv.q22[idx]) * idx2;
                add(i - 1, j, lv.q11[idx] * idx2);
                add(i + 1, j, lv.q11[idx] * idx2);
                add(i, j - 1, lv.q22[idx] * idx2);
                add(i, j + 1, lv.q22[idx] * idx2);
                const double pe1 = std::abs(lv.f1[idx]) * dx / (2.0 * lv.q11[idx]);
                if (pe1 > 2.0) {
                    if (lv.f1[idx] > 0.0) {
                        diag += -lv.f1[idx] / dx;
                        add(i + 1, j, lv.f1[idx] / dx);
                    } else {
                        diag += lv.f1[idx] / dx;
                        add(i - 1, j, -lv.f1[idx] / dx);
                    }
                } else {
                    add(i + 1, j, lv.f1[idx] / (2.0 * dx));
                    add(i - 1, j, -lv.f1[idx] / (2.0 * dx));
                }
                const double pe2 = std::abs(lv.f2[idx]) * dx / (2.0 * lv.q22[idx]);
                if (pe2 > 2.0) {
                    if (lv.f2[idx] > 0.0) {
                        diag += -lv.f2[idx] / dx;
                        add(i, j + 1, lv.f2[idx] / dx);
                    } else {
                        diag += lv.f2[idx] / dx;
                        add(i, j - 1, -lv.f2[idx] / dx);
                    }
                } else {
                    add(i, j + 1, lv.f2[idx] / (2.0 * dx));
                    add(i, j - 1, -lv.f2[idx] / (2.0 * dx));
                }
                if (lv.has_cross) {
                    const double c = 2.0 * lv.q12[idx] / (4.0 * dx * dx);
                    add(i + 1, j + 1, c);
                    add(i - 1, j - 1, c);
                    add(i + 1, j - 1, -c);
                    add(i - 1, j + 1, -c);
                }
            }
            trips.emplace_back(row, row, diag);
        }
    Sparse L(ni, ni);
    L.setFromTriplets(trips.begin(), trips.end());
    return L;
}

// ---------------------------------------------------------------------------
// theta marches

struct MarchResult {
    std::vector<std::vector<double>> levels;  // marching order, k = 0..steps
    double min_raw = 0.0;
    double theta_used = 0.5;
    double max_peclet = 0.0;
};

void theta_step_1d(const Tridiag& L_old, const Tridiag& L_new, double theta, double dtau,
                   std::vector<double>& u) {
    static thread_local std::vector<double> rhs;
    rhs.assign(u.size(), 0.0);
    tridiag_apply(L_old, u, rhs);
    for (size_t i = 0; i < u.size(); ++i) rhs[i] = u[i] + (1.0 - theta) * dtau * rhs[i];
    Tridiag a(L_new.size());
    for (int i = 0; i < L_new.size(); ++i) {
        a.diag[i] = 1.0 - theta * dtau * L_new.diag[i];
        a.sub[i] = -theta * dtau * L_new.sub[i];
        a.sup[i] = -theta * dtau * L_new.sup[i];
    }
    tridiag_solve(a, rhs);
    u = rhs;
}

MarchResult march_1d(const CoefficientField& field, const SpaceTimeGrid& g,
                     const SolverConfig& cfg, std::vector<double> u, bool adjoint,
                     const std::function<double(int)>& time_of) {
    const double dtau = adjoint ? g.ds() : (time_of(1) - time_of(0));
    auto assemble = [&](double s) {
        const Level1D lv = sample_level_1d(field, s, g);
        return adjoint ? assemble_adjoint_1d(lv, g) : assemble_forward_1d(lv, g);
    };
    MarchResult res;
    res.max_peclet = std::max(level_max_peclet_1d(sample_level_1d(field, time_of(0), g), g.dx()),
                              level_max_peclet_1d(sample_level_1d(field, time_of(g.steps), g), g.dx()));
    res.theta_used = res.max_peclet > 2.0 ? 1.0 : cfg.theta;
    res.levels.reserve(g.steps + 1);
    res.levels.push_back(u);
    Tridiag L_old = assemble(time_of(0));
    for (int k = 1; k <= g.steps; ++k) {
        Tridiag L_new = field.time_dependent ? assemble(time_of(k)) : L_old;
        theta_step_1d(L_old, L_new, res.theta_used, dtau, u);
        for (double v : u) {
            if (!std::isfinite(v)) throw SolverError("time step produced non-finite values");
            res.min_raw = std::min(res.min_raw, v);
        }
        res.levels.push_back(u);
        if (field.time_dependent) L_old = std::move(L_new);
    }
    return res;
}

MarchResult march_2d(const CoefficientField& field, const SpaceTimeGrid& g,
                     const SolverConfig& cfg, std::vector<double> u, bool adjoint,
                     const std::function<double(int)>& time_of) {
    const int n = g.nodes_per_axis;
    const double dtau = adjoint ? g.ds() : (time_of(1) - time_of(0));
    auto assemble = [&](double s) { return assemble_2d(sample_level_2d(field, s, g), g, adjoint); };
    MarchResult res;
    res.max_peclet =
        std::max(level_max_peclet_2d(sample_level_2d(field, time_of(0), g), n, g.dx()),
                 level_max_peclet_2d(sample_level_2d(field, time_of(g.steps), g), n, g.dx()));
    res.theta_used = res.max_peclet > 2.0 ? 1.0 : cfg.theta;
    res.levels.reserve(g.steps + 1);
    res.levels.push_back(u);

    Eigen::BiCGSTAB<Sparse, Eigen::DiagonalPreconditioner<double>> solver;
    solver.setTolerance(cfg.linear_tol);
    solver.setMaxIterations(cfg.max_linear_iterations);
    Sparse L_old = assemble(time_of(0));
    Sparse a;
    auto factor = [&](const Sparse& L) {
        Sparse id(L.rows(), L.cols());
        id.setIdentity();
        a = id - res.theta_used * dtau * L;
        solver.compute(a);
    };
    factor(L_old);
    for (int k = 1; k <= g.steps; ++k) {
        Sparse L_new;
        if (field.time_dependent) {
            L_new = assemble(time_of(k));
            factor(L_new);
        }
        Eigen::Map<Eigen::VectorXd> uv(u.data(), u.size());
        Eigen::VectorXd rhs = uv + (1.0 - res.theta_used) * dtau * (L_old * uv);
        Eigen::VectorXd sol = solver.solveWithGuess(rhs, uv);
        if (solver.info() != Eigen::Success)
            throw SolverError("linear solve failed (BiCGSTAB did not converge)");
        uv = sol;
        for (double v : u) {
            if (!std::isfinite(v)) throw SolverError("time step produced non-finite values");
            res.min_raw = std::min(res.min_raw, v);
        }
        res.levels.push_back(u);
        if (field.time_dependent) L_old = std::move(L_new);
    }
    return res;
}

std::vector<double> mollified_delta(const SpaceTimeGrid& g, const Eigen::VectorXd& x,
                                    double sigma) {
    const int nn = g.num_nodes();
    std::vector<double> u(nn, 0.0);
    for (int i = 0; i < nn; ++i)
        if (!g.on_boundary(i)) u[i] = std::exp(-(g.node(i) - x).squaredNorm() / (sigma * sigma));
    double mass = 0.0;
    for (int i = 0; i < nn; ++i) mass += u[i] * g.quad_weight(i);
    if (mass <= 0.0) throw SolverError("mollified delta has zero mass on the grid");
    for (double& v : u) v /= mass;
    return u;
}

std::vector<double> extract_interior(const SpaceTimeGrid& g, const std::vector<double>& full) {
    if (g.dim == 1)
        return std::vector<double>(full.begin() + 1, full.begin() + g.nodes_per_axis - 1);
    const int n = g.nodes_per_axis;
    std::vector<double> out((n - 2) * (n - 2));
    for (int i = 1; i + 1 < n; ++i)
        for (int j = 1; j + 1 < n; ++j) out[interior_index(i, j, n)] = full[i * n + j];
    return out;
}

void scatter_interior(const SpaceTimeGrid& g, const std::vector<double>& interior, double* full,
                      bool clamp) {
    const int n = g.nodes_per_axis;
    if (g.dim == 1) {
        for (int i = 1; i + 1 < n; ++i) {
            const double v = interior[i - 1];
            full[i] = clamp ? std::max(v, 0.0) : v;
        }
        return;
    }
    for (int i = 1; i + 1 < n; ++i)
        for (int j = 1; j + 1 < n; ++j) {
            const double v = interior[interior_index(i, j, n)];
            full[i * n + j] = clamp ? std::max(v, 0.0) : v;
        }
}

double interior_mass(const SpaceTimeGrid& g, const std::vector<double>& interior) {
    const int n = g.nodes_per_axis;
    double m = 0.0;
    if (g.dim == 1) {
        for (int i = 1; i + 1 < n; ++i) m += interior[i - 1] * g.quad_weight(i);
    } else {
        for (int i = 1; i + 1 < n; ++i)
            for (int j = 1; j + 1 < n; ++j)
                m += interior[interior_index(i, j, n)] * g.quad_weight(i * n + j);
    }
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------

double KernelSlice::mass(int j) const {
    double m = 0.0;
    const double* lv = level(j);
    for (int i = 0; i < grid.num_nodes(); ++i) m += lv[i] * grid.quad_weight(i);
    return m;
}

int KernelSlice::time_index(double s) const {
    const double j = (s - grid.s_min) / grid.ds();
    const int ji = static_cast<int>(std::lround(j));
    if (ji < 0 || ji > grid.steps || std::abs(j - ji) > 0.25)
        throw std::invalid_argument("requested time is not on the slice grid");
    return ji;
}

int KernelSlice::time_index_nearest_at_or_above(double s) const {
    const double j = (s - grid.s_min) / grid.ds();
    int ji = static_cast<int>(std::ceil(j - 1e-9));
    return std::max(0, std::min(grid.steps, ji));
}

int KernelSlice::time_index_nearest_at_or_below(double s) const {
    const double j = (s - grid.s_min) / grid.ds();
    int ji = static_cast<int>(std::floor(j + 1e-9));
    return std::max(0, std::min(grid.steps, ji));
}

TruncationRadius truncation_radius(const StaticCertificate& cert, const Eigen::VectorXd& x,
                                   double M, double target_defect) {
    if (!(target_defect > 0.0 && target_defect < 1.0))
        throw std::invalid_argument("truncation_radius: target defect must lie in (0,1)");
    const double zx = cert.value(x);
    const double lower = std::max(2.0, x.norm() + 1.0);
    // smallest R with exp(delta R^beta) >= (Z(x)+M)/defect
    const double needed = std::log((zx + M) / target_defect) / cert.delta;
    TruncationRadius out;
    if (needed <= 0.0) {
        out.radius = lower;
        out.clamped = true;
        return out;
    }
    const double r = std::pow(needed, 1.0 / cert.beta);
    out.clamped = r < lower;
    out.radius = std::max(r, lower);
    return out;
}

KernelSlice solve_kernel_slice(const CoefficientField& field, double t, const Eigen::VectorXd& x,
                               const SolverConfig& cfg, const SpaceTimeGrid& grid) {
    if (field.dim != grid.dim) throw std::invalid_argument("solver: field/grid dimension mismatch");
    if (x.size() != grid.dim) throw std::invalid_argument("solver: anchor dimension mismatch");
    if (!(cfg.theta >= 0.5 && cfg.theta <= 1.0))
        throw std::invalid_argument("solver: theta must lie in [1/2, 1]");
    if (cfg.sigma_delta_cells < 2.0)
        throw std::invalid_argument("solver: mollifier width must be at least 2 cells");
    if (!(t - grid.s_min >= 2.0 * grid.ds() - 1e-12))
        throw std::invalid_argument("solver: needs t - s_min >= 2 ds");
    if (std::abs(grid.t - t) > 1e-12)
        throw std::invalid_argument("solver: grid terminal time must equal t");

    const double sigma = cfg.sigma_delta_cells * grid.dx();
    auto time_of = [&](int k) { return t - k * grid.ds(); };
    const std::vector<double> u0 = extract_interior(grid, mollified_delta(grid, x, sigma));
    const MarchResult res = grid.dim == 1 ? march_1d(field, grid, cfg, u0, true, time_of)
                                          : march_2d(field, grid, cfg, u0, true, time_of);

    KernelSlice slice;
    slice.t = t;
    slice.x = x;
    slice.grid = grid;
    slice.sigma_delta = sigma;
    slice.theta_used = res.theta_used;
    slice.max_peclet = res.max_peclet;
    slice.peclet_warning = res.max_peclet > 2.0;
    slice.min_raw_value = res.min_raw;
    const int nn = grid.num_nodes();
    slice.values.assign(size_t(grid.steps + 1) * nn, 0.0);
    double max_defect = 0.0;
    for (int k = 0; k <= grid.steps; ++k) {
        const int j = grid.steps - k;  // marching step k lives at s-index j
        scatter_interior(grid, res.levels[k], slice.values.data() + size_t(j) * nn, true);
        max_defect = std::max(max_defect, 1.0 - interior_mass(grid, res.levels[k]));
    }
    if (field.potential_is_zero) slice.truncation_defect = std::max(0.0, max_defect);
    return slice;
}

KernelSlice solve_reference_kernel_g0(const CoefficientField& field, double t,
                                      const Eigen::VectorXd& x, const SolverConfig& cfg,
                                      const SpaceTimeGrid& grid) {
    return solve_kernel_slice(field.with_zero_potential(), t, x, cfg, grid);
}

std::vector<double> solve_cauchy(const CoefficientField& field,
                                 const std::function<double(const Eigen::VectorXd&)>& f, double s,
                                 double t, const SolverConfig& cfg, const SpaceTimeGrid& grid) {
    if (field.dim != grid.dim) throw std::invalid_argument("solver: field/grid dimension mismatch");
    if (!(t > s)) throw std::invalid_argument("solve_cauchy: needs t > s");
    SpaceTimeGrid g = grid;
    g.s_min = s;
    g.t = t;
    g.steps = std::max(2, static_cast<int>(std::ceil((t - s) / grid.ds())));
    const double dtau = (t - s) / g.steps;
    auto time_of = [&, dtau](int k) { return s + k * dtau; };

    const int nn = g.num_nodes();
    std::vector<double> full(nn, 0.0);
    for (int i = 0; i < nn; ++i)
        if (!g.on_boundary(i)) full[i] = f(g.node(i));
    const std::vector<double> u0 = extract_interior(g, full);
    const MarchResult res = g.dim == 1 ? march_1d(field, g, cfg, u0, false, time_of)
                                       : march_2d(field, g, cfg, u0, false, time_of);
    std::vector<double> out(nn, 0.0);
    scatter_interior(g, res.levels.back(), out.data(), false);
    return out;
}

double interpolate(const SpaceTimeGrid& grid, const std::vector<double>& nodal,
                   const Eigen::VectorXd& x) {
    const double dx = grid.dx();
    auto locate = [&](double v) -> std::pair<int, double> {
        double u = (v + grid.radius) / dx;
        int i = static_cast<int>(std::floor(u));
        i = std::max(0, std::min(grid.nodes_per_axis - 2, i));
        return {i, u - i};
    };
    if (grid.dim == 1) {
        const auto [i, w] = locate(x[0]);
        return (1.0 - w) * nodal[i] + w * nodal[i + 1];
    }
    const auto [i, wi] = locate(x[0]);
    const auto [j, wj] = locate(x[1]);
    const int n = grid.nodes_per_axis;
    return (1.0 - wi) * ((1.0 - wj) * nodal[i * n + j] + wj * nodal[i * n + j + 1]) +
           wi * ((1.0 - wj) * nodal[(i + 1) * n + j] + wj * nodal[(i + 1) * n + j + 1]);
}

double kernel_quadrature(const KernelSlice& slice,
                         const std::function<double(const Eigen::VectorXd&)>& f, int j) {
    double acc = 0.0;
    const double* lv = slice.level(j);
    for (int i = 0; i < slice.grid.num_nodes(); ++i)
        acc += f(slice.grid.node(i)) * lv[i] * slice.grid.quad_weight(i);
    return acc;
}

double kernel_quadrature_at(const KernelSlice& slice,
                            const std::function<double(const Eigen::VectorXd&)>& f, double s) {
    return kernel_quadrature(slice, f, slice.time_index(s));
}

double validate_evolution_identity(const CoefficientField& field, const TestFunction& f,
                                   const KernelSlice& slice, double s0, double s1) {
    if (!f.support_radius)
        throw std::invalid_argument("evolution identity: test function must be compactly supported");
    if (*f.support_radius + 4.0 * slice.sigma_delta > slice.grid.radius)
        throw std::invalid_argument(
            "evolution identity: support must fit in the box with margin 4 sigma_delta");
    const int j0 = slice.time_index(s0);
    const int j1 = slice.time_index(s1);
    if (j0 >= j1) throw std::invalid_argument("evolution identity: needs s0 < s1");

    const double lhs = kernel_quadrature(slice, f.value, j1) - kernel_quadrature(slice, f.value, j0);

    // time trapezoid of s -> G(t,s)[A(s) f](x) over the slice levels
    const int nn = slice.grid.num_nodes();
    std::vector<double> af(nn, 0.0);
    auto fill_af = [&](double s) {
        for (int i = 0; i < nn; ++i)
            af[i] = apply_operator(field, f, s, slice.grid.node(i), OperatorForm::Full);
    };
    if (!field.time_dependent) fill_af(slice.grid.s_at(j0));
    double integral = 0.0;
    double prev = 0.0;
    for (int j = j0; j <= j1; ++j) {
        if (field.time_dependent) fill_af(slice.grid.s_at(j));
        double val = 0.0;
        const double* lv = slice.level(j);
        for (int i = 0; i < nn; ++i) val += af[i] * lv[i] * slice.grid.quad_weight(i);
        if (j > j0) integral += 0.5 * (prev + val) * slice.grid.ds();
        prev = val;
    }
    const double rhs = -integral;
    return std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-12);
}

void write_kernel_slice(const KernelSlice& slice, const std::string& csv_path,
                        const std::string& sidecar_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    csv << (slice.grid.dim == 1 ? "s,y1,g\n" : "s,y1,y2,g\n");
    char buf[160];
    for (int j = 0; j <= slice.grid.steps; ++j) {
        const double s = slice.grid.s_at(j);
        for (int i = 0; i < slice.grid.num_nodes(); ++i) {
            const Eigen::VectorXd y = slice.grid.node(i);
            if (slice.grid.dim == 1)
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s, y[0], slice.value(j, i));
            else
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s, y[0], y[1],
                              slice.value(j, i));
            csv << buf;
        }
    }
    Json sidecar;
    sidecar["t"] = slice.t;
    sidecar["x"] = std::vector<double>(slice.x.data(), slice.x.data() + slice.x.size());
    sidecar["R"] = slice.grid.radius;
    sidecar["dx"] = slice.grid.dx();
    sidecar["ds"] = slice.grid.ds();
    sidecar["sigma_delta"] = slice.sigma_delta;
    sidecar["theta"] = slice.theta_used;
    if (slice.truncation_defect) sidecar["defect"] = *slice.truncation_defect;
    else sidecar["defect"] = nullptr;
    sidecar["nodes_per_axis"] = slice.grid.nodes_per_axis;
    sidecar["steps"] = slice.grid.steps;
    sidecar["s_min"] = slice.grid.s_min;
    sidecar["dim"] = slice.grid.dim;
    sidecar["max_peclet"] = slice.max_peclet;
    std::ofstream js(sidecar_path);
    if (!js) throw std::runtime_error("cannot open " + sidecar_path);
    js << sidecar.dump(2) << "\n";
}

KernelSlice read_kernel_slice(const std::string& csv_path, const std::string& sidecar_path) {
    std::ifstream js(sidecar_path);
    if (!js) throw std::runtime_error("cannot open " + sidecar_path);
    Json sidecar = Json::parse(js);
    KernelSlice slice;
    slice.t = sidecar.at("t").get<double>();
    const auto xv = sidecar.at("x").get<std::vector<double>>();
    slice.x = Eigen::Map<const Eigen::VectorXd>(xv.data(), xv.size());
    slice.grid = make_grid(sidecar.at("dim").get<int>(), sidecar.at("R").get<double>(),
                           sidecar.at("nodes_per_axis").get<int>(),
                           sidecar.at("s_min").get<double>(), slice.t,
                           sidecar.at("steps").get<int>());
    slice.sigma_delta = sidecar.at("sigma_delta").get<double>();
    slice.theta_used = sidecar.at("theta").get<double>();
    if (!sidecar.at("defect").is_null())
        slice.truncation_defect = sidecar.at("defect").get<double>();
    if (sidecar.contains("max_peclet")) slice.max_peclet = sidecar["max_peclet"].get<double>();
    slice.values.assign(size_t(slice.grid.steps + 1) * slice.grid.num_nodes(), 0.0);

    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open " + csv_path);
    std::string line;
    std::getline(csv, line);  // header
    size_t row = 0;
    const size_t total = slice.values.size();
    while (std::getline(csv, line) && row < total) {
        const auto last = line.rfind(',');
        slice.values[row++] = std::stod(line.substr(last + 1));
    }
    if (row != total) throw std::runtime_error("slice CSV is truncated");
    return slice;
}

}  // namespace kolmo
