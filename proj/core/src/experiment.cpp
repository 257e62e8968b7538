#include "kolmo/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <thread>

#include "kolmo/expression.hpp"

namespace kolmo {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

[[noreturn]] void config_fail(const std::string& what) { throw ConfigError("config: " + what); }

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------
// config

ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig cfg;
    if (!j.contains("operator")) config_fail("missing 'operator' section");
    const Json& op = j.at("operator");
    cfg.op.family = get_or<std::string>(op, "family", "example");
    cfg.op.dim = get_or<int>(op, "d", 1);
    if (cfg.op.dim != 1 && cfg.op.dim != 2) config_fail("operator.d must be 1 or 2");
    if (cfg.op.family == "example") {
        cfg.op.m = get_or<double>(op, "m", 0.0);
        cfg.op.p = get_or<double>(op, "p", 3.0);
        cfg.op.r = get_or<double>(op, "r", 2.0);
        if (!(cfg.op.p > 1.0)) config_fail("operator.p must satisfy p > 1");
        if (cfg.op.m < 0.0 || cfg.op.r < 0.0) config_fail("operator.m and operator.r must be >= 0");
    } else if (cfg.op.family == "custom") {
        if (!op.contains("Q") || !op.contains("F") || !op.contains("V"))
            config_fail("custom operator needs Q, F and V expression entries");
        for (const auto& row : op.at("Q")) {
            std::vector<std::string> r;
            for (const auto& e : row) r.push_back(e.get<std::string>());
            cfg.op.q_exprs.push_back(std::move(r));
        }
        if (static_cast<int>(cfg.op.q_exprs.size()) != cfg.op.dim)
            config_fail("custom operator: Q must be a d x d expression matrix");
        for (const auto& row : cfg.op.q_exprs)
            if (static_cast<int>(row.size()) != cfg.op.dim)
                config_fail("custom operator: Q must be a d x d expression matrix");
        for (const auto& e : op.at("F")) cfg.op.f_exprs.push_back(e.get<std::string>());
        if (static_cast<int>(cfg.op.f_exprs.size()) != cfg.op.dim)
            config_fail("custom operator: F must have d entries");
        cfg.op.v_expr = op.at("V").get<std::string>();
        cfg.op.eta = get_or<double>(op, "eta", 1.0);
        if (!(cfg.op.eta > 0.0)) config_fail("operator.eta must be positive");
        cfg.op.time_dependent = get_or<bool>(op, "time_dependent", true);
    } else {
        config_fail("operator.family must be 'example' or 'custom'");
    }

    if (!j.contains("certificate")) config_fail("missing 'certificate' section");
    const Json& cert = j.at("certificate");
    if (!cert.contains("Z")) config_fail("certificate needs a Z entry {delta, beta}");
    cfg.certificate.delta = cert.at("Z").at("delta").get<double>();
    cfg.certificate.beta = cert.at("Z").at("beta").get<double>();
    if (!(cfg.certificate.delta > 0.0)) config_fail("certificate.Z.delta must be positive");
    if (!(cfg.certificate.beta > 0.0)) config_fail("certificate.Z.beta must be positive");
    if (!cert.contains("W") || cert.at("W").empty())
        config_fail("certificate needs a nonempty W list [{eps, alpha}, ...]");
    for (const auto& w : cert.at("W")) {
        WSpec spec;
        spec.eps = w.at("eps").get<double>();
        spec.alpha = w.at("alpha").get<double>();
        if (!(spec.eps > 0.0)) config_fail("certificate.W.eps must be positive");
        if (!(spec.alpha > 0.0)) config_fail("certificate.W.alpha must be positive");
        cfg.certificate.w_specs.push_back(spec);
    }
    cfg.certificate.time_samples = get_or<int>(cert, "time_samples", 17);
    cfg.certificate.space_samples = get_or<int>(cert, "space_samples", 65);
    cfg.certificate.random_samples = get_or<int>(cert, "random_samples", 1000);

    const Json solver = j.value("solver", Json::object());
    if (solver.contains("R") && !solver.at("R").is_null())
        cfg.solver.radius = solver.at("R").get<double>();
    cfg.solver.target_defect = get_or<double>(solver, "target_defect", 2e-7);
    if (!cfg.solver.radius &&
        !(cfg.solver.target_defect > 0.0 && cfg.solver.target_defect < 1.0))
        config_fail("solver.target_defect must lie in (0, 1)");
    cfg.solver.nx = get_or<int>(solver, "nx", cfg.op.dim == 2 ? 129 : 513);
    cfg.solver.nt = get_or<int>(solver, "nt", cfg.op.dim == 2 ? 128 : 512);
    if (cfg.solver.nx < 5 || cfg.solver.nx % 2 == 0)
        config_fail("solver.nx must be odd and >= 5");
    if (cfg.solver.nt < 2) config_fail("solver.nt must be >= 2");
    cfg.solver.theta = get_or<double>(solver, "theta", 0.5);
    if (!(cfg.solver.theta >= 0.5 && cfg.solver.theta <= 1.0))
        config_fail("solver.theta must lie in [1/2, 1]");
    cfg.solver.sigma_delta_cells = get_or<double>(solver, "sigma_delta_cells", 3.0);
    if (cfg.solver.sigma_delta_cells < 2.0)
        config_fail("solver.sigma_delta_cells must be >= 2 (mollifier resolvable)");
    cfg.solver.linear_tol = get_or<double>(solver, "linear_tol", 1e-10);

    if (!j.contains("window")) config_fail("missing 'window' section {a0, a, b, b0, t}");
    const Json& win = j.at("window");
    try {
        cfg.window = make_time_window(win.at("a0").get<double>(), win.at("a").get<double>(),
                                      win.at("b").get<double>(), win.at("b0").get<double>(),
                                      win.at("t").get<double>());
    } catch (const std::exception& e) {
        config_fail(e.what());
    }

    const Json bound = j.value("bound", Json::object());
    cfg.bound.k = get_or<double>(bound, "k", cfg.op.dim + 3.0);
    if (!(cfg.bound.k > cfg.op.dim + 2))
        config_fail("bound.k must exceed d + 2");
    if (bound.contains("regime_override") && !bound.at("regime_override").is_null()) {
        const int ro = bound.at("regime_override").get<int>();
        if (ro != 1 && ro != 2) config_fail("bound.regime_override must be 1 or 2");
        cfg.bound.regime_override = ro;
    }

    if (j.contains("approximation") && !j.at("approximation").is_null()) {
        ApproximationSpec approx;
        for (const auto& lvl : j.at("approximation").at("levels"))
            approx.levels.push_back(lvl.get<double>());
        if (approx.levels.empty()) config_fail("approximation.levels must be nonempty");
        for (std::size_t i = 0; i < approx.levels.size(); ++i) {
            if (!(approx.levels[i] >= 1.0)) config_fail("approximation levels must be >= 1");
            if (i > 0 && !(approx.levels[i] > approx.levels[i - 1]))
                config_fail("approximation levels must be strictly increasing");
        }
        if (j.at("approximation").contains("K_radius") &&
            !j.at("approximation").at("K_radius").is_null())
            approx.compact_radius = j.at("approximation").at("K_radius").get<double>();
        approx.cutoff_mu = get_or<double>(j.at("approximation"), "cutoff_mu", 0.05);
        cfg.approximation = std::move(approx);
    }

    cfg.anchor_x = get_or<std::vector<double>>(j, "anchor_x", {0.0});
    if (static_cast<int>(cfg.anchor_x.size()) != cfg.op.dim)
        config_fail("anchor_x must have d entries");
    cfg.output_dir = get_or<std::string>(j, "output_dir", "out");
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    Json op;
    op["family"] = cfg.op.family;
    op["d"] = cfg.op.dim;
    if (cfg.op.family == "example") {
        op["m"] = cfg.op.m;
        op["p"] = cfg.op.p;
        op["r"] = cfg.op.r;
    } else {
        op["Q"] = cfg.op.q_exprs;
        op["F"] = cfg.op.f_exprs;
        op["V"] = cfg.op.v_expr;
        op["eta"] = cfg.op.eta;
        op["time_dependent"] = cfg.op.time_dependent;
    }
    j["operator"] = op;
    Json cert;
    cert["Z"] = {{"delta", cfg.certificate.delta}, {"beta", cfg.certificate.beta}};
    Json wlist = Json::array();
    for (const auto& w : cfg.certificate.w_specs)
        wlist.push_back({{"eps", w.eps}, {"alpha", w.alpha}});
    cert["W"] = wlist;
    cert["time_samples"] = cfg.certificate.time_samples;
    cert["space_samples"] = cfg.certificate.space_samples;
    cert["random_samples"] = cfg.certificate.random_samples;
    j["certificate"] = cert;
    Json solver;
    if (cfg.solver.radius) solver["R"] = *cfg.solver.radius;
    solver["target_defect"] = cfg.solver.target_defect;
    solver["nx"] = cfg.solver.nx;
    solver["nt"] = cfg.solver.nt;
    solver["theta"] = cfg.solver.theta;
    solver["sigma_delta_cells"] = cfg.solver.sigma_delta_cells;
    solver["linear_tol"] = cfg.solver.linear_tol;
    j["solver"] = solver;
    j["window"] = {{"a0", cfg.window.a0}, {"a", cfg.window.a},   {"b", cfg.window.b},
                   {"b0", cfg.window.b0}, {"t", cfg.window.t}};
    Json bound;
    bound["k"] = cfg.bound.k;
    if (cfg.bound.regime_override) bound["regime_override"] = *cfg.bound.regime_override;
    j["bound"] = bound;
    if (cfg.approximation) {
        Json approx;
        approx["levels"] = cfg.approximation->levels;
        if (cfg.approximation->compact_radius)
            approx["K_radius"] = *cfg.approximation->compact_radius;
        approx["cutoff_mu"] = cfg.approximation->cutoff_mu;
        j["approximation"] = approx;
    }
    j["anchor_x"] = cfg.anchor_x;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    return j;
}

CoefficientField build_field(const OperatorSpec& spec) {
    if (spec.family == "example")
        return build_example_operator(spec.m, spec.p, spec.r, spec.dim);
    const int d = spec.dim;
    std::vector<std::vector<ExprPtr>> q(d, std::vector<ExprPtr>(d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) q[i][j] = parse_expression(spec.q_exprs[i][j]);
    std::vector<ExprPtr> f(d);
    for (int i = 0; i < d; ++i) f[i] = parse_expression(spec.f_exprs[i]);
    ExprPtr v = parse_expression(spec.v_expr);

    CoefficientField field;
    field.dim = d;
    field.eta = spec.eta;
    field.time_dependent = spec.time_dependent;
    field.Q = [q, d](double s, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = q[i][j]->eval(s, x);
        // enforce exact symmetry from the expression pair
        return 0.5 * (m + m.transpose());
    };
    field.DQ = [field_q = field.Q](double s, const Eigen::VectorXd& x, int k) -> Eigen::MatrixXd {
        const double h = 1e-5;
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        return (field_q(s, xp) - field_q(s, xm)) / (2.0 * h);
    };
    field.F = [f, d](double s, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd out(d);
        for (int i = 0; i < d; ++i) out[i] = f[i]->eval(s, x);
        return out;
    };
    field.V = [v](double s, const Eigen::VectorXd& x) { return v->eval(s, x); };
    field.potential_is_zero = spec.v_expr == "0" || spec.v_expr == "0.0";
    return field;
}

int worker_count() {
    if (const char* env = std::getenv("KOLMO_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 2 : static_cast<int>(hw);
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

Json report_json(const CertificateReport& r) {
    Json j;
    j["pass"] = r.pass;
    j["worst_margin"] = r.worst_margin;
    Json argmin = Json::array();
    argmin.push_back(r.argmin_s);
    for (Eigen::Index i = 0; i < r.argmin_x.size(); ++i) argmin.push_back(r.argmin_x[i]);
    j["argmin"] = argmin;
    j["n_samples"] = r.n_samples;
    if (!r.notes.empty()) j["notes"] = r.notes;
    return j;
}

Json verdict_json(const BoundVerdict& v) {
    Json j;
    j["regime"] = v.regime;
    j["beta"] = v.beta;
    j["alpha"] = v.alpha;
    j["eps"] = v.eps;
    j["k"] = v.k;
    j["exponent"] = v.exponent;
    j["C_fit"] = v.c_fit;
    j["C_fit_refined"] = v.c_fit_refined;
    j["stable"] = v.stable;
    Json argmax = Json::array();
    argmax.push_back(v.argmax_s);
    for (Eigen::Index i = 0; i < v.argmax_y.size(); ++i) argmax.push_back(v.argmax_y[i]);
    j["argmax"] = argmax;
    j["margins"] = {{"min", v.margin_min}, {"max", v.margin_max}};
    if (!v.notes.empty()) j["notes"] = v.notes;
    return j;
}

RegimeSelection forced_regime(double m, double p, double r, int which) {
    RegimeSelection sel;
    sel.m = m;
    sel.p = p;
    sel.r = r;
    sel.regime = which;
    if (which == 1) {
        sel.beta = p + 1.0 - m;
        sel.eps_max = 1.0 / sel.beta;
        sel.alpha0 = (p + 1.0 - m) / (p - 1.0);
    } else {
        sel.beta = 0.5 * (r + 2.0 - m);
        sel.eps_max = 2.0 / (r + 2.0 - m);
        sel.alpha0 = (r + m > 2.0) ? (r - m + 2.0) / (r + m - 2.0)
                                   : (r + 2.0 - m) / (2.0 * (p - 1.0));
    }
    return sel;
}

void write_zeta_csv(const std::string& path, const ZetaProfile& z1, const ZetaProfile& z2) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "s,zeta_W1,zeta_W2\n";
    char buf[160];
    for (std::size_t i = 0; i < z1.s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", z1.s[i], z1.zeta[i], z2.zeta[i]);
        out << buf;
    }
}

void write_bound_margin_csv(const std::string& path, const KernelSlice& slice,
                            const BoundVerdict& verdict, const TimeWindow& window) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << (slice.grid.dim == 1 ? "s,y1,value\n" : "s,y1,y2,value\n");
    const SmoothPower pw = make_smooth_power(verdict.beta);
    const int j_lo = slice.time_index_nearest_at_or_above(window.a0);
    const int j_hi = slice.time_index_nearest_at_or_below(window.b0);
    char buf[128];
    for (int j = j_lo; j <= j_hi; ++j) {
        const double s = slice.grid.s_at(j);
        const double tau = slice.t - s;
        for (int i = 0; i < slice.grid.num_nodes(); ++i) {
            const double g = slice.value(j, i);
            if (g <= 0.0) continue;
            const Eigen::VectorXd y = slice.grid.node(i);
            const double value = std::log(g) - verdict.exponent * std::log(tau) +
                                 verdict.eps * std::pow(tau, verdict.alpha) * pw.value(y);
            if (slice.grid.dim == 1)
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s, y[0], value);
            else
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s, y[0], y[1], value);
            out << buf;
        }
    }
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    RunReport run;
    Json& doc = run.document;
    doc["tool"] = "kolmo-lab";
    doc["version"] = "0.1.0";
    doc["config"] = config_to_json(config);
    const std::uint64_t seed = options.seed.value_or(config.seed);
    doc["seed"] = seed;
    const std::string out_dir = options.out_dir.value_or(config.output_dir);
    fs::create_directories(out_dir);
    auto artifact = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    const bool example_family = config.op.family == "example";
    CoefficientField field = build_field(config.op);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(config.anchor_x.data(),
                                                          config.anchor_x.size());
    const double t = config.window.t;

    bool any_fail = false, any_numeric_error = false;
    std::vector<std::string> warnings;

    // ---- certify ---------------------------------------------------------
    StaticCertificate cert =
        make_static_certificate(config.certificate.delta, config.certificate.beta);
    double radius = 0.0, m_final = 0.0;
    bool radius_clamped = false;
    bool certify_ok = false;
    std::vector<TimeDependentLyapunov> w_list;
    RegimeSelection regime;
    bool regime_ok = false;

    {
        const auto start = Clock::now();
        Json stage;
        if (!options.do_certify) {
            stage["status"] = "skipped";
        } else {
            try {
                SampleGrid provisional;
                provisional.radius = std::max(2.0, x.norm() + 1.0);
                provisional.time_samples = 9;
                provisional.space_samples_per_axis = 33;
                provisional.random_samples = 200;
                provisional.seed = seed;
                const auto prov = check_static_certificate(field, cert, provisional);
                if (config.solver.radius) {
                    radius = *config.solver.radius;
                } else {
                    const auto tr =
                        truncation_radius(cert, x, prov.estimated_M, config.solver.target_defect);
                    radius = tr.radius;
                    radius_clamped = tr.clamped;
                    if (tr.clamped)
                        warnings.push_back(
                            "truncation radius clamped; zeta checks flagged unreliable");
                }
                SampleGrid check_grid;
                check_grid.radius = 2.0 * radius;
                check_grid.time_samples = config.certificate.time_samples;
                check_grid.space_samples_per_axis = config.certificate.space_samples;
                check_grid.random_samples = config.certificate.random_samples;
                check_grid.seed = seed;
                const auto report = check_static_certificate(field, cert, check_grid);
                m_final = report.estimated_M;
                cert.bound_M = m_final;
                stage["static"] = report_json(report.report);
                stage["static"]["estimated_M"] = report.estimated_M;
                stage["static"]["asymptotic_pass"] = report.asymptotic_pass;
                if (report.leading_coefficient)
                    stage["static"]["leading_coefficient"] = *report.leading_coefficient;
                stage["R_check"] = check_grid.radius;

                bool all_td = true;
                Json td_list = Json::array();
                if (example_family) {
                    try {
                        regime = select_regime(config.op.m, config.op.p, config.op.r);
                        regime_ok = true;
                    } catch (const std::exception& e) {
                        stage["regime_error"] = e.what();
                    }
                    const LyapunovCase which = (regime_ok && regime.regime == 2)
                                                   ? LyapunovCase::PotentialDominated
                                                   : LyapunovCase::DriftDominated;
                    for (const auto& spec : config.certificate.w_specs) {
                        Json td;
                        td["eps"] = spec.eps;
                        td["alpha"] = spec.alpha;
                        try {
                            auto w = build_time_dependent_w(config.op.m, config.op.p, config.op.r,
                                                            which, spec.eps,
                                                            config.certificate.delta, spec.alpha,
                                                            t, config.op.dim);
                            SampleGrid td_grid = check_grid;
                            td_grid.s_hi = 0.9 * t;
                            const auto td_report = check_time_dependent(field, w, td_grid);
                            td["pass"] = td_report.pass;
                            td["margin_star"] = td_report.margin_star;
                            td["margin_star_star"] = td_report.margin_star_star;
                            td["h"] = {{"coeff", w.h.coeff}, {"exponent", w.h.exponent}};
                            all_td = all_td && td_report.pass;
                            w_list.push_back(std::move(w));
                        } catch (const std::exception& e) {
                            td["error"] = e.what();
                            all_td = false;
                        }
                        td_list.push_back(td);
                    }
                } else {
                    stage["time_dependent_note"] =
                        "custom operator: no closed-form W family; skipped";
                }
                stage["time_dependent"] = td_list;
                certify_ok = report.report.pass && all_td;
                stage["status"] = certify_ok ? "pass" : "fail";
                if (!certify_ok) any_fail = true;
            } catch (const std::exception& e) {
                stage["status"] = "error";
                stage["error"] = e.what();
                any_fail = true;
            }
        }
        stage["wall_ms"] = elapsed_ms(start);
        doc["stages"]["certify"] = stage;
    }

    // ---- solve -----------------------------------------------------------
    std::optional<KernelSlice> slice, slice_g0;
    SpaceTimeGrid grid;
    SolverConfig solver_cfg;
    solver_cfg.theta = config.solver.theta;
    solver_cfg.sigma_delta_cells = config.solver.sigma_delta_cells;
    solver_cfg.linear_tol = config.solver.linear_tol;
    {
        const auto start = Clock::now();
        Json stage;
        if (!options.do_solve || !certify_ok) {
            stage["status"] = !options.do_solve ? "skipped" : "halted (certify failed)";
        } else {
            try {
                grid = make_grid(config.op.dim, radius, config.solver.nx, 0.0, t,
                                 config.solver.nt);
                if (worker_count() > 1) {
                    auto fut_g0 = std::async(std::launch::async, [&] {
                        return solve_reference_kernel_g0(field, t, x, solver_cfg, grid);
                    });
                    slice = solve_kernel_slice(field, t, x, solver_cfg, grid);
                    slice_g0 = fut_g0.get();
                } else {
                    slice = solve_kernel_slice(field, t, x, solver_cfg, grid);
                    slice_g0 = solve_reference_kernel_g0(field, t, x, solver_cfg, grid);
                }
                write_kernel_slice(*slice, artifact("kernel_slice.csv"),
                                   artifact("kernel_slice.json"));
                write_kernel_slice(*slice_g0, artifact("g0_slice.csv"), artifact("g0_slice.json"));
                stage["R"] = radius;
                stage["R_clamped"] = radius_clamped;
                stage["dx"] = grid.dx();
                stage["ds"] = grid.ds();
                stage["sigma_delta"] = slice->sigma_delta;
                stage["theta_used"] = slice->theta_used;
                stage["max_peclet"] = slice->max_peclet;
                stage["peclet_warning"] = slice->peclet_warning;
                stage["defect"] = slice_g0->truncation_defect.value_or(0.0);
                stage["min_raw_value"] = slice->min_raw_value;
                stage["status"] = "pass";
            } catch (const std::exception& e) {
                stage["status"] = "error";
                stage["error"] = e.what();
                any_numeric_error = true;
            }
        }
        stage["wall_ms"] = elapsed_ms(start);
        doc["stages"]["solve"] = stage;
    }

    // ---- integral checks ---------------------------------------------------
    {
        const auto start = Clock::now();
        Json stage;
        if (!slice) {
            stage["status"] = options.do_solve ? "halted (no kernel)" : "skipped";
        } else {
            try {
                bool ok = true;
                double mass_max = 0.0;
                for (int j = 0; j <= grid.steps; ++j) mass_max = std::max(mass_max, slice->mass(j));
                stage["mass_max"] = mass_max;
                const bool submarkov = mass_max <= 1.0 + 1e-6;
                stage["submarkov_pass"] = submarkov;
                ok = ok && submarkov;

                double dom_violation = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < slice->values.size(); ++i)
                    dom_violation = std::max(dom_violation,
                                             slice->values[i] - slice_g0->values[i]);
                stage["domination_max_violation"] = dom_violation;
                const bool dominated = dom_violation <= 1e-6;
                stage["domination_pass"] = dominated;
                ok = ok && dominated;

                // widest bump that keeps 4 sigma_delta of margin to the boundary
                const double bump_width =
                    std::min(radius / 8.0, (radius - 4.0 * slice->sigma_delta) / 6.5);
                bool evolution_ok = true;
                if (bump_width > 2.0 * grid.dx()) {
                    const TestFunction bump =
                        gaussian_bump(Eigen::VectorXd::Zero(config.op.dim), bump_width);
                    const double s0 =
                        grid.s_at(slice->time_index_nearest_at_or_above(config.window.a0));
                    const double s1 =
                        grid.s_at(slice->time_index_nearest_at_or_below(config.window.b0));
                    const double residual = validate_evolution_identity(field, bump, *slice, s0, s1);
                    stage["evolution_residual"] = residual;
                    evolution_ok = residual <= 5e-2;
                } else {
                    stage["evolution_note"] = "grid too coarse for the identity check";
                }
                stage["evolution_pass"] = evolution_ok;
                ok = ok && evolution_ok;

                const GammaMoments moments =
                    compute_gamma_moments(*slice, field, config.bound.k, config.window);
                stage["gamma1"] = moments.gamma1;
                stage["gamma2"] = moments.gamma2;
                stage["gamma_finite"] = moments.finite;
                ok = ok && moments.finite;

                Json zeta_list = Json::array();
                for (const auto& w : w_list) {
                    const ZetaProfile profile = compute_zeta(*slice, w, config.window);
                    const ZetaBoundReport z = check_zeta_bound(profile, w);
                    Json zj;
                    zj["eps"] = w.eps;
                    zj["alpha"] = w.alpha;
                    zj["worst_ratio"] = z.worst_ratio;
                    zj["argmax_s"] = z.argmax_s;
                    zj["phi_monotone"] = z.phi_monotone;
                    zj["phi_min_increment"] = z.phi_min_increment;
                    zj["pass"] = z.pass;
                    zeta_list.push_back(zj);
                    ok = ok && z.pass;
                }
                stage["zeta"] = zeta_list;

                const MassBoundReport mass_bound = check_mass_bound(*slice, cert, m_final);
                stage["mass_bound"] = {{"pass", mass_bound.pass},
                                       {"worst_ratio", mass_bound.worst_ratio},
                                       {"argmax_s", mass_bound.argmax_s}};
                ok = ok && mass_bound.pass;

                stage["status"] = ok ? "pass" : "fail";
                if (!ok) any_fail = true;
            } catch (const std::exception& e) {
                stage["status"] = "error";
                stage["error"] = e.what();
                any_numeric_error = true;
            }
        }
        stage["wall_ms"] = elapsed_ms(start);
        doc["stages"]["checks"] = stage;
    }

    // ---- bounds ------------------------------------------------------------
    std::optional<WeightSystem> weight_system;
    std::optional<BoundVerdict> first_verdict;
    {
        const auto start = Clock::now();
        Json stage;
        if (!options.do_bounds) {
            stage["status"] = "skipped";
        } else if (!slice || !example_family || !regime_ok || w_list.empty()) {
            stage["status"] = !slice ? "halted (no kernel)" : "skipped (needs the power family)";
        } else {
            try {
                bool ok = true;
                const double delta = config.certificate.delta;
                const double eps0 = config.certificate.w_specs.front().eps;
                const double alpha = config.certificate.w_specs.front().alpha;
                const double eps1 = eps0 + (delta - eps0) / 3.0;
                const double eps2 = eps0 + 2.0 * (delta - eps0) / 3.0;
                WeightSystem ws = make_weight_system(config.op.m, config.op.p, config.op.r,
                                                     config.bound.k, eps0, eps1, eps2, delta,
                                                     alpha, regime.beta, config.window,
                                                     config.op.dim);
                const auto diag = compute_weight_constants(field, ws);
                Json wj;
                wj["k"] = ws.k;
                wj["eps"] = {eps0, eps1, eps2};
                wj["sigma"] = ws.sigma;
                wj["c0"] = ws.c0;
                wj["c"] = std::vector<double>(ws.c.begin() + 1, ws.c.end());
                wj["cbar"] = std::vector<double>(ws.cbar.begin() + 1, ws.cbar.end());
                wj["gamma"] = std::vector<double>(ws.gamma.begin() + 1, ws.gamma.end());
                wj["argmax_on_boundary"] =
                    std::vector<bool>(diag.argmax_on_boundary.begin() + 1,
                                      diag.argmax_on_boundary.end());
                wj["sup_wm2_dsw"] = diag.sup_wm2_dsw;
                wj["sup_wm2_gradw"] = diag.sup_wm2_gradw;
                if (!diag.notes.empty()) wj["notes"] = diag.notes;
                stage["weight_constants"] = wj;
                weight_system = ws;

                const ZetaProfile zeta1 = compute_zeta(*slice, ws.w1, config.window);
                const ZetaProfile zeta2 = compute_zeta(*slice, ws.w2, config.window);
                write_zeta_csv(artifact("zeta_profile.csv"), zeta1, zeta2);
                const auto thm_bounded =
                    assemble_main_bound(ws, zeta1.sup_window, zeta1.integral_window,
                                        zeta2.integral_window, BoundVariant::BoundedDiffusion);
                const auto thm_general =
                    assemble_main_bound(ws, zeta1.sup_window, zeta1.integral_window,
                                        zeta2.integral_window, BoundVariant::General);
                stage["assembly"] = {{"sup_zeta1", zeta1.sup_window},
                                     {"int_zeta1", zeta1.integral_window},
                                     {"int_zeta2", zeta2.integral_window},
                                     {"rhs_bounded_diffusion", thm_bounded.total},
                                     {"rhs_general", thm_general.total}};

                const RegimeSelection fit_regime =
                    config.bound.regime_override
                        ? forced_regime(config.op.m, config.op.p, config.op.r,
                                        *config.bound.regime_override)
                        : regime;
                stage["regime"] = fit_regime.regime;
                stage["regime_forced"] = config.bound.regime_override.has_value();

                // refined slice for the stability check, shared by the sweep
                const int refine = std::max(2, options.refine);
                const SpaceTimeGrid fine = make_grid(grid.dim, grid.radius,
                                                     (grid.nodes_per_axis - 1) * refine + 1,
                                                     grid.s_min, grid.t, grid.steps * refine);
                const KernelSlice refined = solve_kernel_slice(field, t, x, solver_cfg, fine);

                Json verdicts = Json::array();
                std::ofstream sweep_csv(artifact("bound_sweep.csv"));
                sweep_csv << "alpha,eps,k,C_fit,stable\n";
                for (const auto& spec : config.certificate.w_specs) {
                    BoundVerdict v = verify_theorem_bound(*slice, fit_regime, spec.alpha,
                                                          spec.eps, config.bound.k, config.window);
                    apply_refinement(v, refined, fit_regime, config.window);
                    verdicts.push_back(verdict_json(v));
                    char buf[128];
                    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n", v.alpha, v.eps,
                                  v.k, v.c_fit, v.stable ? 1 : 0);
                    sweep_csv << buf;
                    ok = ok && v.pass;
                    if (!first_verdict) {
                        first_verdict = v;
                        write_bound_margin_csv(artifact("bound_margin.csv"), *slice, v,
                                               config.window);
                    }
                }
                stage["verdicts"] = verdicts;
                stage["status"] = ok ? "pass" : "fail";
                if (!ok) any_fail = true;
            } catch (const std::exception& e) {
                stage["status"] = "error";
                stage["error"] = e.what();
                any_numeric_error = true;
            }
        }
        stage["wall_ms"] = elapsed_ms(start);
        doc["stages"]["bounds"] = stage;
    }

    // ---- approximation sweep ------------------------------------------------
    {
        const auto start = Clock::now();
        Json stage;
        if (!options.do_approx || !config.approximation) {
            stage["status"] = "skipped";
        } else {
            try {
                auto cutoff = std::make_shared<const CutoffProfile>(
                    build_cutoff_profile(config.approximation->cutoff_mu));
                write_cutoff_csv(*cutoff, artifact("cutoff_profile.csv"));
                stage["cutoff_max_tphi_prime"] = cutoff->verified_max_t_phi_prime;
                std::optional<TimeDependentLyapunov> sweep_w1;
                if (weight_system) {
                    sweep_w1 = weight_system->w1;
                } else if (example_family && regime_ok && !config.certificate.w_specs.empty()) {
                    const double delta = config.certificate.delta;
                    const double eps0 = config.certificate.w_specs.front().eps;
                    sweep_w1 = make_exp_lyapunov(t, eps0 + (delta - eps0) / 3.0,
                                                 config.certificate.w_specs.front().alpha,
                                                 regime.beta, delta, config.op.m, config.op.p,
                                                 config.op.dim);
                }
                if (!slice || !sweep_w1) {
                    stage["sweep"] = "halted (needs kernel and a Lyapunov weight)";
                    stage["status"] = "fail";
                    any_fail = true;
                } else {
                    const double k_radius =
                        config.approximation->compact_radius.value_or(radius / 2.0);
                    const double win_lo =
                        config.window.a0 + 0.1 * (t - config.window.a0);
                    const ConvergenceSweep sweep = convergence_sweep(
                        field, config.approximation->levels, *sweep_w1, cutoff, t, x,
                        solver_cfg, grid, k_radius, win_lo, config.window.b0);
                    write_sweep_csv(sweep, artifact("approx_sweep.csv"));
                    Json rows = Json::array();
                    bool decreasing = true;
                    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
                        const auto& row = sweep.rows[i];
                        rows.push_back({{"n", row.level},
                                        {"sup_diff", row.sup_diff},
                                        {"sup_rel_diff", row.sup_rel_diff},
                                        {"mass_defect", row.mass_defect}});
                        if (i > 0) decreasing = decreasing && row.sup_diff < sweep.rows[i - 1].sup_diff;
                    }
                    stage["rows"] = rows;
                    stage["sup_diff_strictly_decreasing"] = decreasing;
                    const double top_rel = sweep.rows.back().sup_rel_diff;
                    stage["top_level_rel_diff"] = top_rel;

                    // Lyapunov transfer and ellipticity preservation per level
                    Json transfer = Json::array();
                    bool transfer_ok = true;
                    std::mt19937_64 rng(seed ^ 0xabcdef12345ull);
                    std::uniform_real_distribution<double> us(0.0, 0.9 * t);
                    std::uniform_real_distribution<double> ux(-2.0 * radius, 2.0 * radius);
                    for (double level : config.approximation->levels) {
                        const CoefficientField truncated =
                            build_truncated_operator(field, level, *sweep_w1, cutoff);
                        Json tj;
                        tj["n"] = level;
                        SampleGrid td_grid;
                        td_grid.radius = 2.0 * radius;
                        td_grid.s_hi = 0.9 * t;
                        td_grid.time_samples = 17;
                        td_grid.space_samples_per_axis = 65;
                        td_grid.random_samples = 200;
                        td_grid.seed = seed;
                        bool level_ok = true;
                        for (const auto& w : w_list) {
                            const auto td = check_time_dependent(truncated, w, td_grid);
                            level_ok = level_ok && td.pass;
                        }
                        tj["lyapunov_transfer_pass"] = level_ok;
                        std::vector<std::pair<double, Eigen::VectorXd>> samples;
                        for (int i = 0; i < 100; ++i) {
                            Eigen::VectorXd y(config.op.dim);
                            for (int d = 0; d < config.op.dim; ++d) y[d] = ux(rng);
                            samples.emplace_back(us(rng), y);
                        }
                        const auto ell = check_ellipticity(truncated, samples);
                        tj["ellipticity_pass"] = ell.pass;
                        tj["ellipticity_min_margin"] = ell.min_margin;
                        transfer_ok = transfer_ok && level_ok && ell.pass;
                        transfer.push_back(tj);
                    }
                    stage["levels"] = transfer;

                    const bool ok = decreasing && top_rel <= 0.05 && transfer_ok;
                    stage["status"] = ok ? "pass" : "fail";
                    if (!ok) any_fail = true;
                }
            } catch (const std::exception& e) {
                stage["status"] = "error";
                stage["error"] = e.what();
                any_numeric_error = true;
            }
        }
        stage["wall_ms"] = elapsed_ms(start);
        doc["stages"]["approx"] = stage;
    }

    doc["warnings"] = warnings;
    run.exit_code = any_numeric_error ? 3 : (any_fail ? 2 : 0);
    doc["exit_code"] = run.exit_code;
    std::ofstream report(artifact("report.json"));
    report << doc.dump(2) << "\n";
    return run;
}

Json emit_plots(const std::string& run_dir) {
    fs::create_directories(run_dir);
    Json manifest;
    manifest["emitted"] = Json::array();
    manifest["missing"] = Json::array();
    auto path_of = [&](const std::string& name) { return (fs::path(run_dir) / name).string(); };
    auto note = [&](const std::string& name, bool ok) {
        manifest[ok ? "emitted" : "missing"].push_back(name);
    };

    note("kernel_slice.csv", fs::exists(path_of("kernel_slice.csv")));
    note("zeta_profile.csv", fs::exists(path_of("zeta_profile.csv")));
    note("cutoff_profile.csv", fs::exists(path_of("cutoff_profile.csv")));

    bool margin_ok = false;
    try {
        if (fs::exists(path_of("kernel_slice.csv")) && fs::exists(path_of("kernel_slice.json")) &&
            fs::exists(path_of("report.json"))) {
            std::ifstream rep(path_of("report.json"));
            const Json report = Json::parse(rep);
            const Json& stages = report.at("stages");
            if (stages.contains("bounds") && stages.at("bounds").contains("verdicts") &&
                !stages.at("bounds").at("verdicts").empty()) {
                const Json& vj = stages.at("bounds").at("verdicts").at(0);
                BoundVerdict v;
                v.beta = vj.at("beta").get<double>();
                v.alpha = vj.at("alpha").get<double>();
                v.eps = vj.at("eps").get<double>();
                v.exponent = vj.at("exponent").get<double>();
                const Json& win = report.at("config").at("window");
                const TimeWindow window = make_time_window(
                    win.at("a0").get<double>(), win.at("a").get<double>(),
                    win.at("b").get<double>(), win.at("b0").get<double>(),
                    win.at("t").get<double>());
                const KernelSlice slice =
                    read_kernel_slice(path_of("kernel_slice.csv"), path_of("kernel_slice.json"));
                write_bound_margin_csv(path_of("bound_margin.csv"), slice, v, window);
                margin_ok = true;
            }
        }
    } catch (const std::exception& e) {
        manifest["bound_margin_error"] = e.what();
    }
    note("bound_margin.csv", margin_ok);

    if (manifest["emitted"].empty())
        std::cerr << "warning: no plot inputs found in " << run_dir << "\n";
    std::ofstream out(path_of("manifest.json"));
    out << manifest.dump(2) << "\n";
    return manifest;
}

}  // namespace kolmo
