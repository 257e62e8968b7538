#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kolmo/bounds.hpp"
#include "kolmo/coefficient_field.hpp"
#include "kolmo/truncation.hpp"

namespace kolmo {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OperatorSpec {
    std::string family = "example";  // "example" | "custom"
    int dim = 1;
    double m = 0.0, p = 3.0, r = 2.0;  // example family
    // custom family: expression strings
    std::vector<std::vector<std::string>> q_exprs;
    std::vector<std::string> f_exprs;
    std::string v_expr;
    double eta = 1.0;
    bool time_dependent = false;
};

struct WSpec {
    double eps = 0.1;
    double alpha = 2.5;
};

struct CertificateSpec {
    double delta = 0.2;
    double beta = 4.0;
    std::vector<WSpec> w_specs;
    int time_samples = 17;
    int space_samples = 65;
    int random_samples = 1000;
};

struct SolverSpec {
    std::optional<double> radius;         // explicit box radius
    double target_defect = 2e-7;          // used when radius is absent
    int nx = 513;
    int nt = 512;
    double theta = 0.5;
    double sigma_delta_cells = 3.0;
    double linear_tol = 1e-10;
};

struct BoundSpec {
    double k = 4.0;
    std::optional<int> regime_override;
};

struct ApproximationSpec {
    std::vector<double> levels;
    std::optional<double> compact_radius;  // default R/2
    double cutoff_mu = 0.05;
};

struct ExperimentConfig {
    OperatorSpec op;
    CertificateSpec certificate;
    SolverSpec solver;
    TimeWindow window;
    BoundSpec bound;
    std::optional<ApproximationSpec> approximation;
    std::vector<double> anchor_x{0.0};
    std::string output_dir = "out";
    std::uint64_t seed = 0;
};

/// Parses and validates a config; the violated constraint is named in the
/// ConfigError.  parse/serialize round-trip is lossless.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

CoefficientField build_field(const OperatorSpec& spec);

struct RunOptions {
    int refine = 2;                     // grid multiplier for stability checks
    std::optional<std::string> out_dir; // overrides the config
    std::optional<std::uint64_t> seed;  // overrides the config
    /// run only a subset of the pipeline
    bool do_certify = true;
    bool do_solve = true;
    bool do_bounds = true;
    bool do_approx = true;
};

/// exit codes: 0 pass, 1 validation error, 2 verification failure,
/// 3 solver/numerical failure
struct RunReport {
    nlohmann::json document;
    int exit_code = 0;
};

/// Executes the pipeline: certify -> solve (g and g0) -> integral checks ->
/// bound verdicts -> approximation sweep; a stage failure halts dependent
/// stages but not independent ones.  Artifacts are written under the output
/// directory; the report JSON is deterministic for fixed (config, seed)
/// except for wall_ms fields.
RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Emits plot-ready CSVs (kernel_slice.csv, zeta_profile.csv,
/// bound_margin.csv, cutoff_profile.csv) from a completed run directory and
/// writes a manifest of what could be produced.  Missing inputs cause partial
/// emission, not failure.
nlohmann::json emit_plots(const std::string& run_dir);

/// worker count from KOLMO_WORKERS, default = hardware concurrency
int worker_count();

}  // namespace kolmo
