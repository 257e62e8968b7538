// kolmo-lab: batch runner for Kolmogorov-operator kernel experiments.
//
// Subcommands mirror the pipeline stages: `certify` checks Lyapunov
// certificates, `solve-kernel` additionally produces the Green-kernel slice,
// `verify-bounds` adds the weight-constant and kernel-bound verdicts,
// `approx-sweep` runs the bounded-diffusion approximation study, `run`
// executes everything, and `emit-plots` turns a run directory into
// plot-ready CSV files.
//
// Exit codes: 0 all stages pass, 1 config validation error, 2 a verification
// stage failed, 3 solver/numerical failure.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kolmo/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int refine = 2;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", args.seed, "override the sampling seed");
    cmd->add_option("--out", args.out_dir, "override the output directory");
    cmd->add_option("--refine", args.refine, "grid-refinement multiplier for stability checks")
        ->check(CLI::Range(2, 8));
}

int run_stages(const CommonArgs& args, bool solve, bool bounds, bool approx) {
    kolmo::ExperimentConfig config;
    try {
        config = kolmo::load_config(args.config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    kolmo::RunOptions options;
    options.refine = args.refine;
    options.seed = args.seed;
    options.out_dir = args.out_dir;
    options.do_solve = solve;
    options.do_bounds = bounds;
    options.do_approx = approx;
    try {
        const kolmo::RunReport report = kolmo::run_experiment(config, options);
        for (const auto& [name, stage] : report.document.at("stages").items())
            std::cout << name << ": " << stage.value("status", "?") << "\n";
        for (const auto& w : report.document.at("warnings"))
            std::cerr << "warning: " << w.get<std::string>() << "\n";
        std::cout << "report: "
                  << (options.out_dir.value_or(config.output_dir) + "/report.json") << "\n";
        return report.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for nonautonomous Kolmogorov kernel estimates"};
    app.require_subcommand(1);

    CommonArgs certify_args, solve_args, bounds_args, approx_args, run_args;
    CLI::App* certify = app.add_subcommand("certify", "check static and time dependent Lyapunov certificates");
    add_common(certify, certify_args);
    CLI::App* solve = app.add_subcommand("solve-kernel", "certify and solve the Green-kernel slice");
    add_common(solve, solve_args);
    CLI::App* bounds = app.add_subcommand("verify-bounds", "certify, solve and verify kernel bounds");
    add_common(bounds, bounds_args);
    CLI::App* approx = app.add_subcommand("approx-sweep", "bounded-diffusion approximation sweep");
    add_common(approx, approx_args);
    CLI::App* full = app.add_subcommand("run", "full pipeline");
    add_common(full, run_args);

    std::string run_dir;
    CLI::App* plots = app.add_subcommand("emit-plots", "emit plot-ready CSVs from a run directory");
    plots->add_option("run_dir", run_dir, "directory of a completed run")->required();

    CLI11_PARSE(app, argc, argv);

    if (certify->parsed()) return run_stages(certify_args, false, false, false);
    if (solve->parsed()) return run_stages(solve_args, true, false, false);
    if (bounds->parsed()) return run_stages(bounds_args, true, true, false);
    if (approx->parsed()) return run_stages(approx_args, true, false, true);
    if (full->parsed()) return run_stages(run_args, true, true, true);
    if (plots->parsed()) {
        try {
            kolmo::emit_plots(run_dir);
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 3;
        }
    }
    return 0;
}
