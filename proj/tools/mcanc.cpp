// mcanc: run multi-channel ANC experiments, compare runs, check gradients.
//
//   mcanc run <config.json> [--output-dir DIR] [--duration S]
//   mcanc compare <dirA> <dirB>
//   mcanc gradcheck [--instances N] [--seed S] [--no-fd]
//
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 diverged.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mcanc/experiment.hpp"
#include "mcanc/gradcheck.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

int cmd_run(const std::string& config_path, const std::string& output_dir, double duration) {
    mcanc::ExperimentConfig cfg;
    try {
        cfg = mcanc::load_config(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (duration >= 0.0) {
            cfg.duration_s = duration;
            for (auto& n : cfg.noise) n.duration_s = duration;
        }
        cfg.validate();
    } catch (const mcanc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    mcanc::RunResult result;
    try {
        result = mcanc::run_experiment(cfg, &std::cerr);
    } catch (const mcanc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::cout << "run " << cfg.name << ": " << result.samples_processed << " samples, " << result.nr.blocks()
              << " blocks, " << result.wall_clock_s << " s, outputs in " << cfg.output_dir.string() << '\n';
    for (std::size_t b = 0; b < result.nr.blocks(); ++b) {
        std::cout << "  block " << b << "  NR " << mcanc::format_real(result.nr.nr_db[b]) << " dB\n";
    }
    if (result.status == mcanc::RunStatus::Diverged) {
        std::cerr << result.message << '\n';
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_compare(const std::string& a, const std::string& b) {
    const auto cmp = mcanc::compare_runs(a, b);
    mcanc::write_comparison(std::cout, cmp);
    return kExitOk;
}

int cmd_gradcheck(std::size_t instances, std::uint64_t seed, bool fd) {
    constexpr double kOracleTol = 1e-10;
    constexpr double kFdTol = 1e-5;
    const auto s = mcanc::run_gradcheck(instances, seed, fd);
    std::cout << "instances:                 " << s.instances << '\n'
              << "max rel error vs autodiff: " << mcanc::format_real(s.max_oracle_error) << '\n';
    if (fd) std::cout << "max rel error vs central differences: " << mcanc::format_real(s.max_fd_error) << '\n';
    std::cout << "max cost mismatch:         " << mcanc::format_real(s.max_cost_mismatch) << '\n'
              << "elapsed:                   " << s.elapsed_s << " s\n";
    const bool ok = s.max_oracle_error <= kOracleTol && (!fd || s.max_fd_error <= kFdTol);
    std::cout << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-channel filtered-x LMS/NLMS active noise control simulator"};
    app.require_subcommand(1);

    std::string config_path, output_dir;
    double duration = -1.0;
    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--output-dir", output_dir, "Override output_dir from the config");
    run->add_option("--duration", duration, "Override duration_s (seconds)");

    std::string dir_a, dir_b;
    auto* compare = app.add_subcommand("compare", "Per-block NR difference between two run directories");
    compare->add_option("dir_a", dir_a)->required();
    compare->add_option("dir_b", dir_b)->required();

    std::size_t instances = 1000;
    std::uint64_t seed = 20240101;
    bool no_fd = false;
    auto* grad = app.add_subcommand("gradcheck", "Closed-form gradient vs autodiff tape on random instances");
    grad->add_option("--instances", instances, "Number of random instances");
    grad->add_option("--seed", seed, "RNG seed");
    grad->add_flag("--no-fd", no_fd, "Skip the central-difference comparison");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return cmd_run(config_path, output_dir, duration);
        if (*compare) return cmd_compare(dir_a, dir_b);
        if (*grad) return cmd_gradcheck(instances, seed, !no_fd);
    } catch (const mcanc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
