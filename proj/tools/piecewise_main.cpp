// Benchmark driver. Subcommands:
//   run                execute the T0 x seed grid, write summary.csv
//   sweep-t0           run + per-T0 mean/stderr curves (t0_curves.csv)
//   validate-theorems  executable proof-check of the divergence formulas
//   coefficient-curve  emit the (1-abar)/abar table
//
// Exit codes: 0 success, 1 run/check failure, 2 config or usage error.
// PIECEWISE_LOG sets verbosity: 0 quiet, 1 summaries (default), 2 per-run.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "piecewise/experiment.hpp"
#include "piecewise/rng.hpp"

namespace {

int log_level() {
    const char* env = std::getenv("PIECEWISE_LOG");
    if (!env || !*env) return 1;
    return std::atoi(env);
}

void print_failed_rows(const std::vector<pw::RunRow>& rows) {
    for (const auto& row : rows)
        if (!row.error.empty())
            std::fprintf(stderr, "run failed: %s T0=%zu seed=%llu: %s\n", row.problem.c_str(),
                         row.t0, static_cast<unsigned long long>(row.seed), row.error.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"piecewise diffusion-guidance benchmark driver"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    unsigned jobs = 1;
    std::uint64_t seed_base = 0;
    std::vector<std::size_t> t0_override;
    double k1 = 0.0, k2 = 0.0, eta = 0.0, sigma_z = 0.0;
    std::string rt_spec;
    bool inject_fault = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* copt = sub->add_option("--config", config_path, "JSON experiment config");
        if (config_required) copt->required();
        sub->add_option("--jobs", jobs, "Maximum concurrent runs")->capture_default_str();
        sub->add_option("--out", out_override, "Output directory override");
        sub->add_option("--seed", seed_base,
                        "Base seed override; regenerates the whole seed list");
        sub->add_option("--t0", t0_override, "Guidance threshold override (repeat or comma-separate)")
            ->delimiter(',');
        sub->add_option("--k1", k1, "Low-branch gain override");
        sub->add_option("--k2", k2, "High-branch gain override");
        sub->add_option("--eta", eta, "DDIM eta override");
        sub->add_option("--sigma-z", sigma_z, "Measurement noise override");
        sub->add_option("--rt-schedule", rt_spec,
                        "Residual scale: one-minus-alphabar or constant:<v>");
    };

    CLI::App* cmd_run = app.add_subcommand("run", "Execute the T0 x seed grid");
    add_common(cmd_run, true);
    CLI::App* cmd_sweep = app.add_subcommand("sweep-t0", "Grid plus per-T0 aggregate curves");
    add_common(cmd_sweep, true);

    CLI::App* cmd_validate =
        app.add_subcommand("validate-theorems", "Cross-check closed-form divergences");
    cmd_validate->add_option("--config", config_path, "Config supplying the coefficient-curve schedule");
    cmd_validate->add_option("--out", out_override, "Output directory");
    cmd_validate->add_flag("--inject-fault", inject_fault)->group("");  // harness self-test

    CLI::App* cmd_curve =
        app.add_subcommand("coefficient-curve", "Emit the (1-abar)/abar table");
    cmd_curve->add_option("--config", config_path, "Config supplying the schedule");
    cmd_curve->add_option("--out", out_override, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const int verbosity = log_level();

    if (*cmd_run || *cmd_sweep) {
        pw::ExperimentConfig cfg;
        try {
            cfg = pw::load_experiment_config(config_path);
            CLI::App* sub = *cmd_run ? cmd_run : cmd_sweep;
            if (sub->count("--t0")) cfg.guidance.t0 = t0_override;
            if (sub->count("--k1")) cfg.guidance.k1 = k1;
            if (sub->count("--k2")) cfg.guidance.k2 = k2;
            if (sub->count("--eta")) cfg.guidance.eta = eta;
            if (sub->count("--sigma-z")) cfg.problem.sigma_z = sigma_z;
            if (sub->count("--rt-schedule")) cfg.guidance.rt_schedule = rt_spec;
            if (sub->count("--out")) cfg.run.out_dir = out_override;
            if (sub->count("--seed")) {
                const std::size_t count = cfg.run.seeds.size();
                cfg.run.seeds.clear();
                for (std::size_t i = 0; i < count; ++i)
                    cfg.run.seeds.push_back(pw::Xoshiro256pp::derived_seed(seed_base, i));
            }
            pw::validate_experiment_config(cfg);
        } catch (const pw::DomainError& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        }

        try {
            const auto rows = pw::run_grid(cfg, jobs);
            std::filesystem::create_directories(cfg.run.out_dir);
            pw::write_summary_csv(cfg.run.out_dir + "/summary.csv", rows);
            if (*cmd_sweep)
                pw::write_t0_curves_csv(cfg.run.out_dir + "/t0_curves.csv",
                                        pw::aggregate_t0_curves(rows));
            if (verbosity >= 2)
                for (const auto& row : rows)
                    std::fprintf(stderr, "%s T0=%zu seed=%llu psnr=%.3f wall=%.4fs %s\n",
                                 row.problem.c_str(), row.t0,
                                 static_cast<unsigned long long>(row.seed), row.psnr_db,
                                 row.wall_clock_s, row.error.c_str());
            std::size_t failed = 0;
            for (const auto& row : rows)
                if (!row.error.empty()) ++failed;
            if (verbosity >= 1)
                std::fprintf(stderr, "%s: %zu runs, %zu failed, outputs in %s\n",
                             *cmd_sweep ? "sweep-t0" : "run", rows.size(), failed,
                             cfg.run.out_dir.c_str());
            if (failed) {
                print_failed_rows(rows);
                return 1;
            }
            return 0;
        } catch (const pw::DomainError& e) {
            // Construction errors past parsing are still configuration
            // mistakes (operator shapes, file contents).
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        }
    }

    try {
        const std::string out_dir = !out_override.empty() ? out_override : "out";
        pw::NoiseSchedule schedule = pw::build_linear_schedule(1000, 1e-4, 0.02);
        if (!config_path.empty())
            schedule = pw::build_schedule(pw::load_experiment_config(config_path));
        std::filesystem::create_directories(out_dir);

        if (*cmd_curve) {
            pw::write_coefficient_csv(out_dir + "/coefficient_curve.csv",
                                      pw::coefficient_curve(schedule));
            if (verbosity >= 1)
                std::fprintf(stderr, "coefficient-curve: %d rows in %s\n", schedule.T,
                             out_dir.c_str());
            return 0;
        }

        // validate-theorems
        const auto rows = pw::run_theorem_checks(20000, inject_fault ? 1e-6 : 0.0);
        pw::write_theorem_csv(out_dir + "/theorem_checks.csv", rows);
        pw::write_coefficient_csv(out_dir + "/coefficient_curve.csv",
                                  pw::coefficient_curve(schedule));
        std::size_t failed = 0;
        for (const auto& row : rows) {
            if (row.pass) continue;
            ++failed;
            if (failed <= 10)
                std::fprintf(stderr,
                             "check failed: trial=%zu t=%zu closed=%.17e lemma=%.17e "
                             "abs_err=%.3e\n",
                             row.trial, row.t, row.closed_form, row.lemma1_value, row.abs_err);
        }
        if (verbosity >= 1)
            std::fprintf(stderr, "validate-theorems: %zu checks, %zu failed\n", rows.size(),
                         failed);
        return failed ? 1 : 0;
    } catch (const pw::DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
