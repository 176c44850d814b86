// Experiment orchestration for the benchmark driver: turn a validated config
// into operators/models, execute the T0 x seed grid through the batch
// sampler, and emit the CSV artifacts (summary, sweep curves, theorem checks,
// coefficient curve).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "piecewise/analysis.hpp"
#include "piecewise/config.hpp"
#include "piecewise/guidance.hpp"
#include "piecewise/operators.hpp"
#include "piecewise/priors.hpp"
#include "piecewise/sampler.hpp"

namespace pw {

// Config-to-component builders. Each throws DomainError on specs the config
// validator cannot check without touching the filesystem or numerics.
NoiseSchedule build_schedule(const ExperimentConfig& cfg);
LinearOperator build_operator(const ExperimentConfig& cfg);
GmmPrior build_prior(const ExperimentConfig& cfg);

// Parses "one-minus-alphabar" or "constant:<value>".
RtSchedule parse_rt_schedule(const std::string& spec);

// Ground truth and (in fixed mode) the shared measurement vector. x_true
// comes from x0_file when given, otherwise it is drawn from the prior with a
// generator derived from problem.data_seed.
struct ProblemData {
    Vec x_true;
    Vec y_fixed;  // empty in per-seed mode
};
ProblemData prepare_problem_data(const ExperimentConfig& cfg, const LinearOperator& op);
Measurement measurement_for_seed(const ExperimentConfig& cfg, const ProblemData& data,
                                 const LinearOperator& op, std::uint64_t seed);

// One summary.csv row. `error` is empty for successful runs; failed runs
// carry the message and NaN metrics.
struct RunRow {
    std::string problem;
    std::size_t t0 = 0;
    std::uint64_t seed = 0;
    double psnr_db = 0.0;
    double ssim_value = 0.0;
    double wall_clock_s = 0.0;  // sampler loop only, I/O excluded
    std::uint64_t vjp_calls = 0;
    std::uint64_t denoise_calls = 0;
    std::string error;
};

// Executes the full grid (every guidance.t0 times every run seed) with up to
// `jobs` concurrent runs. Reconstructions and x_true are written to
// cfg.run.out_dir (atomically, via rename) when save_reconstructions is set.
std::vector<RunRow> run_grid(const ExperimentConfig& cfg, unsigned jobs);

bool all_rows_ok(const std::vector<RunRow>& rows);

// Per-T0 aggregates over the successful rows, in first-appearance order.
struct T0CurveRow {
    std::string problem;
    std::size_t t0 = 0;
    std::size_t runs = 0;
    double psnr_mean = 0.0, psnr_se = 0.0;
    double ssim_mean = 0.0, ssim_se = 0.0;
    double wall_clock_mean = 0.0, wall_clock_se = 0.0;
};
std::vector<T0CurveRow> aggregate_t0_curves(const std::vector<RunRow>& rows);

// The executable proof-check grid: 10 repetitions x t in {1,250,500,750,1000}
// x sigma_z in {0.1,1} on random dense 4x6 operators, verifying the
// closed-form divergences against gaussian_kl on the explicit pairs. Each
// repetition contributes one Theorem-1 row and one Theorem-2 row (200 rows).
// `injected_fault` shifts every closed form, for harness self-tests; `pass`
// uses |closed - lemma| <= 1e-10 * max(1, |closed|).
struct TheoremRow {
    std::size_t trial = 0;
    std::size_t t = 0;
    double closed_form = 0.0;
    double lemma1_value = 0.0;
    double mc_estimate = 0.0;
    double abs_err = 0.0;
    bool pass = false;
};
std::vector<TheoremRow> run_theorem_checks(std::size_t mc_samples = 20000,
                                           double injected_fault = 0.0);

// CSV writers. All write atomically (temp file + rename), always emit a
// header row, and print floating-point cells as full-precision scientific.
void write_summary_csv(const std::string& path, const std::vector<RunRow>& rows);
void write_t0_curves_csv(const std::string& path, const std::vector<T0CurveRow>& rows);
void write_theorem_csv(const std::string& path, const std::vector<TheoremRow>& rows);
void write_coefficient_csv(const std::string& path,
                           const std::vector<CoefficientPoint>& curve);

}  // namespace pw
