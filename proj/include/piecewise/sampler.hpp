#pragma once
// Guided DDIM reverse loop: from x_T ~ N(0,I) down to a reconstruction, with
// the piecewise guidance term steering every step.
//
// The guidance term g ≈ ∇log p_t(y|x_t) can enter the DDIM update two ways:
//
//   GuidedNoise (default): fold g into the predicted noise before denoising,
//     ε̂_g = ε̂ − √(1−ᾱ_t)·g, then run the standard DDIM step on ε̂_g. This is
//     DDIM on the conditional score and reproduces the exact Gaussian
//     posterior when every step is guided.
//   Additive: run the unguided DDIM step and add √ᾱ_t·g afterwards,
//     x ← √ᾱ_{t−1}·x̂ + c1·ε + c2·ε̂ + √ᾱ_t·g. Simpler, but the correction is
//     not renormalized by the step, so strong gains can destabilize the
//     chain near t = 1.
//
// Randomness: every run consumes exactly n draws for x_T plus n draws per
// step, all from one xoshiro256++ stream seeded by the run seed, so results
// are bit-reproducible and independent of batch scheduling.

#include <cstdint>
#include <string>
#include <vector>

#include "piecewise/guidance.hpp"
#include "piecewise/operators.hpp"
#include "piecewise/priors.hpp"
#include "piecewise/schedule.hpp"

namespace pw {

enum class GuidanceCoupling { GuidedNoise, Additive };

struct SamplerOptions {
    // Snapshot the pre-update state x_t whenever t is a multiple; 0 disables.
    std::size_t snapshot_every = 0;
    bool record_guidance_norms = true;
    GuidanceCoupling coupling = GuidanceCoupling::GuidedNoise;
};

struct StepLog {
    std::size_t t = 0;
    GuidanceBranch branch = GuidanceBranch::High;
    double guidance_norm = 0.0;  // ‖g‖₂ when recorded, else 0
    Vec snapshot;                // x_t when snapshotted, else empty
};

struct RunRecord {
    Vec x_final;
    std::vector<StepLog> steps;  // exactly T entries, ordered t = T..1
    std::uint64_t vjp_calls = 0;
    std::uint64_t denoise_calls = 0;
    double wall_clock_total = 0.0;  // seconds
    double wall_clock_low = 0.0;    // seconds spent in low-branch steps
    double wall_clock_high = 0.0;   // seconds spent in high-branch steps
    std::uint64_t seed = 0;
};

// One full reverse chain. Throws NonFiniteError (with step, branch, ‖g‖)
// the moment the state stops being finite.
RunRecord sample_posterior(const GuidanceConfig& cfg, const LinearOperator& op,
                           const Measurement& meas, const NoiseSchedule& s,
                           const ScoreModel& model, std::uint64_t seed,
                           const SamplerOptions& opts = {});

// Plain DDIM ancestral sampling from the prior (guidance disabled).
Vec sample_unconditional(const NoiseSchedule& s, const ScoreModel& model, std::uint64_t seed,
                         double eta = 1.0);

// One entry of a batch. Pointed-to inputs are read-only and must outlive the
// run_batch call.
struct BatchItem {
    GuidanceConfig cfg;
    const LinearOperator* op = nullptr;
    Measurement meas;
    const NoiseSchedule* schedule = nullptr;
    const ScoreModel* model = nullptr;
    std::uint64_t seed = 0;
    SamplerOptions opts;
};

// Outcome of one batch entry; `error` is empty on success.
struct BatchResult {
    RunRecord record;
    std::string error;
};

// Runs every item, up to `parallelism` at a time, and returns results in
// input order. Each run samples on a clone of its model so call counts are
// attributed per run; failures are captured per item, never aborting the
// batch.
std::vector<BatchResult> run_batch(const std::vector<BatchItem>& items, std::size_t parallelism);

}  // namespace pw
