#pragma once
// The piecewise problem-specific score term ∇log p_t(y|x_t). Below the
// threshold step T₀ the data term uses the cheap low-noise Gaussian form
//
//     g_low = (1/(σ_z²·√ᾱ_t)) · Cᵀ(y − (1/√ᾱ_t)·C·x_t)
//
// which touches neither the denoiser nor its Jacobian; at and above T₀ it
// uses the denoiser-Jacobian form
//
//     g_high = (∂x̂₀/∂x_t)ᵀ · Cᵀ · (r_t²·C·Cᵀ + σ_z²·I)⁻¹ · (y − C·x̂₀)
//
// which costs one denoise and one vector-Jacobian product per step.

#include <functional>

#include "piecewise/common.hpp"
#include "piecewise/operators.hpp"
#include "piecewise/priors.hpp"
#include "piecewise/schedule.hpp"

namespace pw {

// Maps a timestep to the guidance radius r_t ≥ 0.
using RtSchedule = std::function<double(const NoiseSchedule&, std::size_t)>;

// Default: r_t = √(1−ᾱ_t), the variance of the forward perturbation.
RtSchedule rt_one_minus_alpha_bar();
RtSchedule rt_constant(double value);

struct GuidanceConfig {
    // Branch threshold, strict: t < T0 takes the low branch, t ≥ T0 the high
    // branch. 0 means every step is high (the pure Jacobian baseline); T+1
    // means every step is low.
    std::size_t T0 = 0;
    double k1 = 1.0;  // low-branch gain, ≥ 0
    double k2 = 1.0;  // high-branch gain, ≥ 0
    double eta = 1.0;  // DDIM stochasticity passed through to the sampler
    RtSchedule rt_schedule;  // null falls back to rt_one_minus_alpha_bar()
    // Noise level used when synthesizing measurements from a run config; the
    // guidance math itself always reads Measurement::sigma_z.
    double sigma_z = 0.0;
};

// Throws DomainError on T0 > T+1, negative gains, eta outside [0,1], or
// negative sigma_z.
void validate_guidance_config(const GuidanceConfig& cfg, const NoiseSchedule& s);

enum class GuidanceBranch { Low, High };

// Low-noise branch. Requires meas.sigma_z > 0: the denominator is σ_z², and
// silently regularizing a noiseless problem would hide model mismatch, so
// callers must set an explicit positive noise floor instead.
Vec guidance_low(const LinearOperator& op, const Measurement& meas, const NoiseSchedule& s,
                 std::size_t t, const Vec& x_t);

// Denoiser-Jacobian branch: one model.denoise plus exactly one
// model.vjp_denoise per invocation.
Vec guidance_high(const LinearOperator& op, const Measurement& meas, const NoiseSchedule& s,
                  std::size_t t, const Vec& x_t, const ScoreModel& model, double r_t);

// Branch select + gain: t < cfg.T0 → k₁·guidance_low, else k₂·guidance_high
// with r_t from the schedule. branch_out (optional) reports which branch
// fired.
Vec piecewise_guidance(const GuidanceConfig& cfg, const LinearOperator& op,
                       const Measurement& meas, const NoiseSchedule& s, std::size_t t,
                       const Vec& x_t, const ScoreModel& model,
                       GuidanceBranch* branch_out = nullptr);

}  // namespace pw
