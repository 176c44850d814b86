#pragma once
// Discrete variance-preserving noise schedule: β_t, ᾱ_t, and the per-step
// coefficients used by the sampler and the KL analysis. Timesteps are 1-based
// (t ∈ {1..T}) with ᾱ₀ ≡ 1, so ᾱ_{t−1} is well defined at t = 1.

#include "piecewise/common.hpp"

namespace pw {

struct NoiseSchedule {
    int T = 0;
    Vec beta;       // beta[t-1] is β_t, t ∈ {1..T}
    Vec alpha_bar;  // alpha_bar[t-1] is ᾱ_t = ∏_{i≤t}(1−β_i)

    double beta_at(int t) const;       // t ∈ [1, T]
    double alpha_bar_at(int t) const;  // t ∈ [0, T]; alpha_bar_at(0) = 1
};

struct StepCoefficients {
    double sqrt_alpha_bar;            // √ᾱ_t
    double sqrt_one_minus_alpha_bar;  // √(1−ᾱ_t)
    double snr_inv;                   // (1−ᾱ_t)/ᾱ_t
    double c1;                        // fresh-noise DDIM coefficient
    double c2;                        // predicted-noise DDIM coefficient
};

// Linear β interpolation from beta_start to beta_end across t = 1..T.
// Requires 0 < beta_start ≤ beta_end < 1 and T ≥ 2.
NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end);

// (1−ᾱ_t)/ᾱ_t, the coefficient governing the low-branch approximation error.
double snr_inverse_coefficient(const NoiseSchedule& s, int t);

// DDIM step coefficients at timestep t with stochasticity η ∈ [0, 1]:
//   c1 = η·√((1 − ᾱ_t/ᾱ_{t−1})·(1−ᾱ_{t−1})/(1−ᾱ_t)),  c2 = √(1 − ᾱ_{t−1} − c1²).
// The c2 radicand is clamped to 0 when within 1e−12 below it; a larger
// violation raises NumericalError.
StepCoefficients ddim_coefficients(const NoiseSchedule& s, int t, double eta);

}  // namespace pw
