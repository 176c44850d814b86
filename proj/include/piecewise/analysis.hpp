// Closed-form KL divergences between the true and approximated measurement
// distributions, together with Monte-Carlo cross-checks.
//
// For a linear observation y = C x0 + z the guidance approximations replace
// the intractable conditional p(y | x_t) by a Gaussian surrogate. Both the
// true conditional (under a Gaussian prior slice) and the surrogate are
// Gaussians with covariance sigma_z^2 I, so their divergence has the closed
// form
//
//     KL = (1 / (2 sigma_z^2)) * ((1 - abar_t) / abar_t) * ||C d||^2
//
// where d is the residual noise direction: d = v_t for the zeroth-order
// surrogate and d = v_t - v_hat when a denoiser estimate v_hat is subtracted
// first. kl_theorem1/kl_theorem2 return the closed form and internally verify
// it against gaussian_kl applied to the two explicitly constructed
// distributions.

#pragma once

#include <cstdint>
#include <vector>

#include "piecewise/common.hpp"
#include "piecewise/linalg.hpp"
#include "piecewise/operators.hpp"
#include "piecewise/schedule.hpp"

namespace pw {

// A multivariate normal given by moments. The covariance must be symmetric
// (entrywise within 1e-12 relative to its largest element) and positive
// definite; operations factorize it and throw NumericalError otherwise.
struct GaussianDist {
    Vec mean;
    Matrix covariance;
};

// Throws DomainError if the shape or symmetry requirements are violated.
void validate_gaussian(const GaussianDist& d);

// KL(p || q) for Gaussians of equal dimension k:
//   0.5 * [ log(|S2|/|S1|) - k + tr(S2^-1 S1) + (m2-m1)^T S2^-1 (m2-m1) ].
double gaussian_kl(const GaussianDist& p, const GaussianDist& q);

// Log-density of x under d.
double gaussian_logpdf(const GaussianDist& d, const Vec& x);

// Monte-Carlo estimate of KL(p || q) as the sample mean of log p - log q
// over draws from p. Antithetic pairs (mu + L z, mu - L z) share each normal
// draw to cut the estimator variance. Deterministic for a fixed seed.
double mc_gaussian_kl(const GaussianDist& p, const GaussianDist& q, std::size_t samples,
                      std::uint64_t seed);

// The two explicit measurement distributions compared by the closed forms.
// Both live in measurement space R^m with covariance sigma_z^2 I; the truth
// carries the extra -sqrt(1-abar)/sqrt(abar) * C v_t mean term, and the
// surrogate subtracts the denoiser estimate v_hat instead (zero for the
// zeroth-order version). Their KL does not depend on x_t, which only shifts
// both means by C x_t / sqrt(abar).
struct TheoremPair {
    GaussianDist true_dist;
    GaussianDist approx_dist;
};
TheoremPair theorem1_pair(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                          const Vec& x_t, const Vec& v_t, double sigma_z);
TheoremPair theorem2_pair(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                          const Vec& x_t, const Vec& v_t, const Vec& v_hat, double sigma_z);

// Closed-form divergence of the zeroth-order surrogate:
//   (1/(2 sigma_z^2)) * ((1-abar_t)/abar_t) * ||C v_t||^2.
// Cross-checked internally against gaussian_kl on theorem1_pair.
double kl_theorem1(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                   const Vec& v_t, double sigma_z);

// Same with the denoiser estimate subtracted: ||C (v_t - v_hat)||^2 replaces
// ||C v_t||^2. With v_hat = 0 this reduces to kl_theorem1.
double kl_theorem2(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                   const Vec& v_t, const Vec& v_hat, double sigma_z);

// The divergence prefactor (1-abar_t)/abar_t for t = 1..T. Strictly positive
// and strictly increasing; the whole table is meant for log-scale plots.
struct CoefficientPoint {
    std::size_t t;
    double value;
};
std::vector<CoefficientPoint> coefficient_curve(const NoiseSchedule& s);

}  // namespace pw
