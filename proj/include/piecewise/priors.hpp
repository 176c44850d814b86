#pragma once
// Score-model contract plus analytic prior backends. A ScoreModel supplies the
// three quantities the sampler needs at each step — noise prediction ε̂(x_t,t),
// the one-step denoiser x̂₀(x_t,t), and the denoiser vector-Jacobian product
// (∂x̂₀/∂x_t)ᵀ·w — and counts how often each is called.
//
// The Gaussian-mixture backend is exact: under the forward process the
// marginal of x_t is again a mixture, p_t(x) = Σᵢ wᵢ·N(x; √ᾱ_t·μᵢ,
// ᾱ_t·Σᵢ + (1−ᾱ_t)·I), so score, denoiser (Tweedie), and denoiser Jacobian
// (Tweedie second order, via the log-density Hessian) all have closed forms.

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include "piecewise/common.hpp"
#include "piecewise/linalg.hpp"
#include "piecewise/operators.hpp"
#include "piecewise/schedule.hpp"

namespace pw {

// Snapshot of how many times each model operation ran.
struct ScoreCallCounts {
    std::uint64_t predict_noise = 0;
    std::uint64_t denoise = 0;
    std::uint64_t vjp_denoise = 0;
};

// Abstract denoiser interface. Implementations must be immutable apart from
// the call counters, which are atomic so one model instance may serve
// concurrent samplers; clone() hands each run a fresh zero-count view that
// shares the (read-only) parameters.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual std::size_t dim() const = 0;

    // ε̂(x_t, t); t ∈ {1..T}.
    Vec predict_noise(const Vec& x_t, std::size_t t) const {
        counts_.predict_noise.fetch_add(1, std::memory_order_relaxed);
        return do_predict_noise(x_t, t);
    }

    // x̂₀(x_t, t) = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t; t ∈ {1..T}.
    Vec denoise(const Vec& x_t, std::size_t t) const {
        counts_.denoise.fetch_add(1, std::memory_order_relaxed);
        return do_denoise(x_t, t);
    }

    // (∂x̂₀/∂x_t)ᵀ·w; t ∈ {1..T}. Linear in w.
    Vec vjp_denoise(const Vec& x_t, std::size_t t, const Vec& w) const {
        counts_.vjp_denoise.fetch_add(1, std::memory_order_relaxed);
        return do_vjp_denoise(x_t, t, w);
    }

    // Same parameters, fresh zeroed counters.
    virtual std::unique_ptr<ScoreModel> clone() const = 0;

    ScoreCallCounts counts() const {
        return {counts_.predict_noise.load(std::memory_order_relaxed),
                counts_.denoise.load(std::memory_order_relaxed),
                counts_.vjp_denoise.load(std::memory_order_relaxed)};
    }
    void reset_counts() const {
        counts_.predict_noise.store(0, std::memory_order_relaxed);
        counts_.denoise.store(0, std::memory_order_relaxed);
        counts_.vjp_denoise.store(0, std::memory_order_relaxed);
    }

protected:
    virtual Vec do_predict_noise(const Vec& x_t, std::size_t t) const = 0;
    virtual Vec do_denoise(const Vec& x_t, std::size_t t) const = 0;
    virtual Vec do_vjp_denoise(const Vec& x_t, std::size_t t, const Vec& w) const = 0;

private:
    struct AtomicCounts {
        std::atomic<std::uint64_t> predict_noise{0};
        std::atomic<std::uint64_t> denoise{0};
        std::atomic<std::uint64_t> vjp_denoise{0};
    };
    mutable AtomicCounts counts_;
};

// Gaussian-mixture prior p₀. weights must be positive and sum to 1 (within
// 1e−12); every covariance must be symmetric positive definite.
struct GmmPrior {
    Vec weights;
    std::vector<Vec> means;
    std::vector<Matrix> covs;
};

// Analytic ScoreModel for a GmmPrior under a given schedule. Each component
// covariance is eigendecomposed once at construction; because
// ᾱ·Σ + (1−ᾱ)·I shares Σ's eigenvectors, every timestep reuses the same
// basis with shifted eigenvalues, so per-call work is O(k·n²).
class GmmScoreModel final : public ScoreModel {
public:
    GmmScoreModel(GmmPrior prior, NoiseSchedule schedule);

    std::size_t dim() const override;
    std::unique_ptr<ScoreModel> clone() const override;

    // log p_t(x); t = 0 queries the prior itself.
    double marginal_logpdf(std::size_t t, const Vec& x) const;
    // ∇ log p_t(x); t = 0 allowed as above.
    Vec score(std::size_t t, const Vec& x) const;

    const NoiseSchedule& schedule() const;

protected:
    Vec do_predict_noise(const Vec& x_t, std::size_t t) const override;
    Vec do_denoise(const Vec& x_t, std::size_t t) const override;
    Vec do_vjp_denoise(const Vec& x_t, std::size_t t, const Vec& w) const override;

private:
    struct Component {
        double log_weight = 0.0;
        Vec mean;
        Matrix u;  // eigenvectors of Σ, one per column
        Vec lam;   // eigenvalues of Σ
    };
    struct Shared {
        std::size_t n = 0;
        std::vector<Component> comps;
        NoiseSchedule schedule;
    };

    struct MixtureEval {
        double logpdf = 0.0;
        Vec resp;                // responsibilities rᵢ
        std::vector<Vec> comp_score;
        Vec score;               // Σᵢ rᵢ·(component score)
    };
    MixtureEval eval_mixture(std::size_t t, const Vec& x) const;

    explicit GmmScoreModel(std::shared_ptr<const Shared> shared) : shared_(std::move(shared)) {}

    std::shared_ptr<const Shared> shared_;
};

// Convenience wrappers over GmmScoreModel. Each call re-prepares the model
// (k eigendecompositions), so prefer holding a GmmScoreModel in loops.
double gmm_marginal_logpdf(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t,
                           const Vec& x_t);
Vec gmm_score(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t, const Vec& x_t);
Vec gmm_predict_noise(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t,
                      const Vec& x_t);
Vec gmm_vjp_denoise(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t, const Vec& x_t,
                    const Vec& w);

// Exact Gaussian posterior for x₀ ~ N(μ₀, Σ₀), y = C·x₀ + N(0, σ_z²·I):
// Σ_post = (Σ₀⁻¹ + CᵀC/σ_z²)⁻¹, μ_post = Σ_post·(Σ₀⁻¹·μ₀ + Cᵀy/σ_z²).
struct GaussianPosterior {
    Vec mean;
    Matrix cov;
};
GaussianPosterior gaussian_exact_posterior(const Vec& mu0, const Matrix& sigma0,
                                           const LinearOperator& op, const Vec& y,
                                           double sigma_z);

// x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε; t = 0 returns x₀ unchanged.
Vec forward_diffuse(const NoiseSchedule& s, std::size_t t, const Vec& x0, const Vec& eps);

}  // namespace pw
