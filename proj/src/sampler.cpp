#include "piecewise/sampler.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "piecewise/kernels.hpp"
#include "piecewise/rng.hpp"

namespace pw {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Vec draw_normal(Xoshiro256pp& rng, std::size_t n) {
    Vec v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

RunRecord sample_posterior(const GuidanceConfig& cfg, const LinearOperator& op,
                           const Measurement& meas, const NoiseSchedule& s,
                           const ScoreModel& model, std::uint64_t seed,
                           const SamplerOptions& opts) {
    validate_guidance_config(cfg, s);
    const std::size_t n = model.dim();
    if (op.n() != n)
        throw DomainError("sample_posterior: operator width " + std::to_string(op.n()) +
                          " does not match model dimension " + std::to_string(n));

    const auto run_start = Clock::now();
    const auto t_count = static_cast<std::size_t>(s.T);

    RunRecord rec;
    rec.seed = seed;
    rec.steps.reserve(t_count);

    // All counters restart from zero on a private clone; the caller's model
    // keeps its aggregate counts untouched.
    std::unique_ptr<ScoreModel> local = model.clone();

    Xoshiro256pp rng(seed);
    Vec x = draw_normal(rng, n);
    Vec xhat(n), eps_g(n);

    for (std::size_t t = t_count; t >= 1; --t) {
        const auto step_start = Clock::now();

        const double abar = s.alpha_bar_at(t);
        const double abar_prev = s.alpha_bar_at(t - 1);
        const double sq_abar = std::sqrt(abar);
        const double sq_prev = std::sqrt(abar_prev);
        const double sq_one_minus = std::sqrt(1.0 - abar);

        Vec eps_hat = local->predict_noise(x, t);
        GuidanceBranch branch = GuidanceBranch::High;
        Vec g = piecewise_guidance(cfg, op, meas, s, t, x, *local, &branch);
        const double g_norm = std::sqrt(kern::sumsq(g.data(), n));

        const StepCoefficients coef = ddim_coefficients(s, t, cfg.eta);
        Vec eps = draw_normal(rng, n);  // drawn every step to pin the stream layout

        StepLog log;
        log.t = t;
        log.branch = branch;
        if (opts.record_guidance_norms) log.guidance_norm = g_norm;
        if (opts.snapshot_every > 0 && t % opts.snapshot_every == 0) log.snapshot = x;

        if (opts.coupling == GuidanceCoupling::GuidedNoise) {
            // Conditional noise ε̂_g = ε̂ − √(1−ᾱ_t)·g drives both the
            // denoised estimate and the DDIM direction term.
            kern::axpby(-sq_one_minus, g.data(), 1.0, eps_hat.data(), eps_g.data(), n);
            kern::axpby(1.0 / sq_abar, x.data(), -sq_one_minus / sq_abar, eps_g.data(),
                        xhat.data(), n);
            kern::axpbypcz(sq_prev, xhat.data(), coef.c1, eps.data(), coef.c2, eps_g.data(),
                           x.data(), n);
        } else {
            kern::axpby(1.0 / sq_abar, x.data(), -sq_one_minus / sq_abar, eps_hat.data(),
                        xhat.data(), n);
            kern::axpbypcz(sq_prev, xhat.data(), coef.c1, eps.data(), coef.c2, eps_hat.data(),
                           x.data(), n);
            kern::axpy(sq_abar, g.data(), x.data(), n);
        }

        if (!all_finite(x)) {
            const int branch_id = branch == GuidanceBranch::Low ? 0 : 1;
            throw NonFiniteError("sample_posterior: non-finite state after step t=" +
                                     std::to_string(t) + " (branch " +
                                     (branch_id == 0 ? std::string("low") : std::string("high")) +
                                     ", ‖g‖=" + std::to_string(g_norm) + ")",
                                 static_cast<int>(t), branch_id, g_norm);
        }

        rec.steps.push_back(std::move(log));
        const double elapsed = seconds_since(step_start);
        if (branch == GuidanceBranch::Low)
            rec.wall_clock_low += elapsed;
        else
            rec.wall_clock_high += elapsed;
    }

    const auto counts = local->counts();
    rec.vjp_calls = counts.vjp_denoise;
    rec.denoise_calls = counts.denoise;
    rec.x_final = std::move(x);
    rec.wall_clock_total = seconds_since(run_start);
    return rec;
}

Vec sample_unconditional(const NoiseSchedule& s, const ScoreModel& model, std::uint64_t seed,
                         double eta) {
    const std::size_t n = model.dim();
    Xoshiro256pp rng(seed);
    Vec x = draw_normal(rng, n);
    Vec xhat(n);

    for (auto t = static_cast<std::size_t>(s.T); t >= 1; --t) {
        const double abar = s.alpha_bar_at(t);
        const double sq_abar = std::sqrt(abar);
        const double sq_prev = std::sqrt(s.alpha_bar_at(t - 1));
        const double sq_one_minus = std::sqrt(1.0 - abar);

        Vec eps_hat = model.predict_noise(x, t);
        const StepCoefficients coef = ddim_coefficients(s, t, eta);
        Vec eps = draw_normal(rng, n);

        kern::axpby(1.0 / sq_abar, x.data(), -sq_one_minus / sq_abar, eps_hat.data(),
                    xhat.data(), n);
        kern::axpbypcz(sq_prev, xhat.data(), coef.c1, eps.data(), coef.c2, eps_hat.data(),
                       x.data(), n);

        if (!all_finite(x))
            throw NonFiniteError("sample_unconditional: non-finite state after step t=" +
                                     std::to_string(t),
                                 static_cast<int>(t), 1, 0.0);
    }
    return x;
}

std::vector<BatchResult> run_batch(const std::vector<BatchItem>& items,
                                   std::size_t parallelism) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const BatchItem& it = items[i];
        if (!it.op || !it.schedule || !it.model)
            throw DomainError("run_batch: item " + std::to_string(i) +
                              " is missing operator, schedule, or model");
    }

    std::vector<BatchResult> results(items.size());
    if (items.empty()) return results;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= items.size()) return;
            const BatchItem& it = items[i];
            try {
                results[i].record = sample_posterior(it.cfg, *it.op, it.meas, *it.schedule,
                                                     *it.model, it.seed, it.opts);
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        }
    };

    const std::size_t workers = std::min(parallelism > 0 ? parallelism : 1, items.size());
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace pw
