// Piecewise guidance: both branches against closed forms and dense oracles,
// branch selection, gain scaling, and call accounting.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>

#include "piecewise/guidance.hpp"

namespace {

struct TestRng {
    std::uint64_t s;
    double next() {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(static_cast<std::int64_t>(s >> 11)) * 0x1.0p-52 - 1.0;
    }
};

pw::Vec random_vec(std::size_t n, TestRng& rng) {
    pw::Vec v(n);
    for (auto& x : v) x = rng.next();
    return v;
}

pw::Matrix random_spd(std::size_t n, TestRng& rng, double diag = 0.5) {
    pw::Matrix a(n, n);
    for (auto& v : a.a) v = rng.next();
    pw::Matrix s = pw::matmul(a, pw::transpose(a));
    for (std::size_t i = 0; i < n; ++i) s.at(i, i) += diag;
    return s;
}

pw::GmmPrior unit_gaussian(std::size_t n) {
    pw::GmmPrior p;
    p.weights = {1.0};
    p.means = {pw::Vec(n, 0.0)};
    p.covs = {pw::Matrix::identity(n)};
    return p;
}

pw::GmmPrior random_gmm(std::size_t n, std::size_t k, TestRng& rng) {
    pw::GmmPrior p;
    p.weights.assign(k, 1.0 / static_cast<double>(k));
    for (std::size_t i = 0; i < k; ++i) {
        pw::Vec mu = random_vec(n, rng);
        for (auto& v : mu) v *= 2.0;
        p.means.push_back(mu);
        p.covs.push_back(random_spd(n, rng, 0.4));
    }
    return p;
}

// Nearly noiseless two-step schedule: ᾱ_t ≈ 1 at both steps.
pw::NoiseSchedule almost_clean_schedule() { return pw::build_linear_schedule(2, 1e-9, 1e-9); }

}  // namespace

TEST_CASE("low branch returns the scaled back-projected residual") {
    auto s = almost_clean_schedule();
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec{1.0, 0.0}, 1.0};
    pw::Vec g = pw::guidance_low(op, meas, s, 1, pw::Vec(2, 0.0));
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("low branch vanishes on a consistent measurement") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    auto op = pw::make_center_mask(4, 4, 1, 2, 2);
    TestRng rng{4};
    pw::Vec x = random_vec(16, rng);
    const std::size_t t = 321;
    const double sqrt_abar = std::sqrt(s.alpha_bar_at(t));
    pw::Vec y = op.apply(x);
    for (auto& v : y) v /= sqrt_abar;
    pw::Measurement meas{y, 0.5};
    pw::Vec g = pw::guidance_low(op, meas, s, t, x);
    for (double v : g) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("low branch matches its dense-operator evaluation") {
    auto s2 = pw::build_linear_schedule(2, 0.5, 0.5);  // alpha_bar[2] = 0.25
    auto op = pw::make_center_mask(4, 4, 1, 2, 2);
    TestRng rng{12};
    pw::Vec x = random_vec(16, rng);
    pw::Measurement meas{random_vec(op.m(), rng), 0.5};

    pw::Vec g = pw::guidance_low(op, meas, s2, 2, x);

    // Same formula through the explicit matrix.
    const double sqrt_abar = 0.5;
    pw::Matrix c = op.to_dense();
    pw::Vec cx = pw::matvec(c, x);
    pw::Vec resid(op.m());
    for (std::size_t i = 0; i < op.m(); ++i) resid[i] = meas.y[i] - cx[i] / sqrt_abar;
    pw::Vec want = pw::matvec_t(c, resid);
    for (auto& v : want) v /= meas.sigma_z * meas.sigma_z * sqrt_abar;

    for (std::size_t i = 0; i < 16; ++i)
        CHECK(g[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("low branch rejects a zero noise level") {
    auto s = pw::build_linear_schedule(10, 1e-4, 0.02);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec(2, 0.0), 0.0};
    CHECK_THROWS_AS(pw::guidance_low(op, meas, s, 5, pw::Vec(2, 0.0)), pw::DomainError);
}

TEST_CASE("high branch reduces to the residual when every factor is identity") {
    auto s = almost_clean_schedule();
    pw::GmmScoreModel model(unit_gaussian(2), s);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec{0.8, -0.3}, 1.0};
    pw::Vec x{0.1, 0.4};
    pw::Vec g = pw::guidance_high(op, meas, s, 1, x, model, 0.0);
    CHECK(g[0] == doctest::Approx(meas.y[0] - x[0]).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(meas.y[1] - x[1]).epsilon(1e-6));
}

TEST_CASE("high branch vanishes when the denoised estimate explains the data") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    TestRng rng{9};
    pw::GmmScoreModel model(random_gmm(6, 2, rng), s);
    auto op = pw::make_random_mask(3, 2, 1, 0.3, 11);
    const std::size_t t = 600;
    pw::Vec x = random_vec(6, rng);
    pw::Vec x0 = model.denoise(x, t);
    pw::Measurement meas{op.apply(x0), 0.4};
    pw::Vec g = pw::guidance_high(op, meas, s, t, x, model, 0.7);
    for (double v : g) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("high branch matches a dense finite-difference construction") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    TestRng rng{27};
    const std::size_t n = 8;
    pw::GmmScoreModel model(random_gmm(n, 2, rng), s);
    auto op = pw::make_random_mask(4, 2, 1, 0.25, 3);  // keeps 6 of 8
    pw::Vec x = random_vec(n, rng);
    pw::Measurement meas{random_vec(op.m(), rng), 0.6};
    const std::size_t t = 500;
    const double r_t = 0.9;

    pw::Vec g = pw::guidance_high(op, meas, s, t, x, model, r_t);

    // Dense oracle: J from central differences of the denoiser, explicit
    // inverse of (r²CCᵀ + σ²I).
    const double h = 1e-6;
    pw::Matrix j(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        pw::Vec hi = x, lo = x;
        hi[col] += h;
        lo[col] -= h;
        pw::Vec dhi = model.denoise(hi, t);
        pw::Vec dlo = model.denoise(lo, t);
        for (std::size_t row = 0; row < n; ++row)
            j.at(row, col) = (dhi[row] - dlo[row]) / (2.0 * h);
    }
    pw::Matrix c = op.to_dense();
    pw::Matrix sys = pw::matmul(c, pw::transpose(c));
    for (auto& v : sys.a) v *= r_t * r_t;
    for (std::size_t i = 0; i < op.m(); ++i)
        sys.at(i, i) += meas.sigma_z * meas.sigma_z;
    pw::Matrix inv = pw::chol_inverse(pw::cholesky(sys));

    pw::Vec x0 = model.denoise(x, t);
    pw::Vec resid(op.m());
    pw::Vec cx0 = pw::matvec(c, x0);
    for (std::size_t i = 0; i < op.m(); ++i) resid[i] = meas.y[i] - cx0[i];
    pw::Vec want = pw::matvec_t(j, pw::matvec_t(c, pw::matvec(inv, resid)));

    for (std::size_t i = 0; i < n; ++i)
        CHECK(g[i] == doctest::Approx(want[i]).epsilon(1e-4));
}

TEST_CASE("both branches match closed forms for the unit gaussian prior") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    pw::GmmScoreModel model(unit_gaussian(2), s);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    TestRng rng{41};
    const std::size_t t = 300;
    const double abar = s.alpha_bar_at(t);
    const double sq = std::sqrt(abar);
    pw::Vec x = random_vec(2, rng);
    pw::Measurement meas{random_vec(2, rng), 0.7};

    pw::Vec low = pw::guidance_low(op, meas, s, t, x);
    for (std::size_t i = 0; i < 2; ++i) {
        const double want = (meas.y[i] - x[i] / sq) / (meas.sigma_z * meas.sigma_z * sq);
        CHECK(low[i] == doctest::Approx(want).epsilon(1e-10));
    }

    // For N(0,I): x̂₀ = √ᾱ·x, ∂x̂₀/∂x = √ᾱ·I, CCᵀ = I.
    const double r_t = 0.9;
    pw::Vec high = pw::guidance_high(op, meas, s, t, x, model, r_t);
    for (std::size_t i = 0; i < 2; ++i) {
        const double want =
            sq * (meas.y[i] - sq * x[i]) / (r_t * r_t + meas.sigma_z * meas.sigma_z);
        CHECK(high[i] == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("piecewise guidance picks the branch with a strict threshold") {
    auto s = pw::build_linear_schedule(10, 1e-4, 0.02);
    pw::GmmScoreModel model(unit_gaussian(2), s);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec{0.5, 0.5}, 0.8};
    pw::Vec x{0.2, -0.1};

    pw::GuidanceConfig cfg;
    cfg.sigma_z = meas.sigma_z;

    // T0 = 0: always high, even at t = 1.
    cfg.T0 = 0;
    pw::GuidanceBranch branch = pw::GuidanceBranch::Low;
    pw::piecewise_guidance(cfg, op, meas, s, 1, x, model, &branch);
    CHECK(branch == pw::GuidanceBranch::High);

    // t = T0 is high (predicate is t < T0 for low).
    cfg.T0 = 5;
    pw::piecewise_guidance(cfg, op, meas, s, 5, x, model, &branch);
    CHECK(branch == pw::GuidanceBranch::High);
    pw::piecewise_guidance(cfg, op, meas, s, 4, x, model, &branch);
    CHECK(branch == pw::GuidanceBranch::Low);

    // T0 = T+1: every step low.
    cfg.T0 = 11;
    pw::piecewise_guidance(cfg, op, meas, s, 10, x, model, &branch);
    CHECK(branch == pw::GuidanceBranch::Low);
}

TEST_CASE("low-branch steps never touch the denoiser") {
    auto s = pw::build_linear_schedule(8, 1e-4, 0.02);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec{0.5, 0.5}, 0.8};
    pw::Vec x{0.2, -0.1};

    for (std::size_t t0 : {std::size_t{0}, std::size_t{1}, std::size_t{3}, std::size_t{8},
                           std::size_t{9}}) {
        pw::GmmScoreModel model(unit_gaussian(2), s);
        pw::GuidanceConfig cfg;
        cfg.T0 = t0;
        for (std::size_t t = s.T; t >= 1; --t)
            pw::piecewise_guidance(cfg, op, meas, s, t, x, model);
        const auto counts = model.counts();
        const std::size_t high_steps = t0 > s.T ? 0 : s.T - (t0 > 0 ? t0 : 1) + 1;
        CHECK(counts.vjp_denoise == high_steps);
        CHECK(counts.denoise == high_steps);
        CHECK(counts.predict_noise == 0);
    }
}

TEST_CASE("guidance gains scale each branch linearly") {
    auto s = pw::build_linear_schedule(100, 1e-4, 0.02);
    pw::GmmScoreModel model(unit_gaussian(3), s);
    auto op = pw::make_dense(pw::Matrix::identity(3));
    TestRng rng{60};
    pw::Measurement meas{random_vec(3, rng), 0.5};
    pw::Vec x = random_vec(3, rng);

    pw::GuidanceConfig cfg;
    cfg.T0 = 50;

    cfg.k1 = 1.0;
    pw::Vec low1 = pw::piecewise_guidance(cfg, op, meas, s, 10, x, model);
    cfg.k1 = 2.5;
    pw::Vec low2 = pw::piecewise_guidance(cfg, op, meas, s, 10, x, model);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(low2[i] == doctest::Approx(2.5 * low1[i]).epsilon(1e-12));
    cfg.k1 = 0.0;
    pw::Vec zero = pw::piecewise_guidance(cfg, op, meas, s, 10, x, model);
    for (double v : zero) CHECK(v == 0.0);

    cfg.k2 = 1.0;
    pw::Vec high1 = pw::piecewise_guidance(cfg, op, meas, s, 80, x, model);
    cfg.k2 = 0.3;
    pw::Vec high2 = pw::piecewise_guidance(cfg, op, meas, s, 80, x, model);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(high2[i] == doctest::Approx(0.3 * high1[i]).epsilon(1e-12));
}

TEST_CASE("rt schedules feed the high branch") {
    auto s = pw::build_linear_schedule(100, 1e-4, 0.02);
    pw::GmmScoreModel model(unit_gaussian(2), s);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec{1.0, -1.0}, 0.5};
    pw::Vec x{0.3, 0.3};
    const std::size_t t = 40;

    // Default (null) and the explicit factory agree.
    pw::GuidanceConfig cfg;
    pw::Vec def = pw::piecewise_guidance(cfg, op, meas, s, t, x, model);
    cfg.rt_schedule = pw::rt_one_minus_alpha_bar();
    pw::Vec named = pw::piecewise_guidance(cfg, op, meas, s, t, x, model);
    for (std::size_t i = 0; i < 2; ++i) CHECK(def[i] == named[i]);

    // Constant schedule matches calling the branch directly.
    cfg.rt_schedule = pw::rt_constant(0.25);
    pw::Vec got = pw::piecewise_guidance(cfg, op, meas, s, t, x, model);
    pw::Vec want = pw::guidance_high(op, meas, s, t, x, model, 0.25);
    for (std::size_t i = 0; i < 2; ++i) CHECK(got[i] == want[i]);

    CHECK_THROWS_AS(pw::rt_constant(-1.0), pw::DomainError);
}

TEST_CASE("config validation rejects out-of-domain fields") {
    auto s = pw::build_linear_schedule(10, 1e-4, 0.02);
    pw::GuidanceConfig cfg;

    cfg.T0 = 12;  // T+1 = 11 is the maximum
    CHECK_THROWS_AS(pw::validate_guidance_config(cfg, s), pw::DomainError);
    cfg.T0 = 11;
    CHECK_NOTHROW(pw::validate_guidance_config(cfg, s));

    cfg.k1 = -0.5;
    CHECK_THROWS_AS(pw::validate_guidance_config(cfg, s), pw::DomainError);
    cfg.k1 = 1.0;
    cfg.eta = 1.5;
    CHECK_THROWS_AS(pw::validate_guidance_config(cfg, s), pw::DomainError);
    cfg.eta = 0.5;
    cfg.sigma_z = -1.0;
    CHECK_THROWS_AS(pw::validate_guidance_config(cfg, s), pw::DomainError);
}

TEST_CASE("singular gram systems surface as numerical errors") {
    auto s = pw::build_linear_schedule(10, 1e-4, 0.02);
    pw::GmmScoreModel model(unit_gaussian(2), s);
    auto op = pw::make_dense(pw::Matrix::identity(2));
    pw::Measurement meas{pw::Vec{1.0, 1.0}, 0.0};  // σ_z = 0 and r_t = 0
    CHECK_THROWS_AS(pw::guidance_high(op, meas, s, 5, pw::Vec(2, 0.0), model, 0.0),
                    pw::NumericalError);
}
