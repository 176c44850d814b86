// Noise schedule: frozen extended-precision oracle values, invariants, and
// DDIM coefficient arithmetic.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "piecewise/schedule.hpp"

namespace {

// alpha_bar reference values for the default schedule (T=1000, 1e-4..0.02),
// computed independently with exact rational arithmetic over the IEEE-double
// beta values and rounded to nearest double.
struct Probe {
    int t;
    double alpha_bar;
};
const Probe kProbes[] = {
    {1, 0.9999},
    {2, 0.9997800920720721},
    {100, 0.8970181456749604},
    {250, 0.5240853738253605},
    {300, 0.39641975945825253},
    {500, 0.07858724288177824},
    {600, 0.025879389423334898},
    {750, 0.0033505504389367796},
    {999, 4.118193638138452e-05},
    {1000, 4.035829765375683e-05},
};

}  // namespace

TEST_CASE("default schedule matches frozen oracle values") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    REQUIRE(s.T == 1000);
    CHECK(s.beta_at(1) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(s.beta_at(1000) == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(s.beta_at(500) == doctest::Approx(0.01004004004004004).epsilon(1e-15));
    for (const auto& p : kProbes) {
        CHECK(s.alpha_bar_at(p.t) == doctest::Approx(p.alpha_bar).epsilon(1e-12));
    }
}

TEST_CASE("two-step schedule has exact products") {
    auto s = pw::build_linear_schedule(2, 0.5, 0.5);
    CHECK(s.alpha_bar_at(1) == 0.5);
    CHECK(s.alpha_bar_at(2) == 0.25);
    CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("schedule invariants") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    double prev = 1.0;
    for (int t = 1; t <= s.T; ++t) {
        const double b = s.beta_at(t);
        const double ab = s.alpha_bar_at(t);
        CHECK(b > 0.0);
        CHECK(b < 1.0);
        CHECK(ab > 0.0);
        CHECK(ab < 1.0);
        CHECK(ab < prev);  // strictly decreasing
        // Recurrence alpha_bar[t] = (1−beta[t])·alpha_bar[t−1]
        CHECK(ab == doctest::Approx((1.0 - b) * prev).epsilon(1e-13));
        prev = ab;
        // Unit-circle identity for the mixing pair
        const double sa = std::sqrt(ab);
        const double sb = std::sqrt(1.0 - ab);
        CHECK(sa * sa + sb * sb == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("snr inverse coefficient") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    CHECK(pw::snr_inverse_coefficient(s, 1) == doctest::Approx(1.00010001e-4).epsilon(1e-8));

    auto s2 = pw::build_linear_schedule(2, 0.5, 0.5);
    CHECK(pw::snr_inverse_coefficient(s2, 2) == doctest::Approx(3.0).epsilon(1e-15));

    // Strictly increasing in t (the low-branch error coefficient grows with t).
    double prev = 0.0;
    for (int t = 1; t <= 1000; ++t) {
        const double v = pw::snr_inverse_coefficient(s, t);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(pw::snr_inverse_coefficient(s, 500) < pw::snr_inverse_coefficient(s, 1000));
    CHECK_THROWS_AS(pw::snr_inverse_coefficient(s, 0), pw::DomainError);
    CHECK_THROWS_AS(pw::snr_inverse_coefficient(s, 1001), pw::DomainError);
}

TEST_CASE("ddim coefficients: exact two-step case") {
    auto s = pw::build_linear_schedule(2, 0.5, 0.5);
    auto c = pw::ddim_coefficients(s, 2, 1.0);
    // c1 = √((1 − 0.25/0.5)·(1−0.5)/(1−0.25)) = √(1/3); c2 = √(0.5 − 1/3) = √(1/6)
    CHECK(c.c1 == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-15));
    CHECK(c.c2 == doctest::Approx(std::sqrt(1.0 / 6.0)).epsilon(1e-15));
    CHECK(c.sqrt_alpha_bar == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.snr_inv == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("ddim coefficients: eta=0 and boundary t=1") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    for (int t : {1, 2, 500, 1000}) {
        auto c = pw::ddim_coefficients(s, t, 0.0);
        CHECK(c.c1 == 0.0);
        CHECK(c.c2 ==
              doctest::Approx(std::sqrt(1.0 - s.alpha_bar_at(t - 1))).epsilon(1e-15));
    }
    // t=1 uses alpha_bar(0) = 1, so both coefficients collapse to zero.
    auto c1 = pw::ddim_coefficients(s, 1, 1.0);
    CHECK(c1.c1 == 0.0);
    CHECK(c1.c2 == 0.0);
}

TEST_CASE("ddim coefficients: c2 radicand is valid on the whole grid") {
    auto s = pw::build_linear_schedule(1000, 1e-4, 0.02);
    for (double eta : {0.0, 0.3, 0.7, 1.0}) {
        for (int t = 1; t <= 1000; ++t) {
            auto c = pw::ddim_coefficients(s, t, eta);
            CHECK(c.c1 >= 0.0);
            CHECK(c.c2 >= 0.0);
            CHECK(c.c1 * c.c1 + c.c2 * c.c2 <= 1.0 - s.alpha_bar_at(t - 1) + 1e-12);
        }
    }
}

TEST_CASE("constructor and query validation") {
    CHECK_THROWS_AS(pw::build_linear_schedule(1, 1e-4, 0.02), pw::DomainError);
    CHECK_THROWS_AS(pw::build_linear_schedule(10, 0.0, 0.02), pw::DomainError);
    CHECK_THROWS_AS(pw::build_linear_schedule(10, 0.03, 0.02), pw::DomainError);
    CHECK_THROWS_AS(pw::build_linear_schedule(10, 1e-4, 1.0), pw::DomainError);
    auto s = pw::build_linear_schedule(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.alpha_bar_at(-1), pw::DomainError);
    CHECK_THROWS_AS(s.alpha_bar_at(11), pw::DomainError);
    CHECK_THROWS_AS(pw::ddim_coefficients(s, 5, 1.5), pw::DomainError);
    CHECK_THROWS_AS(pw::ddim_coefficients(s, 0, 1.0), pw::DomainError);
}
