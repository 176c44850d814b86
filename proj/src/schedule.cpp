#include "piecewise/schedule.hpp"

#include <cmath>
#include <string>

namespace pw {

namespace {

void check_t(int t, int T, int lo, const char* who) {
    if (t < lo || t > T)
        throw DomainError(std::string(who) + ": timestep " + std::to_string(t) +
                          " outside [" + std::to_string(lo) + ", " + std::to_string(T) + "]");
}

}  // namespace

double NoiseSchedule::beta_at(int t) const {
    check_t(t, T, 1, "beta_at");
    return beta[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar_at(int t) const {
    check_t(t, T, 0, "alpha_bar_at");
    if (t == 0) return 1.0;
    return alpha_bar[static_cast<std::size_t>(t) - 1];
}

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw DomainError("build_linear_schedule: T must be >= 2");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw DomainError("build_linear_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T));

    // Accumulate the product in extended precision to keep ᾱ_T (which decays
    // to ~1e−5 over 1000 factors) accurate to the last few double ulps.
    long double prod = 1.0L;
    for (int t = 1; t <= T; ++t) {
        const double b = beta_start + (t - 1) * (beta_end - beta_start) / (T - 1);
        prod *= 1.0L - static_cast<long double>(b);
        s.beta[static_cast<std::size_t>(t) - 1] = b;
        s.alpha_bar[static_cast<std::size_t>(t) - 1] = static_cast<double>(prod);
    }
    return s;
}

double snr_inverse_coefficient(const NoiseSchedule& s, int t) {
    check_t(t, s.T, 1, "snr_inverse_coefficient");
    const double ab = s.alpha_bar_at(t);
    return (1.0 - ab) / ab;
}

StepCoefficients ddim_coefficients(const NoiseSchedule& s, int t, double eta) {
    check_t(t, s.T, 1, "ddim_coefficients");
    if (!(eta >= 0.0) || !(eta <= 1.0))
        throw DomainError("ddim_coefficients: eta must lie in [0, 1]");

    const double ab = s.alpha_bar_at(t);
    const double ab_prev = s.alpha_bar_at(t - 1);

    StepCoefficients c;
    c.sqrt_alpha_bar = std::sqrt(ab);
    c.sqrt_one_minus_alpha_bar = std::sqrt(1.0 - ab);
    c.snr_inv = (1.0 - ab) / ab;
    c.c1 = eta * std::sqrt((1.0 - ab / ab_prev) * (1.0 - ab_prev) / (1.0 - ab));
    double rad = 1.0 - ab_prev - c.c1 * c.c1;
    if (rad < 0.0) {
        if (rad < -1e-12)
            throw NumericalError("ddim_coefficients: negative c2 radicand " + std::to_string(rad));
        rad = 0.0;
    }
    c.c2 = std::sqrt(rad);
    return c;
}

}  // namespace pw
