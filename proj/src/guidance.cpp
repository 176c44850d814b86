#include "piecewise/guidance.hpp"

#include <cmath>
#include <string>

#include "piecewise/kernels.hpp"

namespace pw {

namespace {

void check_step(std::size_t t, const NoiseSchedule& s, const char* who) {
    if (t < 1 || t > static_cast<std::size_t>(s.T))
        throw DomainError(std::string(who) + ": timestep " + std::to_string(t) +
                          " outside [1, " + std::to_string(s.T) + "]");
}

void check_shapes(const LinearOperator& op, const Measurement& meas, const Vec& x_t,
                  const char* who) {
    if (x_t.size() != op.n())
        throw DomainError(std::string(who) + ": state length " + std::to_string(x_t.size()) +
                          ", operator expects " + std::to_string(op.n()));
    if (meas.y.size() != op.m())
        throw DomainError(std::string(who) + ": measurement length " +
                          std::to_string(meas.y.size()) + ", operator produces " +
                          std::to_string(op.m()));
}

}  // namespace

RtSchedule rt_one_minus_alpha_bar() {
    return [](const NoiseSchedule& s, std::size_t t) {
        return std::sqrt(1.0 - s.alpha_bar_at(t));
    };
}

RtSchedule rt_constant(double value) {
    if (!(value >= 0.0)) throw DomainError("rt_constant: r_t must be nonnegative");
    return [value](const NoiseSchedule&, std::size_t) { return value; };
}

void validate_guidance_config(const GuidanceConfig& cfg, const NoiseSchedule& s) {
    if (cfg.T0 > static_cast<std::size_t>(s.T) + 1)
        throw DomainError("guidance config: T0 = " + std::to_string(cfg.T0) +
                          " exceeds T+1 = " + std::to_string(s.T + 1));
    if (!(cfg.k1 >= 0.0)) throw DomainError("guidance config: k1 must be nonnegative");
    if (!(cfg.k2 >= 0.0)) throw DomainError("guidance config: k2 must be nonnegative");
    if (!(cfg.eta >= 0.0) || !(cfg.eta <= 1.0))
        throw DomainError("guidance config: eta must lie in [0, 1]");
    if (!(cfg.sigma_z >= 0.0)) throw DomainError("guidance config: sigma_z must be nonnegative");
}

Vec guidance_low(const LinearOperator& op, const Measurement& meas, const NoiseSchedule& s,
                 std::size_t t, const Vec& x_t) {
    check_step(t, s, "guidance_low");
    check_shapes(op, meas, x_t, "guidance_low");
    if (!(meas.sigma_z > 0.0))
        throw DomainError(
            "guidance_low: sigma_z = 0 is unsupported; noiseless problems need an explicit "
            "positive noise floor");

    const double sqrt_abar = std::sqrt(s.alpha_bar_at(t));
    Vec resid = op.apply(x_t);
    for (std::size_t i = 0; i < resid.size(); ++i)
        resid[i] = meas.y[i] - resid[i] / sqrt_abar;
    Vec g = op.apply_transpose(resid);
    kern::scal(1.0 / (meas.sigma_z * meas.sigma_z * sqrt_abar), g.data(), g.size());
    return g;
}

Vec guidance_high(const LinearOperator& op, const Measurement& meas, const NoiseSchedule& s,
                  std::size_t t, const Vec& x_t, const ScoreModel& model, double r_t) {
    check_step(t, s, "guidance_high");
    check_shapes(op, meas, x_t, "guidance_high");
    if (!(r_t >= 0.0)) throw DomainError("guidance_high: r_t must be nonnegative");

    Vec x0 = model.denoise(x_t, t);
    Vec resid = op.apply(x0);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = meas.y[i] - resid[i];
    Vec solved = op.solve_gram(r_t, meas.sigma_z, resid);
    Vec back = op.apply_transpose(solved);
    return model.vjp_denoise(x_t, t, back);
}

Vec piecewise_guidance(const GuidanceConfig& cfg, const LinearOperator& op,
                       const Measurement& meas, const NoiseSchedule& s, std::size_t t,
                       const Vec& x_t, const ScoreModel& model, GuidanceBranch* branch_out) {
    validate_guidance_config(cfg, s);
    check_step(t, s, "piecewise_guidance");

    if (t < cfg.T0) {
        if (branch_out) *branch_out = GuidanceBranch::Low;
        Vec g = guidance_low(op, meas, s, t, x_t);
        kern::scal(cfg.k1, g.data(), g.size());
        return g;
    }
    if (branch_out) *branch_out = GuidanceBranch::High;
    const double r_t = cfg.rt_schedule ? cfg.rt_schedule(s, t)
                                       : std::sqrt(1.0 - s.alpha_bar_at(t));
    Vec g = guidance_high(op, meas, s, t, x_t, model, r_t);
    kern::scal(cfg.k2, g.data(), g.size());
    return g;
}

}  // namespace pw
