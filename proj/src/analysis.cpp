#include "piecewise/analysis.hpp"

#include <cmath>
#include <string>

#include "piecewise/kernels.hpp"
#include "piecewise/rng.hpp"

namespace pw {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_step(const NoiseSchedule& s, std::size_t t) {
    if (t < 1 || t > static_cast<std::size_t>(s.T))
        throw DomainError("step index " + std::to_string(t) + " outside 1.." +
                          std::to_string(s.T));
}

void check_sigma(double sigma_z) {
    if (!(sigma_z > 0.0)) throw DomainError("sigma_z must be positive");
}

// Shared scaffolding for both theorem pairs: means are C x_t / sqrt(abar)
// with the residual-noise term subtracted from the true side, covariance is
// sigma_z^2 I on both sides.
TheoremPair build_pair(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                       const Vec& x_t, const Vec& v_t, const Vec* v_hat, double sigma_z) {
    check_step(s, t);
    check_sigma(sigma_z);
    if (x_t.size() != op.n() || v_t.size() != op.n())
        throw DomainError("vector length does not match operator width");
    if (v_hat && v_hat->size() != op.n())
        throw DomainError("noise estimate length does not match operator width");

    const double abar = s.alpha_bar_at(t);
    const double shift = std::sqrt(1.0 - abar) / std::sqrt(abar);
    const Vec cx = op.apply(x_t);
    const Vec cv = op.apply(v_t);

    TheoremPair pair;
    pair.true_dist.mean.resize(op.m());
    pair.approx_dist.mean.resize(op.m());
    for (std::size_t i = 0; i < op.m(); ++i) {
        const double base = cx[i] / std::sqrt(abar);
        pair.true_dist.mean[i] = base - shift * cv[i];
        pair.approx_dist.mean[i] = base;
    }
    if (v_hat) {
        const Vec cvh = op.apply(*v_hat);
        for (std::size_t i = 0; i < op.m(); ++i)
            pair.approx_dist.mean[i] -= shift * cvh[i];
    }

    Matrix cov = Matrix::identity(op.m());
    for (std::size_t i = 0; i < op.m(); ++i) cov.at(i, i) = sigma_z * sigma_z;
    pair.true_dist.covariance = cov;
    pair.approx_dist.covariance = std::move(cov);
    return pair;
}

// Closed form shared by both theorems; `diff` is C v_t or C (v_t - v_hat).
double closed_form(const NoiseSchedule& s, std::size_t t, const Vec& diff, double sigma_z) {
    const double abar = s.alpha_bar_at(t);
    const double coeff = (1.0 - abar) / abar;
    return coeff * kern::sumsq(diff.data(), diff.size()) / (2.0 * sigma_z * sigma_z);
}

// The internal proof-check: the closed form must reproduce gaussian_kl on the
// explicitly constructed pair to near machine precision (scaled for large
// values, where cancellation in the quadratic form costs a few ulps).
void cross_check(double value, const TheoremPair& pair, const char* name) {
    const double direct = gaussian_kl(pair.true_dist, pair.approx_dist);
    const double tol = 1e-10 * std::max(1.0, std::abs(value));
    if (std::abs(direct - value) > tol)
        throw NumericalError(std::string(name) +
                             " closed form disagrees with explicit Gaussian KL: " +
                             std::to_string(value) + " vs " + std::to_string(direct));
}

}  // namespace

void validate_gaussian(const GaussianDist& d) {
    const std::size_t k = d.mean.size();
    if (k == 0) throw DomainError("empty Gaussian");
    if (d.covariance.rows != k || d.covariance.cols != k)
        throw DomainError("covariance shape does not match mean length");
    double scale = 0.0;
    for (double v : d.covariance.a) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * std::max(1.0, scale);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (std::abs(d.covariance.at(i, j) - d.covariance.at(j, i)) > tol)
                throw DomainError("covariance is not symmetric");
}

double gaussian_kl(const GaussianDist& p, const GaussianDist& q) {
    validate_gaussian(p);
    validate_gaussian(q);
    const std::size_t k = p.mean.size();
    if (q.mean.size() != k) throw DomainError("dimension mismatch between Gaussians");

    const Cholesky cp = cholesky(p.covariance);
    const Cholesky cq = cholesky(q.covariance);
    const double logdet = chol_logdet(cq) - chol_logdet(cp);

    // tr(S2^-1 S1): solve against each column of S1 and read off the diagonal.
    double trace = 0.0;
    Vec col(k);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < k; ++i) col[i] = p.covariance.at(i, j);
        const Vec w = chol_solve(cq, col);
        trace += w[j];
    }

    Vec d(k);
    for (std::size_t i = 0; i < k; ++i) d[i] = q.mean[i] - p.mean[i];
    const double quad = kern::dot(d.data(), chol_solve(cq, d).data(), k);

    return 0.5 * (logdet - static_cast<double>(k) + trace + quad);
}

double gaussian_logpdf(const GaussianDist& d, const Vec& x) {
    validate_gaussian(d);
    const std::size_t k = d.mean.size();
    if (x.size() != k) throw DomainError("point dimension does not match Gaussian");
    const Cholesky c = cholesky(d.covariance);
    Vec r(k);
    for (std::size_t i = 0; i < k; ++i) r[i] = x[i] - d.mean[i];
    const double quad = kern::dot(r.data(), chol_solve(c, r).data(), k);
    return -0.5 * (static_cast<double>(k) * kLog2Pi + chol_logdet(c) + quad);
}

double mc_gaussian_kl(const GaussianDist& p, const GaussianDist& q, std::size_t samples,
                      std::uint64_t seed) {
    validate_gaussian(p);
    validate_gaussian(q);
    const std::size_t k = p.mean.size();
    if (q.mean.size() != k) throw DomainError("dimension mismatch between Gaussians");
    if (samples == 0) throw DomainError("samples must be positive");

    // Factor both covariances once; per sample only triangular solves run.
    const Cholesky cp = cholesky(p.covariance);
    const Cholesky cq = cholesky(q.covariance);
    const double logdet_gap = 0.5 * (chol_logdet(cq) - chol_logdet(cp));

    // Squared Mahalanobis norm via two triangular solves against L L^T.
    Vec y(k), w(k);
    auto mahal_sq = [&](const Cholesky& c, const Vec& mean, const Vec& x) {
        for (std::size_t i = 0; i < k; ++i) {
            double acc = x[i] - mean[i];
            for (std::size_t j = 0; j < i; ++j) acc -= c.L.at(i, j) * y[j];
            y[i] = acc / c.L.at(i, i);
        }
        for (std::size_t i = k; i-- > 0;) {
            double acc = y[i];
            for (std::size_t j = i + 1; j < k; ++j) acc -= c.L.at(j, i) * w[j];
            w[i] = acc / c.L.at(i, i);
        }
        double quad = 0.0;
        for (std::size_t i = 0; i < k; ++i) quad += (x[i] - mean[i]) * w[i];
        return quad;
    };

    Xoshiro256pp rng(seed);
    Vec z(k), x(k);
    double acc = 0.0;
    std::size_t done = 0;
    while (done < samples) {
        for (std::size_t i = 0; i < k; ++i) z[i] = rng.normal();
        // Antithetic pair: both signs of the same draw.
        for (int sign = 0; sign < 2 && done < samples; ++sign, ++done) {
            const double flip = sign == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < k; ++i) {
                double lz = 0.0;
                for (std::size_t j = 0; j <= i; ++j) lz += cp.L.at(i, j) * z[j];
                x[i] = p.mean[i] + flip * lz;
            }
            // log p - log q: the 2*pi terms cancel, the logdets are hoisted.
            acc += 0.5 * (mahal_sq(cq, q.mean, x) - mahal_sq(cp, p.mean, x));
        }
    }
    return logdet_gap + acc / static_cast<double>(samples);
}

TheoremPair theorem1_pair(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                          const Vec& x_t, const Vec& v_t, double sigma_z) {
    return build_pair(op, s, t, x_t, v_t, nullptr, sigma_z);
}

TheoremPair theorem2_pair(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                          const Vec& x_t, const Vec& v_t, const Vec& v_hat, double sigma_z) {
    return build_pair(op, s, t, x_t, v_t, &v_hat, sigma_z);
}

double kl_theorem1(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                   const Vec& v_t, double sigma_z) {
    const TheoremPair pair = theorem1_pair(op, s, t, Vec(op.n(), 0.0), v_t, sigma_z);
    const double value = closed_form(s, t, op.apply(v_t), sigma_z);
    cross_check(value, pair, "kl_theorem1");
    return value;
}

double kl_theorem2(const LinearOperator& op, const NoiseSchedule& s, std::size_t t,
                   const Vec& v_t, const Vec& v_hat, double sigma_z) {
    const TheoremPair pair = theorem2_pair(op, s, t, Vec(op.n(), 0.0), v_t, v_hat, sigma_z);
    if (v_hat.size() != v_t.size()) throw DomainError("noise estimate length mismatch");
    Vec diff(v_t.size());
    for (std::size_t i = 0; i < v_t.size(); ++i) diff[i] = v_t[i] - v_hat[i];
    const double value = closed_form(s, t, op.apply(diff), sigma_z);
    cross_check(value, pair, "kl_theorem2");
    return value;
}

std::vector<CoefficientPoint> coefficient_curve(const NoiseSchedule& s) {
    std::vector<CoefficientPoint> curve;
    curve.reserve(static_cast<std::size_t>(s.T));
    for (std::size_t t = 1; t <= static_cast<std::size_t>(s.T); ++t) {
        const double abar = s.alpha_bar_at(t);
        curve.push_back({t, (1.0 - abar) / abar});
    }
    return curve;
}

}  // namespace pw
