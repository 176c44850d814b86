#include "piecewise/priors.hpp"

#include <cmath>
#include <string>

#include "piecewise/kernels.hpp"

namespace pw {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2π)

void check_dim(std::size_t got, std::size_t want, const char* who) {
    if (got != want)
        throw DomainError(std::string(who) + ": vector length " + std::to_string(got) +
                          ", expected " + std::to_string(want));
}

void check_t(std::size_t t, std::size_t t_min, std::size_t t_max, const char* who) {
    if (t < t_min || t > t_max)
        throw DomainError(std::string(who) + ": timestep " + std::to_string(t) +
                          " outside [" + std::to_string(t_min) + ", " + std::to_string(t_max) +
                          "]");
}

}  // namespace

GmmScoreModel::GmmScoreModel(GmmPrior prior, NoiseSchedule schedule) {
    const std::size_t k = prior.weights.size();
    if (k == 0) throw DomainError("GmmScoreModel: empty mixture");
    if (prior.means.size() != k || prior.covs.size() != k)
        throw DomainError("GmmScoreModel: weights/means/covs component counts differ");

    double total = 0.0;
    for (double w : prior.weights) {
        if (!(w > 0.0)) throw DomainError("GmmScoreModel: weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DomainError("GmmScoreModel: weights must sum to 1");

    auto shared = std::make_shared<Shared>();
    shared->n = prior.means[0].size();
    shared->schedule = std::move(schedule);
    if (shared->n == 0) throw DomainError("GmmScoreModel: zero-dimensional mean");

    shared->comps.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (prior.means[i].size() != shared->n)
            throw DomainError("GmmScoreModel: component mean dimensions differ");
        const Matrix& cov = prior.covs[i];
        if (cov.rows != shared->n || cov.cols != shared->n)
            throw DomainError("GmmScoreModel: covariance shape mismatch");
        SymEig eig = jacobi_eigh(cov);
        for (double lam : eig.lam)
            if (!(lam > 0.0))
                throw NumericalError("GmmScoreModel: component covariance " +
                                     std::to_string(i) + " is not positive definite");
        Component& c = shared->comps[i];
        c.log_weight = std::log(prior.weights[i]);
        c.mean = prior.means[i];
        c.u = std::move(eig.U);
        c.lam = std::move(eig.lam);
    }
    shared_ = std::move(shared);
}

std::size_t GmmScoreModel::dim() const { return shared_->n; }

const NoiseSchedule& GmmScoreModel::schedule() const { return shared_->schedule; }

std::unique_ptr<ScoreModel> GmmScoreModel::clone() const {
    return std::unique_ptr<ScoreModel>(new GmmScoreModel(shared_));
}

// At time t each component is N(√ᾱ·μᵢ, ᾱ·Σᵢ + (1−ᾱ)·I); in Σᵢ's eigenbasis
// the covariance is diagonal with entries eⱼ = ᾱ·λⱼ + (1−ᾱ).
GmmScoreModel::MixtureEval GmmScoreModel::eval_mixture(std::size_t t, const Vec& x) const {
    const Shared& sh = *shared_;
    const std::size_t n = sh.n;
    const std::size_t k = sh.comps.size();
    const double abar = sh.schedule.alpha_bar_at(t);
    const double sqrt_abar = std::sqrt(abar);

    MixtureEval ev;
    ev.resp.resize(k);
    ev.comp_score.resize(k);

    Vec log_terms(k);
    Vec d(n), w(n), scaled(n);
    for (std::size_t i = 0; i < k; ++i) {
        const Component& c = sh.comps[i];
        for (std::size_t r = 0; r < n; ++r) d[r] = x[r] - sqrt_abar * c.mean[r];
        w = matvec_t(c.u, d);

        double logdet = 0.0, quad = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double e = abar * c.lam[j] + (1.0 - abar);
            logdet += std::log(e);
            quad += w[j] * w[j] / e;
            scaled[j] = w[j] / e;
        }
        log_terms[i] = c.log_weight -
                       0.5 * (static_cast<double>(n) * kLog2Pi + logdet + quad);

        Vec g = matvec(c.u, scaled);
        kern::scal(-1.0, g.data(), n);
        ev.comp_score[i] = std::move(g);
    }

    double lmax = log_terms[0];
    for (double v : log_terms) lmax = std::max(lmax, v);
    double sum = 0.0;
    for (double v : log_terms) sum += std::exp(v - lmax);
    ev.logpdf = lmax + std::log(sum);

    ev.score.assign(n, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        ev.resp[i] = std::exp(log_terms[i] - ev.logpdf);
        kern::axpy(ev.resp[i], ev.comp_score[i].data(), ev.score.data(), n);
    }
    return ev;
}

double GmmScoreModel::marginal_logpdf(std::size_t t, const Vec& x) const {
    check_t(t, 0, shared_->schedule.T, "marginal_logpdf");
    check_dim(x.size(), shared_->n, "marginal_logpdf");
    return eval_mixture(t, x).logpdf;
}

Vec GmmScoreModel::score(std::size_t t, const Vec& x) const {
    check_t(t, 0, shared_->schedule.T, "score");
    check_dim(x.size(), shared_->n, "score");
    return eval_mixture(t, x).score;
}

Vec GmmScoreModel::do_predict_noise(const Vec& x_t, std::size_t t) const {
    check_t(t, 1, shared_->schedule.T, "predict_noise");
    check_dim(x_t.size(), shared_->n, "predict_noise");
    const double abar = shared_->schedule.alpha_bar_at(t);
    Vec eps = eval_mixture(t, x_t).score;
    kern::scal(-std::sqrt(1.0 - abar), eps.data(), eps.size());
    return eps;
}

Vec GmmScoreModel::do_denoise(const Vec& x_t, std::size_t t) const {
    check_t(t, 1, shared_->schedule.T, "denoise");
    check_dim(x_t.size(), shared_->n, "denoise");
    const double abar = shared_->schedule.alpha_bar_at(t);
    // Tweedie: x̂₀ = (x_t + (1−ᾱ)·∇log p_t)/√ᾱ.
    Vec out = eval_mixture(t, x_t).score;
    kern::axpby(1.0 / std::sqrt(abar), x_t.data(), (1.0 - abar) / std::sqrt(abar), out.data(),
                out.data(), out.size());
    return out;
}

Vec GmmScoreModel::do_vjp_denoise(const Vec& x_t, std::size_t t, const Vec& v) const {
    check_t(t, 1, shared_->schedule.T, "vjp_denoise");
    check_dim(x_t.size(), shared_->n, "vjp_denoise");
    check_dim(v.size(), shared_->n, "vjp_denoise weight");
    const Shared& sh = *shared_;
    const std::size_t n = sh.n;
    const double abar = sh.schedule.alpha_bar_at(t);

    MixtureEval ev = eval_mixture(t, x_t);

    // H·v with H = ∇²log p_t = Σᵢ rᵢ·(gᵢgᵢᵀ − Cᵢ⁻¹) − s·sᵀ, applied in each
    // component's eigenbasis.
    Vec hv(n, 0.0);
    kern::axpy(-kern::dot(ev.score.data(), v.data(), n), ev.score.data(), hv.data(), n);
    Vec w(n);
    for (std::size_t i = 0; i < sh.comps.size(); ++i) {
        const Component& c = sh.comps[i];
        const Vec& g = ev.comp_score[i];
        kern::axpy(ev.resp[i] * kern::dot(g.data(), v.data(), n), g.data(), hv.data(), n);
        w = matvec_t(c.u, v);
        for (std::size_t j = 0; j < n; ++j) w[j] /= abar * c.lam[j] + (1.0 - abar);
        Vec cv = matvec(c.u, w);
        kern::axpy(-ev.resp[i], cv.data(), hv.data(), n);
    }

    // ∂x̂₀/∂x_t = (I + (1−ᾱ)·H)/√ᾱ, symmetric, so the transpose product is
    // the same formula applied to v.
    Vec out(n);
    const double inv_sqrt = 1.0 / std::sqrt(abar);
    for (std::size_t j = 0; j < n; ++j) out[j] = inv_sqrt * (v[j] + (1.0 - abar) * hv[j]);
    return out;
}

double gmm_marginal_logpdf(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t,
                           const Vec& x_t) {
    return GmmScoreModel(prior, s).marginal_logpdf(t, x_t);
}

Vec gmm_score(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t, const Vec& x_t) {
    return GmmScoreModel(prior, s).score(t, x_t);
}

Vec gmm_predict_noise(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t,
                      const Vec& x_t) {
    return GmmScoreModel(prior, s).predict_noise(x_t, t);
}

Vec gmm_vjp_denoise(const GmmPrior& prior, const NoiseSchedule& s, std::size_t t, const Vec& x_t,
                    const Vec& w) {
    return GmmScoreModel(prior, s).vjp_denoise(x_t, t, w);
}

GaussianPosterior gaussian_exact_posterior(const Vec& mu0, const Matrix& sigma0,
                                           const LinearOperator& op, const Vec& y,
                                           double sigma_z) {
    const std::size_t n = op.n();
    check_dim(mu0.size(), n, "gaussian_exact_posterior mu0");
    check_dim(y.size(), op.m(), "gaussian_exact_posterior y");
    if (sigma0.rows != n || sigma0.cols != n)
        throw DomainError("gaussian_exact_posterior: Sigma0 shape mismatch");
    if (!(sigma_z > 0.0)) throw DomainError("gaussian_exact_posterior: sigma_z must be > 0");

    const Matrix prec0 = chol_inverse(cholesky(sigma0));
    const Matrix c = op.to_dense();
    const double inv_s2 = 1.0 / (sigma_z * sigma_z);

    Matrix a = matmul(transpose(c), c);
    for (std::size_t i = 0; i < n * n; ++i) a.a[i] = prec0.a[i] + inv_s2 * a.a[i];

    GaussianPosterior post;
    post.cov = chol_inverse(cholesky(a));
    Vec rhs = matvec(prec0, mu0);
    Vec cty = op.apply_transpose(y);
    kern::axpy(inv_s2, cty.data(), rhs.data(), n);
    post.mean = matvec(post.cov, rhs);
    return post;
}

Vec forward_diffuse(const NoiseSchedule& s, std::size_t t, const Vec& x0, const Vec& eps) {
    check_t(t, 0, s.T, "forward_diffuse");
    check_dim(eps.size(), x0.size(), "forward_diffuse eps");
    const double abar = s.alpha_bar_at(t);
    Vec out = x0;
    kern::axpby(std::sqrt(1.0 - abar), eps.data(), std::sqrt(abar), out.data(), out.data(),
                out.size());
    return out;
}

}  // namespace pw
