#include "piecewise/operators.hpp"

#include <algorithm>
#include <cmath>

#include "piecewise/kernels.hpp"
#include "piecewise/rng.hpp"
#include "piecewise/textio.hpp"

namespace pw {

namespace {

void check_len(std::size_t got, std::size_t want, const char* who) {
    if (got != want)
        throw DomainError(std::string(who) + ": vector length " + std::to_string(got) +
                          ", expected " + std::to_string(want));
}

}  // namespace

Vec LinearOperator::apply(const Vec& x) const {
    check_len(x.size(), n_, "apply");
    switch (kind_) {
        case OperatorKind::CenterMask:
        case OperatorKind::RandomMask: {
            Vec y(m_);
            std::size_t r = 0;
            for (std::size_t p : kept_) {
                for (std::size_t ch = 0; ch < channels_; ++ch)
                    y[r++] = x[p * channels_ + ch];
            }
            return y;
        }
        case OperatorKind::AvgPoolSr: {
            const std::size_t ow = width_ / factor_;
            const std::size_t oh = height_ / factor_;
            const double inv = 1.0 / static_cast<double>(factor_ * factor_);
            Vec y(m_, 0.0);
            for (std::size_t br = 0; br < oh; ++br) {
                for (std::size_t bc = 0; bc < ow; ++bc) {
                    for (std::size_t ch = 0; ch < channels_; ++ch) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < factor_; ++i) {
                            for (std::size_t j = 0; j < factor_; ++j) {
                                const std::size_t pix = (br * factor_ + i) * width_ +
                                                        (bc * factor_ + j);
                                acc += x[pix * channels_ + ch];
                            }
                        }
                        y[(br * ow + bc) * channels_ + ch] = acc * inv;
                    }
                }
            }
            return y;
        }
        case OperatorKind::Dense: {
            Vec y(m_);
            kern::matvec(dense_.a.data(), m_, n_, x.data(), y.data());
            return y;
        }
    }
    throw DomainError("apply: unknown operator kind");
}

Vec LinearOperator::apply_transpose(const Vec& v) const {
    check_len(v.size(), m_, "apply_transpose");
    switch (kind_) {
        case OperatorKind::CenterMask:
        case OperatorKind::RandomMask: {
            Vec u(n_, 0.0);
            std::size_t r = 0;
            for (std::size_t p : kept_) {
                for (std::size_t ch = 0; ch < channels_; ++ch)
                    u[p * channels_ + ch] = v[r++];
            }
            return u;
        }
        case OperatorKind::AvgPoolSr: {
            const std::size_t ow = width_ / factor_;
            const std::size_t oh = height_ / factor_;
            const double inv = 1.0 / static_cast<double>(factor_ * factor_);
            Vec u(n_, 0.0);
            for (std::size_t br = 0; br < oh; ++br) {
                for (std::size_t bc = 0; bc < ow; ++bc) {
                    for (std::size_t ch = 0; ch < channels_; ++ch) {
                        const double val = v[(br * ow + bc) * channels_ + ch] * inv;
                        for (std::size_t i = 0; i < factor_; ++i) {
                            for (std::size_t j = 0; j < factor_; ++j) {
                                const std::size_t pix = (br * factor_ + i) * width_ +
                                                        (bc * factor_ + j);
                                u[pix * channels_ + ch] = val;
                            }
                        }
                    }
                }
            }
            return u;
        }
        case OperatorKind::Dense: {
            Vec u(n_);
            kern::matvec_t(dense_.a.data(), m_, n_, v.data(), u.data());
            return u;
        }
    }
    throw DomainError("apply_transpose: unknown operator kind");
}

Vec LinearOperator::solve_gram(double r_t, double sigma_z, const Vec& v) const {
    check_len(v.size(), m_, "solve_gram");
    const double r2 = r_t * r_t;
    const double s2 = sigma_z * sigma_z;
    switch (gram_kind_) {
        case GramKind::IdentityMultiple: {
            const double denom = r2 * gram_gamma_ + s2;
            if (!(denom > 0.0))
                throw NumericalError("solve_gram: singular system (r_t^2*gamma + sigma_z^2 = 0)");
            Vec out = v;
            kern::scal(1.0 / denom, out.data(), out.size());
            return out;
        }
        case GramKind::Diagonal: {
            Vec out(m_);
            for (std::size_t i = 0; i < m_; ++i) {
                const double denom = r2 * gram_diag_[i] + s2;
                if (!(denom > 0.0))
                    throw NumericalError("solve_gram: singular diagonal entry " +
                                         std::to_string(i));
                out[i] = v[i] / denom;
            }
            return out;
        }
        case GramKind::General: {
            Matrix g(m_, m_);
            for (std::size_t i = 0; i < m_ * m_; ++i) g.a[i] = r2 * gram_.a[i];
            for (std::size_t i = 0; i < m_; ++i) g.at(i, i) += s2;
            return chol_solve(cholesky(g), v);
        }
    }
    throw DomainError("solve_gram: unknown gram kind");
}

Matrix LinearOperator::to_dense() const {
    if (kind_ == OperatorKind::Dense) return dense_;
    Matrix c(m_, n_);
    Vec e(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
        e[j] = 1.0;
        Vec col = apply(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < m_; ++i) c.at(i, j) = col[i];
    }
    return c;
}

LinearOperator make_center_mask(std::size_t height, std::size_t width, std::size_t channels,
                                std::size_t box_height, std::size_t box_width) {
    if (height == 0 || width == 0 || channels == 0)
        throw DomainError("make_center_mask: empty image");
    if (box_height > height || box_width > width)
        throw DomainError("make_center_mask: box exceeds image bounds");

    const std::size_t top = (height - box_height) / 2;
    const std::size_t left = (width - box_width) / 2;

    LinearOperator op;
    op.kind_ = OperatorKind::CenterMask;
    op.gram_kind_ = GramKind::IdentityMultiple;
    op.gram_gamma_ = 1.0;
    op.height_ = height;
    op.width_ = width;
    op.channels_ = channels;
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const bool inside = r >= top && r < top + box_height &&
                                c >= left && c < left + box_width;
            if (!inside) op.kept_.push_back(r * width + c);
        }
    }
    op.n_ = height * width * channels;
    op.m_ = op.kept_.size() * channels;
    return op;
}

LinearOperator make_random_mask(std::size_t height, std::size_t width, std::size_t channels,
                                double drop_fraction, std::uint64_t seed) {
    if (height == 0 || width == 0 || channels == 0)
        throw DomainError("make_random_mask: empty image");
    if (!(drop_fraction >= 0.0) || !(drop_fraction < 1.0))
        throw DomainError("make_random_mask: drop_fraction must lie in [0, 1)");

    const std::size_t pixels = height * width;
    const auto dropped = static_cast<std::size_t>(
        std::lround(drop_fraction * static_cast<double>(pixels)));

    // Counter-based seeded Fisher–Yates shuffle of the pixel indices; the
    // first `dropped` entries are removed. Identical seeds give identical
    // masks on every platform.
    std::vector<std::size_t> idx(pixels);
    for (std::size_t i = 0; i < pixels; ++i) idx[i] = i;
    Xoshiro256pp rng(seed);
    for (std::size_t i = pixels - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
        std::swap(idx[i], idx[j]);
    }

    LinearOperator op;
    op.kind_ = OperatorKind::RandomMask;
    op.gram_kind_ = GramKind::IdentityMultiple;
    op.gram_gamma_ = 1.0;
    op.height_ = height;
    op.width_ = width;
    op.channels_ = channels;
    op.kept_.assign(idx.begin() + static_cast<std::ptrdiff_t>(dropped), idx.end());
    std::sort(op.kept_.begin(), op.kept_.end());
    op.n_ = pixels * channels;
    op.m_ = op.kept_.size() * channels;
    return op;
}

LinearOperator make_avgpool_sr(std::size_t height, std::size_t width, std::size_t channels,
                               std::size_t factor) {
    if (height == 0 || width == 0 || channels == 0)
        throw DomainError("make_avgpool_sr: empty image");
    if (factor == 0 || height % factor != 0 || width % factor != 0)
        throw DomainError("make_avgpool_sr: factor must divide height and width");

    LinearOperator op;
    op.kind_ = OperatorKind::AvgPoolSr;
    op.gram_kind_ = GramKind::IdentityMultiple;
    op.gram_gamma_ = 1.0 / static_cast<double>(factor * factor);
    op.height_ = height;
    op.width_ = width;
    op.channels_ = channels;
    op.factor_ = factor;
    op.n_ = height * width * channels;
    op.m_ = (height / factor) * (width / factor) * channels;
    return op;
}

LinearOperator make_dense(Matrix c) {
    if (c.rows == 0 || c.cols == 0) throw DomainError("make_dense: empty matrix");

    LinearOperator op;
    op.kind_ = OperatorKind::Dense;
    op.m_ = c.rows;
    op.n_ = c.cols;
    op.dense_ = std::move(c);

    // Precompute C·Cᵀ once and detect cheap structures.
    const std::size_t m = op.m_;
    op.gram_ = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const double v = kern::dot(&op.dense_.a[i * op.n_], &op.dense_.a[j * op.n_], op.n_);
            op.gram_.at(i, j) = v;
            op.gram_.at(j, i) = v;
        }
    }
    double off_max = 0.0, diag_min = op.gram_.at(0, 0), diag_max = op.gram_.at(0, 0);
    for (std::size_t i = 0; i < m; ++i) {
        diag_min = std::min(diag_min, op.gram_.at(i, i));
        diag_max = std::max(diag_max, op.gram_.at(i, i));
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) off_max = std::max(off_max, std::abs(op.gram_.at(i, j)));
    }
    const double scale = std::max(std::abs(diag_max), 1e-300);
    if (off_max <= 1e-12 * scale) {
        if (diag_max - diag_min <= 1e-12 * scale) {
            op.gram_kind_ = GramKind::IdentityMultiple;
            op.gram_gamma_ = op.gram_.at(0, 0);
        } else {
            op.gram_kind_ = GramKind::Diagonal;
            op.gram_diag_.resize(m);
            for (std::size_t i = 0; i < m; ++i) op.gram_diag_[i] = op.gram_.at(i, i);
        }
    } else {
        op.gram_kind_ = GramKind::General;
    }
    return op;
}

LinearOperator load_dense_operator(const std::string& path) {
    return make_dense(load_matrix_text(path));
}

}  // namespace pw
