#pragma once
// Linear degradation operators C for the measurement model y = C·x₀ + z,
// with forward/transpose application and structured knowledge of C·Cᵀ so the
// guidance solve (r_t²·C·Cᵀ + σ_z²·I)⁻¹·v stays cheap.
//
// Image vectors are laid out pixel-major with interleaved channels:
// x[(row·width + col)·channels + ch]. Masks drop whole pixels (all channels);
// average pooling pools each channel independently.

#include <cstdint>
#include <string>

#include "piecewise/common.hpp"
#include "piecewise/linalg.hpp"

namespace pw {

enum class OperatorKind { CenterMask, RandomMask, AvgPoolSr, Dense };

enum class GramKind {
    IdentityMultiple,  // C·Cᵀ = γ·I
    Diagonal,          // C·Cᵀ = diag(d)
    General,           // dense SPD solve required
};

// Observation paired with its noise level.
struct Measurement {
    Vec y;
    double sigma_z = 0.0;  // must be > 0 wherever a guidance denominator needs it
};

class LinearOperator {
public:
    std::size_t m() const { return m_; }
    std::size_t n() const { return n_; }
    OperatorKind kind() const { return kind_; }
    GramKind gram_kind() const { return gram_kind_; }

    // γ for IdentityMultiple structure; meaningless otherwise.
    double gram_gamma() const { return gram_gamma_; }
    // diag(C·Cᵀ) for Diagonal structure; meaningless otherwise.
    const Vec& gram_diag() const { return gram_diag_; }

    // y = C·x (length m). Structured kinds never materialize a dense C.
    Vec apply(const Vec& x) const;

    // u = Cᵀ·v (length n); zero-fills coordinates the operator discards.
    Vec apply_transpose(const Vec& v) const;

    // (r_t²·C·Cᵀ + σ_z²·I)⁻¹ · v. Scalar divide for IdentityMultiple,
    // elementwise for Diagonal, dense SPD solve for General.
    Vec solve_gram(double r_t, double sigma_z, const Vec& v) const;

    // Dense m×n materialization (oracle/testing aid; cheap only for small ops).
    Matrix to_dense() const;

    // Index set of kept pixels for mask kinds (ascending pixel indices).
    const std::vector<std::size_t>& kept_pixels() const { return kept_; }

private:
    friend LinearOperator make_center_mask(std::size_t, std::size_t, std::size_t,
                                           std::size_t, std::size_t);
    friend LinearOperator make_random_mask(std::size_t, std::size_t, std::size_t,
                                           double, std::uint64_t);
    friend LinearOperator make_avgpool_sr(std::size_t, std::size_t, std::size_t, std::size_t);
    friend LinearOperator make_dense(Matrix c);

    LinearOperator() = default;

    OperatorKind kind_ = OperatorKind::Dense;
    GramKind gram_kind_ = GramKind::General;
    std::size_t m_ = 0, n_ = 0;
    std::size_t height_ = 0, width_ = 0, channels_ = 0, factor_ = 0;
    std::vector<std::size_t> kept_;  // mask kinds: kept pixel indices
    Matrix dense_;                   // Dense kind: the matrix itself
    Matrix gram_;                    // Dense kind: C·Cᵀ (precomputed once)
    double gram_gamma_ = 1.0;
    Vec gram_diag_;
};

// C keeps every pixel outside a centered box_height×box_width box.
// C·Cᵀ = I.
LinearOperator make_center_mask(std::size_t height, std::size_t width, std::size_t channels,
                                std::size_t box_height, std::size_t box_width);

// C keeps all but round(drop_fraction·height·width) pixels, chosen by a
// seeded counter-based shuffle (identical index sets for identical seeds on
// every platform). C·Cᵀ = I.
LinearOperator make_random_mask(std::size_t height, std::size_t width, std::size_t channels,
                                double drop_fraction, std::uint64_t seed);

// s×s average pooling per channel; s must divide height and width.
// C·Cᵀ = (1/s²)·I.
LinearOperator make_avgpool_sr(std::size_t height, std::size_t width, std::size_t channels,
                               std::size_t factor);

// Arbitrary dense C. The gram structure is detected: exact multiples of the
// identity and diagonal matrices are recognized and dispatched to the cheap
// solve paths; anything else uses a dense SPD factorization.
LinearOperator make_dense(Matrix c);

// Dense C from a plain-text numeric file (one row per line).
LinearOperator load_dense_operator(const std::string& path);

}  // namespace pw
