#pragma once
// Small dense linear algebra: row-major matrices, Cholesky factorization,
// and a cyclic Jacobi symmetric eigensolver. Sized for the analytic backends
// (n ≤ a few hundred); decompositions run once per model or posterior setup.

#include <cstddef>

#include "piecewise/common.hpp"

namespace pw {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    static Matrix identity(std::size_t n);
};

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& lhs, const Matrix& rhs);

// y = A·x and y = Aᵀ·x (kernel-dispatched inner loops).
Vec matvec(const Matrix& m, const Vec& x);
Vec matvec_t(const Matrix& m, const Vec& x);

// Cholesky factorization S = L·Lᵀ of a symmetric positive-definite matrix.
// Throws NumericalError if a pivot is not strictly positive.
struct Cholesky {
    Matrix L;  // lower triangular
};
Cholesky cholesky(const Matrix& s);

Vec chol_solve(const Cholesky& f, const Vec& b);
Matrix chol_inverse(const Cholesky& f);
double chol_logdet(const Cholesky& f);

// Convenience: solve S·x = b for SPD S.
Vec solve_spd(const Matrix& s, const Vec& b);

// Symmetric eigendecomposition S = U·diag(lam)·Uᵀ (columns of U are
// eigenvectors). Cyclic Jacobi; throws NumericalError if it fails to converge.
struct SymEig {
    Matrix U;
    Vec lam;
};
SymEig jacobi_eigh(const Matrix& s);

}  // namespace pw
