#include "piecewise/linalg.hpp"

#include <cmath>

#include "piecewise/kernels.hpp"

namespace pw {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
    return t;
}

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols != rhs.rows) throw DomainError("matmul: inner dimensions differ");
    Matrix out(lhs.rows, rhs.cols);
    for (std::size_t r = 0; r < lhs.rows; ++r) {
        for (std::size_t k = 0; k < lhs.cols; ++k) {
            kern::axpy(lhs.at(r, k), &rhs.a[k * rhs.cols], &out.a[r * out.cols], rhs.cols);
        }
    }
    return out;
}

Vec matvec(const Matrix& m, const Vec& x) {
    if (x.size() != m.cols) throw DomainError("matvec: dimension mismatch");
    Vec y(m.rows);
    kern::matvec(m.a.data(), m.rows, m.cols, x.data(), y.data());
    return y;
}

Vec matvec_t(const Matrix& m, const Vec& x) {
    if (x.size() != m.rows) throw DomainError("matvec_t: dimension mismatch");
    Vec y(m.cols);
    kern::matvec_t(m.a.data(), m.rows, m.cols, x.data(), y.data());
    return y;
}

Cholesky cholesky(const Matrix& s) {
    if (s.rows != s.cols) throw DomainError("cholesky: matrix not square");
    const std::size_t n = s.rows;
    Cholesky f;
    f.L = Matrix(n, n);
    Matrix& L = f.L;
    for (std::size_t j = 0; j < n; ++j) {
        double d = s.at(j, j) - kern::sumsq(&L.a[j * n], j);
        if (!(d > 0.0) || !std::isfinite(d))
            throw NumericalError("cholesky: matrix not positive definite");
        const double ljj = std::sqrt(d);
        L.at(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double v = s.at(i, j) - kern::dot(&L.a[i * n], &L.a[j * n], j);
            L.at(i, j) = v / ljj;
        }
    }
    return f;
}

Vec chol_solve(const Cholesky& f, const Vec& b) {
    const std::size_t n = f.L.rows;
    if (b.size() != n) throw DomainError("chol_solve: dimension mismatch");
    const Matrix& L = f.L;
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = (b[i] - kern::dot(&L.a[i * n], y.data(), i)) / L.at(i, i);
    }
    Vec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= L.at(j, ii) * x[j];
        x[ii] = s / L.at(ii, ii);
    }
    return x;
}

Matrix chol_inverse(const Cholesky& f) {
    const std::size_t n = f.L.rows;
    Matrix inv(n, n);
    Vec e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        Vec col = chol_solve(f, e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) inv.at(i, j) = col[i];
    }
    return inv;
}

double chol_logdet(const Cholesky& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.L.rows; ++i) s += std::log(f.L.at(i, i));
    return 2.0 * s;
}

Vec solve_spd(const Matrix& s, const Vec& b) { return chol_solve(cholesky(s), b); }

SymEig jacobi_eigh(const Matrix& s) {
    if (s.rows != s.cols) throw DomainError("jacobi_eigh: matrix not square");
    const std::size_t n = s.rows;
    Matrix A = s;  // working copy, driven to diagonal
    Matrix U = Matrix::identity(n);

    // Symmetry is a precondition; enforce it to keep rotations consistent.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (A.at(i, j) + A.at(j, i));
            A.at(i, j) = A.at(j, i) = avg;
        }

    auto off_norm = [&] {
        double s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s2 += A.at(i, j) * A.at(i, j);
        return std::sqrt(2.0 * s2);
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(A.at(i, j)));
    if (scale == 0.0) scale = 1.0;
    const double tol = 1e-14 * scale * static_cast<double>(n);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= tol) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A.at(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double app = A.at(p, p);
                const double aqq = A.at(q, q);
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                // Rotate rows/columns p and q of A.
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A.at(k, p);
                    const double akq = A.at(k, q);
                    A.at(k, p) = c * akp - sn * akq;
                    A.at(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A.at(p, k);
                    const double aqk = A.at(q, k);
                    A.at(p, k) = c * apk - sn * aqk;
                    A.at(q, k) = sn * apk + c * aqk;
                }
                // Accumulate the eigenvector rotation.
                for (std::size_t k = 0; k < n; ++k) {
                    const double ukp = U.at(k, p);
                    const double ukq = U.at(k, q);
                    U.at(k, p) = c * ukp - sn * ukq;
                    U.at(k, q) = sn * ukp + c * ukq;
                }
            }
        }
        if (sweep == max_sweeps - 1 && off_norm() > tol)
            throw NumericalError("jacobi_eigh: failed to converge");
    }

    SymEig out;
    out.U = std::move(U);
    out.lam.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.lam[i] = A.at(i, i);
    return out;
}

}  // namespace pw
