#pragma once
// Vector/matrix micro-kernels with runtime-dispatched SIMD variants.
//
// Every kernel has a scalar reference implementation plus AVX2 (x86) and NEON
// (aarch64) variants. The active backend is chosen once, at first use, from
// CPU capabilities, and can be overridden with the environment variable
// PIECEWISE_KERNELS=scalar|avx2|neon (or programmatically via select_backend,
// which the equivalence tests use to exercise every available variant).
//
// SIMD variants reassociate additions and use FMA, so they are not bit-equal
// to the scalar reference; they agree to rounding error. Within one process
// the selected backend never changes behind the caller's back, which keeps
// sampler runs bit-reproducible.

#include <cstddef>

namespace pw::kern {

// y = sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i a[i]^2
double sumsq(const double* a, std::size_t n);

// y[i] += a*x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// x[i] *= a
void scal(double a, double* x, std::size_t n);

// out[i] = a*x[i] + b*y[i]   (out may alias x or y)
void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n);

// out[i] = a*x[i] + b*y[i] + c*z[i]   (out may alias any input)
void axpbypcz(double a, const double* x, double b, const double* y,
              double c, const double* z, double* out, std::size_t n);

// y = A·x with A row-major rows×cols; y has length rows. y must not alias A or x.
void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);

// y = Aᵀ·x with A row-major rows×cols; y has length cols. y must not alias A or x.
void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);

// Name of the backend currently in use: "scalar", "avx2", or "neon".
const char* backend_name();

// Force a backend by name ("auto" re-runs CPU detection). Throws DomainError
// for unknown names and NumericalError if the request is unsupported on this
// CPU. Not safe to call while other threads are inside kernels; intended for
// startup and tests.
void select_backend(const char* name);

// True if the named backend can run on this machine.
bool backend_available(const char* name);

}  // namespace pw::kern
