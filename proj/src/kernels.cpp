// Scalar reference kernels, runtime backend dispatch, and the public API.

#include "piecewise/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

#include "piecewise/common.hpp"
#include "kernels_internal.hpp"

#if PW_X86
    #if defined(_MSC_VER)
        #include <intrin.h>
    #else
        #include <cpuid.h>
    #endif
#endif

#if PW_NEON
    #include <arm_neon.h>
#endif

namespace pw::kern {
namespace detail {

// ---------------------------------------------------------------------------
// Scalar reference implementations
// ---------------------------------------------------------------------------

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y,
              double c, const double* z, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i] + c * z[i];
}

}  // namespace scalar

const KernelTable kScalarTable = {
    scalar::dot, scalar::sumsq, scalar::axpy, scalar::scal,
    scalar::axpby, scalar::axpbypcz, "scalar",
};

// ---------------------------------------------------------------------------
// NEON implementations (aarch64; NEON is baseline there, no special flags)
// ---------------------------------------------------------------------------

#if PW_NEON

namespace neon {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    for (; i + 2 <= n; i += 2) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    }
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq(const double* a, std::size_t n) { return dot(a, a, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t r = vmulq_f64(va, vld1q_f64(x + i));
        r = vfmaq_f64(r, vb, vld1q_f64(y + i));
        vst1q_f64(out + i, r);
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y,
              double c, const double* z, double* out, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    const float64x2_t vc = vdupq_n_f64(c);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t r = vmulq_f64(va, vld1q_f64(x + i));
        r = vfmaq_f64(r, vb, vld1q_f64(y + i));
        r = vfmaq_f64(r, vc, vld1q_f64(z + i));
        vst1q_f64(out + i, r);
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i] + c * z[i];
}

}  // namespace neon

const KernelTable kNeonTable = {
    neon::dot, neon::sumsq, neon::axpy, neon::scal,
    neon::axpby, neon::axpbypcz, "neon",
};

#endif  // PW_NEON

// ---------------------------------------------------------------------------
// CPU feature detection (x86)
// ---------------------------------------------------------------------------

#if PW_X86

bool cpu_has_avx2_fma() {
#if defined(_MSC_VER)
    int info1[4] = {0};
    __cpuid(info1, 1);
    const bool osxsave = (info1[2] & (1 << 27)) != 0;
    const bool fma = (info1[2] & (1 << 12)) != 0;
    if (!osxsave || !fma) return false;
    int info7[4] = {0};
    __cpuidex(info7, 7, 0);
    const bool avx2 = (info7[1] & (1 << 5)) != 0;
    if (!avx2) return false;
    const unsigned long long xcr0 = _xgetbv(0);
    return (xcr0 & 0x6) == 0x6;  // XMM and YMM state enabled by the OS
#else
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    const bool osxsave = (ecx & (1u << 27)) != 0;
    const bool fma = (ecx & (1u << 12)) != 0;
    if (!osxsave || !fma) return false;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    const bool avx2 = (ebx & (1u << 5)) != 0;
    if (!avx2) return false;
    unsigned lo, hi;
    __asm__ volatile("xgetbv" : "=a"(lo), "=d"(hi) : "c"(0));
    return (lo & 0x6) == 0x6;  // XMM and YMM state enabled by the OS
#endif
}

#endif  // PW_X86

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace {

std::atomic<const KernelTable*> g_table{nullptr};
std::once_flag g_init_once;

const KernelTable* pick_auto() {
#if PW_X86
    if (cpu_has_avx2_fma()) return &kAvx2Table;
#endif
#if PW_NEON
    return &kNeonTable;
#endif
    return &kScalarTable;
}

const KernelTable* pick_named(const char* name) {
    const std::string s = name;
    if (s == "auto") return pick_auto();
    if (s == "scalar") return &kScalarTable;
#if PW_X86
    if (s == "avx2") {
        if (!cpu_has_avx2_fma())
            throw NumericalError("kernels: avx2 backend requested but CPU/OS lacks AVX2+FMA");
        return &kAvx2Table;
    }
#else
    if (s == "avx2")
        throw NumericalError("kernels: avx2 backend requested on a non-x86 build");
#endif
#if PW_NEON
    if (s == "neon") return &kNeonTable;
#else
    if (s == "neon")
        throw NumericalError("kernels: neon backend requested on a non-aarch64 build");
#endif
    throw DomainError("kernels: unknown backend '" + s + "' (expected scalar|avx2|neon|auto)");
}

const KernelTable* table() {
    std::call_once(g_init_once, [] {
        const char* env = std::getenv("PIECEWISE_KERNELS");
        g_table.store(pick_named(env && *env ? env : "auto"), std::memory_order_release);
    });
    return g_table.load(std::memory_order_acquire);
}

}  // namespace
}  // namespace detail

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n) {
    return detail::table()->dot(a, b, n);
}

double sumsq(const double* a, std::size_t n) { return detail::table()->sumsq(a, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    detail::table()->axpy(a, x, y, n);
}

void scal(double a, double* x, std::size_t n) { detail::table()->scal(a, x, n); }

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    detail::table()->axpby(a, x, b, y, out, n);
}

void axpbypcz(double a, const double* x, double b, const double* y,
              double c, const double* z, double* out, std::size_t n) {
    detail::table()->axpbypcz(a, x, b, y, c, z, out, n);
}

void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    const detail::KernelTable* t = detail::table();
    for (std::size_t r = 0; r < rows; ++r) y[r] = t->dot(A + r * cols, x, cols);
}

void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    const detail::KernelTable* t = detail::table();
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) t->axpy(x[r], A + r * cols, y, cols);
}

const char* backend_name() { return detail::table()->name; }

void select_backend(const char* name) {
    detail::table();  // make sure one-time init has happened
    detail::g_table.store(detail::pick_named(name), std::memory_order_release);
}

bool backend_available(const char* name) {
    try {
        detail::pick_named(name);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace pw::kern
