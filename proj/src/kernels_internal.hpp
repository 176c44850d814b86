#pragma once
// Internal dispatch table shared by the kernel translation units.

#include <cstddef>

// Platform detection
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__) || defined(_M_IX86)
    #define PW_X86 1
#else
    #define PW_X86 0
#endif

#if defined(__aarch64__) || defined(_M_ARM64) || defined(__ARM_NEON)
    #define PW_NEON 1
#else
    #define PW_NEON 0
#endif

namespace pw::kern::detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    void (*axpby)(double, const double*, double, const double*, double*, std::size_t);
    void (*axpbypcz)(double, const double*, double, const double*, double, const double*,
                     double*, std::size_t);
    const char* name;
};

extern const KernelTable kScalarTable;

#if PW_X86
// Defined in kernels_avx2.cpp (compiled with -mavx2 -mfma); only called after
// the dispatcher has confirmed AVX2+FMA support at runtime.
extern const KernelTable kAvx2Table;
bool cpu_has_avx2_fma();
#endif

#if PW_NEON
extern const KernelTable kNeonTable;
#endif

}  // namespace pw::kern::detail
