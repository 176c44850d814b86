// Kernel layer: scalar reference correctness and cross-backend equivalence.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "piecewise/common.hpp"
#include "piecewise/kernels.hpp"

namespace {

// Small deterministic generator so the tests never depend on library RNG.
struct TestRng {
    std::uint64_t s;
    double next() {  // uniform in [-1, 1)
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(static_cast<std::int64_t>(s >> 11)) * 0x1.0p-52 - 1.0;
    }
    std::vector<double> vec(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = next();
        return v;
    }
};

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 257};

}  // namespace

TEST_CASE("scalar kernels match straightforward math") {
    pw::kern::select_backend("scalar");
    TestRng rng{42};
    for (std::size_t n : kSizes) {
        auto a = rng.vec(n);
        auto b = rng.vec(n);
        double want_dot = 0.0, want_ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            want_dot += a[i] * b[i];
            want_ss += a[i] * a[i];
        }
        CHECK(pw::kern::dot(a.data(), b.data(), n) == doctest::Approx(want_dot).epsilon(1e-14));
        CHECK(pw::kern::sumsq(a.data(), n) == doctest::Approx(want_ss).epsilon(1e-14));

        auto y = b;
        pw::kern::axpy(0.5, a.data(), y.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.5 * a[i]));

        auto x = a;
        pw::kern::scal(-2.0, x.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(-2.0 * a[i]));
    }
    pw::kern::select_backend("auto");
}

TEST_CASE("matvec and matvec_t agree with explicit loops") {
    pw::kern::select_backend("scalar");
    TestRng rng{7};
    const std::size_t rows = 5, cols = 9;
    auto A = rng.vec(rows * cols);
    auto x = rng.vec(cols);
    auto v = rng.vec(rows);

    std::vector<double> y(rows), want(rows, 0.0);
    pw::kern::matvec(A.data(), rows, cols, x.data(), y.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) want[r] += A[r * cols + c] * x[c];
    for (std::size_t r = 0; r < rows; ++r) CHECK(y[r] == doctest::Approx(want[r]));

    std::vector<double> u(cols), want_t(cols, 0.0);
    pw::kern::matvec_t(A.data(), rows, cols, v.data(), u.data());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) want_t[c] += A[r * cols + c] * v[r];
    for (std::size_t c = 0; c < cols; ++c) CHECK(u[c] == doctest::Approx(want_t[c]));
    pw::kern::select_backend("auto");
}

TEST_CASE("SIMD backends are equivalent to the scalar reference") {
    for (const char* name : {"avx2", "neon"}) {
        if (!pw::kern::backend_available(name)) {
            MESSAGE("backend ", std::string(name), " not available on this machine; skipped");
            continue;
        }
        TestRng rng{1234};
        for (std::size_t n : kSizes) {
            auto a = rng.vec(n);
            auto b = rng.vec(n);
            auto c = rng.vec(n);

            pw::kern::select_backend("scalar");
            const double dot_ref = pw::kern::dot(a.data(), b.data(), n);
            const double ss_ref = pw::kern::sumsq(a.data(), n);
            auto y_ref = b;
            pw::kern::axpy(1.7, a.data(), y_ref.data(), n);
            std::vector<double> o2_ref(n), o3_ref(n);
            pw::kern::axpby(0.3, a.data(), -1.1, b.data(), o2_ref.data(), n);
            pw::kern::axpbypcz(0.3, a.data(), -1.1, b.data(), 2.2, c.data(), o3_ref.data(), n);

            pw::kern::select_backend(name);
            CHECK(pw::kern::backend_name() == std::string(name));
            const double dot_simd = pw::kern::dot(a.data(), b.data(), n);
            const double ss_simd = pw::kern::sumsq(a.data(), n);
            auto y_simd = b;
            pw::kern::axpy(1.7, a.data(), y_simd.data(), n);
            std::vector<double> o2_simd(n), o3_simd(n);
            pw::kern::axpby(0.3, a.data(), -1.1, b.data(), o2_simd.data(), n);
            pw::kern::axpbypcz(0.3, a.data(), -1.1, b.data(), 2.2, c.data(), o3_simd.data(), n);

            // FMA/reassociation: equivalent to rounding error, not bit-equal.
            const double tol = 1e-13 * (1.0 + static_cast<double>(n));
            CHECK(dot_simd == doctest::Approx(dot_ref).epsilon(tol));
            CHECK(ss_simd == doctest::Approx(ss_ref).epsilon(tol));
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(y_simd[i] == doctest::Approx(y_ref[i]).epsilon(tol));
                CHECK(o2_simd[i] == doctest::Approx(o2_ref[i]).epsilon(tol));
                CHECK(o3_simd[i] == doctest::Approx(o3_ref[i]).epsilon(tol));
            }
        }
    }
    pw::kern::select_backend("auto");
}

TEST_CASE("matvec equivalence across backends") {
    for (const char* name : {"avx2", "neon"}) {
        if (!pw::kern::backend_available(name)) continue;
        TestRng rng{99};
        for (std::size_t rows : {1u, 3u, 8u, 64u}) {
            for (std::size_t cols : {1u, 5u, 64u, 129u}) {
                auto A = rng.vec(rows * cols);
                auto x = rng.vec(cols);
                auto v = rng.vec(rows);

                pw::kern::select_backend("scalar");
                std::vector<double> y_ref(rows), u_ref(cols);
                pw::kern::matvec(A.data(), rows, cols, x.data(), y_ref.data());
                pw::kern::matvec_t(A.data(), rows, cols, v.data(), u_ref.data());

                pw::kern::select_backend(name);
                std::vector<double> y_simd(rows), u_simd(cols);
                pw::kern::matvec(A.data(), rows, cols, x.data(), y_simd.data());
                pw::kern::matvec_t(A.data(), rows, cols, v.data(), u_simd.data());

                const double tol = 1e-13 * (1.0 + static_cast<double>(rows + cols));
                for (std::size_t r = 0; r < rows; ++r)
                    CHECK(y_simd[r] == doctest::Approx(y_ref[r]).epsilon(tol));
                for (std::size_t c = 0; c < cols; ++c)
                    CHECK(u_simd[c] == doctest::Approx(u_ref[c]).epsilon(tol));
            }
        }
    }
    pw::kern::select_backend("auto");
}

TEST_CASE("backend selection errors") {
    CHECK_THROWS_AS(pw::kern::select_backend("sse9"), pw::DomainError);
    CHECK(pw::kern::backend_available("scalar"));
    CHECK(pw::kern::backend_available("auto"));
    // The dispatched default must be one of the known names.
    pw::kern::select_backend("auto");
    const std::string name = pw::kern::backend_name();
    CHECK((name == "scalar" || name == "avx2" || name == "neon"));
}
