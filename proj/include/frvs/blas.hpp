#pragma once

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <cblas.h>

#if defined(__linux__)
#include <unistd.h>
#endif

namespace frvs {

// OpenBLAS's runtime detection picks a generic kernel on some virtualized
// Xeons; force the AVX-512 kernel when the CPU has it. The kernel is chosen
// in a load-time constructor, so setting the variable inside this process is
// too late: re-exec once with it in the environment.
inline void blas_init() {
    static const bool done = [] {
#if defined(__x86_64__) && defined(__linux__)
        if (__builtin_cpu_supports("avx512f") && !std::getenv("OPENBLAS_CORETYPE")) {
            setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 1);
            std::ifstream cmd("/proc/self/cmdline", std::ios::binary);
            std::string all((std::istreambuf_iterator<char>(cmd)),
                            std::istreambuf_iterator<char>());
            std::vector<char*> argv;
            for (std::size_t p = 0; p < all.size(); p += std::strlen(all.c_str() + p) + 1)
                argv.push_back(all.data() + p);
            if (!argv.empty()) {
                argv.push_back(nullptr);
                execv("/proc/self/exe", argv.data());
            }
            // exec failed: keep going on the slower kernel
        }
#endif
        openblas_set_num_threads(1);  // deterministic; this artifact is single-core anyway
        return true;
    }();
    (void)done;
}

namespace detail {
inline void blas_threads_init() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}
}  // namespace detail

// C[m x n] += or = A[m x k] * B[k x n], row-major. transA/transB swap the
// logical orientation of A/B (dimensions given are of op(A), op(B)).
inline void gemm(bool transA, bool transB, int m, int n, int k, float alpha, const float* A,
                 int lda, const float* B, int ldb, float beta, float* C, int ldc) {
    detail::blas_threads_init();
    cblas_sgemm(CblasRowMajor, transA ? CblasTrans : CblasNoTrans,
                transB ? CblasTrans : CblasNoTrans, m, n, k, alpha, A, lda, B, ldb, beta, C, ldc);
}

inline void gemm(bool transA, bool transB, int m, int n, int k, double alpha, const double* A,
                 int lda, const double* B, int ldb, double beta, double* C, int ldc) {
    detail::blas_threads_init();
    cblas_dgemm(CblasRowMajor, transA ? CblasTrans : CblasNoTrans,
                transB ? CblasTrans : CblasNoTrans, m, n, k, alpha, A, lda, B, ldb, beta, C, ldc);
}

}  // namespace frvs
