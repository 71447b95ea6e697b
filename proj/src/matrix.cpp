#include "uvmap/matrix.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>

#ifdef __has_include
#if __has_include(<dlfcn.h>)
#include <dlfcn.h>
#define UVMAP_HAVE_DLFCN 1
#endif
#endif

namespace uvmap {
namespace {

// ---------------------------------------------------------------------------
// OpenBLAS backend, loaded at runtime
// ---------------------------------------------------------------------------
//
// The system OpenBLAS picks its compute kernels from the CPU model string at
// library load time. Hypervisors often mask the model name, which silently
// drops it to a generic kernel several times slower than the hardware can do.
// Loading via dlopen lets us pin OPENBLAS_CORETYPE from the actual ISA feature
// flags *before* the library's constructor runs — something a link-time
// dependency cannot do. If the library is missing we fall back to a blocked
// portable kernel below.

using dgemm_fn = void (*)(int order, int trans_a, int trans_b, int m, int n, int k,
                          double alpha, const double* a, int lda, const double* b,
                          int ldb, double beta, double* c, int ldc);
using set_threads_fn = void (*)(int);

constexpr int kCblasRowMajor = 101;
constexpr int kCblasNoTrans = 111;
constexpr int kCblasTrans = 112;

dgemm_fn g_dgemm = nullptr;
set_threads_fn g_set_threads = nullptr;
int g_threads = 1;
const char* g_backend = "builtin";

void load_blas_once() {
    static bool done = false;
    if (done) return;
    done = true;
#ifdef UVMAP_HAVE_DLFCN
    if (!std::getenv("OPENBLAS_CORETYPE")) {
#if defined(__x86_64__) || defined(__i386__)
        if (__builtin_cpu_supports("avx512f")) {
            setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
        } else if (__builtin_cpu_supports("avx2")) {
            setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
        }
#endif
    }
    void* handle = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
    if (!handle) handle = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
    if (!handle) return;
    g_dgemm = reinterpret_cast<dgemm_fn>(dlsym(handle, "cblas_dgemm"));
    g_set_threads = reinterpret_cast<set_threads_fn>(dlsym(handle, "openblas_set_num_threads"));
    if (g_dgemm) {
        g_backend = "openblas";
        if (g_set_threads) g_set_threads(g_threads);
    }
#endif
}

// Blocked fallback: C (m x n) += op(A) * op(B). Copies panels of A into a
// contiguous row-major scratch so the inner loop is stride-1 regardless of
// the transpose flags.
void builtin_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
    constexpr std::size_t MB = 64, NB = 256, KB = 256;
    std::vector<double> apanel(MB * KB);
    for (std::size_t i0 = 0; i0 < m; i0 += MB) {
        const std::size_t mb = std::min(MB, m - i0);
        for (std::size_t k0 = 0; k0 < k; k0 += KB) {
            const std::size_t kb = std::min(KB, k - k0);
            for (std::size_t i = 0; i < mb; ++i)
                for (std::size_t p = 0; p < kb; ++p)
                    apanel[i * kb + p] = ta ? a[(k0 + p) * lda + (i0 + i)]
                                            : a[(i0 + i) * lda + (k0 + p)];
            for (std::size_t j0 = 0; j0 < n; j0 += NB) {
                const std::size_t nb = std::min(NB, n - j0);
                for (std::size_t i = 0; i < mb; ++i) {
                    double* crow = c + (i0 + i) * ldc + j0;
                    const double* arow = apanel.data() + i * kb;
                    for (std::size_t p = 0; p < kb; ++p) {
                        const double av = alpha * arow[p];
                        if (av == 0.0) continue;
                        const double* brow =
                            tb ? b + (j0)*ldb + (k0 + p) : b + (k0 + p) * ldb + j0;
                        if (tb) {
                            for (std::size_t j = 0; j < nb; ++j)
                                crow[j] += av * b[(j0 + j) * ldb + (k0 + p)];
                        } else {
                            for (std::size_t j = 0; j < nb; ++j) crow[j] += av * brow[j];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

void set_compute_threads(int n) {
    g_threads = std::max(1, n);
    load_blas_once();
    if (g_set_threads) g_set_threads(g_threads);
}

int compute_threads() { return g_threads; }

const char* matmul_backend() {
    load_blas_once();
    return g_backend;
}

void matmul(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
            Matrix& out, double alpha, double beta) {
    const std::size_t m = transpose_a ? a.cols() : a.rows();
    const std::size_t k = transpose_a ? a.rows() : a.cols();
    const std::size_t kb = transpose_b ? b.cols() : b.rows();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    if (k != kb)
        throw ArgumentError("matmul: inner dimensions disagree (" + std::to_string(k) +
                            " vs " + std::to_string(kb) + ")");
    if (beta == 0.0) {
        if (out.rows() != m || out.cols() != n) out.resize(m, n);
        if (&out == &a || &out == &b) throw ArgumentError("matmul: out aliases an input");
        out.fill(0.0);
    } else {
        if (out.rows() != m || out.cols() != n)
            throw ArgumentError("matmul: out has wrong shape for beta != 0");
    }
    if (m == 0 || n == 0) return;
    if (k == 0) return;  // out already scaled/zeroed

    load_blas_once();
    if (g_dgemm) {
        g_dgemm(kCblasRowMajor, transpose_a ? kCblasTrans : kCblasNoTrans,
                transpose_b ? kCblasTrans : kCblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), alpha, a.data(),
                static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
                beta == 0.0 ? 1.0 : beta,  // we pre-zeroed for beta==0
                out.data(), static_cast<int>(out.cols()));
        return;
    }
    if (beta != 0.0 && beta != 1.0)
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= beta;
    builtin_gemm(transpose_a, transpose_b, m, n, k, alpha, a.data(), a.cols(), b.data(),
                 b.cols(), out.data(), out.cols());
}

}  // namespace uvmap
