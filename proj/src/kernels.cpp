#include "chase/kernels.hpp"

#include <cmath>
#include <cstring>

#if defined(__AVX512F__) && defined(__FMA__)
#define CHASE_AVX512 1
#include <immintrin.h>
extern "C" {
__m512d _ZGVeN8v_exp(__m512d);
__m512d _ZGVeN8v_tanh(__m512d);
}
#endif

namespace chase {

namespace {

void matmul_scalar(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            double av = ai[p];
            const double* bp = b + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

#ifdef CHASE_AVX512

// 4-row x 16-col register tile; accumulates into C.
template <int Rows>
inline void mm_tile16(const double* a, const double* b, double* c, int k, int m,
                      int i, int j) {
    __m512d acc[Rows][2];
    for (int r = 0; r < Rows; ++r) {
        acc[r][0] = _mm512_loadu_pd(c + static_cast<std::size_t>(i + r) * m + j);
        acc[r][1] = _mm512_loadu_pd(c + static_cast<std::size_t>(i + r) * m + j + 8);
    }
    for (int p = 0; p < k; ++p) {
        __m512d b0 = _mm512_loadu_pd(b + static_cast<std::size_t>(p) * m + j);
        __m512d b1 = _mm512_loadu_pd(b + static_cast<std::size_t>(p) * m + j + 8);
        for (int r = 0; r < Rows; ++r) {
            __m512d av = _mm512_set1_pd(a[static_cast<std::size_t>(i + r) * k + p]);
            acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
            acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
        }
    }
    for (int r = 0; r < Rows; ++r) {
        _mm512_storeu_pd(c + static_cast<std::size_t>(i + r) * m + j, acc[r][0]);
        _mm512_storeu_pd(c + static_cast<std::size_t>(i + r) * m + j + 8, acc[r][1]);
    }
}

template <int Rows>
inline void mm_tile8(const double* a, const double* b, double* c, int k, int m,
                     int i, int j) {
    __m512d acc[Rows];
    for (int r = 0; r < Rows; ++r)
        acc[r] = _mm512_loadu_pd(c + static_cast<std::size_t>(i + r) * m + j);
    for (int p = 0; p < k; ++p) {
        __m512d b0 = _mm512_loadu_pd(b + static_cast<std::size_t>(p) * m + j);
        for (int r = 0; r < Rows; ++r) {
            __m512d av = _mm512_set1_pd(a[static_cast<std::size_t>(i + r) * k + p]);
            acc[r] = _mm512_fmadd_pd(av, b0, acc[r]);
        }
    }
    for (int r = 0; r < Rows; ++r)
        _mm512_storeu_pd(c + static_cast<std::size_t>(i + r) * m + j, acc[r]);
}

void matmul_avx512(const double* a, const double* b, double* c, int n, int k, int m) {
    int j = 0;
    for (; j + 16 <= m; j += 16) {
        int i = 0;
        for (; i + 4 <= n; i += 4) mm_tile16<4>(a, b, c, k, m, i, j);
        for (; i < n; ++i) mm_tile16<1>(a, b, c, k, m, i, j);
    }
    for (; j + 8 <= m; j += 8) {
        int i = 0;
        for (; i + 4 <= n; i += 4) mm_tile8<4>(a, b, c, k, m, i, j);
        for (; i < n; ++i) mm_tile8<1>(a, b, c, k, m, i, j);
    }
    if (j < m) {
        // Scalar column tail (m not a multiple of 8).
        for (int i = 0; i < n; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * k;
            double* ci = c + static_cast<std::size_t>(i) * m;
            for (int p = 0; p < k; ++p) {
                double av = ai[p];
                const double* bp = b + static_cast<std::size_t>(p) * m;
                for (int jj = j; jj < m; ++jj) ci[jj] += av * bp[jj];
            }
        }
    }
}

#endif  // CHASE_AVX512

}  // namespace

void matmul(const double* a, const double* b, double* c, int n, int k, int m,
            bool accumulate) {
    if (!accumulate) std::memset(c, 0, static_cast<std::size_t>(n) * m * sizeof(double));
#ifdef CHASE_AVX512
    matmul_avx512(a, b, c, n, k, m);
#else
    matmul_scalar(a, b, c, n, k, m);
#endif
}

void transpose(const double* a, double* at, int n, int m) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            at[static_cast<std::size_t>(j) * n + i] = a[static_cast<std::size_t>(i) * m + j];
}

void vexp(const double* x, double* y, int n) {
    int i = 0;
#ifdef CHASE_AVX512
    for (; i + 8 <= n; i += 8)
        _mm512_storeu_pd(y + i, _ZGVeN8v_exp(_mm512_loadu_pd(x + i)));
#endif
    for (; i < n; ++i) y[i] = std::exp(x[i]);
}

void vtanh(const double* x, double* y, int n) {
    int i = 0;
#ifdef CHASE_AVX512
    for (; i + 8 <= n; i += 8)
        _mm512_storeu_pd(y + i, _ZGVeN8v_tanh(_mm512_loadu_pd(x + i)));
#endif
    for (; i < n; ++i) y[i] = std::tanh(x[i]);
}

void vsigmoid(const double* x, double* y, int n) {
    int i = 0;
#ifdef CHASE_AVX512
    const __m512d one = _mm512_set1_pd(1.0);
    for (; i + 8 <= n; i += 8) {
        __m512d e = _ZGVeN8v_exp(_mm512_sub_pd(_mm512_setzero_pd(), _mm512_loadu_pd(x + i)));
        _mm512_storeu_pd(y + i, _mm512_div_pd(one, _mm512_add_pd(one, e)));
    }
#endif
    for (; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace chase
