#pragma once

#include <cstddef>

namespace chase {

// Row-major dense kernels. The AVX-512 paths are what keep end-to-end
// training desk-scale on one core; the scalar fallbacks compute the same
// formulas on other targets.

// C (n x m) = A (n x k) * B (k x m), or += when accumulate.
void matmul(const double* a, const double* b, double* c, int n, int k, int m,
            bool accumulate);

// at (m x n) = transpose of a (n x m).
void transpose(const double* a, double* at, int n, int m);

// y[i] = exp(x[i]) / tanh(x[i]) / sigmoid(x[i]).
void vexp(const double* x, double* y, int n);
void vtanh(const double* x, double* y, int n);
void vsigmoid(const double* x, double* y, int n);

double dot(const double* a, const double* b, int n);

}  // namespace chase
