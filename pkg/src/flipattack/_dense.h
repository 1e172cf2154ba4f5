/* Dense-layer primitives for the compiled kernels.
 * Weights: w is (n_out, n_in) row-major, wt is its transpose (n_in, n_out). */
#ifndef FLIPATTACK_DENSE_H
#define FLIPATTACK_DENSE_H

#include <stddef.h>

static inline void dense_forward(const double *restrict in, double *restrict out,
                                 const double *restrict wt, const double *restrict bias,
                                 ptrdiff_t n_in, ptrdiff_t n_out)
{
    for (ptrdiff_t o = 0; o < n_out; o++)
        out[o] = bias[o];
    for (ptrdiff_t i = 0; i < n_in; i++) {
        const double ai = in[i];
        const double *restrict row = wt + i * n_out;
        for (ptrdiff_t o = 0; o < n_out; o++)
            out[o] += ai * row[o];
    }
}

static inline void dense_backward(const double *restrict gout, double *restrict gin,
                                  const double *restrict w, ptrdiff_t n_in, ptrdiff_t n_out)
{
    for (ptrdiff_t i = 0; i < n_in; i++)
        gin[i] = 0.0;
    for (ptrdiff_t o = 0; o < n_out; o++) {
        const double go = gout[o];
        const double *restrict row = w + o * n_in;
        if (go == 0.0)
            continue;
        for (ptrdiff_t i = 0; i < n_in; i++)
            gin[i] += go * row[i];
    }
}

#endif
