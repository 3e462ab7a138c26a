/* Register-tiled product used by the compiled kernel.
 *
 * out[r, v] (+)= sum_j A[r*sr + j*sj] * X[j*ldx + v]
 *
 * Each output element sums over j in increasing order, so the result does not
 * depend on tiling, vector width or threads. Vector lanes are independent
 * elements; nothing is reassociated across them.
 */
#ifndef NCODLAB_TILE_H
#define NCODLAB_TILE_H

#include <stddef.h>
#include <string.h>

typedef double ncod_v4 __attribute__((vector_size(32)));

static inline ncod_v4 ncod_load4(const double *p)
{
    ncod_v4 v;
    memcpy(&v, p, sizeof v);
    return v;
}

static inline void ncod_store4(double *p, ncod_v4 v, int accumulate)
{
    if (accumulate) {
        ncod_v4 o;
        memcpy(&o, p, sizeof o);
        v = o + v;
    }
    memcpy(p, &v, sizeof v);
}

static void ncod_tile_product(ptrdiff_t R, ptrdiff_t V, ptrdiff_t J,
                              const double *A, ptrdiff_t sr, ptrdiff_t sj,
                              const double *X, ptrdiff_t ldx,
                              double *out, ptrdiff_t ldo, int accumulate)
{
    ptrdiff_t r0 = 0;
    /* full 4-row x 8-lane tiles */
    for (; r0 + 4 <= R; r0 += 4) {
        const double *a = A + r0 * sr;
        ptrdiff_t v0 = 0;
        for (; v0 + 8 <= V; v0 += 8) {
            ncod_v4 c00 = {0}, c01 = {0}, c10 = {0}, c11 = {0};
            ncod_v4 c20 = {0}, c21 = {0}, c30 = {0}, c31 = {0};
            for (ptrdiff_t j = 0; j < J; j++) {
                const double *x = X + j * ldx + v0;
                ncod_v4 x0 = ncod_load4(x), x1 = ncod_load4(x + 4);
                double a0 = a[j * sj], a1 = a[sr + j * sj];
                double a2 = a[2 * sr + j * sj], a3 = a[3 * sr + j * sj];
                c00 += a0 * x0; c01 += a0 * x1;
                c10 += a1 * x0; c11 += a1 * x1;
                c20 += a2 * x0; c21 += a2 * x1;
                c30 += a3 * x0; c31 += a3 * x1;
            }
            ncod_store4(out + r0 * ldo + v0, c00, accumulate);
            ncod_store4(out + r0 * ldo + v0 + 4, c01, accumulate);
            ncod_store4(out + (r0 + 1) * ldo + v0, c10, accumulate);
            ncod_store4(out + (r0 + 1) * ldo + v0 + 4, c11, accumulate);
            ncod_store4(out + (r0 + 2) * ldo + v0, c20, accumulate);
            ncod_store4(out + (r0 + 2) * ldo + v0 + 4, c21, accumulate);
            ncod_store4(out + (r0 + 3) * ldo + v0, c30, accumulate);
            ncod_store4(out + (r0 + 3) * ldo + v0 + 4, c31, accumulate);
        }
        /* leftover lanes */
        for (ptrdiff_t r = r0; r < r0 + 4; r++)
            for (ptrdiff_t v = v0; v < V; v++) {
                double s = 0.0;
                for (ptrdiff_t j = 0; j < J; j++)
                    s += A[r * sr + j * sj] * X[j * ldx + v];
                out[r * ldo + v] = accumulate ? out[r * ldo + v] + s : s;
            }
    }
    /* leftover rows, one at a time, 4 lanes per vector */
    for (; r0 < R; r0++) {
        const double *a = A + r0 * sr;
        ptrdiff_t v0 = 0;
        for (; v0 + 4 <= V; v0 += 4) {
            ncod_v4 c = {0};
            for (ptrdiff_t j = 0; j < J; j++)
                c += a[j * sj] * ncod_load4(X + j * ldx + v0);
            ncod_store4(out + r0 * ldo + v0, c, accumulate);
        }
        for (ptrdiff_t v = v0; v < V; v++) {
            double s = 0.0;
            for (ptrdiff_t j = 0; j < J; j++)
                s += a[j * sj] * X[j * ldx + v];
            out[r0 * ldo + v] = accumulate ? out[r0 * ldo + v] + s : s;
        }
    }
}

#endif
