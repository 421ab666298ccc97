"""Fused numba kernels for the large replica sweeps.

All randomness is pre-generated with numpy Philox streams and handed in as
arrays; the kernels are pure elementwise transforms.  Every output cell is
written by exactly one iteration, so results do not depend on the numba
threading layer or the number of threads.
"""

import warnings

import numpy as np

with warnings.catch_warnings():
    # the TBB layer probe warns on older TBB builds; the workqueue fallback
    # is equally deterministic here
    warnings.simplefilter("ignore")
    from numba import njit, prange


@njit(cache=True, parallel=True)
def p2p_step_bits(prev, prev_w, out, out_w, bits, coeff_l, coeff_r, shift, w0, w1):
    """One transfer step with Bernoulli site weights decoded from raw bytes.

    out[b, j] = (w0 + w1*bit_j) * (cL[j]*prev[b, j+shift-1] + cR[j]*prev[b, j+shift])
    where source slots outside [0, prev_w) contribute zero (their walk
    probability vanishes, so the coefficient is zero there too).
    """
    batch = out.shape[0]
    for b in prange(batch):
        for j in range(out_w):
            bit = (bits[b, j >> 3] >> (j & 7)) & 1
            jl = j + shift - 1
            left = prev[b, jl] if 0 <= jl < prev_w else 0.0
            right = prev[b, jl + 1] if 0 <= jl + 1 < prev_w else 0.0
            out[b, j] = (w0 + w1 * bit) * (coeff_l[j] * left + coeff_r[j] * right)


@njit(cache=True, parallel=True)
def pool_update(new, new_w, old, old_w, picks, abar, coeffs, shifts):
    """Population-dynamics update for point-to-point cascade pools.

    new[k, j] = sum_x abar[k, x] * coeffs[x, j] * old[picks[x, k], j + shifts[x]]
    with out-of-range source slots contributing zero.
    """
    n_samples = new.shape[0]
    n_letters = abar.shape[1]
    for k in prange(n_samples):
        for j in range(new_w):
            acc = 0.0
            for x in range(n_letters):
                jj = j + shifts[x]
                if 0 <= jj < old_w:
                    acc += abar[k, x] * coeffs[x, j] * old[picks[x, k], jj]
            new[k, j] = acc
