"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` loop version and a vectorised
numpy version.  Set ``WIGHTREC_DISABLE_NUMBA=1`` to force the numpy path
(numba missing has the same effect).  Both paths must agree to rounding.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("WIGHTREC_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAVE_NUMBA = False


def gauss_poly_eval_numpy(coeffs, powers, quad, center, z, phase=None):
    """Evaluate ``sum_t coeffs[t] * z**powers[t] * exp(-(z-c)^T A (z-c) + i z.phase)`` row-wise."""
    w = z - center
    q = np.einsum("ni,ij,nj->n", w, quad, w)
    if phase is not None:
        q = q - 1j * (z @ phase)
    if coeffs.shape[0] == 0:
        return np.zeros(z.shape[0], dtype=np.complex128)
    # (N, T) monomials
    mono = np.prod(z[:, None, :] ** powers[None, :, :], axis=2)
    return (mono @ coeffs) * np.exp(-q)


def _gauss_poly_eval_loops(coeffs, powers, quad, center, z, phase):
    n, d = z.shape
    nt = coeffs.shape[0]
    out = np.empty(n, dtype=np.complex128)
    w = np.empty(d, dtype=np.complex128)
    for row in range(n):
        for i in range(d):
            w[i] = z[row, i] - center[i]
        q = 0j
        for i in range(d):
            acc = 0j
            for j in range(d):
                acc += quad[i, j] * w[j]
            q += w[i] * acc - 1j * z[row, i] * phase[i]
        p = 0j
        for t in range(nt):
            m = coeffs[t]
            for i in range(d):
                k = powers[t, i]
                zi = z[row, i]
                for _ in range(k):
                    m *= zi
            p += m
        out[row] = p * np.exp(-q)
    return out


if HAVE_NUMBA:
    gauss_poly_eval_numba = numba.njit(cache=True)(_gauss_poly_eval_loops)
else:  # pragma: no cover
    gauss_poly_eval_numba = None


def use_numba() -> bool:
    return HAVE_NUMBA


def gauss_poly_eval(coeffs, powers, quad, center, z, phase=None):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    if HAVE_NUMBA:
        if phase is None:
            phase = np.zeros(z.shape[1], dtype=np.complex128)
        return gauss_poly_eval_numba(
            np.ascontiguousarray(coeffs, dtype=np.complex128),
            np.ascontiguousarray(powers, dtype=np.int64),
            np.ascontiguousarray(quad, dtype=np.complex128),
            np.ascontiguousarray(center, dtype=np.complex128),
            z,
            np.ascontiguousarray(phase, dtype=np.complex128),
        )
    return gauss_poly_eval_numpy(coeffs, powers, quad, center, z, phase)
