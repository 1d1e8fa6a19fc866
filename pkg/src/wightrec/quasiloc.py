"""Commutator and permutation-difference functionals, and carrier profiles.

Matrix elements are assembled from Wightman functionals directly, so no
operator truncation enters them.  A carrier profile divides ``|(u, f_s)|`` by
a tube norm of ``f_s`` along a family that moves away from a region; a bounded
profile is the numerical footprint of ``u`` being carried by that region.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import QuadratureBudgetExceeded
from .freefield import (
    DEFAULT_COMBINATORIAL_CAP,
    FOUR_PI,
    FreeFieldSpec,
    WickSeriesModel,
    _rapidity_cutoff,
    npoint_relative,
    npoint_smeared,
)
from .gns import BorchersVector
from .testfn import SPACETIME_DIM, GaussPolyFn, NormIndex, TubeRegion, dagger, norm_sup, swap_args, tensor_all


@dataclass(frozen=True)
class CarrierProfile:
    family_params: tuple
    ratios: tuple
    norm_index: NormIndex
    functional_label: str
    numerators: tuple = ()
    norms: tuple = ()

    def __post_init__(self):
        if len(self.ratios) != len(self.family_params):
            raise ValueError("one ratio per family parameter")
        if any(r < 0 for r in self.ratios):
            raise ValueError("ratios are non-negative")


# -- commutators ----------------------------------------------------------------------


def _sandwich(model, left, f, right, cap, rtol):
    seq = [dagger(g, g.dim) for g in reversed(left)]
    parts = seq + [f] + list(right)
    n = (sum(p.dim for p in parts)) // SPACETIME_DIM
    return complex(npoint_smeared(model, n, tensor_all(parts), cap=cap, rtol=rtol))


def commutator_element(model: WickSeriesModel, phi: BorchersVector, psi: BorchersVector, f: GaussPolyFn, *,
                       cap: int = DEFAULT_COMBINATORIAL_CAP, rtol: float = 1e-12) -> complex:
    """``<Phi, (phi phi(f) - phi phi(f_swapped)) Psi>`` for a two-point smearing ``f``.

    Both orderings are evaluated by the same code on ``f`` and on
    ``f(x', x)``; a symmetric ``f`` therefore gives exactly zero.
    """
    if f.dim != 2 * SPACETIME_DIM:
        raise ValueError("commutator smearing must depend on two spacetime points")
    fs = swap_args(f)
    total = 0j
    for cl, left in phi.terms:
        for cr, right in psi.terms:
            if cl == 0 or cr == 0:
                continue
            a = _sandwich(model, left, f, right, cap, rtol)
            b = _sandwich(model, left, fs, right, cap, rtol)
            total += np.conj(cl) * cr * (a - b)
    return total


def pauli_jordan_smeared(spec: FreeFieldSpec, f: GaussPolyFn, *, rtol: float = 1e-12) -> complex:
    """``integral (W(x - x') - W(x' - x)) f(x, x')`` through the mass-shell representation."""
    if f.dim != 2 * SPACETIME_DIM:
        raise ValueError("Pauli-Jordan smearing needs a function of two spacetime points")
    if f.is_zero:
        return 0j
    # F(k, -k) is read off the swapped function at (-k, k), so a symmetric f
    # produces two bitwise-equal integrands
    fs = swap_args(f)

    def legs(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k0, k1 = spec.momenta(t)
        k = np.stack([k0, k1], axis=1)
        p = np.hstack([-k, k])
        return f.fourier_minkowski(p), fs.fourier_minkowski(p)

    def fun(t):
        fwd, bwd = legs(t)
        return (fwd - bwd) / FOUR_PI

    def envelope(t):
        fwd, bwd = legs(t)
        return (np.abs(fwd) + np.abs(bwd)) / FOUR_PI

    T, t_peak = _rapidity_cutoff(envelope)
    if T == 0:
        return 0j
    scale = integrate.quad(lambda t: float(envelope(t)[0]), -T, T, limit=500, points=[t_peak])[0]
    kw = dict(epsabs=1e-3 * rtol * scale, epsrel=rtol * 1e-2, limit=2000, points=[t_peak])
    with warnings.catch_warnings():
        # a part that cancels to roundoff trips QUADPACK's warning; the
        # combined error is checked below instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, er = integrate.quad(lambda t: fun(t)[0].real, -T, T, **kw)
        im, ei = integrate.quad(lambda t: fun(t)[0].imag, -T, T, **kw)
    err = math.hypot(er, ei)
    if err > max(rtol * math.hypot(re, im), 1e-14 * scale):
        raise QuadratureBudgetExceeded(f"Pauli-Jordan quadrature error {err:.3g}")
    return complex(re, im)


# -- permutation differences -------------------------------------------------------------


def exchange_matrix(n: int, k: int) -> np.ndarray:
    """Relative-coordinate image of exchanging ``x_k`` and ``x_{k+1}`` (1-based ``k``).

    ``xi_{k-1} -> xi_{k-1} + xi_k``, ``xi_k -> -xi_k``, ``xi_{k+1} -> xi_k + xi_{k+1}``;
    the map is an involution of unit determinant.
    """
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    m = n - 1
    L = np.eye(m)
    j = k - 1
    L[j, j] = -1.0
    if j - 1 >= 0:
        L[j - 1, j] = 1.0
    if j + 1 < m:
        L[j + 1, j] = 1.0
    return np.kron(L, np.eye(SPACETIME_DIM))


def permutation_difference(model: WickSeriesModel, n: int, k: int, f: GaussPolyFn, *,
                           cap: int = DEFAULT_COMBINATORIAL_CAP, rtol: float = 1e-11) -> complex:
    """``(W_n, f) - (W_n o X_k, f)`` with ``X_k`` the exchange of arguments ``k, k+1``.

    ``f`` is given in the relative coordinates ``xi_j = x_j - x_{j+1}``.
    Since ``X_k`` is a unimodular involution the second term is ``(W_n, f o X_k)``.
    """
    if f.dim != 2 * (n - 1):
        raise ValueError(f"expected a function of {n - 1} relative 2-vectors, got dim {f.dim}")
    g = f.pullback(exchange_matrix(n, k))
    kw = dict(cap=cap, rtol=rtol)
    return complex(npoint_relative(model, n, f, **kw)) - complex(npoint_relative(model, n, g, **kw))


# -- carrier profiles ------------------------------------------------------------------


def spacelike_pair_family(sigma: float = 0.5, midpoint=(0.0, 0.0)) -> Callable[[float], GaussPolyFn]:
    """``s -> (x0 - x0') / sigma * g(x - c - (0, s/2)) g(x' - c + (0, s/2))``.

    The pair has relative centre ``(0, s)`` and shared width ``sigma``.  A
    bare product of Gaussians is even in the relative time while every
    commutator kernel is odd in it, so without the factor ``x0 - x0'`` the
    pairing would vanish identically for all ``s``.
    """
    c = np.asarray(midpoint, dtype=float)
    quad = np.eye(2 * SPACETIME_DIM) / (2.0 * sigma**2)
    powers = np.zeros((2, 2 * SPACETIME_DIM), dtype=np.int64)
    powers[0, 0] = 1
    powers[1, SPACETIME_DIM] = 1

    def make(s: float) -> GaussPolyFn:
        half = np.array([0.0, s / 2.0])
        center = np.concatenate([c + half, c - half])
        return GaussPolyFn([1.0 / sigma, -1.0 / sigma], powers, quad, center, SPACETIME_DIM)

    return make


def vacuum_commutator(model: WickSeriesModel, **kw) -> Callable[[GaussPolyFn], complex]:
    vac = BorchersVector.vacuum()
    return lambda f: commutator_element(model, vac, vac, f, **kw)


def carrier_profile(functional: Callable[[GaussPolyFn], complex], region: TubeRegion, idx: NormIndex,
                    family: Callable[[float], GaussPolyFn], params: Sequence[float], *, label: str = "",
                    norm_kw: dict | None = None) -> CarrierProfile:
    """``|(u, f_s)| / ||f_s||_{region, l, N}`` for each ``s``."""
    idx = dataclasses.replace(idx, region=region)
    nums, norms, ratios = [], [], []
    for s in params:
        f = family(s)
        num = abs(functional(f))
        den = norm_sup(f, idx, **(norm_kw or {}))
        nums.append(float(num))
        norms.append(float(den))
        ratios.append(float(num / den) if den > 0 else 0.0)
    return CarrierProfile(tuple(float(s) for s in params), tuple(ratios), idx, label, tuple(nums), tuple(norms))
