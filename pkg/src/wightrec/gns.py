"""Finite-truncation reconstruction: Borchers words, the form ``s``, the quotient space.

A dictionary of one-point Gaussians generates tensor words up to a maximal
degree ``D``.  The Gram matrix of ``s`` on those words is diagonalised layer by
layer in degree, which gives an orthonormal basis whose first vector is the
vacuum and whose first ``k`` layers span exactly the words of degree ``<= k``.
Field and translation operators are then matrices of ``s`` between words,
expressed in that basis.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, GridTooCoarse, NotPSD, NotSpacelike, ProjectionResidualExceeded
from .freefield import DEFAULT_COMBINATORIAL_CAP, WickSeriesModel, npoint_smeared
from .testfn import GaussPolyFn, dagger, tensor_all, to_relative
from .wordeval import WordEvaluator

log = logging.getLogger(__name__)

DEFAULT_WORD_CAP = 200
DEFAULT_TOLERANCE = 1e-9


def _dag1(f: GaussPolyFn) -> GaussPolyFn:
    return dagger(f, f.dim)


def _close(f: GaussPolyFn, g: GaussPolyFn, tol=1e-12) -> bool:
    if f.dim != g.dim or f.powers.shape != g.powers.shape or not np.array_equal(f.powers, g.powers):
        return False
    scale = max(1.0, float(np.abs(f.coeffs).max(initial=0.0)))
    return (np.allclose(f.quad, g.quad, rtol=0, atol=tol) and np.allclose(f.center, g.center, rtol=0, atol=tol)
            and np.allclose(f.coeffs, g.coeffs, rtol=0, atol=tol * scale))


# -- words ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Dictionary:
    one_particle: tuple
    max_degree: int

    def __post_init__(self):
        fns = tuple(self.one_particle)
        object.__setattr__(self, "one_particle", fns)
        if not fns:
            raise ValueError("dictionary must contain at least one function")
        if any(f.dim != 2 for f in fns):
            raise ValueError("dictionary functions must depend on one spacetime point")
        if len({f.key for f in fns}) != len(fns):
            log.info("dictionary contains repeated functions; the Gram matrix will have a kernel")
        if self.max_degree < 0:
            raise ValueError("max_degree must be non-negative")

    @classmethod
    def standard(cls, max_degree: int = 3) -> "Dictionary":
        """Four Gaussians of width 0.7 at the corners of a rhombus with a spacelike diagonal."""
        centers = [(0.0, 0.0), (0.0, 3.0), (1.5, 1.5), (-1.0, 1.5)]
        return cls(tuple(GaussPolyFn.gaussian(c, 0.7) for c in centers), max_degree)

    @classmethod
    def lattice(cls, step, count: int, *, width: float = 1.0, origin=(0.0, 0.0), max_degree: int = 2) -> "Dictionary":
        """Gaussians at ``origin + k * step`` for ``k = 0..count-1``; translations by lattice
        vectors map most of it into itself, which makes translation checks exact there."""
        step = np.asarray(step, dtype=float)
        origin = np.asarray(origin, dtype=float)
        return cls(tuple(GaussPolyFn.gaussian(origin + k * step, width) for k in range(count)), max_degree)

    @property
    def size(self) -> int:
        return len(self.one_particle)

    def words(self, max_degree: int | None = None) -> list:
        D = self.max_degree if max_degree is None else max_degree
        out = []
        for n in range(D + 1):
            out.extend(itertools.product(range(self.size), repeat=n))
        return out

    def word_count(self) -> int:
        return sum(self.size**n for n in range(self.max_degree + 1))

    def fns(self, word) -> tuple:
        return tuple(self.one_particle[i] for i in word)

    def locate(self, f: GaussPolyFn) -> int | None:
        for i, g in enumerate(self.one_particle):
            if f.key == g.key or _close(f, g):
                return i
        return None

    def shift_map(self, a) -> list:
        """For each function, the index of its translate by ``a`` (``None`` if absent)."""
        return [self.locate(f.translate(np.asarray(a, dtype=float))) for f in self.one_particle]


@dataclass(frozen=True)
class BorchersVector:
    """Terminating sequence as a finite sum of ``coeff * f_1 (x) ... (x) f_n`` terms."""

    terms: tuple = ()

    @classmethod
    def vacuum(cls, coeff=1.0) -> "BorchersVector":
        return cls(((complex(coeff), ()),))

    @classmethod
    def word(cls, fns, coeff=1.0) -> "BorchersVector":
        return cls(((complex(coeff), tuple(fns)),))

    @classmethod
    def from_word_coords(cls, dictionary: Dictionary, coords, words=None) -> "BorchersVector":
        words = dictionary.words() if words is None else words
        return cls(tuple((complex(c), dictionary.fns(w)) for c, w in zip(coords, words) if c != 0))

    @property
    def components(self) -> dict:
        out: dict = {}
        for c, fns in self.terms:
            out.setdefault(len(fns), []).append((c, fns))
        return out

    @property
    def degree(self) -> int:
        return max((len(fns) for _, fns in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c, _ in self.terms)

    def __add__(self, other: "BorchersVector") -> "BorchersVector":
        return BorchersVector(self.terms + other.terms)

    def scale(self, c) -> "BorchersVector":
        return BorchersVector(tuple((c * t, fns) for t, fns in self.terms))

    def translate(self, a) -> "BorchersVector":
        a = np.asarray(a, dtype=float)
        if not a.any():
            return self
        return BorchersVector(tuple((c, tuple(f.translate(a) for f in fns)) for c, fns in self.terms))

    def times(self, h: GaussPolyFn) -> "BorchersVector":
        """``h (x) self``, the Borchers product with a one-point function on the left."""
        return BorchersVector(tuple((c, (h,) + fns) for c, fns in self.terms))


# -- the form s -----------------------------------------------------------------------


def _word_value(model, left, right, evaluator, cap, rtol):
    if evaluator is not None:
        return evaluator.inner(left, right)
    seq = [_dag1(f) for f in reversed(left)] + list(right)
    if not seq:
        return 1.0 + 0j
    return complex(npoint_smeared(model, len(seq), tensor_all(seq), cap=cap, rtol=rtol))


def s_form(model: WickSeriesModel, f: BorchersVector, g: BorchersVector, *, evaluator: WordEvaluator | None = None,
           cap: int = DEFAULT_COMBINATORIAL_CAP, rtol: float = 1e-9) -> complex:
    """``s(f, g) = sum_{k,m} (W_{k+m}, f_k^dagger (x) g_m)``.

    With ``evaluator`` the Wightman functionals come from its momentum grid,
    otherwise from adaptive quadrature.
    """
    total = 0j
    for cf, lf in f.terms:
        for cg, rg in g.terms:
            if cf == 0 or cg == 0:
                continue
            total += np.conj(cf) * cg * _word_value(model, lf, rg, evaluator, cap, rtol)
    return total


@dataclass(frozen=True, eq=False)
class GramMatrix:
    words: tuple
    entries: np.ndarray
    tolerance: float
    asymmetry: float
    dictionary: Dictionary
    evaluator: WordEvaluator = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(w) for w in self.words])

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def _evaluator_ids(evaluator: WordEvaluator, fns):
    plus = [evaluator.register(f) for f in fns]
    minus = [evaluator.register(_dag1(f)) for f in fns]
    return plus, minus


def _pair_ids(plus, minus, left, right):
    return [minus[k] for k in reversed(left)] + [plus[k] for k in right]


def build_gram(model: WickSeriesModel, dictionary: Dictionary, *, cap: int = DEFAULT_WORD_CAP,
               tolerance: float = DEFAULT_TOLERANCE, evaluator: WordEvaluator | None = None,
               combinatorial_cap: int = DEFAULT_COMBINATORIAL_CAP) -> GramMatrix:
    """Hermitian matrix ``s(word_i, word_j)`` over all dictionary words up to degree ``D``."""
    count = dictionary.word_count()
    if count > cap:
        raise CapExceeded(f"{count} words exceed the word cap {cap}")
    if evaluator is None:
        evaluator = WordEvaluator.for_functions(model, dictionary.one_particle, cap=combinatorial_cap)
    words = tuple(dictionary.words())
    plus, minus = _evaluator_ids(evaluator, dictionary.one_particle)
    raw = np.empty((count, count), dtype=np.complex128)
    for i, wi in enumerate(words):
        for j, wj in enumerate(words):
            raw[i, j] = evaluator.wightman_ids(_pair_ids(plus, minus, wi, wj))
    asym = float(np.abs(raw - raw.conj().T).max()) if count else 0.0
    if asym > 1e-10 * max(1.0, float(np.abs(raw).max())):
        log.warning("Gram asymmetry %.3e before hermitisation", asym)
    entries = (raw + raw.conj().T) / 2
    entries.setflags(write=False)
    return GramMatrix(words, entries, tolerance, asym, dictionary, evaluator)


@dataclass(frozen=True, eq=False)
class GnsBasis:
    """Orthonormal basis of the represented subspace.

    ``coeffs`` (words x rank) expands basis vectors in words, so that
    ``coeffs^dagger G coeffs = 1``; ``iso_map = coeffs^dagger G`` sends word
    coordinates to basis coordinates and satisfies ``iso_map^dagger iso_map = G``
    up to the discarded kernel.
    """

    rank: int
    iso_map: np.ndarray
    dropped_dimension: int
    coeffs: np.ndarray
    layers: np.ndarray
    gram: GramMatrix = field(repr=False)
    min_eigenvalue: float = 0.0
    max_eigenvalue: float = 0.0

    @property
    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.rank, dtype=np.complex128)
        v[0] = 1.0
        return v

    def domain(self, degree_limit: int) -> np.ndarray:
        """Mask of basis vectors built from words of degree ``< degree_limit``."""
        return self.layers < degree_limit

    def parseval_defect(self) -> float:
        return float(np.abs(self.iso_map.conj().T @ self.iso_map - self.gram.entries).max())

    def word_form(self, op: np.ndarray) -> np.ndarray:
        """``<Psi_i, X Psi_j>`` for an operator ``X`` given in basis coordinates."""
        return self.iso_map.conj().T @ op @ self.iso_map


def gns_quotient(gram: GramMatrix, tolerance: float | None = None) -> GnsBasis:
    tol = gram.tolerance if tolerance is None else tolerance
    G = np.asarray(gram.entries)
    ev = np.linalg.eigvalsh(G)
    lam_max = max(float(ev[-1]), 0.0)
    if ev[0] < -tol * max(1.0, lam_max):
        raise NotPSD(f"Gram minimum eigenvalue {ev[0]:.3e} below -{tol:g} * {lam_max:.3e}")
    cut = tol * lam_max
    degrees = gram.degrees
    cols, layers = [], []
    C = np.zeros((gram.size, 0), dtype=np.complex128)
    for n in range(int(degrees.max(initial=0)) + 1):
        idx = np.nonzero(degrees == n)[0]
        if idx.size == 0:
            continue
        E = np.zeros((gram.size, idx.size), dtype=np.complex128)
        E[idx, np.arange(idx.size)] = 1.0
        for _ in range(2):  # project twice to keep the layers orthogonal in finite precision
            E = E - C @ (C.conj().T @ (G @ E))
        Q = E.conj().T @ G @ E
        Q = (Q + Q.conj().T) / 2
        lam, V = np.linalg.eigh(Q)
        keep = lam > cut
        if keep.any():
            block = E @ (V[:, keep] / np.sqrt(lam[keep]))
            C = np.hstack([C, block])
            cols.append(block)
            layers.extend([n] * int(keep.sum()))
    iso = C.conj().T @ G
    rank = C.shape[1]
    return GnsBasis(rank, iso, gram.size - rank, C, np.array(layers, dtype=int), gram,
                    float(ev[0]), float(ev[-1]))


# -- operators ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Matrix in GNS coordinates; ``domain`` marks the columns that are exact.

    Columns outside the domain belong to basis vectors whose image leaves the
    truncation (degree overflow); they are zero and flagged in ``overflow``.
    """

    matrix: np.ndarray
    domain: np.ndarray

    @property
    def overflow(self) -> np.ndarray:
        return ~self.domain

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return self.matrix @ other.matrix
        return self.matrix @ other


def _check_model(model, basis):
    if model != basis.gram.evaluator.model:
        raise ValueError("model differs from the one the GNS basis was built with")


def _word_matrix(basis: GnsBasis, rows, cols, right_fns):
    """``S[i, j] = s(word_i, right_fns(word_j))`` over the given row and column word indices."""
    gram = basis.gram
    ev = gram.evaluator
    d = gram.dictionary
    plus, minus = _evaluator_ids(ev, d.one_particle)
    S = np.zeros((gram.size, gram.size), dtype=np.complex128)
    for j in cols:
        right = [ev.register(f) for f in right_fns(gram.words[j])]
        for i in rows:
            S[i, j] = ev.wightman_ids([minus[k] for k in reversed(gram.words[i])] + right)
    return S


def field_matrix(model: WickSeriesModel, dictionary: Dictionary, basis: GnsBasis, h: GaussPolyFn) -> OperatorMatrix:
    """Matrix of ``Psi_f -> Psi_{h (x) f}`` on the basis vectors of degree ``< D``."""
    _check_model(model, basis)
    D = dictionary.max_degree
    domain = basis.domain(D)
    C = basis.coeffs
    if h.is_zero:
        return OperatorMatrix(np.zeros((basis.rank, basis.rank), dtype=np.complex128), domain)
    degrees = basis.gram.degrees
    cols = np.nonzero(degrees < D)[0]
    S = _word_matrix(basis, range(basis.gram.size), cols, lambda w: (h,) + dictionary.fns(w))
    M = C.conj().T @ S @ C
    M[:, ~domain] = 0.0
    return OperatorMatrix(M, domain)


def translation_matrix(model: WickSeriesModel, dictionary: Dictionary, basis: GnsBasis, a) -> np.ndarray:
    """``<e_a, U(a) e_b>`` with ``U(a) Psi_f = Psi_{f(. - a)}``."""
    _check_model(model, basis)
    a = np.asarray(a, dtype=float)
    if not a.any():
        return np.eye(basis.rank, dtype=np.complex128)
    n = basis.gram.size
    S = _word_matrix(basis, range(n), range(n), lambda w: tuple(f.translate(a) for f in dictionary.fns(w)))
    return basis.coeffs.conj().T @ S @ basis.coeffs


def vacuum_cyclic_rank(basis: GnsBasis, fields, *, tol: float | None = None) -> int:
    """Dimension of the span of ``M(f_1)...M(f_k) Omega`` for ``k <= D``."""
    D = basis.gram.dictionary.max_degree
    vecs = [basis.vacuum]
    frontier = [basis.vacuum]
    for _ in range(D):
        frontier = [M @ v for v in frontier for M in fields]
        vecs.extend(frontier)
    A = np.array(vecs)
    sv = np.linalg.svd(A, compute_uv=False)
    if tol is None:
        # the smallest direction the quotient kept sets the scale of "nonzero"
        tol = 0.5 * np.linalg.svd(basis.iso_map, compute_uv=False)[-1]
    return int((sv > tol).sum())


def word_defect(basis: GnsBasis, lhs, rhs, rows, cols) -> float:
    """``max |<Psi_i, (lhs - rhs) Psi_j>|`` over the given word indices."""
    diff = basis.word_form(np.asarray(lhs) - np.asarray(rhs))
    rows, cols = np.asarray(list(rows), dtype=int), np.asarray(list(cols), dtype=int)
    if rows.size == 0 or cols.size == 0:
        return 0.0
    return float(np.abs(diff[np.ix_(rows, cols)]).max())


def shift_stable_words(dictionary: Dictionary, shifts, *, max_degree: int | None = None) -> list:
    """Indices of the words whose every letter has a translate in the dictionary for each shift."""
    maps = [dictionary.shift_map(a) for a in shifts]
    out = []
    for idx, w in enumerate(dictionary.words()):
        if max_degree is not None and len(w) > max_degree:
            continue
        if all(m[k] is not None for m in maps for k in w):
            out.append(idx)
    return out


# -- axiom checks ---------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralReport:
    residual: float
    high_frequency_fraction: float
    points: int
    spacing: float
    window_width: float


def translation_signal(model: WickSeriesModel, basis: GnsBasis, f: BorchersVector, g: BorchersVector, a_points) -> np.ndarray:
    """``E(a) = <Psi_f, U(a) Psi_g>`` at each row of ``a_points`` on the basis' momentum grid."""
    _check_model(model, basis)
    ev = basis.gram.evaluator
    return np.array([s_form(model, f, g.translate(a), evaluator=ev) for a in np.asarray(a_points, dtype=float)])


def spectral_residual(model: WickSeriesModel, basis: GnsBasis, f: BorchersVector, g: BorchersVector, *,
                      points: int = 64, spacing: float = 0.25, window_width: float | None = None,
                      nyquist_fraction: float = 0.75, max_high: float = 0.01) -> SpectralReport:
    """Fraction of the windowed spectral mass of ``E(a)`` outside the closed forward cone.

    ``E`` is sampled on a ``points x points`` lattice centred at the origin,
    multiplied by a Gaussian window and transformed; with ``U(a) = exp(i a.P)``
    the transform at ``(p0, p1)`` is ``sum_a E(a) exp(-i (a0 p0 - a1 p1))``.
    The vacuum contributes an atom at ``p = 0`` of weight ``s(f, Omega) s(Omega, g)``;
    it lies in the cone, and a window would smear it across the cone's apex,
    so it is subtracted before transforming.  Spectral mass is the power
    ``|transform|^2``.  The default window width
    puts the window near ``exp(-5)`` on the lattice edge.
    """
    if window_width is None:
        window_width = points * spacing / 6.4
    if f.is_zero or g.is_zero:
        return SpectralReport(0.0, 0.0, points, spacing, window_width)
    axis = (np.arange(points) - points // 2) * spacing
    A0, A1 = np.meshgrid(axis, axis, indexing="ij")
    E = translation_signal(model, basis, f, g, np.stack([A0.ravel(), A1.ravel()], axis=1)).reshape(points, points)
    vac = BorchersVector.vacuum()
    ev = basis.gram.evaluator
    E = E - s_form(model, f, vac, evaluator=ev) * s_form(model, vac, g, evaluator=ev)
    if not np.abs(E).max() > 1e-14:
        return SpectralReport(0.0, 0.0, points, spacing, window_width)
    window = np.exp(-(A0**2 + A1**2) / (2.0 * window_width**2))
    spec = np.abs(np.fft.fft2(np.fft.ifftshift(E * window))) ** 2
    total = spec.sum()
    if total == 0.0:
        return SpectralReport(0.0, 0.0, points, spacing, window_width)
    w = 2.0 * np.pi * np.fft.fftfreq(points, d=spacing)
    P0, W1 = np.meshgrid(w, w, indexing="ij")
    P1 = -W1
    nyq = np.pi / spacing
    high = float(spec[np.maximum(np.abs(P0), np.abs(P1)) > nyquist_fraction * nyq].sum() / total)
    if high > max_high:
        raise GridTooCoarse(f"{high:.2%} of the spectral mass lies above {nyquist_fraction:g} x Nyquist")
    outside = float(spec[P0 < np.abs(P1)].sum() / total)
    return SpectralReport(outside, high, points, spacing, window_width)


def cluster_profile(model: WickSeriesModel, f: BorchersVector, g: BorchersVector, a, lambdas, *,
                    evaluator: WordEvaluator | None = None, rtol: float = 1e-10) -> list:
    """``[(lam, |s(f, g_(lam a)) - s(f, Omega) s(Omega, g)|)]`` for a spacelike ``a``."""
    a = np.asarray(a, dtype=float)
    if not a[0] ** 2 - a[1] ** 2 < 0:
        raise NotSpacelike(f"translation {a.tolist()} is not spacelike")
    vac = BorchersVector.vacuum()
    kw = {"evaluator": evaluator, "rtol": rtol}
    disconnected = s_form(model, f, vac, **kw) * s_form(model, vac, g, **kw)
    return [(float(lam), float(abs(s_form(model, f, g.translate(lam * a), **kw) - disconnected))) for lam in lambdas]


@dataclass(frozen=True)
class RelativeState:
    coords: np.ndarray
    residual: float
    word_coords: np.ndarray
    expansion: tuple = ()  # (coefficient, word) pairs of the projected smearing function


def _l2_inner(u: GaussPolyFn, v: GaussPolyFn) -> complex:
    return _dag1(u).product(v).integral()


def build_state_relative(model: WickSeriesModel, dictionary: Dictionary, basis: GnsBasis, g: GaussPolyFn | None,
                         base: BorchersVector, *, max_residual: float = 1e-3) -> RelativeState:
    """GNS coordinates of ``integral g(x_1, x_1 - x_2, ...) phi(x_1)...phi(x_n) Psi_base``.

    ``g`` is projected in L^2 onto the degree-``n`` dictionary words; the
    relative L^2 residual of that projection is reported and bounded.
    """
    _check_model(model, basis)
    words = basis.gram.words
    index = {w: i for i, w in enumerate(words)}
    base_idx = []
    for c, fns in base.terms:
        w = tuple(dictionary.locate(f) for f in fns)
        if any(k is None for k in w):
            raise ProjectionResidualExceeded("base vector uses functions outside the dictionary")
        base_idx.append((c, w))
    n = 0 if g is None else g.dim // 2
    if n == 0:
        x = np.zeros(len(words), dtype=np.complex128)
        scale = 1.0 if g is None else complex(g.integral())  # a 0-point g is a constant
        for c, w in base_idx:
            x[index[w]] += scale * c
        return RelativeState(basis.iso_map @ x, 0.0, x)
    if n + base.degree > dictionary.max_degree:
        raise ValueError(f"degree {n} + {base.degree} exceeds the truncation {dictionary.max_degree}")
    target = to_relative(g)
    cands = [w for w in words if len(w) == n]
    phis = [tensor_all(dictionary.fns(w)) for w in cands]
    A = np.array([[_l2_inner(u, v) for v in phis] for u in phis])
    b = np.array([_l2_inner(u, target) for u in phis])
    c, *_ = np.linalg.lstsq(A, b, rcond=1e-12)
    norm2 = _l2_inner(target, target).real
    res2 = norm2 - 2 * np.real(np.vdot(c, b)) + np.real(np.vdot(c, A @ c))
    residual = math.sqrt(max(res2, 0.0) / norm2) if norm2 > 0 else 0.0
    if residual > max_residual:
        raise ProjectionResidualExceeded(f"dictionary represents g only to relative residual {residual:.3e}")
    x = np.zeros(len(words), dtype=np.complex128)
    for cw, w in zip(c, cands):
        for cb, wb in base_idx:
            x[index[w + wb]] += cw * cb
    expansion = tuple((complex(cw), w) for cw, w in zip(c, cands) if cw != 0)
    return RelativeState(basis.iso_map @ x, residual, x, expansion)
