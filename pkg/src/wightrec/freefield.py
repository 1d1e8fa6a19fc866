"""Free scalar field in 1+1 dimensions and normal-ordered Wick series models.

Conventions: metric ``(+, -)``, ``p.x = p0 x0 - p1 x1`` and the Lorentz-invariant
measure written in rapidity, ``dmu(k) = dk / (4 pi omega_k) = dt / (4 pi)`` with
``k = m (cosh t, sinh t)``.  The two-point function is

    W(xi) = integral dmu(k) exp(-i k.xi),

analytic for ``Im xi`` in the backward cone.  Smeared functionals use
``F(p_1..p_n) = integral f(x) exp(i sum_b p_b.x_b) dx``; a contraction edge
``i < j`` carrying on-shell momentum ``k`` injects ``-k`` at vertex ``i`` and
``+k`` at vertex ``j``.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.stats import qmc

from .errors import (
    CombinatorialBudgetExceeded,
    DomainError,
    QuadratureBudgetExceeded,
    SeriesDivergent,
)
from .testfn import GaussPolyFn

DEFAULT_COMBINATORIAL_CAP = 16
FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class FreeFieldSpec:
    mass: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    def momenta(self, t):
        t = np.asarray(t, dtype=float)
        return self.mass * np.cosh(t), self.mass * np.sinh(t)


@dataclass(frozen=True)
class SmearedValue:
    """A quadrature result with its error estimate."""

    value: complex
    error: float

    def __complex__(self):
        return complex(self.value)


# -- pointwise two-point function ---------------------------------------------

_W_CACHE: dict = {}
_W_LOCK = threading.Lock()


def _w_key(m, xi):
    return (round(m, 12), round(xi[0].real, 12), round(xi[0].imag, 12), round(xi[1].real, 12), round(xi[1].imag, 12))


def _tube_margin(xi):
    return -xi[0].imag - abs(xi[1].imag)


def _is_real_spacelike(xi):
    return xi[0].imag == 0 and xi[1].imag == 0 and abs(xi[1].real) > abs(xi[0].real)


def _quad_complex(fun, a, b, rtol, limit, points=None, epsabs=0.0):
    kw = dict(epsabs=epsabs, epsrel=rtol, limit=limit)
    if points is not None:
        kw["points"] = points
    re, er = integrate.quad(lambda t: fun(t).real, a, b, **kw)
    im, ei = integrate.quad(lambda t: fun(t).imag, a, b, **kw)
    return complex(re, im), math.hypot(er, ei)


def two_point(spec: FreeFieldSpec, xi, *, rtol: float = 1e-10, cache: bool = True) -> complex:
    """``W(xi)`` for ``Im xi`` in the backward cone or ``xi`` real spacelike."""
    xi = np.asarray(xi, dtype=np.complex128)
    m = spec.mass
    key = _w_key(m, xi) if cache else None
    if cache:
        hit = _W_CACHE.get(key)
        if hit is not None:
            return hit
    margin = _tube_margin(xi)
    if margin > 0:
        # |integrand| <= exp(-m * margin * cosh t)
        T = math.acosh(max(1.0, 80.0 / (m * margin)))

        def integrand(t):
            return np.exp(-1j * m * math.cosh(t) * xi[0] + 1j * m * math.sinh(t) * xi[1])

        # oscillation count grows with |Re xi0| cosh T; give quad enough panels
        limit = int(min(20000, 200 + 4 * m * (abs(xi[0].real) + abs(xi[1].real)) * math.cosh(T)))
        # integral of the modulus is at most 2 K0(m * margin): the natural error scale
        scale = 2.0 * special.k0(m * margin)
        val, err = _quad_complex(integrand, -T, T, rtol, limit, points=[0.0], epsabs=1e-3 * rtol * scale)
    elif _is_real_spacelike(xi):
        s = math.sqrt(xi[1].real ** 2 - xi[0].real ** 2)
        T = math.acosh(max(1.0, 80.0 / (m * s)))
        # Lorentz invariance and the rotated contour give a positive integrand
        re, err = integrate.quad(lambda t: math.exp(-m * s * math.cosh(t)), -T, T, epsabs=0.0, epsrel=rtol, limit=200)
        val = complex(re)
        scale = abs(val)
    else:
        raise DomainError(f"W is defined here only for Im xi in the backward cone or real spacelike xi, got {xi}")
    if err > 10 * rtol * max(abs(val), 1e-2 * scale):
        raise QuadratureBudgetExceeded(f"two-point quadrature error {err:.3g} at xi={xi}")
    val = val / FOUR_PI
    if cache:
        with _W_LOCK:
            _W_CACHE[key] = val
    return val


def two_point_bessel(spec: FreeFieldSpec, xi):
    """Closed form ``K0(m sqrt(-xi^2)) / (2 pi)`` on the backward tube (vectorised).

    ``xi`` has shape ``(..., 2)``.  Inside the tube ``-xi^2`` never lies on the
    negative real axis, so principal branches of the root and of ``K0`` apply.
    """
    xi = np.asarray(xi, dtype=np.complex128)
    minus_sq = xi[..., 1] ** 2 - xi[..., 0] ** 2
    return special.kv(0, spec.mass * np.sqrt(minus_sq)) / (2.0 * math.pi)


def two_point_boundary(spec: FreeFieldSpec, xi, *, eps: float = 0.01, levels: int = 4) -> complex:
    """Boundary value ``W(xi - i0 e_0)`` at a real point off the light cone.

    Evaluates at ``xi0 - i eps / 2^j`` and removes the leading powers of the
    shift by Richardson extrapolation.
    """
    xi = np.asarray(xi, dtype=np.complex128)
    if xi.imag.any():
        raise DomainError("boundary values are taken at real points")
    if abs(abs(xi[0].real) - abs(xi[1].real)) < 1e-12:
        raise DomainError("W is singular on the light cone")
    if _is_real_spacelike(xi):
        return two_point(spec, xi)
    table = [two_point(spec, xi - 1j * eps / 2**j * np.array([1, 0])) for j in range(levels)]
    for order in range(1, levels):
        fac = 2.0**order
        table = [(fac * table[j + 1] - table[j]) / (fac - 1) for j in range(len(table) - 1)]
    return table[0]


# -- smeared two-point function -------------------------------------------------


def _rapidity_cutoff(fun, *, floor=1e-17, step=0.25, t_max=12.0):
    """Smallest symmetric ``T`` outside which ``|fun(t)|`` stays below ``floor * peak``."""
    t = np.arange(-t_max, t_max + step / 2, step)
    vals = np.abs(fun(t))
    peak = vals.max()
    if peak == 0:
        return 0.0, 0.0
    big = np.nonzero(vals > floor * peak)[0]
    T = max(abs(t[big[0]]), abs(t[big[-1]])) + 2 * step
    return min(T, t_max), float(t[int(np.argmax(vals))])


def pair_integrand(spec: FreeFieldSpec, f: GaussPolyFn, g: GaussPolyFn):
    """``t -> f~(-k) g~(k) / (4 pi)`` with ``k`` on the mass shell at rapidity ``t``."""

    def fun(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k0, k1 = spec.momenta(t)
        k = np.stack([k0, k1], axis=1)
        return f.fourier_minkowski(-k) * g.fourier_minkowski(k) / FOUR_PI

    return fun


def two_point_smeared(spec: FreeFieldSpec, f: GaussPolyFn, g: GaussPolyFn, *, rtol: float = 1e-10,
                      memo=None) -> complex:
    """``(W_2, f (x) g)`` by one-dimensional quadrature over the mass shell.

    ``memo``, if given, is called as ``memo(op, inputs, compute)`` and must
    return what ``compute()`` would.
    """
    if f.dim != 2 or g.dim != 2:
        raise ValueError("two_point_smeared expects functions of one spacetime point")
    if f.is_zero or g.is_zero:
        return 0j
    if memo is not None:
        inputs = {"mass": spec.mass, "f": f.key, "g": g.key, "rtol": rtol}
        return complex(memo("two_point_smeared", inputs,
                            lambda: SmearedValue(two_point_smeared(spec, f, g, rtol=rtol), 0.0)))
    fun = pair_integrand(spec, f, g)
    T, t_peak = _rapidity_cutoff(fun)
    if T == 0:
        return 0j

    def scalar(t):
        return complex(fun(t)[0])

    scale = integrate.quad(lambda t: abs(scalar(t)), -T, T, limit=500, points=[t_peak])[0]
    val, err = _quad_complex(scalar, -T, T, rtol * 1e-2, 2000, points=[t_peak], epsabs=1e-4 * rtol * scale)
    if err > max(rtol * abs(val), 1e-14 * scale):
        raise QuadratureBudgetExceeded(f"smeared two-point error {err:.3g} for value {val:.6g}")
    return val


# -- Wick series models --------------------------------------------------------


@dataclass(frozen=True)
class WickSeriesModel:
    """The field ``sum_r d_r / r! :phi^r:`` built on a free field.

    ``coeffs`` lists ``d_0..d_R`` explicitly; the ``gaussian`` preset instead
    generates ``d_r`` for every ``r`` and ``truncation_order`` selects ``R``.
    """

    base: FreeFieldSpec
    g: float = 0.0
    coeffs: tuple = ()
    truncation_order: int = 0
    preset: str | None = None
    bound_constant: float = field(init=False, default=math.inf)

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("coupling must be non-negative")
        if self.preset not in (None, "gaussian"):
            raise ValueError(f"unknown preset {self.preset!r}")
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if self.preset is None:
            if not coeffs:
                raise ValueError("coefficient list is empty")
            # coefficients past R are kept: they define what truncation drops
            R = len(coeffs) - 1 if self.truncation_order <= 0 else self.truncation_order
            object.__setattr__(self, "truncation_order", R)
        if self.g > 0:
            # smallest C with d_r^2 <= C (2g)^r r!
            orders = range(max(self.truncation_order, len(coeffs) - 1) + 1)
            c = max(self.coefficient(r) ** 2 / ((2 * self.g) ** r * math.factorial(r)) for r in orders)
            object.__setattr__(self, "bound_constant", c)

    @classmethod
    def free(cls, mass=1.0):
        return cls(FreeFieldSpec(mass), 0.0, (0.0, 1.0))

    @classmethod
    def gaussian(cls, g, truncation_order=2, mass=1.0):
        """``:exp(g phi^2):`` truncated at ``truncation_order``."""
        return cls(FreeFieldSpec(mass), g, (), truncation_order, "gaussian")

    @property
    def R(self) -> int:
        return self.truncation_order

    @property
    def ell(self) -> float:
        """Fundamental length ``sqrt(2 g / 3)``, a model attribute used in diagnostics."""
        return math.sqrt(2.0 * self.g / 3.0)

    def coefficient(self, r: int) -> float:
        if r < 0:
            return 0.0
        if self.preset == "gaussian":
            if r % 2:
                return 0.0
            if r == 0:
                return 1.0
            if self.g == 0:
                return 0.0
            return math.exp(0.5 * r * math.log(self.g) + math.lgamma(r + 1) - math.lgamma(r // 2 + 1))
        return self.coeffs[r] if r < len(self.coeffs) else 0.0

    def active_degrees(self, R: int | None = None):
        R = self.truncation_order if R is None else R
        return [r for r in range(R + 1) if self.coefficient(r) != 0.0]

    def with_truncation(self, R: int) -> "WickSeriesModel":
        if self.preset is None:
            return WickSeriesModel(self.base, self.g, self.coeffs, R)
        return WickSeriesModel(self.base, self.g, (), R, self.preset)

    def describe(self) -> dict:
        return {
            "mass": self.base.mass,
            "g": self.g,
            "preset": self.preset,
            "R": self.truncation_order,
            "coeffs": [self.coefficient(r) for r in range(self.truncation_order + 1)],
        }


# -- contraction graphs ----------------------------------------------------------


@dataclass(frozen=True)
class ContractionGraph:
    n: int
    degrees: tuple
    edges: tuple  # upper-triangular multiplicities in lexicographic pair order
    weight: int

    @property
    def pairs(self):
        return list(itertools.combinations(range(self.n), 2))

    def multiplicity(self, i, j):
        if i == j:
            return 0
        i, j = min(i, j), max(i, j)
        return self.edges[self.pairs.index((i, j))]

    def matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for (i, j), l in zip(self.pairs, self.edges):
            a[i, j] = a[j, i] = l
        return a

    def edge_list(self):
        """Edges ``(i, j)`` with ``i < j`` repeated by multiplicity."""
        return [(i, j) for (i, j), l in zip(self.pairs, self.edges) for _ in range(l)]

    @property
    def n_edges(self) -> int:
        return sum(self.edges)

    @property
    def symmetry_factor(self) -> Fraction:
        """``weight / prod r_i! = 1 / prod l_ij!``."""
        return Fraction(1, math.prod(math.factorial(l) for l in self.edges))


def _check_cap(degrees, cap):
    if sum(degrees) > cap:
        raise CombinatorialBudgetExceeded(f"total degree {sum(degrees)} exceeds the cap {cap}")


@lru_cache(maxsize=4096)
def _contractions(degrees: tuple) -> tuple:
    n = len(degrees)
    pairs = list(itertools.combinations(range(n), 2))
    if sum(degrees) % 2:
        return ()
    out = []
    remaining = list(degrees)
    chosen = []

    def rec(p):
        if p == len(pairs):
            if not any(remaining):
                out.append(tuple(chosen))
            return
        i, j = pairs[p]
        # vertex i has no later pair partners left once this is its last pair
        last_for_i = all(pairs[q][0] != i for q in range(p + 1, len(pairs)))
        lo = remaining[i] if last_for_i else 0
        for l in range(lo, min(remaining[i], remaining[j]) + 1):
            remaining[i] -= l
            remaining[j] -= l
            chosen.append(l)
            rec(p + 1)
            chosen.pop()
            remaining[i] += l
            remaining[j] += l

    if n == 1:
        return (ContractionGraph(1, degrees, (), 1),) if degrees[0] == 0 else ()
    rec(0)
    num = math.prod(math.factorial(r) for r in degrees)
    return tuple(
        ContractionGraph(n, degrees, e, num // math.prod(math.factorial(l) for l in e)) for e in out
    )


def enumerate_contractions(degrees, *, cap: int = DEFAULT_COMBINATORIAL_CAP) -> list:
    """All Wick contraction multigraphs without self-loops, lexicographic in the edge vector."""
    degrees = tuple(int(r) for r in degrees)
    if not degrees or min(degrees) < 0:
        raise ValueError("need at least one vertex and non-negative degrees")
    _check_cap(degrees, cap)
    return list(_contractions(degrees))


@lru_cache(maxsize=4096)
def matching_count(degrees: tuple) -> int:
    """Perfect matchings of the legs with no pair inside a vertex (inclusion-exclusion)."""
    degrees = tuple(degrees)
    S = sum(degrees)
    if S % 2:
        return 0
    total = 0
    for ks in itertools.product(*(range(r // 2 + 1) for r in degrees)):
        term = 1
        for r, k in zip(degrees, ks):
            term *= (-1) ** k * math.comb(r, 2 * k) * _double_factorial(2 * k - 1)
        total += term * _double_factorial(S - 2 * sum(ks) - 1)
    return total


def _double_factorial(n):
    return 1 if n <= 0 else math.prod(range(n, 0, -2))


# -- smeared n-point functionals --------------------------------------------------


def _incidence(graph: ContractionGraph) -> np.ndarray:
    """``B[e, i]`` is the sign with which edge ``e``'s momentum enters vertex ``i``."""
    edges = graph.edge_list()
    b = np.zeros((len(edges), graph.n))
    for e, (i, j) in enumerate(edges):
        b[e, i] = -1.0
        b[e, j] = 1.0
    return b


def _decay_radius(f: GaussPolyFn, n: int, digits: float = 40.0) -> float:
    """Energy beyond which every edge contributes below ``exp(-digits)`` relative.

    With ``lam`` the smallest eigenvalue of ``Re A'`` for the transform's form
    ``A' = A^-1 / 4`` and ``c`` the centre, ``|F(P)| <~ exp(-lam |P|^2 + |c| |P|)``.  A graph's vertex
    momenta satisfy ``|P| >= max_e omega_e / n^(3/2)`` (weight vertex ``i`` by ``i``).
    """
    ft = f._fourier
    lam = np.linalg.eigvalsh(ft.quad.real).min()
    b = np.linalg.norm(ft.phase) + 1e-12
    deg = int(ft.powers.sum(axis=1).max()) if ft.powers.size else 0
    x = 1.0
    while lam * x * x - b * x - deg * math.log1p(x) < digits:
        x *= 1.25
    return x * n**1.5


def _trapezoid_graph(fourier, bmat, m, T, rtol, atol, max_points):
    E, n = bmat.shape
    prev = None
    h = min(0.5, T / 4)
    while True:
        t = np.arange(-T, T + h / 2, h)
        if t.size**E > max_points:
            raise QuadratureBudgetExceeded(f"tensor grid with {t.size}^{E} points exceeds the budget")
        grids = np.meshgrid(*([t] * E), indexing="ij")
        tt = np.stack([g.ravel() for g in grids], axis=1)  # (N, E)
        k0, k1 = m * np.cosh(tt), m * np.sinh(tt)
        p = np.empty((tt.shape[0], 2 * n))
        p[:, 0::2] = k0 @ bmat
        p[:, 1::2] = k1 @ bmat
        val = complex(np.sum(fourier(p))) * (h / FOUR_PI) ** E
        if prev is not None:
            err = abs(val - prev)
            if err <= max(rtol * abs(val), atol):
                return val, err
        prev = val
        h /= 2


def _sobol_graph(fourier, bmat, m, T, seed, log2_points=16, scrambles=2):
    E, n = bmat.shape
    vals = []
    vol = (2 * T / FOUR_PI) ** E
    for s in range(scrambles):
        u = qmc.Sobol(d=E, scramble=True, seed=np.random.default_rng([seed, s])).random_base2(log2_points)
        tt = -T + 2 * T * u
        p = np.empty((tt.shape[0], 2 * n))
        p[:, 0::2] = (m * np.cosh(tt)) @ bmat
        p[:, 1::2] = (m * np.sinh(tt)) @ bmat
        vals.append(complex(np.mean(fourier(p))) * vol)
    return sum(vals) / scrambles, 0.5 * abs(vals[0] - vals[-1])


def graph_integral(spec: FreeFieldSpec, graph: ContractionGraph, f: GaussPolyFn, *, rtol=1e-9, atol=1e-14,
                   seed=0, max_points=2**23, memo=None) -> SmearedValue:
    """``integral prod_e dmu(k_e) F(vertex momenta)`` for one contraction graph."""
    if memo is not None:
        inputs = {"mass": spec.mass, "n": graph.n, "edges": list(graph.edges), "f": f.key, "rtol": rtol,
                  "atol": atol, "seed": seed, "max_points": max_points}
        return memo("graph_integral", inputs,
                    lambda: graph_integral(spec, graph, f, rtol=rtol, atol=atol, seed=seed, max_points=max_points))
    E, n = graph.n_edges, graph.n
    fourier = f.fourier_minkowski
    if E == 0:
        return SmearedValue(complex(fourier(np.zeros((1, 2 * n)))[0]), 0.0)
    omega = _decay_radius(f, n)
    T = math.acosh(max(1.0, omega / spec.mass))
    bmat = _incidence(graph)
    if E <= 3:
        val, err = _trapezoid_graph(fourier, bmat, spec.mass, T, rtol, atol, max_points)
    elif E <= 8:
        val, err = _sobol_graph(fourier, bmat, spec.mass, T, seed)
    else:
        raise QuadratureBudgetExceeded(f"{E} edge momenta exceed the supported dimension 8")
    return SmearedValue(val, err)


def _degree_tuples(model: WickSeriesModel, n: int, cap: int):
    active = model.active_degrees()
    for rs in itertools.product(active, repeat=n):
        if sum(rs) % 2 == 0:
            _check_cap(rs, cap)
            yield rs


def npoint_smeared(model: WickSeriesModel, n: int, f: GaussPolyFn, *, cap: int = DEFAULT_COMBINATORIAL_CAP,
                   rtol: float = 1e-9, seed: int = 0, memo=None) -> SmearedValue:
    """``(W_n, f)`` for the field ``sum_r d_r / r! :phi^r:``, with a quadrature error estimate."""
    if f.dim != 2 * n:
        raise ValueError(f"expected a function of {n} spacetime points, got dim {f.dim}")
    if n == 0:
        return SmearedValue(1.0 + 0j, 0.0)
    if f.is_zero:
        return SmearedValue(0j, 0.0)
    total, err = 0j, 0.0
    for rs in _degree_tuples(model, n, cap):
        pref = math.prod(model.coefficient(r) for r in rs)
        for graph in enumerate_contractions(rs, cap=cap):
            coef = pref * float(graph.symmetry_factor)
            term = graph_integral(model.base, graph, f, rtol=rtol, seed=seed, memo=memo)
            total += coef * term.value
            err += abs(coef) * term.error
    return SmearedValue(total, err)


def npoint_relative(model: WickSeriesModel, n: int, h: GaussPolyFn, **kw) -> SmearedValue:
    """``(W_n, h)`` for ``h`` given in relative coordinates ``(xi_1..xi_{n-1})``.

    Translation invariance lets the absolute position be integrated against a
    unit-normalised Gaussian, which is exact for every translation-invariant
    functional.
    """
    from .testfn import tensor, to_relative

    anchor = GaussPolyFn.gaussian([0.0, 0.0], 1.0, coeff=1.0 / (2.0 * math.pi))
    full = to_relative(tensor(anchor, h))
    return npoint_smeared(model, n, full, **kw)


# -- position-space path for two-point functionals ------------------------------------


def relative_profile(f: GaussPolyFn) -> GaussPolyFn:
    """``h(xi) = integral f(x, x - xi) dx`` for a function of two spacetime points."""
    if f.dim != 4:
        raise ValueError("relative_profile expects a function of two spacetime points")
    lin = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [1, 0, -1, 0], [0, 1, 0, -1]], dtype=float)
    return f.pullback(lin).marginalize([2, 3])


def model_two_point_kernel(model: WickSeriesModel, w, *, resum: bool = False):
    """``sum_r d_r^2 / r! W^r`` (or the closed Gaussian-model form when ``resum``)."""
    w = np.asarray(w, dtype=np.complex128)
    if resum:
        if model.preset != "gaussian":
            raise ValueError("resummation is available for the gaussian preset only")
        return (1.0 - 4.0 * model.g**2 * w * w) ** -0.5
    out = np.zeros_like(w)
    for r in range(model.truncation_order + 1):
        d = model.coefficient(r)
        if d:
            out = out + d * d / math.factorial(r) * w**r
    return out


def model_two_point_smeared(model: WickSeriesModel, f: GaussPolyFn, *, resum: bool = False, tau: float | None = None,
                            rtol: float = 1e-9, max_points: int = 2**22) -> SmearedValue:
    """``(W_2, f)`` in position space by shifting ``xi0 -> xi0 - i tau``.

    The relative profile ``h`` is entire, so the integral of ``h(xi) W2(xi - i0)``
    over real ``xi`` equals the integral along the shifted contour, where the
    kernel is smooth and ``|W| <= K0(m tau) / (2 pi)``.
    """
    h = relative_profile(f)
    m = model.base.mass
    sig = 1.0 / math.sqrt(2.0 * np.linalg.eigvalsh(h.quad.real).min())
    if tau is None:
        tau = 0.5 * sig
    if resum and 2.0 * model.g * special.k0(m * tau) / (2.0 * math.pi) >= 1.0:
        raise SeriesDivergent(f"2 g |W| can reach 1 on the contour Im xi0 = -{tau}")
    center = h.center.real
    half = 10.0 * sig + 2.0 * tau
    prev = None
    npts = 64
    while True:
        a = np.linspace(-half, half, npts + 1)
        da = a[1] - a[0]
        X0, X1 = np.meshgrid(a + center[0], a + center[1], indexing="ij")
        xi = np.stack([X0.ravel() - 1j * tau, X1.ravel() + 0j], axis=1)
        kern = model_two_point_kernel(model, two_point_bessel(model.base, xi), resum=resum)
        val = complex(np.sum(h(xi) * kern)) * da * da
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return SmearedValue(val, abs(val - prev))
        if (2 * npts + 1) ** 2 > max_points:
            raise QuadratureBudgetExceeded("position-space grid did not converge")
        prev = val
        npts *= 2


# -- pointwise model functions ----------------------------------------------------


def _pair_matrix(spec: FreeFieldSpec, points):
    pts = [np.asarray(p, dtype=np.complex128) for p in points]
    n = len(pts)
    k = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1, n):
            k[i, j] = k[j, i] = two_point(spec, pts[i] - pts[j])
    return k


def gaussian_model_pointwise(g: float, points, *, mass: float = 1.0, steps: int = 16) -> complex:
    """``<prod_i :exp(g phi^2):(x_i)> = det(I - 2 g K)^(-1/2)``.

    ``K_ij = W(x_i - x_j)`` for ``i < j`` (symmetric, zero diagonal).  The root
    is continued from ``g = 0`` along ``steps`` equal increments.
    """
    n = len(points)
    if n <= 1 or g == 0:
        return 1.0 + 0j
    k = _pair_matrix(FreeFieldSpec(mass), points)
    rho = np.abs(np.linalg.eigvals(2.0 * g * k)).max()
    if rho >= 1.0:
        raise SeriesDivergent(f"spectral radius of 2gK is {rho:.6g} >= 1")
    root = 1.0 + 0j
    eye = np.eye(n)
    for s in range(1, steps + 1):
        d = np.linalg.det(eye - 2.0 * g * (s / steps) * k)
        cand = np.sqrt(d + 0j)
        root = cand if abs(cand - root) <= abs(cand + root) else -cand
    return 1.0 / root


def wick_pointwise(model: WickSeriesModel, points, *, cap: int = DEFAULT_COMBINATORIAL_CAP) -> complex:
    """Truncated Wick sum ``<prod_i phi_R(x_i)>`` at points with ordered imaginary times."""
    n = len(points)
    k = _pair_matrix(model.base, points)
    pairs = list(itertools.combinations(range(n), 2))
    total = 0j
    for rs in _degree_tuples(model, n, cap):
        pref = math.prod(model.coefficient(r) for r in rs)
        for graph in enumerate_contractions(rs, cap=cap):
            val = pref * float(graph.symmetry_factor)
            for (i, j), l in zip(pairs, graph.edges):
                if l:
                    val *= k[i, j] ** l
            total += val
    return total


def _edge_vectors(total, parts):
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, vec = -1, []
        for b in bars:
            vec.append(b - prev - 1)
            prev = b
        vec.append(total + parts - 2 - prev)
        yield vec


def series_tail_bound(model: WickSeriesModel, n: int, w_max: float, *, rel_slack: float = 1e-3) -> float:
    """Upper bound on the Wick-sum terms with some ``r_i`` above the truncation order.

    Every graph term is bounded by ``w_max^(S/2)`` (``S`` the total degree) and
    the graphs of a degree tuple carry total weight ``M(r)``, the number of leg
    matchings without pairs inside a vertex, so the dropped terms are majorised
    by ``sum_r prod_i |d_{r_i}| / r_i! M(r) w_max^(S/2)``.  That sum is taken
    shell by shell in ``S`` as a sum over edge-multiplicity vectors.  For the
    Gaussian preset the shells are Taylor coefficients of
    ``det(I - x (J - I))^(-1/2)`` at ``x = 2 g w_max``, dominated coefficientwise
    by ``(1 - (n-1) x)^(-n/2)``, which bounds the shells not summed.
    """
    if n < 2 or w_max <= 0:
        return 0.0
    R = model.truncation_order
    finite = model.preset is None
    if finite:
        top = max((r for r in range(len(model.coeffs)) if model.coefficient(r) != 0.0), default=0)
        if top <= R:
            return 0.0
    x = 2.0 * model.g * w_max
    if not finite and (n - 1) * x >= 1.0:
        raise SeriesDivergent(f"bounding series diverges: 2 g w_max (n-1) = {(n - 1) * x:.6g} >= 1")
    pairs = list(itertools.combinations(range(n), 2))

    def shell(S):
        # prod_i |d_{r_i}| / prod_ij l_ij! * w^(S/2) over multigraphs with S/2 edges
        acc = 0.0
        for vec in _edge_vectors(S // 2, len(pairs)):
            deg = [0] * n
            for (i, j), l in zip(pairs, vec):
                deg[i] += l
                deg[j] += l
            if max(deg) <= R:
                continue
            coef = math.prod(abs(model.coefficient(r)) for r in deg)
            if coef:
                acc += coef / math.prod(math.factorial(l) for l in vec)
        return acc * w_max ** (S // 2)

    # shells with S <= R cannot hold a degree above R
    tail, S = 0.0, R - R % 2
    while True:
        S += 2
        if finite and S > top * n:
            return tail
        tail += shell(S)
        if finite:
            continue
        k, y, a = S // 2 + 1, (n - 1) * x, n / 2.0
        term = math.exp(math.lgamma(k + a) - math.lgamma(a) - math.lgamma(k + 1) + k * math.log(y))
        ratio = (k + a) / (k + 1) * y
        if ratio < 1.0:
            rem = term / (1.0 - ratio)
            if rem <= rel_slack * tail or rem < 1e-300:
                return tail + rem
