"""Polynomial-times-Gaussian analytic test functions, tube regions and norms.

A :class:`GaussPolyFn` is ``f(z) = P(z) * exp(-(z - c)^T A (z - c))`` on
``C^d`` with ``Re A`` positive definite.  The family is closed under
products, tensor products, affine coordinate changes, the dagger involution
and the Fourier transform, so every operation below returns another member.

Norm conventions: ``|z| = max_j |z_j|`` and the tube of radius ``l`` around a
real set ``O`` is ``{z : exists x in O with |z_j - x_j| < l for all j}``.
Norms are evaluated on the closed tube.
"""
from __future__ import annotations

import hashlib
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

from . import _kernels
from .errors import BlockMismatch, OptimizerNotConverged, QuadratureBudgetExceeded
from .poly import Poly

SPACETIME_DIM = 2


def _frozen(a, dtype=np.complex128):
    a = np.array(a, dtype=dtype, copy=True)
    if dtype == np.complex128:
        a = a + 0.0  # fold -0.0 so content keys are canonical
    a.setflags(write=False)
    return a


def _sqrt_det(a):
    # eigenvalues of a complex symmetric matrix with Re A > 0 lie in Re > 0,
    # so the principal root is the continuation of the real-case root
    return np.prod(np.sqrt(np.linalg.eigvals(a)))


class _PhasedTransform:
    """``v -> exp(i v.phase) base(v)``."""

    __slots__ = ("base", "phase")

    def __init__(self, base: "GaussPolyFn", phase: np.ndarray):
        self.base = base
        self.phase = np.asarray(phase, dtype=np.complex128)

    @property
    def quad(self):
        return self.base.quad

    @property
    def powers(self):
        return self.base.powers

    def __call__(self, v):
        b = self.base
        return _kernels.gauss_poly_eval(b.coeffs, b.powers, b.quad, b.center, np.atleast_2d(v), self.phase)


@dataclass(frozen=True, eq=False)
class GaussPolyFn:
    coeffs: np.ndarray
    powers: np.ndarray
    quad: np.ndarray
    center: np.ndarray
    block: int = 0

    def __post_init__(self):
        quad = np.atleast_2d(np.asarray(self.quad, dtype=np.complex128))
        d = quad.shape[0]
        if quad.shape != (d, d):
            raise ValueError("quad_form must be square")
        if not np.allclose(quad, quad.T, rtol=0, atol=1e-12 * max(1.0, np.abs(quad).max())):
            raise ValueError("quad_form must be symmetric")
        quad = 0.5 * (quad + quad.T)
        if np.linalg.eigvalsh(quad.real).min() <= 0:
            raise ValueError("Re quad_form must be positive definite")
        center = np.asarray(self.center, dtype=np.complex128).reshape(d)
        powers = np.asarray(self.powers, dtype=np.int64).reshape(-1, d)
        poly = Poly.from_arrays(np.asarray(self.coeffs, dtype=np.complex128).reshape(-1), powers)
        coeffs, powers = poly.to_arrays()
        block = self.block or d
        if d % block:
            raise BlockMismatch(f"dimension {d} is not a multiple of block {block}")
        object.__setattr__(self, "coeffs", _frozen(coeffs))
        object.__setattr__(self, "powers", _frozen(powers, np.int64))
        object.__setattr__(self, "quad", _frozen(quad))
        object.__setattr__(self, "center", _frozen(center))
        object.__setattr__(self, "block", block)

    # -- construction -------------------------------------------------------

    @classmethod
    def gaussian(cls, center, width=1.0, coeff=1.0, block=SPACETIME_DIM):
        """Isotropic ``coeff * exp(-|x - center|^2 / (2 width^2))``."""
        center = np.atleast_1d(np.asarray(center, dtype=np.complex128))
        d = center.shape[0]
        return cls([coeff], np.zeros((1, d)), np.eye(d) / (2.0 * width**2), center, block if d % block == 0 else d)

    @classmethod
    def from_poly(cls, poly: Poly, quad, center, block=0):
        coeffs, powers = poly.to_arrays()
        return cls(coeffs, powers, quad, center, block)

    @classmethod
    def zero_like(cls, f: "GaussPolyFn"):
        return cls(np.zeros(0), np.zeros((0, f.dim)), f.quad, f.center, f.block)

    # -- basic properties ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.quad.shape[0]

    @property
    def n_args(self) -> int:
        return self.dim // self.block

    @property
    def is_zero(self) -> bool:
        return self.coeffs.shape[0] == 0

    @cached_property
    def poly(self) -> Poly:
        return Poly.from_arrays(self.coeffs, self.powers)

    @cached_property
    def key(self) -> str:
        h = hashlib.sha1()
        h.update(np.array([self.dim, self.block], dtype=np.int64).tobytes())
        for arr in (self.coeffs, self.powers, self.quad, self.center):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        return isinstance(other, GaussPolyFn) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"GaussPolyFn(dim={self.dim}, block={self.block}, terms={self.coeffs.shape[0]})"

    # -- evaluation ---------------------------------------------------------

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        single = z.ndim == 1
        out = _kernels.gauss_poly_eval(self.coeffs, self.powers, self.quad, self.center, np.atleast_2d(z))
        return complex(out[0]) if single else out

    # -- algebra ------------------------------------------------------------

    def with_block(self, block):
        return GaussPolyFn(self.coeffs, self.powers, self.quad, self.center, block)

    def scale(self, c):
        return GaussPolyFn(self.coeffs * c, self.powers, self.quad, self.center, self.block)

    def pullback(self, lin, shift=None):
        """``g(z) = f(lin @ z + shift)`` for an invertible ``lin``."""
        lin = np.asarray(lin, dtype=np.complex128)
        shift = np.zeros(self.dim, dtype=np.complex128) if shift is None else np.asarray(shift, dtype=np.complex128)
        quad = lin.T @ self.quad @ lin
        center = np.linalg.solve(lin, self.center - shift)
        poly = self.poly.pullback(lin, shift)
        return GaussPolyFn.from_poly(poly, quad, center, self.block)

    def translate(self, a):
        """``g(z) = f(z - a)``."""
        return self.pullback(np.eye(self.dim), -np.asarray(a, dtype=np.complex128))

    def product(self, other: "GaussPolyFn") -> "GaussPolyFn":
        a = self.quad + other.quad
        c = np.linalg.solve(a, self.quad @ self.center + other.quad @ other.center)
        const = self.center @ self.quad @ self.center + other.center @ other.quad @ other.center - c @ a @ c
        poly = (self.poly * other.poly) * np.exp(-const)
        return GaussPolyFn.from_poly(poly, a, c, self.block)

    def fourier(self) -> "GaussPolyFn":
        """``F(v) = integral f(x) exp(i v.x) dx`` with the Euclidean dot product."""
        a = self.quad
        ainv = np.linalg.inv(a)
        d = self.dim
        norm = math.pi ** (d / 2) / _sqrt_det(a) * np.exp(-self.center @ a @ self.center)
        smooth = self.poly.gaussian_smooth(0.5 * ainv)
        poly = smooth.pullback(0.5j * ainv, self.center) * norm
        return GaussPolyFn.from_poly(poly, 0.25 * ainv, 2j * (a @ self.center), self.block)

    @cached_property
    def _fourier(self) -> "_PhasedTransform":
        # exp(i v.c) times the transform of the centred function; the closed
        # form from ``fourier`` multiplies exp(-c.A.c) by a Gaussian that grows
        # like exp(+c.A.c), which is 0 * inf for narrow, distant functions
        centred = self.translate(-self.center)
        return _PhasedTransform(centred.fourier(), self.center)

    def fourier_minkowski(self, momenta):
        """``integral f(x) exp(i sum_b p_b.x_b) dx`` with ``p.x = p0 x0 - p1 x1``.

        ``momenta`` has shape ``(N, dim)`` laid out blockwise like ``x``.
        """
        v = np.array(momenta, dtype=np.complex128, copy=True)
        v[:, 1::2] *= -1
        return self._fourier(v)

    def marginalize(self, keep) -> "GaussPolyFn":
        """Integrate out every variable not listed in ``keep``."""
        keep = list(keep)
        drop = [j for j in range(self.dim) if j not in keep]
        order = drop + keep
        g = self.pullback(np.eye(self.dim)[:, order]) if order != list(range(self.dim)) else self
        nd = len(drop)
        a = g.quad
        axx, axk, akk = a[:nd, :nd], a[:nd, nd:], a[nd:, nd:]
        axx_inv = np.linalg.inv(axx)
        schur = akk - axk.T @ axx_inv @ axk
        m = -axx_inv @ axk
        m0 = g.center[:nd] - m @ g.center[nd:]
        nk = len(keep)
        lin = np.zeros((self.dim, self.dim), dtype=np.complex128)
        lin[:nd, :nd] = np.eye(nd)
        lin[:nd, nd:] = m
        lin[nd:, nd:] = np.eye(nk)
        shift = np.concatenate([m0, np.zeros(nk)])
        poly = g.poly.pullback(lin, shift).expect_leading(nd, 0.5 * axx_inv)
        poly = poly * (math.pi ** (nd / 2) / _sqrt_det(axx))
        block = self.block if nk % self.block == 0 and nk else max(nk, 1)
        return GaussPolyFn.from_poly(poly, schur, g.center[nd:], block)

    def integral(self) -> complex:
        if self.is_zero:
            return 0j
        return complex(self._fourier(np.zeros((1, self.dim)))[0])


# -- spec-level operations ----------------------------------------------------


def eval(f: GaussPolyFn, z) -> complex:  # noqa: A001 - mirrors the operation name
    return f(np.asarray(z, dtype=np.complex128))


def tensor(f: GaussPolyFn, g: GaussPolyFn) -> GaussPolyFn:
    d1, d2 = f.dim, g.dim
    quad = np.zeros((d1 + d2, d1 + d2), dtype=np.complex128)
    quad[:d1, :d1] = f.quad
    quad[d1:, d1:] = g.quad
    poly = f.poly.embed(d1 + d2, 0) * g.poly.embed(d1 + d2, d1)
    block = f.block if f.block == g.block else math.gcd(f.block, g.block)
    return GaussPolyFn.from_poly(poly, quad, np.concatenate([f.center, g.center]), block)


def tensor_all(fs) -> GaussPolyFn:
    fs = list(fs)
    out = fs[0]
    for g in fs[1:]:
        out = tensor(out, g)
    return out


def _block_reversal(dim, block):
    n = dim // block
    return [(n - 1 - j // block) * block + j % block for j in range(dim)]


def dagger(f: GaussPolyFn, block: int | None = None) -> GaussPolyFn:
    """``g(z_1..z_n) = conj(f(conj z_n, ..., conj z_1))`` for blocks of size ``block``."""
    block = block or f.block
    if f.dim % block:
        raise BlockMismatch(f"dimension {f.dim} is not a multiple of block {block}")
    perm = _block_reversal(f.dim, block)
    poly = f.poly.conj().permute(perm)
    quad = np.conj(f.quad)[np.ix_(perm, perm)]
    center = np.conj(f.center)[perm]
    return GaussPolyFn.from_poly(poly, quad, center, f.block)


def boost_matrix(chi: float) -> np.ndarray:
    return np.array([[math.cosh(chi), math.sinh(chi)], [math.sinh(chi), math.cosh(chi)]])


def poincare(f: GaussPolyFn, a, chi: float = 0.0) -> GaussPolyFn:
    """``f_(a,L)(x_1..x_n) = f(L^-1 (x_1 - a), ..., L^-1 (x_n - a))`` with ``L`` a boost."""
    if f.dim % SPACETIME_DIM:
        raise BlockMismatch(f"dimension {f.dim} is not made of 2-vector blocks")
    n = f.dim // SPACETIME_DIM
    linv = boost_matrix(-chi)
    lin = np.kron(np.eye(n), linv)
    shift = -lin @ np.tile(np.asarray(a, dtype=float), n)
    return f.pullback(lin, shift)


def _relative_matrix(n):
    t = np.zeros((n, n))
    t[0, 0] = 1.0
    for j in range(1, n):
        t[j, j - 1] = 1.0
        t[j, j] = -1.0
    return np.kron(t, np.eye(SPACETIME_DIM))


def to_relative(g: GaussPolyFn) -> GaussPolyFn:
    """``g^(r)(x_1..x_n) = g(x_1, x_1 - x_2, ..., x_{n-1} - x_n)``."""
    if g.dim % SPACETIME_DIM:
        raise BlockMismatch(f"dimension {g.dim} is not made of 2-vector blocks")
    return g.pullback(_relative_matrix(g.dim // SPACETIME_DIM))


def from_relative(h: GaussPolyFn) -> GaussPolyFn:
    """Inverse of :func:`to_relative`."""
    return h.pullback(np.linalg.inv(_relative_matrix(h.dim // SPACETIME_DIM)))


def swap_args(f: GaussPolyFn, i: int = 0, j: int = 1) -> GaussPolyFn:
    """Exchange spacetime arguments ``i`` and ``j``."""
    n = f.dim // SPACETIME_DIM
    order = list(range(n))
    order[i], order[j] = order[j], order[i]
    perm = [order[b] * SPACETIME_DIM + o for b in range(n) for o in range(SPACETIME_DIM)]
    return f.pullback(np.eye(f.dim)[perm])


# -- regions ------------------------------------------------------------------


@dataclass(frozen=True)
class TubeRegion:
    """Complex ``radius``-neighbourhood of a real base set.

    ``base`` is one of ``FULL``, ``CONE_VK`` (``xi_k^2 > 0`` in relative
    coordinates, ``k`` 1-based), ``LIGHTCONE_W`` (pairs ``(x, x')`` with
    ``x - x'`` timelike) or ``PRODUCT`` of ``parts``.
    """

    base: str
    radius: float
    dim: int
    k: int = 0
    parts: tuple = field(default_factory=tuple)

    @classmethod
    def full(cls, dim, radius):
        return cls("FULL", radius, dim)

    @classmethod
    def cone_vk(cls, k, n, radius):
        if not 1 <= k <= n - 1:
            raise ValueError("need 1 <= k <= n-1")
        return cls("CONE_VK", radius, SPACETIME_DIM * (n - 1), k=k)

    @classmethod
    def lightcone_w(cls, radius):
        return cls("LIGHTCONE_W", radius, 2 * SPACETIME_DIM)

    @classmethod
    def product(cls, parts, radius):
        return cls("PRODUCT", radius, sum(p.dim for p in parts), parts=tuple(parts))

    def with_radius(self, radius):
        parts = tuple(p.with_radius(radius) for p in self.parts)
        return TubeRegion(self.base, radius, self.dim, self.k, parts)


def _cone_reachable(u0, u1, r0, r1):
    # open box (u0 +- r0) x (u1 +- r1) meets the open cone |x0| > |x1|
    return abs(u0) + r0 > max(0.0, abs(u1) - r1)


def region_contains(region: TubeRegion, z) -> bool:
    z = np.asarray(z, dtype=np.complex128)
    if z.shape != (region.dim,):
        raise ValueError(f"point has shape {z.shape}, region dim is {region.dim}")
    l = region.radius
    y = np.abs(z.imag)
    if np.any(y >= l):
        return False
    r = np.sqrt(l * l - y * y)
    u = z.real
    if region.base == "FULL":
        return True
    if region.base == "CONE_VK":
        j = SPACETIME_DIM * (region.k - 1)
        return _cone_reachable(u[j], u[j + 1], r[j], r[j + 1])
    if region.base == "LIGHTCONE_W":
        return _cone_reachable(u[0] - u[2], u[1] - u[3], r[0] + r[2], r[1] + r[3])
    if region.base == "PRODUCT":
        off = 0
        for p in region.parts:
            if not region_contains(p.with_radius(l), z[off:off + p.dim]):
                return False
            off += p.dim
        return True
    raise ValueError(f"unknown base {region.base!r}")


def cone_distance_maxnorm(xi) -> float:
    """Max-norm distance from a real 2-vector to the closed cone ``|x0| >= |x1|``."""
    x0, x1 = abs(xi[0]), abs(xi[1])
    return max(0.0, (x1 - x0) / 2.0)


# -- norms --------------------------------------------------------------------


@dataclass(frozen=True)
class NormIndex:
    region: TubeRegion
    l: float
    N: int
    ell: float = math.inf

    def __post_init__(self):
        if not 0 < self.l < self.ell:
            raise ValueError(f"need 0 < l < ell, got l={self.l}, ell={self.ell}")
        if self.N < 0:
            raise ValueError("N must be non-negative")


def _multi_indices(d, N):
    return [k for total in range(N + 1) for k in itertools.product(range(total + 1), repeat=d) if sum(k) == total]


def _is_pure_gaussian(f):
    return f.coeffs.shape[0] == 1 and not f.powers.any()


def _gaussian_sup_full(f, l):
    ar, ai = f.quad.real, f.quad.imag
    m = ar + ai @ np.linalg.solve(ar, ai)
    best = -np.inf
    for signs in itertools.product((-l, l), repeat=f.dim):
        eta = np.asarray(signs) - f.center.imag
        best = max(best, eta @ m @ eta)
    return abs(f.coeffs[0]) * math.exp(best)


class _TubeParam:
    """Maps an unconstrained-ish real parameter vector to a point of the closed tube."""

    def __init__(self, region, l):
        self.region, self.l, self.d = region, l, region.dim

    def base_size(self):
        return self.d

    def base_point(self, p, branch):
        reg = self.region
        if reg.base == "FULL":
            return p
        x = np.array(p, dtype=float)
        if reg.base == "CONE_VK":
            j = SPACETIME_DIM * (reg.k - 1)
            u, v = branch * x[j] ** 2, branch * x[j + 1] ** 2
            x[j], x[j + 1] = u + v, u - v
            return x
        if reg.base == "LIGHTCONE_W":
            u, v = branch * x[2] ** 2, branch * x[3] ** 2
            xi = np.array([u + v, u - v])
            return np.concatenate([x[:2], x[:2] - xi])
        raise ValueError(f"sup norm not supported on base {reg.base!r}")

    def point(self, theta, branch):
        d = self.d
        b = self.base_point(theta[:d], branch)
        rho, phi = theta[d:2 * d], theta[2 * d:]
        if self.region.base == "FULL":
            # tube over R^d is exactly |Im z_j| <= l
            return b + 1j * rho
        return b + rho * np.exp(1j * phi)

    def bounds(self):
        d, l = self.d, self.l
        if self.region.base == "FULL":
            return [(None, None)] * d + [(-l, l)] * d
        return [(None, None)] * d + [(0.0, l)] * d + [(-math.pi, math.pi)] * d

    def initial(self, target, rng, count):
        d, l = self.d, self.l
        reg = self.region
        seeds = []
        if reg.base == "FULL":
            for sgn in itertools.product((-1.0, 0.0, 1.0), repeat=min(d, 2)):
                y = np.zeros(d)
                y[: len(sgn)] = np.asarray(sgn) * 0.9 * l
                seeds.append((np.concatenate([target, y]), 1))
        else:
            p0 = np.array(target, dtype=float)
            if reg.base == "CONE_VK":
                j = SPACETIME_DIM * (reg.k - 1)
                xi = target[j:j + 2]
                slots = (j, j + 1)
            else:
                xi = target[:2] - target[2:]
                slots = (2, 3)
            for branch in (1, -1):
                u, v = (xi[0] + xi[1]) / 2, (xi[0] - xi[1]) / 2
                p = p0.copy()
                p[slots[0]] = math.sqrt(max(branch * u, 0.0))
                p[slots[1]] = math.sqrt(max(branch * v, 0.0))
                for phi0 in (0.0, math.pi / 2, -math.pi / 2, math.pi):
                    seeds.append((np.concatenate([p, np.full(d, 0.9 * l), np.full(d, phi0)]), branch))
        while len(seeds) < count:
            base = np.asarray(target, dtype=float) + rng.normal(scale=1.0, size=d)
            if reg.base == "FULL":
                theta = np.concatenate([base, rng.uniform(-l, l, d)])
            else:
                theta = np.concatenate([np.abs(base) ** 0.5, rng.uniform(0, l, d), rng.uniform(-math.pi, math.pi, d)])
            seeds.append((theta, int(rng.choice([1, -1]))))
        return seeds


def _sup_log_monomial(f, kappa, param, rng, n_starts):
    kappa = np.asarray(kappa)

    def neg_log(theta, branch):
        z = param.point(theta, branch)
        val = f(z)
        mono = np.prod(np.abs(z) ** kappa) if kappa.any() else 1.0
        a = abs(val) * mono
        return -math.log(a) if a > 0 else 1e300

    target = f.center.real.copy()
    best, ok = -np.inf, False
    for theta0, branch in param.initial(target, rng, n_starts):
        res = optimize.minimize(neg_log, theta0, args=(branch,), method="L-BFGS-B", bounds=param.bounds(),
                                options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 2000})
        ok = ok or bool(res.success)
        best = max(best, -res.fun)
    if not ok:
        raise OptimizerNotConverged("no start of the tube maximisation converged")
    return best


def _sup_grid_1d(f, kappa, l, grid_points):
    # coarse grid on a 6-sigma box in x, closed strip in y, then local polish
    a = f.quad[0, 0].real
    sigma = 1.0 / math.sqrt(2 * a)
    x0 = f.center.real[0]
    half = 6 * sigma + abs(f.center.imag[0]) + l + 3.0 * math.sqrt(kappa[0] + 1)
    xs = np.linspace(x0 - half, x0 + half, grid_points)
    ys = np.linspace(-l, l, grid_points)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = (X + 1j * Y).ravel()
    vals = np.abs(f(Z[:, None])) * np.abs(Z) ** kappa[0]
    i = int(np.argmax(vals))
    start = np.array([Z[i].real, Z[i].imag])

    def neg(theta):
        z = theta[0] + 1j * theta[1]
        v = abs(f(np.array([z]))) * abs(z) ** kappa[0]
        return -math.log(v) if v > 0 else 1e300

    res = optimize.minimize(neg, start, method="L-BFGS-B", bounds=[(None, None), (-l, l)],
                            options={"ftol": 1e-15, "gtol": 1e-12})
    best = max(-res.fun, math.log(vals[i]) if vals[i] > 0 else -np.inf)
    if not res.success and best <= math.log(vals[i]) - 1e-9:
        raise OptimizerNotConverged(res.message)
    return best


def norm_sup(f: GaussPolyFn, idx: NormIndex, *, n_starts: int = 12, grid_points: int = 201, seed: int = 0) -> float:
    """``max_{|kappa|<=N} sup_{z in closed tube} |z^kappa f(z)|``."""
    region = idx.region
    if f.dim != region.dim:
        raise ValueError(f"function dim {f.dim} does not match region dim {region.dim}")
    if f.is_zero:
        return 0.0
    if region.base == "FULL" and idx.N == 0 and _is_pure_gaussian(f):
        return _gaussian_sup_full(f, idx.l)
    rng = np.random.default_rng(seed)
    best = -np.inf
    for kappa in _multi_indices(f.dim, idx.N):
        if region.base == "FULL" and f.dim == 1:
            val = _sup_grid_1d(f, kappa, idx.l, grid_points)
        else:
            val = _sup_log_monomial(f, kappa, _TubeParam(region, idx.l), rng, n_starts)
        best = max(best, val)
    return math.exp(best)


def _abs_z(z):
    return np.max(np.abs(z), axis=-1)


def norm_int(f: GaussPolyFn, idx: NormIndex, *, rtol: float = 1e-8) -> float:
    """``integral over the tube of (1 + |z|)^N |f(z)| dx dy`` (region ``FULL``)."""
    if idx.region.base != "FULL":
        raise ValueError("integral norm is implemented for FULL regions only")
    if f.is_zero:
        return 0.0
    d, l, N = f.dim, idx.l, idx.N
    if d == 1:
        xc = f.center.real[0]
        sigma = 1.0 / math.sqrt(2 * f.quad[0, 0].real)

        def inner(y):
            def g(x):
                z = x + 1j * y
                return (1 + abs(z)) ** N * abs(f(np.array([z])))
            pts = (xc - 10 * sigma - 2 * l, xc + 10 * sigma + 2 * l)
            with warnings.catch_warnings():
                # the outer integral's error estimate is the one that is checked
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                core, _ = integrate.quad(g, *pts, epsabs=0, epsrel=rtol * 1e-1, limit=400)
                lo, _ = integrate.quad(g, -np.inf, pts[0], epsabs=0, epsrel=rtol, limit=200)
                hi, _ = integrate.quad(g, pts[1], np.inf, epsabs=0, epsrel=rtol, limit=200)
            return core + lo + hi

        val, err = integrate.quad(inner, -l, l, epsabs=0, epsrel=rtol * 1e-1, limit=400)
        if err > rtol * abs(val) * 10:
            raise QuadratureBudgetExceeded(f"integral norm error {err:.3g} for value {val:.6g}")
        return val
    return _norm_int_grid(f, l, N, rtol)


def _norm_int_grid(f, l, N, rtol, max_level=6):
    # tensor grid: trapezoid in x (Gaussian decay), Gauss-Legendre in y
    d = f.dim
    sig = 1.0 / math.sqrt(2 * np.linalg.eigvalsh(f.quad.real).min())
    half = 9 * sig + 2 * l
    prev = None
    for level in range(2, max_level + 2):
        nx, ny = 8 * 2**level, 4 * 2**level
        if (nx * ny) ** d > 4e7:
            break
        xs = np.linspace(-half, half, nx)
        wx = np.full(nx, xs[1] - xs[0])
        yg, wy = np.polynomial.legendre.leggauss(ny)
        ys, wy = yg * l, wy * l
        axes, weights = [], []
        for j in range(d):
            axes += [xs + f.center.real[j], ys]
            weights += [wx, wy]
        grids = np.meshgrid(*axes, indexing="ij")
        w = weights[0]
        for ww in weights[1:]:
            w = np.multiply.outer(w, ww)
        z = np.stack([grids[2 * j] + 1j * grids[2 * j + 1] for j in range(d)], axis=-1).reshape(-1, d)
        vals = (1 + _abs_z(z)) ** N * np.abs(f(z))
        val = float(np.sum(vals * w.ravel()))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
    raise QuadratureBudgetExceeded("tensor-grid integral norm did not converge")


def tube_weight_constant(d: int, l: float) -> float:
    """``integral_{|y|<=l} (1 + |z|)^-(d+1) dx dy`` over ``C^d``."""
    if d == 1:
        def inner(y):
            return integrate.quad(lambda x: (1 + math.hypot(x, y)) ** -2, -np.inf, np.inf, epsabs=0, epsrel=1e-12)[0]
        return integrate.quad(inner, -l, l, epsabs=0, epsrel=1e-12)[0]
    # upper bound via |z| >= |x|_inf;
    # integral of (1 + |x|_inf)^-(d+1) over R^d = d 2^d integral_0^inf t^(d-1) (1+t)^-(d+1) dt = 2^d
    return (2 * l) ** d * 2.0**d


@dataclass(frozen=True)
class NormEquivalenceReport:
    lhs_int: float
    rhs_int: float
    constant_int: float
    holds_int: bool
    lhs_sup: float
    rhs_sup: float
    constant_sup: float
    holds_sup: bool

    @property
    def holds(self):
        return self.holds_int and self.holds_sup


def check_norm_equivalence(f: GaussPolyFn, l: float, l_prime: float, N: int, *, rel_slack: float = 1e-7) -> NormEquivalenceReport:
    """Check both inequalities between the sup and integral norm systems on ``R^d``.

    ``||f||'_{l,N} <= 2^(N+d+1) c_l ||f||_{l,N+d+1}`` with ``c_l`` the tube
    weight constant, and ``||f||_{l,N} <= (pi (l'-l)^2)^-d ||f||'_{l',N}``
    from the mean-value inequality on polydiscs of radius ``l' - l``.
    """
    if not l < l_prime:
        raise ValueError("need l < l_prime")
    d = f.dim
    region = TubeRegion.full(d, l)
    c_int = 2.0 ** (N + d + 1) * tube_weight_constant(d, l)
    lhs_int = norm_int(f, NormIndex(region, l, N))
    rhs_int = c_int * norm_sup(f, NormIndex(region, l, N + d + 1))
    c_sup = (math.pi * (l_prime - l) ** 2) ** (-d)
    lhs_sup = norm_sup(f, NormIndex(region, l, N))
    rhs_sup = c_sup * norm_int(f, NormIndex(region.with_radius(l_prime), l_prime, N))
    return NormEquivalenceReport(
        lhs_int, rhs_int, c_int, lhs_int <= rhs_int * (1 + rel_slack) + 1e-300,
        lhs_sup, rhs_sup, c_sup, lhs_sup <= rhs_sup * (1 + rel_slack) + 1e-300,
    )
