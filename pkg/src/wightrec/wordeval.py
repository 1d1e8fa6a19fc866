"""Wightman functionals of product test functions on a fixed mass-shell grid.

For ``f = f_1 (x) ... (x) f_n`` every contraction graph factorises over its
connected components, and a component is a tensor network whose vertex
tensors are Fourier transforms ``f~_i(sum of incident edge momenta)``.  All
edge momenta run over one rapidity trapezoid grid with positive weights, so
the resulting sesquilinear form is the Fock inner product of a free field
with a discrete spectral measure: Gram matrices built from it are positive
semidefinite by construction, not just up to quadrature noise.
"""
from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureBudgetExceeded
from .freefield import (
    DEFAULT_COMBINATORIAL_CAP,
    FOUR_PI,
    ContractionGraph,
    WickSeriesModel,
    _check_cap,
    enumerate_contractions,
)
from .testfn import GaussPolyFn, dagger


@dataclass(frozen=True)
class MomentumGrid:
    mass: float
    T: float
    h: float

    @property
    def t(self):
        n = int(round(self.T / self.h))
        return np.arange(-n, n + 1) * self.h

    @property
    def size(self) -> int:
        return 2 * int(round(self.T / self.h)) + 1

    @property
    def weights(self):
        return np.full(self.size, self.h / FOUR_PI)

    @property
    def k(self):
        t = self.t
        return np.stack([self.mass * np.cosh(t), self.mass * np.sinh(t)], axis=1)

    def refined(self) -> "MomentumGrid":
        return MomentumGrid(self.mass, self.T, self.h / 2)

    def pair_matrix(self, fns) -> np.ndarray:
        """``P[a, b] = sum_alpha w_alpha f_a~(-k_alpha) f_b~(k_alpha)``."""
        k = self.k
        minus = np.array([f.fourier_minkowski(-k) for f in fns])
        plus = np.array([f.fourier_minkowski(k) for f in fns])
        return (minus * self.weights) @ plus.T

    @classmethod
    def for_functions(cls, mass, fns, *, rtol=1e-12, floor=1e-17, h0=0.25, max_size=4001):
        """Cutoff from the decay of every ``|f~|`` on the shell, step by halving.

        The step is halved until all pairwise overlaps of ``fns`` change by less
        than ``rtol`` relative to the largest one, then halved once more.
        """
        fns = list(fns)
        probe = np.arange(-14.0, 14.0 + 1e-9, 0.125)
        kp = np.stack([mass * np.cosh(probe), mass * np.sinh(probe)], axis=1)
        mags = np.array([np.maximum(np.abs(f.fourier_minkowski(kp)), np.abs(f.fourier_minkowski(-kp))) for f in fns])
        mags = mags.max(axis=0)
        live = np.nonzero(mags > floor * mags.max())[0]
        T = float(max(abs(probe[live[0]]), abs(probe[live[-1]])) + 0.25)
        grid = cls(mass, T, h0)
        prev = grid.pair_matrix(fns)
        while True:
            nxt = grid.refined()
            if nxt.size > max_size:
                raise QuadratureBudgetExceeded(f"momentum grid needs more than {max_size} points")
            cur = nxt.pair_matrix(fns)
            done = np.abs(cur - prev).max() <= rtol * max(np.abs(cur).max(), 1e-300)
            grid, prev = nxt, cur
            if done:
                return grid.refined() if grid.refined().size <= max_size else grid


def _components(graph: ContractionGraph):
    """Connected components as ``(vertices, local_edges)`` with ``local_edges`` of ``(a, b, l)``."""
    n = graph.n
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = list(itertools.combinations(range(n), 2))
    for (i, j), l in zip(pairs, graph.edges):
        if l:
            parent[find(i)] = find(j)
    groups: dict = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    out = []
    for verts in sorted(groups.values()):
        local = {v: a for a, v in enumerate(verts)}
        edges = tuple((local[i], local[j], l) for (i, j), l in zip(pairs, graph.edges) if l and i in local)
        out.append((tuple(verts), edges))
    return out


class WordEvaluator:
    """Evaluates ``(W_n, f_1 (x) ... (x) f_n)`` for one model on one grid, with memoisation."""

    def __init__(self, model: WickSeriesModel, grid: MomentumGrid, *, cap: int = DEFAULT_COMBINATORIAL_CAP,
                 max_tensor: int = 2**24, compress_tol: float = 1e-13, prefix_cache: int = 3000):
        self.model = model
        self.grid = grid
        self.cap = cap
        self.max_tensor = max_tensor
        self._k = grid.k
        self._w = grid.weights
        self._ids: dict = {}
        self._fns: list = []
        self.compress_tol = compress_tol
        self._w0 = float(grid.weights[0])
        self._Q = np.zeros((grid.size, 0), dtype=np.complex128)
        self._tensors: dict = {}
        self._ctensors: dict = {}
        self._absorbed: set = set()
        self._paths: dict = {}
        self._prefixes: dict = {}
        self._cycles: dict = {}
        self.prefix_cache = prefix_cache
        self._comp_cache: dict = {}
        self._plans: dict = {}

    @classmethod
    def for_functions(cls, model, fns, **kw):
        grid_kw = {k: kw.pop(k) for k in ("rtol", "h0", "max_size") if k in kw}
        fns = list(fns)
        fns = fns + [f_dag for f_dag in (_dagger1(f) for f in fns)]
        return cls(model, MomentumGrid.for_functions(model.base.mass, fns, **grid_kw), **kw)

    # -- bookkeeping ----------------------------------------------------------

    def register(self, f: GaussPolyFn) -> int:
        idx = self._ids.get(f.key)
        if idx is None:
            if f.dim != 2:
                raise ValueError("words are built from functions of one spacetime point")
            idx = len(self._fns)
            self._ids[f.key] = idx
            self._fns.append(f)
        return idx

    @property
    def cache_size(self) -> int:
        return len(self._comp_cache)

    def _plan(self, n):
        plan = self._plans.get(n)
        if plan is None:
            plan = []
            active = self.model.active_degrees()
            for rs in itertools.product(active, repeat=n):
                if sum(rs) % 2:
                    continue
                _check_cap(rs, self.cap)
                pref = math.prod(self.model.coefficient(r) for r in rs)
                for graph in enumerate_contractions(rs, cap=self.cap):
                    coef = pref * float(graph.symmetry_factor)
                    plan.append((coef, _components(graph)))
            self._plans[n] = plan
        return plan

    # -- tensors --------------------------------------------------------------
    #
    # Every leg of a vertex tensor lives in the one-particle space C^G.  Legs are
    # compressed onto an orthonormal basis Q spanning the ranges of all incoming
    # ("+") legs seen so far: an edge sum  w * sum_alpha A_alpha B_alpha  equals
    # w * (Q^T A) . (Q^H B)  whenever B lies in span Q.  Fourier transforms of
    # Gaussians restricted to the shell have rapidly decaying singular values,
    # so Q stays much smaller than the grid.  Q only grows; when it does, the
    # compressed tensors are rebuilt while cached component values stay valid.

    def _raw_tensor(self, fid, signs):
        key = (fid, signs)
        t = self._tensors.get(key)
        if t is None:
            d = len(signs)
            G = self._k.shape[0]
            if G**d > self.max_tensor:
                raise QuadratureBudgetExceeded(f"vertex tensor of size {G}^{d} exceeds the budget")
            f = self._fns[fid]
            if d == 0:
                t = complex(f.fourier_minkowski(np.zeros((1, 2)))[0])
            else:
                p = np.zeros((G,) * d + (2,))
                for a, s in enumerate(signs):
                    shape = [1] * d + [2]
                    shape[a] = G
                    p = p + s * self._k.reshape(shape)
                t = f.fourier_minkowski(p.reshape(-1, 2)).reshape((G,) * d)
            self._tensors[key] = t
        return t

    def _absorb(self, t, signs):
        """Extend Q by the range of the incoming legs of ``t``; True if Q grew."""
        grew = False
        for a, s in enumerate(signs):
            if s < 0 or self._Q.shape[1] == self._Q.shape[0]:
                continue
            U = np.moveaxis(t, a, 0).reshape(t.shape[a], -1)
            fro = np.linalg.norm(U)
            if fro == 0.0:
                continue
            R = U - self._Q @ (self._Q.conj().T @ U) if self._Q.shape[1] else U
            # |U|_F / sqrt(rank) <= |U|_2, so a residual this small has no
            # singular value above the cut and both SVDs can be skipped
            if np.linalg.norm(R) <= self.compress_tol * fro / math.sqrt(min(U.shape)):
                continue
            scale = np.linalg.norm(U, 2)
            u, sv, _ = np.linalg.svd(R, full_matrices=False)
            new = u[:, sv > self.compress_tol * scale]
            if new.shape[1]:
                Q = np.hstack([self._Q, new])
                Q, _ = np.linalg.qr(Q)
                self._Q = Q
                grew = True
        if grew:
            self._ctensors.clear()
            self._prefixes.clear()
        return grew

    def _vertex_tensor(self, fid, signs):
        key = (fid, signs)
        c = self._ctensors.get(key)
        if c is None:
            t = self._raw_tensor(fid, signs)
            if not signs:
                return t
            if key not in self._absorbed:
                self._absorbed.add(key)
                self._absorb(t, signs)
            Q = self._Q
            c = t
            for a, s in enumerate(signs):
                proj = Q if s < 0 else Q.conj()
                c = np.moveaxis(np.tensordot(c, proj, axes=([a], [0])), -1, a)
            self._ctensors[key] = c
        return c

    def _cycle_word(self, fids, edges):
        """Canonical cyclic word of ``(fid, sign_in, sign_out)`` if the component is a cycle."""
        L = len(fids)
        ends = []
        for a, b, l in edges:
            ends.extend([(a, b)] * l)
        if len(ends) != L:
            return None
        incident = [[] for _ in range(L)]
        for e, (a, b) in enumerate(ends):
            incident[a].append(e)
            incident[b].append(e)
        if any(len(x) != 2 for x in incident):
            return None
        word = []
        v, e_in = 0, incident[0][1]
        for _ in range(L):
            x, y = incident[v]
            e_out = y if e_in == x else x
            s_in = -1 if ends[e_in][0] == v else 1
            s_out = -1 if ends[e_out][0] == v else 1
            word.append((fids[v], s_in, s_out))
            a, b = ends[e_out]
            v, e_in = (b if a == v else a), e_out
        back = [(f, so, si) for f, si, so in reversed(word)]
        return min(min(tuple(w[i:] + w[:i]) for i in range(L)) for w in (word, back))

    def _prefix(self, word):
        p = self._prefixes.get(word)
        if p is None:
            m = self._vertex_tensor(word[-1][0], word[-1][1:])
            p = m if len(word) == 1 else self._prefix(word[:-1]) @ m
            if len(self._prefixes) > self.prefix_cache:
                self._prefixes.clear()
            self._prefixes[word] = p
        return p

    def _cycle_value(self, word):
        val = self._cycles.get(word)
        if val is None:
            for f, si, so in word:  # absorb first: growth of Q invalidates compressed factors
                if (f, (si, so)) not in self._absorbed:
                    self._vertex_tensor(f, (si, so))
            last = self._vertex_tensor(word[-1][0], word[-1][1:])
            head = self._prefix(word[:-1])
            val = complex(np.sum(head * last.T)) * self._w0 ** len(word)
            self._cycles[word] = val
        return val

    def _component_value(self, fids, edges):
        if not edges:
            return self._vertex_tensor(fids[0], ())
        word = self._cycle_word(fids, edges)
        if word is not None:
            return self._cycle_value(word)
        letters = iter(string.ascii_letters)
        legs = [[] for _ in fids]
        signs = [[] for _ in fids]
        n_edges = 0
        for a, b, l in edges:
            for _ in range(l):
                c = next(letters)
                legs[a].append(c)
                signs[a].append(-1)
                legs[b].append(c)
                signs[b].append(1)
                n_edges += 1
        keys = [(fid, tuple(signs[v])) for v, fid in enumerate(fids)]
        for fid, sg in keys:  # make sure Q has absorbed every leg before compressing any
            if (fid, sg) not in self._absorbed:
                self._vertex_tensor(fid, sg)
        operands = [self._vertex_tensor(fid, sg) for fid, sg in keys]
        expr = ",".join("".join(l) for l in legs) + "->"
        pkey = (expr, self._Q.shape[1])
        path = self._paths.get(pkey)
        if path is None:
            path = np.einsum_path(expr, *operands, optimize="greedy")[0]
            self._paths[pkey] = path
        return complex(np.einsum(expr, *operands, optimize=path)) * self._w0**n_edges

    # -- public API ----------------------------------------------------------

    def wightman_ids(self, ids) -> complex:
        ids = tuple(ids)
        n = len(ids)
        if n == 0:
            return 1.0 + 0j
        total = 0j
        cache = self._comp_cache
        for coef, comps in self._plan(n):
            val = coef
            for verts, edges in comps:
                key = (tuple(ids[v] for v in verts), edges)
                c = cache.get(key)
                if c is None:
                    c = self._component_value(key[0], edges)
                    cache[key] = c
                val *= c
                if val == 0:
                    break
            total += val
        return total

    def wightman(self, fns) -> complex:
        """``(W_n, f_1 (x) ... (x) f_n)`` for one-point functions ``fns``."""
        return self.wightman_ids([self.register(f) for f in fns])

    def inner(self, left, right) -> complex:
        """``s(w, v) = (W, w^dagger (x) v)`` for two words given as function sequences."""
        dag = [_dagger1(f) for f in reversed(list(left))]
        return self.wightman(dag + list(right))


def _dagger1(f: GaussPolyFn) -> GaussPolyFn:
    return dagger(f, f.dim)
