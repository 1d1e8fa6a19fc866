"""Sparse multivariate polynomials with complex coefficients.

Only what the Gaussian-times-polynomial family needs: products, affine
substitution and Gaussian expectations.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        self.terms = {}
        for k, v in (terms or {}).items():
            if v != 0:
                self.terms[tuple(int(e) for e in k)] = complex(v)

    @classmethod
    def constant(cls, nvars, value=1.0):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars, j):
        key = [0] * nvars
        key[j] = 1
        return cls(nvars, {tuple(key): 1.0})

    @classmethod
    def linear(cls, row, shift):
        """The affine form ``sum_k row[k] z_k + shift``."""
        n = len(row)
        terms = {(0,) * n: shift}
        for k, a in enumerate(row):
            if a != 0:
                key = [0] * n
                key[k] = 1
                terms[tuple(key)] = a
        return cls(n, terms)

    @classmethod
    def from_arrays(cls, coeffs, powers):
        powers = np.asarray(powers, dtype=np.int64)
        nvars = powers.shape[1]
        p = cls(nvars)
        for c, k in zip(coeffs, powers):
            key = tuple(int(e) for e in k)
            p.terms[key] = p.terms.get(key, 0) + complex(c)
        p.terms = {k: v for k, v in p.terms.items() if v != 0}
        return p

    def to_arrays(self):
        keys = sorted(self.terms)
        coeffs = np.array([self.terms[k] for k in keys], dtype=np.complex128)
        powers = np.array(keys, dtype=np.int64).reshape(len(keys), self.nvars)
        return coeffs, powers

    @property
    def degree(self):
        return max((sum(k) for k in self.terms), default=0)

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(self.nvars, out)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.nvars, {k: v * other for k, v in self.terms.items()})
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def pullback(self, lin, shift):
        """Return ``Q(z) = P(lin @ z + shift)``; ``lin`` has shape (old, new)."""
        lin = np.asarray(lin)
        nnew = lin.shape[1]
        forms = [Poly.linear(lin[j], shift[j]) for j in range(self.nvars)]
        power_cache: dict = {}

        def power(j, e):
            if (j, e) not in power_cache:
                power_cache[(j, e)] = Poly.constant(nnew) if e == 0 else power(j, e - 1) * forms[j]
            return power_cache[(j, e)]

        out = Poly(nnew)
        for key, c in self.terms.items():
            term = Poly.constant(nnew, c)
            for j, e in enumerate(key):
                if e:
                    term = term * power(j, e)
            out = out + term
        return out

    def embed(self, nvars, offset):
        """Same polynomial in a larger variable set, starting at ``offset``."""
        out = {}
        for k, v in self.terms.items():
            key = [0] * nvars
            key[offset:offset + self.nvars] = k
            out[tuple(key)] = v
        return Poly(nvars, out)

    def permute(self, perm):
        """Variable ``i`` of the result is variable ``perm[i]`` of ``self``."""
        return Poly(self.nvars, {tuple(k[p] for p in perm): v for k, v in self.terms.items()})

    def conj(self):
        return Poly(self.nvars, {k: np.conj(v) for k, v in self.terms.items()})

    def expect_leading(self, nlead, cov):
        """Average the first ``nlead`` variables over a centred Gaussian.

        Returns a polynomial in the remaining variables.
        """
        moments = _moment_table(np.asarray(cov, dtype=np.complex128))
        out: dict = {}
        for key, c in self.terms.items():
            m = moments(key[:nlead])
            if m != 0:
                rest = key[nlead:]
                out[rest] = out.get(rest, 0) + c * m
        return Poly(self.nvars - nlead, out)

    def gaussian_smooth(self, cov):
        """``u -> E[P(y + u)]`` for the centred Gaussian with covariance ``cov``."""
        d = self.nvars
        lin = np.hstack([np.eye(d), np.eye(d)])
        return self.pullback(lin, np.zeros(d)).expect_leading(d, cov)


def _moment_table(cov):
    d = cov.shape[0]

    @lru_cache(maxsize=None)
    def moment(beta):
        total = sum(beta)
        if total == 0:
            return 1.0 + 0j
        if total % 2:
            return 0j
        j = next(i for i, b in enumerate(beta) if b)
        rest = list(beta)
        rest[j] -= 1
        acc = 0j
        for k in range(d):
            if rest[k]:
                nxt = list(rest)
                nxt[k] -= 1
                acc += cov[j, k] * rest[k] * moment(tuple(nxt))
        return acc

    return moment
