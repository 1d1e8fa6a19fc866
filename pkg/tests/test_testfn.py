import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from conftest import gauss1, random_fn
from wightrec import testfn as tf
from wightrec.errors import BlockMismatch
from wightrec.testfn import GaussPolyFn, NormIndex, TubeRegion


def full(d, l, N=0):
    return NormIndex(TubeRegion.full(d, l), l, N)


class TestEval:
    def test_spec_points(self):
        f = gauss1()
        assert tf.eval(f, [0]) == pytest.approx(1.0, abs=1e-15)
        assert tf.eval(f, [1j]) == pytest.approx(math.e, rel=1e-15)
        assert tf.eval(f, [1 + 1j]) == pytest.approx(complex(math.cos(2), -math.sin(2)), rel=1e-14)

    def test_matches_direct_formula(self, rng):
        f = random_fn(rng, 4)
        z = rng.normal(size=(5, 4)) + 0.4j * rng.normal(size=(5, 4))
        for zi in z:
            w = zi - f.center
            p = sum(c * np.prod(zi**k) for c, k in zip(f.coeffs, f.powers))
            assert f(zi) == pytest.approx(p * np.exp(-w @ f.quad @ w), rel=1e-12)

    def test_numpy_and_compiled_paths_agree(self, rng, monkeypatch):
        from wightrec import _kernels
        f = random_fn(rng, 4, terms=5)
        z = rng.normal(size=(50, 4)) + 0.2j * rng.normal(size=(50, 4))
        a = _kernels.gauss_poly_eval_numpy(f.coeffs, f.powers, f.quad, f.center, z)
        b = _kernels._gauss_poly_eval_loops(f.coeffs, f.powers, f.quad, f.center, z, np.zeros(z.shape[1], complex))
        np.testing.assert_allclose(a, b, rtol=1e-13)
        ph = rng.normal(size=4) + 0.1j * rng.normal(size=4)
        a = _kernels.gauss_poly_eval_numpy(f.coeffs, f.powers, f.quad, f.center, z, ph)
        b = _kernels._gauss_poly_eval_loops(f.coeffs, f.powers, f.quad, f.center, z, ph)
        np.testing.assert_allclose(a, b, rtol=1e-13)
        np.testing.assert_allclose(a, f(z) * np.exp(1j * z @ ph), rtol=1e-12)

    def test_rejects_indefinite_real_part(self):
        with pytest.raises(ValueError):
            GaussPolyFn([1.0], [[0]], [[-1.0]], [0.0])


class TestClosure:
    def test_product_pointwise(self, rng):
        f, g = random_fn(rng, 2), random_fn(rng, 2)
        h = f.product(g)
        for z in rng.normal(size=(6, 2)) + 0.3j * rng.normal(size=(6, 2)):
            assert h(z) == pytest.approx(f(z) * g(z), rel=1e-11)

    def test_tensor_pointwise_and_zero(self, rng):
        f, g = random_fn(rng, 2), random_fn(rng, 4)
        h = tf.tensor(f, g)
        z = rng.normal(size=6) + 0.2j * rng.normal(size=6)
        assert h(z) == pytest.approx(f(z[:2]) * g(z[2:]), rel=1e-13)
        assert tf.tensor(f, GaussPolyFn.zero_like(g)).is_zero
        e = gauss1()
        assert tf.tensor(e, e)(np.zeros(2)) == pytest.approx(1.0)

    def test_pullback_and_complex_translation(self, rng):
        f = random_fn(rng, 2)
        lin = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        shift = rng.normal(size=2)
        g = f.pullback(lin, shift)
        a = np.array([0.3 + 0.2j, -0.5j])
        t = f.translate(a)
        for z in rng.normal(size=(5, 2)):
            assert g(z) == pytest.approx(f(lin @ z + shift), rel=1e-11)
            assert t(z) == pytest.approx(f(z - a), rel=1e-11)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_fourier_against_quadrature(self, dim):
        rng = np.random.default_rng(dim)
        if dim == 1:
            f = gauss1(center=0.3 + 0.4j, a=0.7 + 0.2j, coeffs=(1.0, 2 - 1j, 0.5), powers=((0,), (1,), (2,)))
        else:
            f = random_fn(rng, 2, block=2, terms=2, max_pow=1)
        F = f.fourier()
        for v in rng.normal(size=(3, dim)):
            def integrand(*x):
                x = np.array(x)
                return f(x.astype(complex)) * np.exp(1j * v @ x)
            lim = [(-12, 12)] * dim
            if dim == 1:
                re = integrate.quad(lambda x: integrand(x).real, *lim[0], epsabs=1e-13, limit=200)[0]
                im = integrate.quad(lambda x: integrand(x).imag, *lim[0], epsabs=1e-13, limit=200)[0]
            else:
                xs = np.linspace(-10, 10, 801)
                X, Y = np.meshgrid(xs, xs, indexing="ij")
                pts = np.stack([X.ravel(), Y.ravel()], 1)
                vals = f(pts.astype(complex)) * np.exp(1j * pts @ v)
                tot = np.sum(vals) * (xs[1] - xs[0]) ** 2
                re, im = tot.real, tot.imag
            assert F(v.astype(complex)) == pytest.approx(re + 1j * im, rel=1e-8, abs=1e-10)

    def test_marginal_against_quadrature(self, rng):
        f = random_fn(rng, 2, terms=3)
        m = f.marginalize([1])
        for y in (-0.4, 0.1, 0.8):
            re = integrate.quad(lambda x: f(np.array([x, y], complex)).real, -15, 15, limit=200, epsabs=1e-13)[0]
            im = integrate.quad(lambda x: f(np.array([x, y], complex)).imag, -15, 15, limit=200, epsabs=1e-13)[0]
            assert m(np.array([y], complex)) == pytest.approx(re + 1j * im, rel=1e-9, abs=1e-12)

    def test_integral(self):
        f = gauss1(coeffs=(1.0, 1.0), powers=((0,), (2,)))
        assert f.integral() == pytest.approx(math.sqrt(math.pi) * 1.5, rel=1e-13)

    def test_integral_of_distant_narrow_function(self):
        # exp(-c.A.c) underflows here; the value itself is an ordinary number
        f = GaussPolyFn.gaussian([7.0, -5.0], 0.3)
        sq = f.product(f)
        assert sq.integral() == pytest.approx(math.pi * 0.09, rel=1e-12)
        v = np.array([[0.4, -1.1]])
        assert sq.fourier_minkowski(v)[0] == pytest.approx(
            math.pi * 0.09 * np.exp(1j * (0.4 * 7.0 - 1.1 * 5.0) - 0.09 * (0.4**2 + 1.1**2) / 4), rel=1e-12)

    def test_transform_finite_far_out_with_complex_center(self):
        f = GaussPolyFn.gaussian([0.3 + 0.2j, -0.4 - 0.3j], 0.8)
        k = np.array([[1e5, 1e5], [3e2, -2e2]])
        vals = f.fourier_minkowski(k)
        assert np.all(np.isfinite(vals))
        assert vals[0] == 0


class TestDagger:
    def test_self_conjugate_gaussian(self):
        f = GaussPolyFn.gaussian([0.3, -1.0], 0.7)
        assert tf.dagger(f) == f

    def test_imaginary_center_flips(self):
        f = gauss1(center=0.8j)
        assert tf.dagger(f, 1) == gauss1(center=-0.8j)

    def test_reverses_tensor_order(self, rng):
        f, g = random_fn(rng, 2), random_fn(rng, 2)
        lhs = tf.dagger(tf.tensor(f, g))
        rhs = tf.tensor(tf.dagger(g), tf.dagger(f))
        z = rng.normal(size=4) + 0.2j * rng.normal(size=4)
        assert lhs(z) == pytest.approx(rhs(z), rel=1e-12)

    def test_definition_pointwise(self, rng):
        f = random_fn(rng, 6)
        g = tf.dagger(f)
        z = rng.normal(size=6) + 0.3j * rng.normal(size=6)
        zr = np.conj(np.concatenate([z[4:6], z[2:4], z[0:2]]))
        assert g(z) == pytest.approx(np.conj(f(zr)), rel=1e-12)

    def test_block_mismatch(self, rng):
        with pytest.raises(BlockMismatch):
            tf.dagger(random_fn(rng, 3, block=3), block=2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([2, 4, 6]))
    def test_involution_exact(self, seed, dim):
        f = random_fn(np.random.default_rng(seed), dim)
        g = tf.dagger(tf.dagger(f))
        assert g.key == f.key

    def test_preserves_full_norm(self, rng):
        f = random_fn(rng, 2, terms=1, max_pow=1)
        idx = full(2, 0.3, 1)
        assert tf.norm_sup(tf.dagger(f), idx) == pytest.approx(tf.norm_sup(f, idx), rel=1e-6)


class TestNormSup:
    def test_gaussian_analytic(self):
        assert tf.norm_sup(gauss1(), full(1, 1.0)) == pytest.approx(math.e, rel=1e-12)

    def test_zero(self):
        assert tf.norm_sup(GaussPolyFn.zero_like(gauss1()), full(1, 1.0)) == 0.0

    @staticmethod
    def _grid_oracle(f, l, N):
        xs = np.linspace(-5, 5, 2001)
        ys = np.linspace(-l, l, 801)
        X, Y = np.meshgrid(xs, ys)
        Z = (X + 1j * Y).ravel()
        vals = np.abs(f(Z[:, None]))
        best = max(np.max(vals * np.abs(Z) ** k) for k in range(N + 1))
        k_best = max(range(N + 1), key=lambda k: np.max(vals * np.abs(Z) ** k))
        i = int(np.argmax(vals * np.abs(Z) ** k_best))

        def neg(t):
            z = complex(t[0], t[1])
            return -abs(z) ** k_best * abs(f(np.array([z])))
        r = optimize.minimize(neg, [Z[i].real, Z[i].imag], bounds=[(-5, 5), (-l, l)], method="L-BFGS-B",
                              options={"ftol": 1e-15, "gtol": 1e-13})
        return max(best, -r.fun)

    def test_first_moment_matches_grid_oracle(self):
        f = gauss1()
        assert tf.norm_sup(f, full(1, 1.0, 1)) == pytest.approx(self._grid_oracle(f, 1.0, 1), rel=1e-9)

    def test_polynomial_prefactor_grid_oracle(self):
        f = gauss1(center=0.4, a=0.8, coeffs=(1.0, -2.0), powers=((1,), (3,)))
        for l, N in [(0.5, 0), (0.5, 2), (1.2, 1)]:
            assert tf.norm_sup(f, full(1, l, N)) == pytest.approx(self._grid_oracle(f, l, N), rel=1e-7)

    def test_two_dim_against_sampling(self, rng):
        f = random_fn(rng, 2, terms=2, max_pow=1)
        l = 0.4
        val = tf.norm_sup(f, full(2, l, 1))
        z = f.center.real + rng.normal(size=(20000, 2)) + 1j * rng.uniform(-l, l, size=(20000, 2))
        fz = np.abs(f(z))
        samp = max(np.max(fz), *(np.max(fz * np.abs(z[:, j])) for j in range(2)))
        assert samp <= val * (1 + 1e-9)
        assert samp >= 0.8 * val

    def test_monotone_in_l_and_N(self):
        f = gauss1(center=0.2, coeffs=(1.0, 0.5), powers=((0,), (1,)))
        table = np.array([[tf.norm_sup(f, full(1, l, N)) for N in (0, 1, 2)] for l in (0.25, 0.5, 1.0)])
        assert np.all(np.diff(table, axis=0) >= -1e-12)
        assert np.all(np.diff(table, axis=1) >= -1e-12)

    def test_tensor_submultiplicative(self):
        f = gauss1()
        ff = tf.tensor(f, f)
        for l, N in [(0.5, 1), (0.5, 0), (0.9, 2)]:
            lhs = tf.norm_sup(ff, full(2, l, N))
            rhs = tf.norm_sup(f, full(1, l, N)) ** 2
            assert lhs <= rhs * (1 + 1e-8)

    def test_cone_region_bounded_by_full(self, rng):
        f = GaussPolyFn.gaussian([0.0, 0.0, 0.5, 1.5], 0.6)
        w = tf.norm_sup(f, NormIndex(TubeRegion.lightcone_w(0.25), 0.25, 0))
        u = tf.norm_sup(f, full(4, 0.25))
        assert 0 < w <= u * (1 + 1e-9)
        # sampled lower bound on points of the tube over W
        best = 0.0
        for _ in range(4000):
            x = rng.normal(size=2) * 0.5
            s = rng.normal()
            xi = np.array([abs(s) + 1e-3, 0.0]) * np.sign(rng.normal()) + np.array([0, rng.uniform(-1, 1) * abs(s)])
            z = np.concatenate([x, x - xi]).astype(complex)
            best = max(best, abs(f(z)))
        assert best <= w * (1 + 1e-9)

    def test_norm_index_checks_ell(self):
        with pytest.raises(ValueError):
            NormIndex(TubeRegion.full(1, 1.0), 1.0, 0, ell=0.5)


class TestNormInt:
    def test_gaussian_value(self):
        oracle = math.sqrt(math.pi) * integrate.quad(lambda y: math.exp(y * y), -1, 1, epsabs=0, epsrel=1e-13)[0]
        val = tf.norm_int(gauss1(), full(1, 1.0))
        assert val == pytest.approx(oracle, rel=1e-8)
        # sqrt(pi) ~ 1.772454 and the y-integral ~ 2.925303
        assert val == pytest.approx(1.772454 * 2.925303, rel=1e-6)

    def test_zero_and_vanishing_tube(self):
        assert tf.norm_int(GaussPolyFn.zero_like(gauss1()), full(1, 1.0)) == 0.0
        vals = [tf.norm_int(gauss1(), full(1, l)) for l in (1e-1, 1e-2, 1e-3)]
        assert vals[2] < vals[1] < vals[0] and vals[2] < 1e-2

    def test_two_dim_product_factorizes(self):
        f = gauss1(a=0.8)
        ff = tf.tensor(f, f)
        # N=0 with max-norm weight is separable
        assert tf.norm_int(ff, full(2, 0.5), rtol=1e-7) == pytest.approx(tf.norm_int(f, full(1, 0.5)) ** 2, rel=1e-6)


class TestNormEquivalence:
    @pytest.mark.parametrize("f,l,lp,N", [
        (gauss1(), 0.5, 1.0, 0),
        (gauss1(coeffs=(1.0,), powers=((1,),)), 0.5, 1.0, 2),
    ])
    def test_holds(self, f, l, lp, N):
        rep = tf.check_norm_equivalence(f, l, lp, N)
        assert rep.holds_int and rep.holds_sup
        assert rep.lhs_int > 0 and rep.lhs_sup > 0

    def test_zero(self):
        rep = tf.check_norm_equivalence(GaussPolyFn.zero_like(gauss1()), 0.5, 1.0, 0)
        assert rep.lhs_int == rep.rhs_int == 0 and rep.holds

    def test_requires_increasing_radius(self):
        with pytest.raises(ValueError):
            tf.check_norm_equivalence(gauss1(), 1.0, 0.5, 0)


class TestPoincare:
    def test_identity(self, rng):
        f = random_fn(rng, 4)
        assert tf.poincare(f, [0, 0], 0.0) == f

    def test_translation_shifts_center(self):
        f = GaussPolyFn.gaussian([0.1, 0.2], 0.5)
        g = tf.poincare(f, [1.0, -2.0])
        np.testing.assert_allclose(g.center, [1.1, -1.8], atol=1e-15)
        np.testing.assert_allclose(g.quad, f.quad, atol=1e-15)

    def test_pointwise(self, rng):
        f = random_fn(rng, 4)
        a, chi = np.array([1.0, 0.0]), 0.3
        g = tf.poincare(f, a, chi)
        linv = tf.boost_matrix(-chi)
        for x in rng.normal(size=(10, 4)):
            xr = np.concatenate([linv @ (x[:2] - a), linv @ (x[2:] - a)])
            assert g(x.astype(complex)) == pytest.approx(f(xr.astype(complex)), rel=1e-12, abs=1e-300)

    def test_group_law(self, rng):
        f = random_fn(rng, 4)
        a1, a2, c1, c2 = np.array([0.3, -0.2]), np.array([-0.1, 0.5]), 0.4, -0.25
        lhs = tf.poincare(tf.poincare(f, a1, c1), a2, c2)
        rhs = tf.poincare(f, a2 + tf.boost_matrix(c2) @ a1, c1 + c2)
        for x in rng.normal(size=(10, 4)):
            assert lhs(x.astype(complex)) == pytest.approx(rhs(x.astype(complex)), rel=1e-12, abs=1e-300)

    def test_block_mismatch(self, rng):
        with pytest.raises(BlockMismatch):
            tf.poincare(random_fn(rng, 3, block=3), [0, 0])


class TestRelative:
    def test_single_argument(self, rng):
        f = random_fn(rng, 2)
        assert tf.to_relative(f) == f

    def test_two_arguments_spot(self):
        g = GaussPolyFn.gaussian([0.2, -0.3, 0.5, 0.1], 0.8)
        h = tf.to_relative(g)
        x = np.array([1.0, 1.0, 1.0, 1.0], complex)
        assert h(x) == pytest.approx(g(np.array([1, 1, 0, 0], complex)), rel=1e-14)

    def test_round_trip(self, rng):
        g = random_fn(rng, 6)
        back = tf.from_relative(tf.to_relative(g))
        for x in rng.normal(size=(10, 6)):
            assert back(x.astype(complex)) == pytest.approx(g(x.astype(complex)), rel=1e-12, abs=1e-300)


def _brute_cone_member(u0, u1, y0, y1, l, rng, samples=20000):
    r0, r1 = math.sqrt(max(l * l - y0 * y0, 0)), math.sqrt(max(l * l - y1 * y1, 0))
    x0 = u0 + rng.uniform(-r0, r0, samples)
    x1 = u1 + rng.uniform(-r1, r1, samples)
    return bool(np.any(np.abs(x0) > np.abs(x1)))


class TestRegions:
    def test_full(self):
        reg = TubeRegion.full(2, 0.5)
        assert tf.region_contains(reg, np.array([10 + 0.4j, -3 - 0.49j]))
        assert not tf.region_contains(reg, np.array([0.4j, 0.5j]))

    def test_real_timelike_pair_inside_w(self):
        reg = TubeRegion.lightcone_w(1e-6)
        assert tf.region_contains(reg, np.array([0, 0, -2.0, 0.5], complex))

    def test_far_spacelike_pair_outside_w(self):
        reg = TubeRegion.lightcone_w(0.1)
        assert not tf.region_contains(reg, np.array([0, 3, 0, 0], complex))
        dist = optimize.minimize_scalar(lambda t: max(abs(t), abs(3 - abs(t))), bounds=(-5, 5), method="bounded",
                                       options={"xatol": 1e-12})
        assert dist.fun == pytest.approx(1.5, abs=1e-6)
        assert tf.cone_distance_maxnorm([0, 3]) == pytest.approx(1.5)

    def test_cone_vk_real_points(self):
        reg = TubeRegion.cone_vk(2, 3, 1e-9)
        assert tf.region_contains(reg, np.array([5, 5, 1, 0.5], complex))
        assert not tf.region_contains(reg, np.array([5, 5, 0.5, 1], complex))

    def test_cone_membership_matches_sampling(self, rng):
        reg = TubeRegion.cone_vk(1, 2, 0.3)
        for _ in range(200):
            u = rng.normal(size=2)
            y = rng.uniform(-0.3, 0.3, 2)
            z = u + 1j * y
            got = tf.region_contains(reg, z)
            brute = _brute_cone_member(u[0], u[1], y[0], y[1], 0.3, rng)
            if got != brute:
                # sampling can only miss thin slivers
                assert got and not brute
                margin = abs(u[0]) + math.sqrt(0.09 - y[0] ** 2) - max(0, abs(u[1]) - math.sqrt(0.09 - y[1] ** 2))
                assert margin < 1e-3

    def test_monotone_in_radius(self, rng):
        for _ in range(100):
            z = rng.normal(size=4) + 0.2j * rng.normal(size=4)
            if tf.region_contains(TubeRegion.lightcone_w(0.2), z):
                assert tf.region_contains(TubeRegion.lightcone_w(0.4), z)
