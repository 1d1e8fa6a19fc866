import numpy as np
import pytest
from scipy import integrate

from wightrec.errors import CapExceeded, GridTooCoarse, NotPSD, NotSpacelike, ProjectionResidualExceeded
from wightrec.freefield import FreeFieldSpec, WickSeriesModel, npoint_smeared, two_point_smeared
from wightrec.gns import (
    BorchersVector,
    Dictionary,
    GramMatrix,
    build_gram,
    build_state_relative,
    cluster_profile,
    field_matrix,
    gns_quotient,
    s_form,
    shift_stable_words,
    spectral_residual,
    translation_matrix,
    vacuum_cyclic_rank,
    word_defect,
)
from wightrec.testfn import GaussPolyFn, dagger, from_relative, tensor, tensor_all
from wightrec.wordeval import WordEvaluator

FREE = WickSeriesModel.free(1.0)
GAUSS = WickSeriesModel.gaussian(0.3)
STEP = np.array([0.6, 0.8])


def _gram_from(entries):
    entries = np.asarray(entries, dtype=np.complex128)
    d = Dictionary((GaussPolyFn.gaussian([0.0, 0.0]),), 0)
    words = tuple(() for _ in range(entries.shape[0]))
    return GramMatrix(words, entries, 1e-9, 0.0, d, None)


@pytest.fixture(scope="module")
def free_std():
    d = Dictionary.standard(3)
    gram = build_gram(FREE, d)
    return d, gram, gns_quotient(gram)


@pytest.fixture(scope="module")
def gauss_std():
    d = Dictionary.standard(3)
    gram = build_gram(GAUSS, d)
    return d, gram, gns_quotient(gram)


@pytest.fixture(scope="module", params=["free", "gauss"])
def lattice(request):
    model = FREE if request.param == "free" else GAUSS
    d = Dictionary.lattice(STEP, 5, width=0.7, max_degree=2)
    gram = build_gram(model, d)
    return model, d, gram, gns_quotient(gram)


class TestSForm:
    def test_vacuum(self):
        vac = BorchersVector.vacuum()
        assert s_form(FREE, vac, vac) == 1.0

    def test_odd_parity_vanishes(self):
        f, g, h = Dictionary.standard().one_particle[:3]
        assert s_form(FREE, BorchersVector.word([f]), BorchersVector.word([g, h])) == 0.0

    def test_single_word_is_two_point(self):
        h = GaussPolyFn.gaussian([0.2, -0.4], 0.8)
        v = BorchersVector.word([h])
        val = s_form(FREE, v, v, rtol=1e-11)
        ref = two_point_smeared(FreeFieldSpec(1.0), dagger(h, 2), h)
        assert val == pytest.approx(ref, rel=1e-9)
        assert abs(val.imag) < 1e-12 and val.real > 0

    def test_evaluator_path_agrees(self):
        d = Dictionary.standard(2)
        f, g = d.one_particle[:2]
        # total degree <= 3 keeps the adaptive path on its deterministic trapezoid branch
        u = BorchersVector.word([f]) + BorchersVector.vacuum(0.5)
        v = BorchersVector.word([g]).scale(1j) + BorchersVector.word([f, g])
        ev = WordEvaluator.for_functions(GAUSS, d.one_particle)
        assert s_form(GAUSS, u, v, evaluator=ev) == pytest.approx(s_form(GAUSS, u, v, rtol=1e-11), rel=1e-9)

    def test_hermitian(self):
        d = Dictionary.standard(2)
        f, g, h = d.one_particle[:3]
        u = BorchersVector.word([f, g])
        v = BorchersVector.word([h]) + BorchersVector.word([g, h])
        ev = WordEvaluator.for_functions(GAUSS, d.one_particle)
        uv = s_form(GAUSS, u, v, evaluator=ev)
        assert uv == pytest.approx(np.conj(s_form(GAUSS, v, u, evaluator=ev)), rel=1e-11)
        # degree-4 words go through quasi-Monte Carlo on the adaptive path
        assert s_form(GAUSS, u, v) == pytest.approx(uv, rel=1e-6)


class TestGram:
    def test_single_function_degree_one(self):
        h = GaussPolyFn.gaussian([0.0, 0.0], 1.0)
        gram = build_gram(FREE, Dictionary((h,), 1))
        G = gram.entries
        assert G.shape == (2, 2)
        assert G[0, 0] == 1.0 and G[0, 1] == 0.0
        assert G[1, 1].real == pytest.approx(two_point_smeared(FreeFieldSpec(1.0), dagger(h, 2), h).real, rel=1e-10)

    def test_duplicate_function_repeats_rows(self):
        h = GaussPolyFn.gaussian([0.3, 0.1], 0.9)
        gram = build_gram(GAUSS, Dictionary((h, h), 1))
        G = gram.entries
        assert np.array_equal(G[1], G[2]) and np.array_equal(G[:, 1], G[:, 2])
        assert gns_quotient(gram).dropped_dimension >= 1

    def test_degree_zero(self):
        gram = build_gram(FREE, Dictionary((GaussPolyFn.gaussian([0, 0]),), 0))
        assert gram.entries.tolist() == [[1.0]]

    def test_cap(self):
        with pytest.raises(CapExceeded):
            build_gram(FREE, Dictionary.standard(4))

    def test_hermitian_and_recorded(self, gauss_std):
        _, gram, _ = gauss_std
        assert np.array_equal(gram.entries, gram.entries.conj().T)
        assert gram.asymmetry < 1e-10 * np.abs(gram.entries).max()

    @pytest.mark.parametrize("which", ["free_std", "gauss_std"])
    def test_psd(self, which, request):
        _, gram, _ = request.getfixturevalue(which)
        lam = gram.eigenvalues()
        assert lam[0] >= -1e-8 * lam[-1]


class TestQuotient:
    def test_identity(self):
        basis = gns_quotient(_gram_from(np.eye(3)))
        assert basis.rank == 3 and basis.dropped_dimension == 0
        assert np.allclose(basis.iso_map, np.eye(3))

    def test_duplicate_rows(self):
        G = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 2.0], [0.0, 2.0, 2.0]])
        basis = gns_quotient(_gram_from(G))
        assert basis.dropped_dimension == 1

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            gns_quotient(_gram_from([[1.0, 0.0], [0.0, -0.1]]))

    def test_parseval_free_two_words(self):
        gram = build_gram(FREE, Dictionary((GaussPolyFn.gaussian([0, 0], 1.0),), 1))
        basis = gns_quotient(gram)
        assert basis.rank == 2
        assert basis.parseval_defect() < 1e-8

    @pytest.mark.parametrize("which", ["free_std", "gauss_std"])
    def test_orthonormal_and_parseval(self, which, request):
        _, gram, basis = request.getfixturevalue(which)
        C = basis.coeffs
        assert np.abs(C.conj().T @ gram.entries @ C - np.eye(basis.rank)).max() < 1e-7
        assert basis.parseval_defect() <= gram.tolerance * basis.max_eigenvalue
        assert basis.layers[0] == 0 and np.all(np.diff(basis.layers) >= 0)

    def test_free_rank_counts_fock_states(self, free_std):
        # 1 + 4 + 10 + 20 symmetric states; near-parallel three-particle directions may be cut
        _, _, basis = free_std
        assert 30 <= basis.rank <= 35


class TestFieldMatrix:
    @pytest.mark.parametrize("which", ["free_std", "gauss_std"])
    def test_reconstruction(self, which, request):
        d, _, basis = request.getfixturevalue(which)
        model = FREE if which == "free_std" else GAUSS
        Ms = [field_matrix(model, d, basis, f).matrix for f in d.one_particle]
        rng = np.random.default_rng(7)
        for n in (1, 2, 3):
            idx = rng.integers(0, d.size, n)
            v = basis.vacuum
            for i in idx[::-1]:
                v = Ms[i] @ v
            ref = complex(npoint_smeared(model, n, tensor_all([d.one_particle[i] for i in idx]), rtol=1e-11))
            assert abs(v[0] - ref) <= 1e-7 * max(1.0, abs(ref))

    def test_zero(self, free_std):
        d, _, basis = free_std
        M = field_matrix(FREE, d, basis, GaussPolyFn.zero_like(d.one_particle[0]))
        assert not M.matrix.any()

    @pytest.mark.parametrize("which", ["free_std", "gauss_std"])
    def test_hermiticity(self, which, request):
        d, gram, basis = request.getfixturevalue(which)
        model = FREE if which == "free_std" else GAUSS
        h = GaussPolyFn.gaussian([0.4, -0.2], 0.8, coeff=0.6 + 0.8j)
        M = field_matrix(model, d, basis, h)
        Md = field_matrix(model, d, basis, dagger(h, 2))
        dom = np.ix_(M.domain, M.domain)
        assert np.abs(Md.matrix[dom] - M.matrix.conj().T[dom]).max() < 1e-8 * max(1.0, np.abs(M.matrix).max())

    def test_linear_in_h(self, free_std):
        d, _, basis = free_std
        f, g = d.one_particle[:2]
        lhs = field_matrix(FREE, d, basis, f.scale(2.0)).matrix
        rhs = 2.0 * field_matrix(FREE, d, basis, f).matrix
        # word-level values agree to ~1e-13; the orthonormal basis amplifies that by its condition
        assert np.abs(lhs - rhs).max() <= 1e-8 * np.abs(rhs).max()
        assert not field_matrix(FREE, d, basis, g).matrix[:, ~basis.domain(d.max_degree)].any()

    def test_cyclicity(self, gauss_std):
        d, _, basis = gauss_std
        Ms = [field_matrix(GAUSS, d, basis, f).matrix for f in d.one_particle]
        assert vacuum_cyclic_rank(basis, Ms) == basis.rank

    def test_model_mismatch(self, free_std):
        d, _, basis = free_std
        with pytest.raises(ValueError):
            field_matrix(GAUSS, d, basis, d.one_particle[0])


class TestTranslation:
    def test_identity(self, lattice):
        model, d, _, basis = lattice
        assert np.array_equal(translation_matrix(model, d, basis, [0.0, 0.0]), np.eye(basis.rank))

    def test_vacuum_fixed(self, lattice):
        model, d, _, basis = lattice
        T = translation_matrix(model, d, basis, [0.3, -1.1])
        e0 = basis.vacuum
        assert np.abs(T @ e0 - e0).max() < 1e-10
        assert np.abs(T.conj().T @ e0 - e0).max() < 1e-10

    def test_composition(self, lattice):
        model, d, gram, basis = lattice
        a, b = STEP, 2 * STEP
        lhs = translation_matrix(model, d, basis, a) @ translation_matrix(model, d, basis, b)
        rhs = translation_matrix(model, d, basis, a + b)
        cols = shift_stable_words(d, [b])
        assert word_defect(basis, lhs, rhs, range(gram.size), cols) <= 1e-6 * np.abs(gram.entries).max()

    def test_covariance(self, lattice):
        model, d, gram, basis = lattice
        a = -STEP
        h = d.one_particle[2]
        lhs = translation_matrix(model, d, basis, a) @ field_matrix(model, d, basis, h).matrix \
            @ translation_matrix(model, d, basis, -a)
        rhs = field_matrix(model, d, basis, h.translate(a)).matrix
        rows = shift_stable_words(d, [-a])
        cols = shift_stable_words(d, [-a], max_degree=d.max_degree - 1)
        assert word_defect(basis, lhs, rhs, rows, cols) <= 1e-6 * np.abs(gram.entries).max()

    def test_isometry_on_stable_words(self, lattice):
        model, d, gram, basis = lattice
        T = translation_matrix(model, d, basis, 2 * STEP)
        stable = shift_stable_words(d, [2 * STEP])
        assert word_defect(basis, T.conj().T @ T, np.eye(basis.rank), stable, stable) \
            <= 1e-6 * np.abs(gram.entries).max()


@pytest.fixture(scope="module")
def one_particle():
    d = Dictionary((GaussPolyFn.gaussian([0.0, 0.0], 1.0),), 1)
    basis = gns_quotient(build_gram(FREE, d))
    return basis, BorchersVector.word(d.one_particle)


class TestSpectral:

    def test_one_particle_in_cone(self, one_particle):
        basis, f = one_particle
        rep = spectral_residual(FREE, basis, f, f)
        assert rep.residual < 1e-2

    def test_vacuum_signal(self, one_particle):
        basis, f = one_particle
        vac = BorchersVector.vacuum()
        assert spectral_residual(FREE, basis, vac, vac).residual < 1e-12

    def test_zero_state(self, one_particle):
        basis, f = one_particle
        assert spectral_residual(FREE, basis, f, BorchersVector()).residual == 0.0

    def test_too_coarse(self, one_particle):
        basis, f = one_particle
        with pytest.raises(GridTooCoarse):
            spectral_residual(FREE, basis, f, f, spacing=2.0, points=16)


def _shifted_overlap_oracle(width, lam):
    """``<f, U((0, lam)) f>`` for a centred Gaussian, m = 1, as a Fourier cosine integral in k1."""
    def amp(u):  # |f~|^2 / (4 pi k0) on the shell, with k1 = u
        k0sq = 1.0 + u * u
        return (2 * np.pi * width**2) ** 2 * np.exp(-(width**2) * (k0sq + u * u)) / (4 * np.pi * np.sqrt(k0sq))

    val, _ = integrate.quad(amp, 0.0, np.inf, weight="cos", wvar=lam)
    return 2.0 * val


class TestCluster:
    F = BorchersVector.word([GaussPolyFn.gaussian([0.0, 0.0], 1.0)])

    def test_lambda_zero_is_definition(self):
        (lam, dev), = cluster_profile(GAUSS, self.F, self.F, [0.0, 1.0], [0.0])
        vac = BorchersVector.vacuum()
        expected = abs(s_form(GAUSS, self.F, self.F, rtol=1e-10)
                       - s_form(GAUSS, self.F, vac, rtol=1e-10) * s_form(GAUSS, vac, self.F, rtol=1e-10))
        assert dev == expected

    def test_free_decay(self):
        prof = cluster_profile(FREE, self.F, self.F, [0.0, 1.0], [5.0, 10.0, 15.0, 20.0])
        devs = [d for _, d in prof]
        assert devs[-1] < 1e-4
        assert all(x > y for x, y in zip(devs, devs[1:]))
        for lam, dev in prof[:2]:
            assert dev == pytest.approx(abs(_shifted_overlap_oracle(1.0, lam)), rel=1e-6)

    def test_vacuum(self):
        vac = BorchersVector.vacuum()
        assert all(d == 0.0 for _, d in cluster_profile(GAUSS, self.F, vac, [0.0, 1.0], [0.0, 3.0, 9.0]))

    def test_not_spacelike(self):
        with pytest.raises(NotSpacelike):
            cluster_profile(FREE, self.F, self.F, [1.0, 0.5], [1.0])


class TestRelativeState:
    def test_degree_zero(self, free_std):
        d, _, basis = free_std
        base = BorchersVector.word([d.one_particle[1]])
        st = build_state_relative(FREE, d, basis, None, base)
        assert np.allclose(st.coords, basis.iso_map[:, 1 + 1])

    def test_single_element_matches_field_column(self, gauss_std):
        d, _, basis = gauss_std
        h = d.one_particle[2]
        st = build_state_relative(GAUSS, d, basis, h, BorchersVector.vacuum())
        col = field_matrix(GAUSS, d, basis, h).matrix @ basis.vacuum
        assert st.residual < 1e-10
        assert np.abs(st.coords - col).max() < 1e-8 * max(1.0, np.abs(col).max())

    def test_two_point_norm_is_wick_sum(self, free_std):
        d, _, basis = free_std
        f, g = d.one_particle[0], d.one_particle[2]
        rel = from_relative(tensor(f, g))  # relative form whose smearing is f (x) g
        st = build_state_relative(FREE, d, basis, rel, BorchersVector.vacuum())
        assert st.residual < 1e-8
        # pairings of (g*, f*, f, g): the (g*, f*)(f, g) pairing plus the two crossing ones
        spec = FreeFieldSpec(1.0)
        fs, gs = dagger(f, 2), dagger(g, 2)
        w = lambda u, v: two_point_smeared(spec, u, v, rtol=1e-12)
        wick = w(gs, fs) * w(f, g) + w(gs, f) * w(fs, g) + w(gs, g) * w(fs, f)
        assert np.vdot(st.coords, st.coords).real == pytest.approx(wick.real, rel=1e-6)

    def test_unrepresentable(self, free_std):
        d, _, basis = free_std
        far = GaussPolyFn.gaussian([7.0, -5.0], 0.3)
        with pytest.raises(ProjectionResidualExceeded):
            build_state_relative(FREE, d, basis, far, BorchersVector.vacuum())
