import numpy as np
import pytest

from wightrec.freefield import ContractionGraph, FreeFieldSpec, WickSeriesModel, npoint_smeared, two_point_smeared
from wightrec.testfn import GaussPolyFn, dagger, tensor_all
from wightrec.wordeval import MomentumGrid, WordEvaluator, _components


def _fns():
    return [
        GaussPolyFn.gaussian([0.0, 0.0], 0.8),
        GaussPolyFn.gaussian([0.3, 1.2], 0.7),
        GaussPolyFn.gaussian([-0.4, -0.9], 0.9, coeff=0.5 - 0.25j),
    ]


def test_grid_weights_are_the_invariant_measure():
    grid = MomentumGrid(1.0, 3.0, 0.125)
    assert grid.size == 49
    assert np.allclose(grid.weights.sum(), grid.h * grid.size / (4 * np.pi))
    k = grid.k
    assert np.allclose(k[:, 0] ** 2 - k[:, 1] ** 2, 1.0)


def test_two_point_matches_adaptive_quadrature():
    f, g, _ = _fns()
    ev = WordEvaluator.for_functions(WickSeriesModel.free(1.0), [f, g])
    ref = two_point_smeared(FreeFieldSpec(1.0), f, g)
    assert ev.wightman([f, g]) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("model", [WickSeriesModel.free(1.0), WickSeriesModel.gaussian(0.3)], ids=["free", "gauss"])
@pytest.mark.parametrize("n", [2, 3])
def test_wightman_matches_npoint_smeared(model, n):
    fns = _fns()[:n]
    ev = WordEvaluator.for_functions(model, fns)
    ref = complex(npoint_smeared(model, n, tensor_all(fns), rtol=1e-11))
    assert abs(ev.wightman(fns) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_inner_is_hermitian():
    model = WickSeriesModel.gaussian(0.25)
    a, b, c = _fns()
    ev = WordEvaluator.for_functions(model, [a, b, c])
    left, right = [a, c], [b]
    assert ev.inner(left, right) == pytest.approx(np.conj(ev.inner(right, left)), abs=1e-12)


def test_compression_does_not_change_values():
    model = WickSeriesModel.gaussian(0.3)
    fns = _fns()
    exact = WordEvaluator.for_functions(model, fns, compress_tol=0.0)
    fast = WordEvaluator.for_functions(model, fns)
    words = [fns, fns[::-1], [fns[0], dagger(fns[1], 2), fns[2], fns[0]]]
    for w in words:
        assert fast.wightman(w) == pytest.approx(exact.wightman(w), abs=1e-13 * max(1.0, abs(exact.wightman(w))))


@pytest.mark.parametrize("model", [WickSeriesModel.free(1.0), WickSeriesModel.gaussian(0.3)], ids=["free", "gauss"])
def test_gram_is_positive_by_construction(model):
    fns = _fns()
    ev = WordEvaluator.for_functions(model, fns)
    words = [()] + [(f,) for f in fns] + [(f, g) for f in fns for g in fns]
    G = np.array([[ev.inner(u, v) for v in words] for u in words])
    G = (G + G.conj().T) / 2
    lam = np.linalg.eigvalsh(G)
    assert lam[0] >= -1e-12 * lam[-1]


def test_components_split_disconnected_graphs():
    # 4 vertices, edges (0,1) and (2,3): two components
    graph = ContractionGraph(4, (1, 1, 1, 1), (1, 0, 0, 0, 0, 1), 1)
    comps = _components(graph)
    assert [v for v, _ in comps] == [(0, 1), (2, 3)]
    assert all(e == ((0, 1, 1),) for _, e in comps)


def test_words_need_one_point_functions():
    ev = WordEvaluator.for_functions(WickSeriesModel.free(1.0), _fns()[:1])
    with pytest.raises(ValueError):
        ev.register(tensor_all(_fns()[:2]))
