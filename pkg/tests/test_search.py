"""Search drivers: greedy, swapping with restarts, exhaustive enumeration."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from csskit import search, simlab
from csskit.criteria import Criterion, CriterionKind, evaluate
from csskit.errors import DimMismatch, TooManySubsets
from csskit.search import SearchConfig, exhaustive, greedy, swap


def rand_psd(rng, p, rank=None):
    rank = p if rank is None else rank
    g = rng.standard_normal((p, rank))
    return g @ g.T / p


def css(p, k):
    return Criterion(CriterionKind.CSS_TRACE, p=p, k=k)


def test_greedy_diagonal():
    res = greedy(np.diag([1.0, 2.0, 3.0]), SearchConfig(k=2, criterion=css(3, 2)))
    assert res.subset == (2, 1)
    assert res.objective == pytest.approx(1.0)
    assert res.nested_subsets == [(2,), (2, 1)]
    assert_allclose(res.trajectory, [3.0, 1.0])


def test_greedy_equicorrelation_tie_break():
    # All three variables are exchangeable; the lowest index must win.
    sigma = 0.75 * np.eye(3) + 0.25 * np.ones((3, 3))
    res = greedy(sigma, SearchConfig(k=1, criterion=css(3, 1)))
    assert res.subset == (0,)
    assert res.objective == pytest.approx(1.875)


def test_greedy_nestedness():
    rng = np.random.default_rng(83)
    for _ in range(10):
        p = int(rng.integers(5, 10))
        sigma = rand_psd(rng, p)
        full = greedy(sigma, SearchConfig(k=4, criterion=css(p, 4)))
        for k in range(1, 4):
            part = greedy(sigma, SearchConfig(k=k, criterion=css(p, k)))
            assert part.subset == full.subset[:k]
            assert part.subset == full.nested_subsets[k - 1]


def test_greedy_objective_floor():
    cfg = SearchConfig(k=3, criterion=css(3, 3), objective_floor=1.5)
    res = greedy(np.diag([1.0, 2.0, 3.0]), cfg)
    assert res.subset == (2, 1)  # stopped once the trace fell to 1.0
    assert res.objective == pytest.approx(1.0)


def test_swap_trajectory_monotone():
    rng = np.random.default_rng(89)
    for _ in range(10):
        p = int(rng.integers(6, 12))
        sigma = rand_psd(rng, p)
        cfg = SearchConfig(k=3, criterion=css(p, 3), restarts=2, seed=5)
        res = swap(sigma, cfg)
        traj = np.array(res.trajectory)
        assert np.all(np.diff(traj) <= 1e-10)
        assert res.sweeps_used >= 1


def test_swap_improves_on_its_init():
    rng = np.random.default_rng(97)
    sigma = rand_psd(rng, 9)
    cfg = SearchConfig(k=3, criterion=css(9, 3))
    start = (8, 7, 6)
    res = swap(sigma, cfg, init=start)
    assert res.objective <= evaluate(css(9, 3), sigma, start) + 1e-10


def test_search_chain_orderings():
    # exhaustive <= swap (any restarts) and swap started from greedy's
    # subset never loses to greedy.
    rng = np.random.default_rng(101)
    for _ in range(8):
        p = int(rng.integers(5, 9))
        sigma = rand_psd(rng, p)
        crit = css(p, 2)
        cfg = SearchConfig(k=2, criterion=crit, restarts=3, seed=11)
        ex = exhaustive(sigma, 2, crit)
        sw = swap(sigma, cfg)
        gr = greedy(sigma, cfg)
        polished = swap(sigma, SearchConfig(k=2, criterion=crit), init=gr.subset)
        assert ex.objective <= sw.objective + 1e-9
        assert ex.objective <= polished.objective + 1e-9
        assert polished.objective <= gr.objective + 1e-9


def test_swap_deterministic_and_thread_stable():
    rng = np.random.default_rng(103)
    sigma = rand_psd(rng, 10)
    cfg = SearchConfig(k=4, criterion=css(10, 4), restarts=4, seed=17)
    a = swap(sigma, cfg, threads=1)
    b = swap(sigma, cfg, threads=1)
    c = swap(sigma, cfg, threads=4)
    assert a.subset == b.subset == c.subset
    assert abs(a.objective - b.objective) <= 1e-12
    assert abs(a.objective - c.objective) <= 1e-12


def test_scale_equivariant_selection():
    rng = np.random.default_rng(107)
    sigma = rand_psd(rng, 8)
    cfg = SearchConfig(k=3, criterion=css(8, 3), restarts=2, seed=3)
    base_g = greedy(sigma, cfg)
    base_s = swap(sigma, cfg)
    for c in (1e-4, 7.0, 1e5):
        assert greedy(c * sigma, cfg).subset == base_g.subset
        scaled = swap(c * sigma, cfg)
        assert scaled.subset == base_s.subset
        assert scaled.objective == pytest.approx(c * base_s.objective, rel=1e-9)


def test_exhaustive_diagonal_and_cap():
    crit = css(4, 2)
    res = exhaustive(np.diag([4.0, 1.0, 3.0, 2.0]), 2, crit)
    assert tuple(sorted(res.subset)) == (0, 2)
    assert res.objective == pytest.approx(3.0)
    with pytest.raises(TooManySubsets):
        exhaustive(np.eye(30), 15, css(30, 15), cap=1000)


def test_exhaustive_lexicographic_tie_break():
    # Identity: every subset gives the same objective; the first in
    # lexicographic order must be returned.
    res = exhaustive(np.eye(5), 2, css(5, 2))
    assert res.subset == (0, 1)


def test_config_validation():
    with pytest.raises(DimMismatch):
        SearchConfig(k=0, criterion=css(3, 1))
    with pytest.raises(DimMismatch):
        SearchConfig(k=2, criterion=css(3, 2), restarts=0)
    with pytest.raises(DimMismatch):
        swap(np.eye(4), SearchConfig(k=2, criterion=css(4, 2)), init=(0, 1, 2))


def test_population_preset_optimum():
    # On the 20-variable synthetic population the planted size-4 subset is
    # the exhaustive CSS optimum, with residual trace 16 * 0.15 = 2.4.
    spec = simlab.missing_a1_spec(mar_prob=0.0)
    pop = simlab.population_cov(spec)
    res = exhaustive(pop, 4, css(20, 4))
    assert tuple(sorted(res.subset)) == (0, 1, 2, 3)
    assert res.objective == pytest.approx(2.4, abs=1e-9)
    # greedy and swap find it too
    gr = greedy(pop, SearchConfig(k=4, criterion=css(20, 4)))
    assert tuple(sorted(gr.subset)) == (0, 1, 2, 3)
    sw = swap(pop, SearchConfig(k=4, criterion=css(20, 4), restarts=5, seed=0))
    assert tuple(sorted(sw.subset)) == (0, 1, 2, 3)


def test_max_sweeps_cap_reported():
    rng = np.random.default_rng(109)
    sigma = rand_psd(rng, 12)
    cfg = SearchConfig(k=5, criterion=css(12, 5), max_sweeps=1, seed=2)
    res = swap(sigma, cfg)
    assert res.sweeps_used == 1
