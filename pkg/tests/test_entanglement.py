import itertools
import json

import numpy as np
import pytest

from multicorr.entanglement import (
    Bipartition,
    enumerate_bipartitions,
    genuine_entanglement_report,
    negativity,
    partial_transpose,
    perturbed_w_subspace,
    schmidt_rank,
    seesaw_product_overlap,
    weight_argument_check,
)
from multicorr.errors import DenseLimitExceeded, InvalidDimension
from multicorr.qstate import basis_state, make_rho, make_w

import oracles

# frozen from the loop-based partial-transpose oracle (tests/oracles.py)
NEGATIVITY_N3 = {0.3: 0.284314440155, 0.5: 0.244016935856, 1.0: 0.471404520791}
NEGATIVITY_N5 = {1: 0.4, 2: 0.489897948557}  # keyed by the smaller side; same for every p
# frozen from the Bloch-grid / multistart product-overlap oracle
OVERLAP_N3_SPAN = 5 / 6
OVERLAP_N3_W = 2 / 3
OVERLAP_N5 = {1: 0.8, 2: 0.6}


def test_bipartition_counts_and_order():
    cuts = enumerate_bipartitions(3)
    assert [c.label for c in cuts] == ["{0}|{1,2}", "{0,1}|{2}", "{0,2}|{1}"]
    assert len(enumerate_bipartitions(5)) == 15
    assert len(enumerate_bipartitions(2)) == 1
    for n in (4, 6):
        cuts = enumerate_bipartitions(n)
        assert len(cuts) == 2 ** (n - 1) - 1
        assert all(0 in c.side_a for c in cuts)
        assert len(set(cuts)) == len(cuts)


@pytest.mark.parametrize("n", [1, 21])
def test_bipartition_range(n):
    with pytest.raises(InvalidDimension):
        enumerate_bipartitions(n)


def test_bipartition_canonical():
    assert Bipartition.canonical(3, [1, 2]).side_a == (0,)
    with pytest.raises(InvalidDimension):
        Bipartition(3, (0, 1, 2))


@pytest.mark.parametrize("p", [0.3, 0.5, 1.0])
def test_negativity_n3(p):
    rho = make_rho(3, p)
    for cut in enumerate_bipartitions(3):
        val = negativity(rho, cut)
        assert abs(val - NEGATIVITY_N3[p]) <= 1e-10
        ref = oracles.negativity_dense(oracles.rho_dense(3, p), 3, cut.side_a)
        assert abs(val - ref) <= 1e-10


def test_negativity_pure_w_analytic():
    assert abs(negativity(make_w(3), Bipartition(3, (0,))) - np.sqrt(2) / 3) <= 1e-12


@pytest.mark.parametrize("p", [0.3, 0.5, 1.0])
def test_negativity_n5(p):
    rho = make_rho(5, p)
    for cut in enumerate_bipartitions(5):
        small = min(len(cut.side_a), len(cut.side_b))
        assert abs(negativity(rho, cut) - NEGATIVITY_N5[small]) <= 1e-10


def test_negativity_complement_symmetry():
    rho = make_rho(5, 0.3)
    for cut in enumerate_bipartitions(5):
        assert abs(negativity(rho, cut) - negativity(rho, cut.complement())) <= 1e-10


def test_negativity_product_state():
    assert negativity(basis_state("000"), Bipartition(3, (0,))) <= 1e-15


def test_negativity_dense_cap():
    with pytest.raises(DenseLimitExceeded):
        negativity(make_rho(13, 0.5), Bipartition(13, (0,)))


def test_partial_transpose_matches_loops():
    rho = oracles.rho_dense(4, 0.3)
    for side in [(0,), (1, 3), (0, 2, 3)]:
        assert np.allclose(partial_transpose(rho, 4, side), oracles.partial_transpose_loops(rho, 4, side))


@pytest.mark.parametrize("cut", enumerate_bipartitions(3), ids=str)
def test_seesaw_n3(cut):
    res = seesaw_product_overlap(cut, restarts=50, seed=0)
    assert abs(res.best_overlap - OVERLAP_N3_SPAN) <= 1e-8
    assert res.best_overlap < 1 - 1e-3
    assert 0 <= res.best_overlap <= 1


def test_seesaw_w_line_n3():
    res = seesaw_product_overlap(Bipartition(3, (0,)), restarts=20, subspace=[make_w(3)])
    assert abs(res.best_overlap - OVERLAP_N3_W) <= 1e-8


def test_oracle_values_frozen_n3():
    span = [oracles.w_vector(3, 1), oracles.w_vector(3, 2)]
    assert abs(oracles.product_overlap_oracle(span, 3, (0,)) - OVERLAP_N3_SPAN) <= 1e-6


@pytest.mark.parametrize("side, key", [((0,), 1), ((0, 1), 2), ((0, 2, 4), 2)])
def test_seesaw_n5(side, key):
    res = seesaw_product_overlap(Bipartition(5, side), restarts=50, seed=1)
    assert abs(res.best_overlap - OVERLAP_N5[key]) <= 1e-6
    assert res.best_overlap < 1 - 1e-3


def test_seesaw_validation_subspace():
    sub = [basis_state("000"), basis_state("111")]
    res = seesaw_product_overlap(Bipartition(3, (0,)), restarts=10, subspace=sub)
    assert res.best_overlap >= 1 - 1e-9


def test_seesaw_history_monotone_and_deterministic():
    cut = Bipartition(4, (0, 1))
    a = seesaw_product_overlap(cut, restarts=8, seed=3, threads=1)
    b = seesaw_product_overlap(cut, restarts=8, seed=3, threads=3)
    assert a.best_overlap == b.best_overlap
    assert a.history == b.history
    assert all(y >= x - 1e-13 for x, y in zip(a.history, a.history[1:]))


def test_seesaw_rejects_zero_restarts():
    with pytest.raises(ValueError):
        seesaw_product_overlap(Bipartition(3, (0,)), restarts=0)


def test_perturbed_subspace_mode_runs():
    sub = perturbed_w_subspace(3, 1e-3, seed=2)
    res = seesaw_product_overlap(Bipartition(3, (0,)), restarts=10, subspace=sub)
    assert abs(res.best_overlap - OVERLAP_N3_SPAN) < 1e-2


@pytest.mark.parametrize("n", [3, 5, 7])
def test_weight_argument_all_cuts(n):
    assert all(weight_argument_check(c) for c in enumerate_bipartitions(n))


def test_weight_argument_fails_for_two_sites():
    assert not weight_argument_check(Bipartition(2, (0,)))


def test_schmidt_rank_w():
    assert schmidt_rank(make_w(3), Bipartition(3, (0,))) == 2
    amps = oracles.w_vector(3).reshape(2, 4)
    assert np.sum(np.linalg.svd(amps, compute_uv=False) > 1e-10) == 2


@pytest.mark.parametrize("n, p, cuts", [(3, 0.5, 3), (5, 0.5, 15), (3, 1.0, 3), (3, 0.0, 3)])
def test_report_verdicts(n, p, cuts):
    rep = genuine_entanglement_report(n, p, restarts=20, seed=7)
    assert len(rep.cuts) == cuts
    assert rep.verdict
    doc = json.loads(rep.to_json())
    assert doc["verdict_text"] == "consistent with genuine multiparty entanglement"
    assert {"cut", "negativity", "seesaw", "weight_argument"} <= set(doc["cuts"][0])


def test_report_deterministic():
    a = genuine_entanglement_report(3, 0.3, restarts=10, seed=4, threads=1).to_json()
    b = genuine_entanglement_report(3, 0.3, restarts=10, seed=4, threads=2).to_json()
    assert a == b


def test_report_above_dense_cap_skips_dense_parts():
    rep = genuine_entanglement_report(4, 0.5, restarts=5, seed=0, dense_cap=3)
    assert all(c.negativity is None and c.weight_check is None for c in rep.cuts)
    assert rep.verdict
