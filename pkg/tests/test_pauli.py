import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicorr.errors import DimensionMismatch, InvalidDimension, NotHermitian, ScanTooLarge
from multicorr.pauli import (
    LocalObservable,
    PauliString,
    apply_pauli_string,
    bloch_observable,
    correlation_tensor,
    correlator,
    count_strings,
    covariance,
    iter_pauli_strings,
    parity_predicts_zero,
    random_hermitian,
    random_pauli_strings,
    weight_projector,
)
from multicorr.qstate import I2, SIGMA_X, SIGMA_Y, SIGMA_Z, StateVector, basis_state, make_rho, make_v, make_w

import oracles

pauli_words = st.text(alphabet="IXYZ", min_size=1, max_size=6)


@given(pauli_words)
def test_string_counts_and_weight(word):
    p = PauliString(word)
    assert p.weight == len(word) - word.count("I")
    assert sum(p.counts) == p.weight
    assert 0 <= p.weight <= p.n


def test_string_rejects_bad_letters():
    with pytest.raises(ValueError):
        PauliString("XQ")


@settings(max_examples=60, deadline=None)
@given(word=pauli_words, seed=st.integers(0, 2**32 - 1))
def test_apply_matches_dense(word, seed):
    n = len(word)
    rng = np.random.default_rng(seed)
    v = StateVector.from_unnormalized(rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n))
    out = apply_pauli_string(word, v)
    assert np.allclose(out.amps, oracles.pauli_dense(word) @ v.amps, atol=1e-12)


def test_apply_identity_and_flip():
    w = make_w(3)
    assert apply_pauli_string("III", w).allclose(w)
    assert np.allclose(apply_pauli_string("XXX", w).amps, oracles.w_vector(3, 2), atol=1e-15)


def test_xyz_on_w_is_orthogonal_to_w():
    w = make_w(3)
    out = oracles.pauli_dense("XYZ") @ w.amps
    assert abs(np.vdot(w.amps, out)) <= 1e-12
    assert abs(w.inner(apply_pauli_string("XYZ", w))) <= 1e-12


def test_apply_length_mismatch():
    with pytest.raises(DimensionMismatch):
        apply_pauli_string("XX", make_w(3))


def test_correlator_examples():
    rho3 = make_rho(3, 0.5)
    assert abs(correlator(rho3, "YYZ")) <= 1e-12
    # frozen from the dense oracle: <ZZI> = -1/3 on rho_1/2, <ZZZZ> = -1 at n=4
    assert abs(correlator(rho3, "ZZI") - (-1 / 3)) <= 1e-12
    assert abs(oracles.expect(oracles.rho_dense(3, 0.5), oracles.pauli_dense("ZZI")) + 1 / 3) <= 1e-12
    assert abs(correlator(make_rho(4, 0.5), "ZZZZ") + 1) <= 1e-12
    assert abs(correlator(make_w(3), "ZZZ") + 1) <= 1e-12


def test_correlator_length_mismatch():
    with pytest.raises(DimensionMismatch):
        correlator(make_rho(3, 0.5), "ZZ")


@pytest.mark.parametrize(
    "word, prob, expected",
    [("YYZ", 0.5, True), ("ZZI", 0.5, False), ("YYZ", 0.6, False), ("XXX", 0.5, False), ("XYI", 0.5, True)],
)
def test_parity_predicate(word, prob, expected):
    assert parity_predicts_zero(word, prob) is expected


@pytest.mark.parametrize("n", [3, 5])
def test_parity_sound_exhaustively(n):
    rho = make_rho(n, 0.5)
    for word in itertools.product("IXYZ", repeat=n):
        p = PauliString("".join(word))
        _, ny, nz = p.counts
        if (ny + nz) % 2 == 1:
            assert parity_predicts_zero(p, 0.5)
            assert abs(correlator(rho, p)) <= 1e-12


def test_parity_sound_sampled_n7():
    rho = make_rho(7, 0.5)
    for p in random_pauli_strings(7, 10_000, np.random.default_rng(11)):
        if parity_predicts_zero(p, 0.5):
            assert abs(correlator(rho, p)) <= 1e-12


@pytest.mark.parametrize("n", [3, 5, 7])
def test_full_weight_scan_vanishes(n):
    rep = correlation_tensor(make_rho(n, 0.5), n)
    assert len(rep.entries) == 3**n
    assert rep.max_abs <= 1e-12
    assert rep.verdict() == "VANISHING"


def test_weight_two_scan_n3():
    rep = correlation_tensor(make_rho(3, 0.5), 2)
    assert len(rep.entries) == 27
    assert abs(rep.max_abs - 2 / 3) <= 1e-10
    assert rep.argmax.letters in {"XXI", "YYI", "XIX", "YIY", "IXX", "IYY"}
    assert rep.verdict() == "PRESENT"
    dense = oracles.rho_dense(3, 0.5)
    for p, v in rep.entries.items():
        assert abs(v - oracles.expect(dense, oracles.pauli_dense(str(p)))) <= 1e-12


def test_pure_w_full_weight():
    assert correlation_tensor(make_w(3), 3).max_abs >= 1 - 1e-12


def test_scan_order_is_lexicographic():
    words = [str(p) for p in iter_pauli_strings(3, 2)]
    assert words[:4] == ["XXI", "XYI", "XZI", "YXI"]
    assert len(words) == count_strings(3, 2) == 27


def test_scan_serial_equals_parallel():
    rho = make_rho(9, 0.5)
    a = correlation_tensor(rho, 9, threads=1)
    b = correlation_tensor(rho, 9, threads=4)
    assert list(a.entries) == list(b.entries)
    assert all(a.entries[k] == b.entries[k] for k in a.entries)


def test_scan_cap_and_weight_range():
    with pytest.raises(ScanTooLarge):
        correlation_tensor(make_rho(5, 0.5), 5, scan_cap=100)
    with pytest.raises(InvalidDimension):
        correlation_tensor(make_rho(3, 0.5), 4)


def test_report_serialization():
    rep = correlation_tensor(make_rho(3, 0.5), 2)
    doc = json.loads(rep.to_json(include_entries=False))
    assert set(doc) == {"n", "weight", "count", "max_abs", "argmax", "verdict"}
    assert rep.to_csv().splitlines()[0] == "string,value"
    assert len(rep.to_csv().splitlines()) == 28


def test_covariances_vanish_for_random_observables():
    rho = make_rho(3, 0.5)
    rng = np.random.default_rng(2024)
    for _ in range(100):
        obs = [LocalObservable(k, random_hermitian(rng)) for k in range(3)]
        assert abs(covariance(rho, obs)) <= 1e-10


def test_covariance_against_dense_oracle():
    rng = np.random.default_rng(5)
    rho = make_rho(3, 0.3)
    dense = oracles.rho_dense(3, 0.3)
    for _ in range(10):
        mats = [random_hermitian(rng) for _ in range(3)]
        got = covariance(rho, [LocalObservable(k, m) for k, m in enumerate(mats)])
        assert abs(got - oracles.covariance_dense(dense, mats)) <= 1e-12


def test_covariance_product_state_zero():
    rng = np.random.default_rng(1)
    obs = [LocalObservable(k, random_hermitian(rng)) for k in range(3)]
    assert abs(covariance(basis_state("000"), obs)) <= 1e-12


def test_bipartite_covariance_subset():
    rho = make_rho(3, 0.5)
    obs = [LocalObservable(0, SIGMA_Z), LocalObservable(1, SIGMA_Z)]
    assert abs(covariance(rho, obs) + 1 / 3) <= 1e-12


def test_traceless_covariance_equals_correlator():
    rho = make_rho(5, 0.5)
    rng = np.random.default_rng(9)
    for _ in range(20):
        vecs = rng.standard_normal((5, 3))
        obs = [LocalObservable(k, bloch_observable(0.0, v)) for k, v in enumerate(vecs)]
        plain = covariance(rho, obs, traceless_shift=False)
        assert abs(covariance(rho, obs) - plain) <= 1e-12


def test_local_observable_validation():
    with pytest.raises(NotHermitian):
        LocalObservable(0, np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionMismatch):
        covariance(make_rho(3, 0.5), [LocalObservable(0, SIGMA_X), LocalObservable(0, SIGMA_Y)])


def test_weight_projector_examples():
    p1 = weight_projector(3, 1)
    out = p1(make_v(3, 1))
    assert np.allclose(out, make_w(3).amps / np.sqrt(2), atol=1e-15)
    assert np.allclose(weight_projector(3, 0)(make_w(3)), 0)
    # weight-1 on A (x) weight-1 on B has weight 2
    a = np.array([0, 1, 1, 0]) / np.sqrt(2)
    b = np.array([0, 1]) * 1.0
    v = np.kron(a, b)
    assert np.allclose(weight_projector(3, 2)(v), v)


def test_weight_projector_algebra():
    n = 5
    rng = np.random.default_rng(0)
    projs = [weight_projector(n, k) for k in range(n + 1)]
    for _ in range(100):
        v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
        assert np.allclose(sum(p(v) for p in projs), v, atol=1e-12)
        for j, k in [(0, 1), (2, 3), (1, 4)]:
            assert np.allclose(projs[j](projs[k](v)), 0, atol=1e-12)
        assert np.allclose(projs[2](projs[2](v)), projs[2](v), atol=1e-12)
    with pytest.raises(InvalidDimension):
        weight_projector(3, 4)


def test_observable_builder():
    m = bloch_observable(1.0, [0, 0, 1])
    assert np.allclose(m, I2 + SIGMA_Z)
