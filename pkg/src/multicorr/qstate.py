"""Pure and low-rank mixed states of n qubits.

Basis convention: site 0 is the most significant bit of the basis-state
index, so amplitude ``amps[i]`` belongs to the bit string ``format(i, f"0{n}b")``
read left to right as sites 0, 1, ..., n-1.  Every module in the package uses
this ordering.

Mixed states are kept as weighted lists of pure vectors; a dense density matrix
is only ever built for at most ``DENSE_CAP`` qubits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DenseLimitExceeded,
    DimensionMismatch,
    InvalidDimension,
    InvalidProbability,
    InvalidState,
    NotHermitian,
)

QUBIT_CAP = 24
DENSE_CAP = 12
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
IMAG_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _check_n(n: int, cap: int = QUBIT_CAP, minimum: int = 1) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise InvalidDimension(f"qubit count must be an integer, got {n!r}")
    n = int(n)
    if not minimum <= n <= cap:
        raise InvalidDimension(f"qubit count {n} outside [{minimum}, {cap}]")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state of ``n`` qubits (``2**n`` complex amplitudes)."""

    n: int
    amps: np.ndarray

    def __post_init__(self):
        n = _check_n(self.n)
        amps = _readonly(np.ravel(self.amps))
        if amps.shape != (2**n,):
            raise DimensionMismatch(f"expected {2**n} amplitudes for n={n}, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidState(f"state not normalized: sum |amp|^2 = {norm!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_unnormalized(cls, amps, n: int | None = None) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).ravel()
        if n is None:
            n = int(round(np.log2(amps.shape[0])))
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidState("cannot normalize the zero vector")
        return cls(n, amps / norm)

    @property
    def dim(self) -> int:
        return 2**self.n

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per site."""
        return self.amps.reshape((2,) * self.n)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.n != self.n:
            raise DimensionMismatch(f"n={self.n} vs n={other.n}")
        return complex(np.vdot(self.amps, other.amps))

    def allclose(self, other: "StateVector", atol: float = 1e-12) -> bool:
        return other.n == self.n and bool(np.allclose(self.amps, other.amps, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class LowRankState:
    """Mixed state stored as ``sum_j w_j |v_j><v_j|``."""

    n: int
    terms: tuple = field(default=())

    def __post_init__(self):
        n = _check_n(self.n)
        terms = tuple((float(w), v) for w, v in self.terms)
        if not terms:
            raise InvalidState("a mixed state needs at least one term")
        for w, v in terms:
            if not isinstance(v, StateVector):
                raise InvalidState(f"term vector must be a StateVector, got {type(v).__name__}")
            if v.n != n:
                raise DimensionMismatch(f"term on {v.n} qubits in a {n}-qubit state")
            if w < 0 or not np.isfinite(w):
                raise InvalidProbability(f"negative or non-finite weight {w!r}")
        total = sum(w for w, _ in terms)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidProbability(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def pure(cls, v: StateVector) -> "LowRankState":
        return cls(v.n, ((1.0, v),))

    @property
    def rank(self) -> int:
        return len(self.terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms])

    def stacked(self) -> np.ndarray:
        """Term vectors scaled by sqrt(weight), shape (rank, 2**n)."""
        return np.stack([np.sqrt(w) * v.amps for w, v in self.terms])


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Square complex matrix; ``hermitian=True`` asserts and enforces Hermiticity."""

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = _readonly(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {m.shape}")
        if self.hermitian and m.size and np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise NotHermitian("operator flagged hermitian is not")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def max_abs_diff(self, other) -> float:
        other = other.entries if isinstance(other, DenseOperator) else np.asarray(other)
        return float(np.max(np.abs(self.entries - other)))


State = Union[StateVector, LowRankState]


def as_low_rank(state: State) -> LowRankState:
    if isinstance(state, LowRankState):
        return state
    if isinstance(state, StateVector):
        return LowRankState.pure(state)
    raise TypeError(f"expected StateVector or LowRankState, got {type(state).__name__}")


# -- constructors -----------------------------------------------------------


def popcounts(n: int) -> np.ndarray:
    """Hamming weight of every basis index of an ``n``-qubit register."""
    idx = np.arange(2**n, dtype=np.int64)
    counts = np.zeros_like(idx)
    for bit in range(n):
        counts += (idx >> bit) & 1
    return counts


def make_w(n: int) -> StateVector:
    """Equal superposition of all weight-1 basis states."""
    n = _check_n(n, minimum=2)
    amps = (popcounts(n) == 1).astype(complex) / np.sqrt(n)
    return StateVector(n, amps)


def make_wbar(n: int) -> StateVector:
    """Bitwise complement of |W>: equal superposition of weight-(n-1) states."""
    n = _check_n(n, minimum=2)
    amps = (popcounts(n) == n - 1).astype(complex) / np.sqrt(n)
    return StateVector(n, amps)


def make_rho(n: int, p: float) -> LowRankState:
    """``p |W><W| + (1-p) |Wbar><Wbar|``; p in {0, 1} gives a single term."""
    p = float(p)
    if not 0.0 <= p <= 1.0 or not np.isfinite(p):
        raise InvalidProbability(f"p={p!r} outside [0, 1]")
    n = _check_n(n, minimum=2)
    terms = [(w, v) for w, v in ((p, make_w(n)), (1.0 - p, make_wbar(n))) if w > 0]
    return LowRankState(n, tuple(terms))


def make_rho_eps(n: int, eps: float) -> LowRankState:
    """Perturbed equal mixture ``(1/2 + eps) |W><W| + (1/2 - eps) |Wbar><Wbar|``."""
    eps = float(eps)
    if not -0.5 <= eps <= 0.5:
        raise InvalidProbability(f"eps={eps!r} outside [-1/2, 1/2]")
    return make_rho(n, 0.5 + eps)


def make_v(n: int, sign: int) -> StateVector:
    """``(|W> + sign |Wbar>)/sqrt(2)``, an eigenvector of X^{(x)n} with eigenvalue ``sign``."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    n = _check_n(n, minimum=2)
    return StateVector(n, (make_w(n).amps + sign * make_wbar(n).amps) / np.sqrt(2))


def make_purification(n: int) -> StateVector:
    """``(|W>|0> + |Wbar>|1>)/sqrt(2)`` on n+1 qubits, ancilla on the last site."""
    n = _check_n(n, cap=QUBIT_CAP - 1, minimum=2)
    amps = np.zeros((2**n, 2), dtype=complex)
    amps[:, 0] = make_w(n).amps
    amps[:, 1] = make_wbar(n).amps
    return StateVector(n + 1, amps.ravel() / np.sqrt(2))


def make_ghz(n: int) -> StateVector:
    n = _check_n(n, minimum=2)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return StateVector(n, amps)


def basis_state(bits: Sequence[int] | str) -> StateVector:
    """Computational basis state, e.g. ``basis_state("010")``."""
    bits = [int(b) for b in bits]
    n = _check_n(len(bits))
    index = int("".join(str(b) for b in bits), 2)
    amps = np.zeros(2**n, dtype=complex)
    amps[index] = 1.0
    return StateVector(n, amps)


def product_state(factors: Iterable) -> StateVector:
    """Tensor product of single-site (or multi-site) amplitude vectors, site 0 first."""
    out = np.ones(1, dtype=complex)
    for f in factors:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return StateVector.from_unnormalized(out)


def random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector from normalized complex Gaussian amplitudes."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def mixture(terms: Iterable[tuple[float, StateVector]]) -> LowRankState:
    terms = tuple(terms)
    return LowRankState(terms[0][1].n, terms)


# -- operations -------------------------------------------------------------


def flip_all(v: StateVector) -> StateVector:
    """Apply X on every site; reverses the basis index."""
    return StateVector(v.n, v.amps[::-1])


def apply_local(tensor: np.ndarray, site: int, matrix: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to one axis of a per-site amplitude tensor."""
    out = np.tensordot(matrix, tensor, axes=([1], [site]))
    return np.moveaxis(out, 0, site)


def _check_hermitian(m: np.ndarray, what: str = "observable") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise DimensionMismatch(f"{what} factor must be 2x2, got {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise NotHermitian(f"{what} factor is not Hermitian")
    return m


def expectation(state: State, factors: Sequence) -> float:
    """``Tr(rho X_0 (x) ... (x) X_{n-1})`` for Hermitian 2x2 factors.

    Factors are applied site by site to each term vector; ``None`` stands for
    the identity.  The 2**n x 2**n operator is never formed.
    """
    state = as_low_rank(state)
    if len(factors) != state.n:
        raise DimensionMismatch(f"{len(factors)} factors for {state.n} qubits")
    mats = [None if f is None else _check_hermitian(f) for f in factors]
    total = 0.0 + 0.0j
    for w, v in state.terms:
        t = v.tensor()
        out = t
        for site, m in enumerate(mats):
            if m is not None:
                out = apply_local(out, site, m)
        total += w * np.vdot(t, out)
    if abs(total.imag) > IMAG_TOL:
        raise NotHermitian(f"expectation has imaginary part {total.imag:.3e}")
    return float(total.real)


def _normalize_keep(n: int, keep: Iterable[int]) -> list[int]:
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise DimensionMismatch(f"sites {keep} out of range for n={n}")
    return keep


def partial_trace(state: State, keep: Iterable[int], cap: int = DENSE_CAP) -> DenseOperator:
    """Reduced density matrix on the sites in ``keep`` (kept in ascending site order)."""
    state = as_low_rank(state)
    keep = _normalize_keep(state.n, keep)
    if len(keep) > cap:
        raise DenseLimitExceeded(f"{len(keep)} kept qubits exceeds dense cap {cap}")
    traced = [s for s in range(state.n) if s not in keep]
    dk = 2 ** len(keep)
    rho = np.zeros((dk, dk), dtype=complex)
    for w, v in state.terms:
        m = np.transpose(v.tensor(), keep + traced).reshape(dk, -1)
        rho += w * (m @ m.conj().T)
    rho = 0.5 * (rho + rho.conj().T)
    return DenseOperator(rho, hermitian=True)


def density_matrix(state: State, cap: int = DENSE_CAP) -> DenseOperator:
    """Full dense density matrix; only allowed for ``n <= cap``."""
    state = as_low_rank(state)
    return partial_trace(state, range(state.n), cap=cap)


# -- serialization ----------------------------------------------------------


def state_to_dict(state: State) -> dict:
    state = as_low_rank(state)
    return {
        "n": state.n,
        "terms": [
            {"weight": w, "amps": [[float(a.real), float(a.imag)] for a in v.amps]}
            for w, v in state.terms
        ],
    }


def state_from_dict(doc: dict) -> LowRankState:
    """Inverse of :func:`state_to_dict`; invariants are re-validated."""
    try:
        n = doc["n"]
        terms = []
        for t in doc["terms"]:
            amps = np.array([complex(re, im) for re, im in t["amps"]])
            terms.append((float(t["weight"]), StateVector(n, amps)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (InvalidState, InvalidDimension, DimensionMismatch)):
            raise
        raise InvalidState(f"malformed state document: {exc}") from exc
    return LowRankState(n, tuple(terms))


def dumps_state(state: State) -> str:
    return json.dumps(state_to_dict(state))


def loads_state(text: str) -> LowRankState:
    return state_from_dict(json.loads(text))
