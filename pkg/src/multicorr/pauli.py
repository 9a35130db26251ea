"""Pauli strings, correlators, correlation-tensor scans and covariances.

A Pauli string acts on a basis state by a bit flip plus a sign and phase:

    P |x> = i^{#Y} (-1)^{popcount(x & zy_mask)} |x ^ flip_mask>

where ``flip_mask`` marks the X/Y sites and ``zy_mask`` the Y/Z sites.  All
correlators are evaluated through this action on the rank-decomposition vectors,
so the cost per string is O(rank * 2**n) and no 2**n x 2**n matrix is built.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidDimension, NotHermitian, ScanTooLarge
from .qstate import (
    HERMITIAN_TOL,
    I2,
    IMAG_TOL,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    LowRankState,
    State,
    StateVector,
    as_low_rank,
    expectation,
    partial_trace,
    popcounts,
)

ZERO_TOL = 1e-12
SCAN_CAP = 10**7
# strings evaluated per vectorized batch; fixed so that results do not depend on threading
BATCH_ELEMENTS = 1 << 20

PAULI_MATRICES = {"I": I2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}
_LETTERS = "XYZ"


@dataclass(frozen=True, order=True)
class PauliString:
    """Word over {I, X, Y, Z}; letter ``k`` acts on site ``k`` (site 0 = most significant bit)."""

    letters: str

    def __post_init__(self):
        letters = str(self.letters).upper()
        if not letters or set(letters) - set("IXYZ"):
            raise ValueError(f"invalid Pauli string {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    def __str__(self) -> str:
        return self.letters

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return self.n - self.letters.count("I")

    @property
    def counts(self) -> tuple[int, int, int]:
        """Numbers of X, Y and Z letters."""
        return self.letters.count("X"), self.letters.count("Y"), self.letters.count("Z")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.letters) if c != "I")

    def masks(self) -> tuple[int, int, int]:
        """(flip_mask, zy_mask, number of Y letters) in the basis-index bit layout."""
        flip = zy = 0
        for k, c in enumerate(self.letters):
            bit = 1 << (self.n - 1 - k)
            if c in "XY":
                flip |= bit
            if c in "YZ":
                zy |= bit
        return flip, zy, self.letters.count("Y")

    def matrices(self) -> list[np.ndarray]:
        return [PAULI_MATRICES[c] for c in self.letters]

    def dense(self) -> np.ndarray:
        """Full 2**n x 2**n matrix by Kronecker products (small n only; used by oracles)."""
        out = np.ones((1, 1), dtype=complex)
        for m in self.matrices():
            out = np.kron(out, m)
        return out


def _as_pauli(p) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


def _parity_table(n: int) -> np.ndarray:
    return (popcounts(n) & 1).astype(np.int8)


def apply_pauli_string(p, v: StateVector) -> StateVector:
    """Exact action of a Pauli string on a pure state."""
    p = _as_pauli(p)
    if p.n != v.n:
        raise DimensionMismatch(f"Pauli string of length {p.n} on {v.n} qubits")
    flip, zy, ny = p.masks()
    idx = np.arange(v.dim)
    signs = 1 - 2 * _parity_table(v.n)[idx & zy]
    out = np.empty_like(v.amps)
    out[idx ^ flip] = (1j) ** ny * signs * v.amps
    return StateVector(v.n, out)


def _batch_correlators(
    stacked: np.ndarray, parity: np.ndarray, flips: np.ndarray, zys: np.ndarray, nys: np.ndarray
) -> np.ndarray:
    """Tr(rho P) for a batch of strings given as masks; ``stacked`` rows are sqrt(w) v."""
    total = np.zeros(len(flips), dtype=complex)
    for row in stacked:
        # sum only over the support of the ket; exact, and cheap for W-type vectors
        idx = np.flatnonzero(row)
        signs = 1.0 - 2.0 * parity[idx[None, :] & zys[:, None]]
        total += np.sum(np.conj(row[idx[None, :] ^ flips[:, None]]) * signs * row[idx][None, :], axis=1)
    total *= (1j) ** (nys % 4)
    return total


def correlator(state: State, p) -> float:
    """Tr(rho P) for a Pauli string ``P``; real up to rounding."""
    state = as_low_rank(state)
    p = _as_pauli(p)
    if p.n != state.n:
        raise DimensionMismatch(f"Pauli string of length {p.n} on {state.n} qubits")
    flip, zy, ny = p.masks()
    val = _batch_correlators(
        state.stacked(),
        _parity_table(state.n),
        np.array([flip]),
        np.array([zy]),
        np.array([ny]),
    )[0]
    if abs(val.imag) > IMAG_TOL:
        raise NotHermitian(f"correlator has imaginary part {val.imag:.3e}")
    return float(val.real)


def parity_predicts_zero(p, prob: float) -> bool:
    """True when bit-flip symmetry alone forces Tr(rho_prob P) = 0.

    Conjugating by X on every site maps Y and Z to minus themselves, and maps
    the equal mixture of |W> and |Wbar> onto itself.  So at prob = 1/2 every
    string with an odd number of Y and Z letters has zero expectation.
    """
    p = _as_pauli(p)
    _, n_y, n_z = p.counts
    return prob == 0.5 and (n_y + n_z) % 2 == 1


def count_strings(n: int, weight: int) -> int:
    return math.comb(n, weight) * 3**weight


def iter_pauli_strings(n: int, weight: int) -> Iterator[PauliString]:
    """All strings of exactly ``weight`` non-identity letters.

    Order is lexicographic over (site subset, letter word): subsets as produced
    by ``itertools.combinations``, then letter words over X < Y < Z.
    """
    for sites in itertools.combinations(range(n), weight):
        for word in itertools.product(_LETTERS, repeat=weight):
            letters = ["I"] * n
            for s, c in zip(sites, word):
                letters[s] = c
            yield PauliString("".join(letters))


def random_pauli_strings(n: int, count: int, rng: np.random.Generator) -> list[PauliString]:
    letters = np.array(list("IXYZ"))
    return [PauliString("".join(row)) for row in letters[rng.integers(0, 4, size=(count, n))]]


@dataclass(frozen=True)
class CorrelationReport:
    n: int
    weight: int
    entries: dict
    max_abs: float
    argmax: PauliString

    def verdict(self, threshold: float = ZERO_TOL) -> str:
        return "VANISHING" if self.max_abs <= threshold else "PRESENT"

    def to_dict(self, include_entries: bool = True) -> dict:
        doc = {
            "n": self.n,
            "weight": self.weight,
            "count": len(self.entries),
            "max_abs": self.max_abs,
            "argmax": str(self.argmax),
            "verdict": self.verdict(),
        }
        if include_entries:
            doc["entries"] = {str(k): v for k, v in self.entries.items()}
        return doc

    def to_json(self, include_entries: bool = True, **kwargs) -> str:
        return json.dumps(self.to_dict(include_entries), **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["string", "value"])
        for k, v in self.entries.items():
            writer.writerow([str(k), repr(v)])
        return buf.getvalue()


def default_threads() -> int:
    env = os.environ.get("MULTICORR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def correlation_tensor(
    state: State,
    weight: int,
    *,
    threads: int | None = None,
    scan_cap: int = SCAN_CAP,
) -> CorrelationReport:
    """Evaluate every proper Pauli string of the given weight on ``state``."""
    state = as_low_rank(state)
    n = state.n
    if not 1 <= weight <= n:
        raise InvalidDimension(f"weight {weight} outside [1, {n}]")
    total = count_strings(n, weight)
    if total > scan_cap:
        raise ScanTooLarge(f"{total} strings exceeds scan cap {scan_cap}")

    strings = list(iter_pauli_strings(n, weight))
    masks = np.array([s.masks() for s in strings], dtype=np.int64).reshape(-1, 3)
    batch = max(1, BATCH_ELEMENTS // (2**n))
    chunks = [slice(i, i + batch) for i in range(0, total, batch)]
    stacked = state.stacked()
    parity = _parity_table(n)

    def work(sl: slice) -> np.ndarray:
        m = masks[sl]
        return _batch_correlators(stacked, parity, m[:, 0], m[:, 1], m[:, 2])

    workers = threads or default_threads()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(sl) for sl in chunks]
    values = np.concatenate(parts)
    worst = float(np.max(np.abs(values.imag)))
    if worst > IMAG_TOL:
        raise NotHermitian(f"correlator has imaginary part {worst:.3e}")
    reals = values.real
    best = int(np.argmax(np.abs(reals)))
    entries = {s: float(v) for s, v in zip(strings, reals)}
    return CorrelationReport(n, weight, entries, float(abs(reals[best])), strings[best])


# -- general local observables ----------------------------------------------


@dataclass(frozen=True, eq=False)
class LocalObservable:
    """Hermitian 2x2 observable (not necessarily traceless) on one site."""

    site: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DimensionMismatch(f"local observable must be 2x2, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise NotHermitian(f"observable on site {self.site} is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "site", int(self.site))


def bloch_observable(a0: float, vec: Sequence[float]) -> np.ndarray:
    """``a0 I + vec . sigma``."""
    x, y, z = vec
    return a0 * I2 + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z


def random_hermitian(rng: np.random.Generator) -> np.ndarray:
    return bloch_observable(rng.standard_normal(), rng.standard_normal(3))


def covariance(
    state: State,
    observables: Sequence[LocalObservable],
    traceless_shift: bool = True,
) -> float:
    """<prod_j (X_j - <X_j>)> over the sites carrying an observable.

    Sites without an observable are traced out, so passing observables on a
    subset of sites gives the covariance of that sub-collection.  With
    ``traceless_shift=False`` the plain correlator <prod_j X_j> is returned.
    """
    state = as_low_rank(state)
    factors: list = [None] * state.n
    for obs in observables:
        if not isinstance(obs, LocalObservable):
            raise TypeError("observables must be LocalObservable instances")
        if not 0 <= obs.site < state.n:
            raise DimensionMismatch(f"site {obs.site} out of range for n={state.n}")
        if factors[obs.site] is not None:
            raise DimensionMismatch(f"two observables on site {obs.site}")
        m = obs.matrix
        if traceless_shift:
            marginal = partial_trace(state, [obs.site]).entries
            mean = float(np.real(np.trace(marginal @ m)))
            m = m - mean * I2
        factors[obs.site] = m
    if all(f is None for f in factors):
        raise DimensionMismatch("no observables given")
    return expectation(state, factors)


# -- weight projectors --------------------------------------------------------


class WeightProjector:
    """Diagonal projector onto basis states with exactly ``k`` ones."""

    def __init__(self, n: int, k: int):
        if not 0 <= k <= n:
            raise InvalidDimension(f"weight {k} outside [0, {n}]")
        self.n = n
        self.k = k
        self.mask = popcounts(n) == k

    def __call__(self, v) -> np.ndarray:
        amps = v.amps if isinstance(v, StateVector) else np.asarray(v, dtype=complex)
        if amps.shape != (2**self.n,):
            raise DimensionMismatch(f"vector of length {amps.shape} for n={self.n}")
        return np.where(self.mask, amps, 0)

    def dense(self) -> np.ndarray:
        return np.diag(self.mask.astype(complex))


def weight_projector(n: int, k: int) -> WeightProjector:
    return WeightProjector(n, k)
