"""Evidence that rho_p is entangled across every bipartition.

Two independent lines of evidence per cut:

* negativity of the partial transpose (dense, n <= DENSE_CAP);
* a seesaw search for the product vector with the largest overlap with the
  support span{|W>, |Wbar>}.  A product-free support keeps that overlap
  strictly below one, and then no decomposition of the state into pure states
  can be product across the cut.

``weight_argument_check`` replays the projection steps of the weight-counting
proof numerically.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DenseLimitExceeded, InvalidDimension
from .pauli import default_threads, weight_projector
from .qstate import (
    DENSE_CAP,
    LowRankState,
    State,
    StateVector,
    as_low_rank,
    density_matrix,
    make_rho,
    make_w,
    make_wbar,
    popcounts,
    random_vector,
)

NEGATIVITY_TOL = 1e-9
OVERLAP_MARGIN = 1e-3
RANK_TOL = 1e-10
MONOTONE_SLACK = 1e-13


@dataclass(frozen=True, order=True)
class Bipartition:
    """Cut ``side_a | rest``; canonical form has site 0 in ``side_a``."""

    n: int
    side_a: tuple

    def __post_init__(self):
        a = tuple(sorted(set(int(s) for s in self.side_a)))
        if not a or a[0] < 0 or a[-1] >= self.n:
            raise InvalidDimension(f"side {a} is not a subset of range({self.n})")
        if len(a) >= self.n:
            raise InvalidDimension("side_a must be a proper subset")
        object.__setattr__(self, "side_a", a)

    @classmethod
    def canonical(cls, n: int, sites: Sequence[int]) -> "Bipartition":
        """Cut with the given sites on one side, flipped so that site 0 is on side A."""
        cut = cls(n, tuple(sites))
        if 0 in cut.side_a:
            return cut
        return cls(n, cut.side_b)

    @property
    def side_b(self) -> tuple:
        return tuple(s for s in range(self.n) if s not in self.side_a)

    def complement(self) -> "Bipartition":
        """The same cut with the sides swapped (not canonical)."""
        return Bipartition(self.n, self.side_b)

    @property
    def label(self) -> str:
        fmt = lambda side: "{" + ",".join(str(s) for s in side) + "}"
        return f"{fmt(self.side_a)}|{fmt(self.side_b)}"

    def __str__(self) -> str:
        return self.label


def enumerate_bipartitions(n: int) -> list[Bipartition]:
    """All 2**(n-1) - 1 cuts, site 0 always on side A, lexicographic in side A."""
    if not 2 <= n <= 20:
        raise InvalidDimension(f"n={n} outside [2, 20]")
    cuts = []
    for r in range(0, n - 1):
        for rest in itertools.combinations(range(1, n), r):
            cuts.append(Bipartition(n, (0,) + rest))
    return sorted(cuts, key=lambda c: c.side_a)


def _split_matrix(amps: np.ndarray, n: int, cut: Bipartition) -> np.ndarray:
    """Amplitudes as a (2**|A|, 2**|B|) matrix."""
    t = np.asarray(amps).reshape((2,) * n)
    return t.transpose(cut.side_a + cut.side_b).reshape(2 ** len(cut.side_a), -1)


def schmidt_coefficients(v: StateVector, cut: Bipartition) -> np.ndarray:
    return np.linalg.svd(_split_matrix(v.amps, v.n, cut), compute_uv=False)


def schmidt_rank(v: StateVector, cut: Bipartition, tol: float = RANK_TOL) -> int:
    return int(np.sum(schmidt_coefficients(v, cut) > tol))


def partial_transpose(rho: np.ndarray, n: int, sites: Sequence[int]) -> np.ndarray:
    t = np.asarray(rho).reshape((2,) * (2 * n))
    perm = list(range(2 * n))
    for s in sites:
        perm[s], perm[n + s] = perm[n + s], perm[s]
    return t.transpose(perm).reshape(2**n, 2**n)


def negativity(state: State, cut: Bipartition, cap: int = DENSE_CAP) -> float:
    """Sum of |negative eigenvalues| of the partial transpose on side A."""
    state = as_low_rank(state)
    if state.n != cut.n:
        raise InvalidDimension(f"cut on {cut.n} sites for a {state.n}-qubit state")
    if state.n > cap:
        raise DenseLimitExceeded(f"negativity needs a dense matrix; n={state.n} > {cap}")
    rho = density_matrix(state, cap=cap).entries
    pt = partial_transpose(rho, state.n, cut.side_a)
    pt = 0.5 * (pt + pt.conj().T)
    ev = np.linalg.eigvalsh(pt)
    return float(-np.sum(ev[ev < 0]))


# -- seesaw -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SeesawResult:
    bipartition: Bipartition
    best_overlap: float
    restarts: int
    iterations_used: int
    converged: bool
    argmax_states: tuple
    history: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "best_overlap": self.best_overlap,
            "restarts": self.restarts,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
        }


def w_subspace(n: int) -> list[StateVector]:
    return [make_w(n), make_wbar(n)]


def perturbed_w_subspace(n: int, delta: float, seed: int = 0) -> list[StateVector]:
    """|W> and |Wbar> each shifted by ``delta`` times a seeded random unit vector.

    Exploratory robustness mode: feed the result to ``seesaw_product_overlap``.
    """
    rng = np.random.default_rng(seed)
    return [
        StateVector.from_unnormalized(v.amps + delta * random_vector(2**n, rng))
        for v in w_subspace(n)
    ]


def _orthonormal_columns(vectors: Sequence) -> np.ndarray:
    mat = np.stack([v.amps if isinstance(v, StateVector) else np.asarray(v, complex) for v in vectors], axis=1)
    q, r = np.linalg.qr(mat)
    keep = np.abs(np.diag(r)) > RANK_TOL
    return q[:, keep]


def _top_vector(cols: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit vector maximizing sum_j |<c_j|x>|^2 over the columns c_j, and that maximum."""
    gram = cols.conj().T @ cols
    vals, vecs = np.linalg.eigh(gram)
    x = cols @ vecs[:, -1]
    norm = np.linalg.norm(x)
    if norm == 0:
        return np.zeros(cols.shape[0], dtype=complex), 0.0
    return x / norm, float(vals[-1])


def _one_restart(mats, dims, rng, max_iter, tol):
    """Alternating maximization of sum_j |<s_j|phi (x) psi>|^2 from a random start."""
    psi = random_vector(dims[1], rng)
    # random phi too, so the starting overlap is defined
    phi = random_vector(dims[0], rng)
    overlap = float(sum(abs(phi @ m.conj() @ psi) ** 2 for m in mats))
    history = [overlap]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # <s_j|phi psi> = phi^T conj(M_j) psi = <M_j conj(psi) | phi>
        phi, _ = _top_vector(np.stack([m @ psi.conj() for m in mats], axis=1))
        psi, new = _top_vector(np.stack([m.T @ phi.conj() for m in mats], axis=1))
        if new < overlap - MONOTONE_SLACK:
            raise AssertionError(f"seesaw overlap decreased: {overlap!r} -> {new!r}")
        history.append(new)
        improvement = new - overlap
        overlap = new
        if improvement < tol:
            converged = True
            break
    return min(max(overlap, 0.0), 1.0), phi, psi, it, converged, tuple(history)


def seesaw_product_overlap(
    cut: Bipartition,
    restarts: int = 50,
    max_iter: int = 500,
    tol: float = 1e-10,
    seed: int = 0,
    subspace: Sequence | None = None,
    threads: int | None = None,
) -> SeesawResult:
    """Best overlap ||P_S (phi_A (x) psi_B)||^2 found over seeded random restarts.

    ``subspace`` defaults to span{|W>, |Wbar>} on ``cut.n`` sites.  Restart ``i``
    draws its start from ``default_rng(seed + i)``.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n = cut.n
    basis = _orthonormal_columns(subspace if subspace is not None else w_subspace(n))
    mats = [_split_matrix(basis[:, j], n, cut) for j in range(basis.shape[1])]
    dims = (2 ** len(cut.side_a), 2 ** len(cut.side_b))

    def run(i: int):
        return _one_restart(mats, dims, np.random.default_rng(seed + i), max_iter, tol)

    workers = threads or default_threads()
    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(i) for i in range(restarts)]

    best = max(range(restarts), key=lambda i: (results[i][0], -i))
    overlap, phi, psi, _, converged, history = results[best]
    states = (
        StateVector(len(cut.side_a), phi),
        StateVector(len(cut.side_b), psi),
    )
    return SeesawResult(
        bipartition=cut,
        best_overlap=overlap,
        restarts=restarts,
        iterations_used=sum(r[3] for r in results),
        converged=converged,
        argmax_states=states,
        history=history,
    )


# -- weight-counting replay -----------------------------------------------------


def _weight_basis(n_sites: int, r: int) -> np.ndarray:
    """Indicator columns of the weight-r basis states of an n_sites register."""
    idx = np.flatnonzero(popcounts(n_sites) == r)
    cols = np.zeros((2**n_sites, len(idx)), dtype=complex)
    cols[idx, np.arange(len(idx))] = 1.0
    return cols


def _embed(phi: np.ndarray, psi: np.ndarray, n: int, cut: Bipartition) -> np.ndarray:
    """phi_A (x) psi_B as an n-site amplitude vector in the standard site order."""
    t = np.multiply.outer(phi, psi).reshape((2,) * n)
    inverse = np.argsort(cut.side_a + cut.side_b)
    return t.transpose(inverse).ravel()


def weight_argument_check(cut: Bipartition, seed: int = 0, cap: int = DENSE_CAP) -> bool:
    """Numeric replay of the weight-projector contradiction for one cut.

    Checks that P_1 maps span{W, Wbar} onto the line of |W> and P_{n-1} onto the
    line of |Wbar>; that for phi of a single weight r on side A the projections
    only act on side B (P_k (phi psi) = phi (P_{k-r} psi)); and that neither |W>
    nor |Wbar> has Schmidt rank 1 across the cut.
    """
    n = cut.n
    if n > cap:
        raise DenseLimitExceeded(f"n={n} exceeds dense cap {cap}")
    if n < 3:
        return False
    w, wbar = make_w(n), make_wbar(n)
    span = np.stack([w.amps, wbar.amps], axis=1)

    for k, target in ((1, w), (n - 1, wbar)):
        image = weight_projector(n, k).dense() @ span
        sv = np.linalg.svd(image, compute_uv=False)
        if sv[1] > RANK_TOL or sv[0] < RANK_TOL:
            return False
        u = np.linalg.svd(image)[0][:, 0]
        if abs(abs(np.vdot(target.amps, u)) - 1.0) > RANK_TOL:
            return False

    rng = np.random.default_rng(seed)
    na, nb = len(cut.side_a), len(cut.side_b)
    for r in range(na + 1):
        cols = _weight_basis(na, r)
        phi = cols @ random_vector(cols.shape[1], rng)
        psi = random_vector(2**nb, rng)
        full = _embed(phi, psi, n, cut)
        for k in (1, n - 1):
            lhs = weight_projector(n, k)(full)
            if 0 <= k - r <= nb:
                rhs = _embed(phi, weight_projector(nb, k - r)(psi), n, cut)
            else:
                rhs = np.zeros_like(full)
            if np.max(np.abs(lhs - rhs)) > RANK_TOL:
                return False

    return schmidt_rank(w, cut) > 1 and schmidt_rank(wbar, cut) > 1


# -- aggregate report ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CutReport:
    cut: Bipartition
    negativity: float | None
    seesaw: SeesawResult
    weight_check: bool | None

    @property
    def positive(self) -> bool:
        neg_ok = self.negativity is None or self.negativity > NEGATIVITY_TOL
        return neg_ok and self.seesaw.best_overlap < 1.0 - OVERLAP_MARGIN

    def to_dict(self) -> dict:
        return {
            "cut": self.cut.label,
            "negativity": self.negativity,
            "seesaw": self.seesaw.to_dict(),
            "weight_argument": self.weight_check,
        }


@dataclass(frozen=True, eq=False)
class EntanglementReport:
    n: int
    p: float
    cuts: tuple

    @property
    def verdict(self) -> bool:
        return all(c.positive for c in self.cuts)

    @property
    def verdict_text(self) -> str:
        if self.verdict:
            return "consistent with genuine multiparty entanglement"
        return "not established"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "cuts": [c.to_dict() for c in self.cuts],
            "verdict": self.verdict,
            "verdict_text": self.verdict_text,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def state_support(state: LowRankState) -> list[np.ndarray]:
    return [v.amps for w, v in state.terms if w > 0]


def genuine_entanglement_report(
    n: int,
    p: float,
    restarts: int = 50,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-10,
    threads: int | None = None,
    dense_cap: int = DENSE_CAP,
) -> EntanglementReport:
    """Negativity, seesaw and weight replay on every cut of rho_p.

    The seesaw runs on the support of rho_p (span{W, Wbar} for 0 < p < 1, a single
    line at p in {0, 1}).  Negativity and the weight replay are skipped (reported
    as None) above the dense cap.
    """
    state = make_rho(n, p)
    support = state_support(state)
    dense = n <= dense_cap

    def per_cut(cut: Bipartition) -> CutReport:
        return CutReport(
            cut=cut,
            negativity=negativity(state, cut) if dense else None,
            seesaw=seesaw_product_overlap(
                cut, restarts=restarts, max_iter=max_iter, tol=tol, seed=seed,
                subspace=support, threads=1,
            ),
            weight_check=weight_argument_check(cut) if dense else None,
        )

    cuts = enumerate_bipartitions(n)
    workers = threads or default_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(per_cut, cuts))
    else:
        reports = [per_cut(c) for c in cuts]
    return EntanglementReport(n=n, p=float(p), cuts=tuple(reports))
