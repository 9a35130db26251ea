"""Derivative-free search over measurement directions, and the epsilon scan.

Each restart runs Nelder-Mead on the (theta, phi) angles from a seeded random
point on the sphere.  Restart ``i`` draws from ``default_rng([seed, i])`` and
restarts are independent, so results do not depend on the thread count.

For a permutation-invariant state with equal setting counts the search can
share one list of directions among all parties and score it with the orbit
program, which is exact for such scenarios and far smaller.  The returned
result is always re-solved on the full program when it fits under the column
cap.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from ..errors import DimensionMismatch, InvalidProbability
from ..pauli import default_threads
from ..qstate import State, as_low_rank, make_rho_eps
from .polytope import (
    COLUMN_CAP,
    DEFAULT_TOL,
    LPResult,
    lp_membership,
    lp_membership_symmetric,
    strategy_count,
    symmetric_lp,
    symmetric_visibility,
)
from .scenario import Scenario, behavior

log = logging.getLogger(__name__)

MAX_EVALS = 600
XATOL = 1e-7
FATOL = 1e-10
SYMMETRIC_COLUMN_CAP = 20_000


def _swap_adjacent(tensor: np.ndarray, k: int) -> np.ndarray:
    return np.swapaxes(tensor, k, k + 1)


def is_permutation_invariant(state: State, tol: float = 1e-10) -> bool:
    """rho equals every qubit permutation of itself (checked on adjacent swaps).

    Uses Tr(rho P rho P) = Tr(rho^2) iff P rho P = rho, evaluated on the rank terms.
    """
    st = as_low_rank(state)
    weights = np.array(st.weights)
    vecs = [v.tensor() for _, v in st.terms]
    purity = sum(wi * wj * abs(np.vdot(a, b)) ** 2
                 for wi, a in zip(weights, vecs) for wj, b in zip(weights, vecs))
    for k in range(st.n - 1):
        swapped = [_swap_adjacent(v, k) for v in vecs]
        overlap = sum(wi * wj * abs(np.vdot(a, b)) ** 2
                      for wi, a in zip(weights, vecs) for wj, b in zip(weights, swapped))
        if abs(overlap - purity) > tol:
            return False
    return True


def _use_symmetric(state, m: tuple, symmetric) -> bool:
    if symmetric is False:
        return False
    ok = (len(set(m)) == 1 and is_permutation_invariant(state))
    if ok:
        ok = math.comb(2 ** m[0] + len(m) - 1, len(m)) <= SYMMETRIC_COLUMN_CAP
    if symmetric is True and not ok:
        raise DimensionMismatch("symmetric search needs equal setting counts and a permutation-invariant state")
    return ok


def _random_angles(rng: np.random.Generator, count: int) -> np.ndarray:
    theta = np.arccos(rng.uniform(-1.0, 1.0, count))
    phi = rng.uniform(0.0, 2 * np.pi, count)
    return np.column_stack([theta, phi]).ravel()


@dataclass
class _Objective:
    state: object
    m: tuple
    symmetric: bool
    evaluations: int = 0

    def scenario(self, x: np.ndarray) -> Scenario:
        if self.symmetric:
            return Scenario.from_angles(self.m, np.tile(x, len(self.m)))
        return Scenario.from_angles(self.m, x)

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        b = behavior(self.state, self.scenario(x))
        if self.symmetric:
            return symmetric_visibility(b.correlator_tensor(), symmetric_lp(len(self.m), self.m[0]))
        return lp_membership(b).visibility


def _run_restart(objective: _Objective, x0: np.ndarray, max_evals: int) -> tuple[float, np.ndarray, int]:
    local = dataclasses.replace(objective, evaluations=0)
    res = minimize(local, x0, method="Nelder-Mead",
                   options={"maxfev": max_evals, "xatol": XATOL, "fatol": FATOL})
    return float(res.fun), np.asarray(res.x), local.evaluations


def optimize_settings(
    state: State,
    m: Sequence[int],
    restarts: int = 20,
    seed: int = 0,
    *,
    tol: float = DEFAULT_TOL,
    max_evals: int = MAX_EVALS,
    symmetric: bool | str = "auto",
    initial: Sequence[Scenario] = (),
    threads: int | None = None,
) -> tuple[Scenario, LPResult]:
    """Minimize v* over measurement directions; returns the best scenario and its LP result.

    ``symmetric`` is ``"auto"``, ``True`` or ``False``.  ``initial`` scenarios
    are refined first (warm starts) in addition to the ``restarts`` random ones.
    The reported v* is an upper bound on the true minimum over settings.
    """
    st = as_low_rank(state)
    m = tuple(int(k) for k in m)
    if len(m) != st.n:
        raise DimensionMismatch(f"{len(m)} setting counts for {st.n} qubits")
    if any(k < 1 for k in m):
        raise DimensionMismatch("every party needs at least one setting")
    if restarts < 0 or max_evals < 1:
        raise ValueError("restarts must be >= 0 and max_evals >= 1")
    sym = _use_symmetric(st, m, symmetric)
    if not sym and strategy_count(m) > COLUMN_CAP:
        # let lp_membership raise the cap error with its message
        lp_membership(behavior(st, Scenario.random(m, np.random.default_rng(seed))))
    objective = _Objective(st, m, sym)
    nparams = 2 * (m[0] if sym else sum(m))

    starts = []
    for sc in initial:
        if sc.m != m:
            raise DimensionMismatch(f"initial scenario has settings {sc.m}, expected {m}")
        x = sc.to_angles()
        starts.append(x[:nparams] if sym else x)
    for i in range(restarts):
        starts.append(_random_angles(np.random.default_rng([seed, i]), nparams // 2))
    if not starts:
        raise ValueError("nothing to search: no restarts and no initial scenarios")

    workers = max(1, min(threads or default_threads(), len(starts)))
    if workers == 1:
        outcomes = [_run_restart(objective, x0, max_evals) for x0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda x0: _run_restart(objective, x0, max_evals), starts))

    values = [v for v, _, _ in outcomes]
    best = int(np.argmin(values))  # first index on ties
    scenario = objective.scenario(outcomes[best][1])
    b = behavior(st, scenario)
    if strategy_count(m) <= COLUMN_CAP:
        result = lp_membership(b, tol)
    elif sym:
        result = lp_membership_symmetric(b, tol)
    else:
        result = lp_membership(b, tol, column_generation=True)
    stats = dict(result.solver_stats)
    stats["search"] = {
        "mode": "symmetric" if sym else "full",
        "starts": len(starts),
        "warm_starts": len(initial),
        "evaluations": int(sum(e for _, _, e in outcomes)),
        "best_start": best,
        "start_values": values,
    }
    return scenario, dataclasses.replace(result, solver_stats=stats)


# -- epsilon scan -------------------------------------------------------------------


@dataclass
class ScanPoint:
    epsilon: float
    visibility: float
    violation: bool
    scenario: Scenario = field(repr=False)
    result: LPResult = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "visibility": self.visibility,
            "violation": self.violation,
            "scenario": self.scenario.to_dict(),
            "lp": self.result.to_dict(),
        }


@dataclass
class EpsilonScanReport:
    n: int
    m: tuple
    tol: float
    points: list

    @property
    def threshold(self) -> float | None:
        """Smallest epsilon on the grid with a violation found."""
        hits = [p.epsilon for p in self.points if p.violation]
        return min(hits) if hits else None

    @property
    def non_monotone(self) -> bool:
        """v* should not rise with epsilon; a rise means the search missed something."""
        vals = [p.visibility for p in sorted(self.points, key=lambda p: p.epsilon)]
        return any(b > a + self.tol for a, b in zip(vals, vals[1:]))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": list(self.m),
            "tol": self.tol,
            "points": [p.to_dict() for p in self.points],
            "threshold": self.threshold,
            "non_monotone_warning": self.non_monotone,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_csv(self) -> str:
        lines = ["epsilon,visibility,violation"]
        lines += [f"{p.epsilon!r},{p.visibility!r},{int(p.violation)}" for p in self.points]
        return "\n".join(lines) + "\n"


def epsilon_scan(
    n: int,
    m: Sequence[int],
    eps_grid: Sequence[float],
    restarts: int = 20,
    seed: int = 0,
    *,
    tol: float = DEFAULT_TOL,
    max_evals: int = MAX_EVALS,
    threads: int | None = None,
    progress: Callable[[float, float], None] | None = None,
) -> EpsilonScanReport:
    """Run ``optimize_settings`` on rho_eps for each grid value, in increasing order.

    Every point after the first is warm-started from the previous point's best
    scenario and then gets the same fresh restarts.
    """
    grid = sorted(float(e) for e in eps_grid)
    if not grid:
        raise ValueError("empty epsilon grid")
    for e in grid:
        if not 0.0 <= e <= 0.5:
            raise InvalidProbability(f"epsilon {e} outside [0, 1/2]")
    points = []
    previous = None
    for e in grid:
        st = make_rho_eps(n, e)
        initial = [previous] if previous is not None else []
        sc, res = optimize_settings(st, m, restarts, seed, tol=tol, max_evals=max_evals,
                                    initial=initial, threads=threads)
        points.append(ScanPoint(e, res.visibility, not res.feasible_at_one, sc, res))
        previous = sc
        if progress is not None:
            progress(e, res.visibility)
    return EpsilonScanReport(n, tuple(m), tol, points)
