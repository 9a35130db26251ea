"""Dense revised simplex for ``min c.x  s.t.  A x = b, x >= 0``.

Two phases with artificial variables, an explicit basis inverse kept current
by rank-one (eta) updates and refactorized periodically, Dantzig pricing with a
switch to Bland's rule while the method stalls on degenerate pivots.

Bell-polytope programs are massively degenerate (the right-hand side has a
single nonzero), so by default the right-hand side is perturbed by a tiny
seeded amount along the starting basis.  The final basis is then re-evaluated
on the true right-hand side; reduced costs do not depend on ``b``, so a basis
that is primal feasible there is optimal.  If it is not, the program is solved
again unperturbed and, failing that, from a cold start.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
PERTURBATION = 1e-7
REFACTOR_EVERY = 64
SMALL_PIVOT = 1e-5  # refactor after pivots this small relative to their column
DEGENERATE_STREAK = 30


@dataclass
class LPSolution:
    status: str  # optimal | infeasible | unbounded | iteration_limit | perturbation_infeasible | singular_basis
    x: np.ndarray
    objective: float
    duals: np.ndarray
    basis: np.ndarray
    iterations: int
    phase1_iterations: int = 0
    perturbed: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Basis bookkeeping for one phase."""

    def __init__(self, A, b, c, basis, allowed, pricer=None):
        self.A = A
        self.pricer = pricer
        self.b = b
        self.c = c
        self.basis = np.array(basis, dtype=np.int64)
        self.allowed = allowed
        self.iterations = 0
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.xB = self.Binv @ self.b
        # rounding can leave tiny negatives on degenerate rows
        self.xB[(self.xB < 0) & (self.xB > -FEAS_TOL)] = 0.0
        self.since_refactor = 0

    def duals(self) -> np.ndarray:
        return self.c[self.basis] @ self.Binv

    def reduced_costs(self) -> np.ndarray:
        y = self.duals()
        yA = y @ self.A if self.pricer is None else self.pricer(y)
        d = self.c - yA
        d[self.basis] = 0.0
        d[~self.allowed] = np.inf
        return d

    def pivot(self, row: int, col: int, alpha: np.ndarray):
        theta = self.xB[row] / alpha[row]
        self.xB -= theta * alpha
        self.xB[row] = theta
        piv = alpha[row]
        prow = self.Binv[row] / piv
        self.Binv -= np.outer(alpha, prow)
        self.Binv[row] = prow
        self.basis[row] = col
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY or abs(piv) < SMALL_PIVOT * np.abs(alpha).max():
            self.refactor()

    def run(self, max_iter: int, opt_tol: float = OPT_TOL) -> str:
        degenerate = 0
        bland = False
        while self.iterations < max_iter:
            d = self.reduced_costs()
            if bland:
                candidates = np.flatnonzero(d < -opt_tol)
                if candidates.size == 0:
                    return "optimal"
                col = int(candidates[0])
            else:
                col = int(np.argmin(d))
                if d[col] >= -opt_tol:
                    return "optimal"
            alpha = self.Binv @ self.A[:, col]
            # relative tolerance: entries at rounding level of the column are zero
            rows = np.flatnonzero(alpha > PIVOT_TOL * max(1.0, np.abs(alpha).max()))
            if rows.size == 0:
                return "unbounded"
            ratios = self.xB[rows] / alpha[rows]
            theta = ratios.min()
            tied = rows[ratios <= theta + 1e-12]
            if bland:
                row = int(tied[np.argmin(self.basis[tied])])
            else:
                row = int(tied[np.argmax(alpha[tied])])
            if theta <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_STREAK:
                    bland = True
            else:
                degenerate = 0
                bland = False
            self.pivot(row, col, alpha)
        return "iteration_limit"


def solve_standard_form(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    *,
    basis: np.ndarray | None = None,
    max_iter: int = 50_000,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
    perturb: float = PERTURBATION,
    seed: int = 0,
    pricer=None,
) -> LPSolution:
    """Minimize ``c.x`` over ``A x = b, x >= 0``.

    ``basis`` (column indices, one per row) skips phase 1 when it is
    nonsingular and primal feasible.  ``duals`` are the row multipliers ``y``
    of the final basis, so ``c - A.T y >= 0`` at optimality.  ``perturb = 0``
    disables the right-hand-side perturbation.  ``pricer(y)``, when given, must
    return ``y @ A`` (a structured shortcut for wide constraint matrices); it is
    only used in phase 2.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    if pricer is not None and np.any(sign < 0):
        raw = pricer
        pricer = lambda y: raw(y * sign)
    # a warm basis can steer degenerate pivots onto tiny elements, so the
    # last resort is a cold start from phase 1
    attempts = []
    for start in ([basis, None] if basis is not None else [None]):
        attempts += [(start, perturb), (start, 0.0)] if perturb > 0 else [(start, 0.0)]
    for start, p in attempts:
        sol = _solve(A, b, c, start, max_iter, feas_tol, opt_tol, p, seed, pricer)
        if sol.ok:
            break
        log.debug("solve (warm=%s, perturb=%g) ended with %s", start is not None, p, sol.status)
    return _finish(sol, sign)


def _finish(sol: LPSolution, sign: np.ndarray) -> LPSolution:
    sol.duals = sol.duals * sign
    return sol


def _warm_tableau(A, b, c, basis, feas_tol):
    try:
        tab = _Tableau(A, b, c, basis, np.ones(A.shape[1], dtype=bool))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(tab.Binv)) or tab.xB.min() < -feas_tol:
        return None
    return tab


def _solve(A, b, c, basis, max_iter, feas_tol, opt_tol, perturb, seed, pricer=None) -> LPSolution:
    try:
        return _solve_once(A, b, c, basis, max_iter, feas_tol, opt_tol, perturb, seed, pricer)
    except np.linalg.LinAlgError:
        # a pivot on a rounding-level element left a singular basis
        return _failed("singular_basis", A.shape[1], A.shape[0], 0)


def _solve_once(A, b, c, basis, max_iter, feas_tol, opt_tol, perturb, seed, pricer) -> LPSolution:
    m, n = A.shape
    rng = np.random.default_rng(seed)
    scale = perturb * max(1.0, float(np.abs(b).max()))
    phase1_iters = 0

    tab = None
    if basis is not None and len(basis) == m:
        tab = _warm_tableau(A, b, c, basis, feas_tol)
        if tab is not None and perturb > 0:
            # push every basic variable strictly positive
            b_work = b + scale * (A[:, tab.basis] @ rng.uniform(0.5, 1.0, m))
            tab = _Tableau(A, b_work, c, tab.basis, tab.allowed, pricer)
        elif tab is not None:
            tab.pricer = pricer

    if tab is None:
        b_work = b + scale * rng.uniform(0.5, 1.0, m) if perturb > 0 else b
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        t1 = _Tableau(A1, b_work, c1, np.arange(n, n + m), np.ones(n + m, dtype=bool))
        status = t1.run(max_iter, opt_tol)
        phase1_iters = t1.iterations
        if status != "optimal":
            return _failed(status, n, m, phase1_iters)
        t1.refactor()
        infeas = float(np.sum(t1.xB[t1.basis >= n]))
        if infeas > feas_tol * max(1.0, np.abs(b).max()) + 2 * m * scale:
            return _failed("infeasible", n, m, phase1_iters)
        _drive_out_artificials(t1, n)
        allowed = np.zeros(n + m, dtype=bool)
        allowed[:n] = True
        # artificial columns are never priced in phase 2, so the pricer only covers A
        phase2_pricer = None if pricer is None else (lambda y: np.concatenate([pricer(y), np.zeros(m)]))
        tab = _Tableau(A1, b_work, np.concatenate([c, np.zeros(m)]), t1.basis, allowed, phase2_pricer)

    status = tab.run(max_iter - phase1_iters, opt_tol)
    if status != "optimal":
        return _failed(status, n, m, tab.iterations + phase1_iters)

    # evaluate the final basis on the true right-hand side
    tab.b = b
    tab.refactor()
    if tab.xB.min() < -feas_tol or np.any(tab.xB[tab.basis >= n] > feas_tol):
        return _failed("perturbation_infeasible", n, m, tab.iterations + phase1_iters)
    x = np.zeros(tab.A.shape[1])
    x[tab.basis] = np.maximum(tab.xB, 0.0)
    x = x[:n]
    return LPSolution(
        status="optimal",
        x=x,
        objective=float(c @ x),
        duals=tab.duals(),
        basis=tab.basis.copy(),
        iterations=tab.iterations + phase1_iters,
        phase1_iterations=phase1_iters,
        perturbed=perturb > 0,
    )


def _drive_out_artificials(tab: _Tableau, n: int):
    """Pivot artificials out of the basis where a structural column allows."""
    for row in range(len(tab.basis)):
        if tab.basis[row] < n:
            continue
        r = tab.Binv[row] @ tab.A[:, :n]
        r[tab.basis[tab.basis < n]] = 0.0
        col = int(np.argmax(np.abs(r)))
        if abs(r[col]) > 1e-7:
            tab.pivot(row, col, tab.Binv @ tab.A[:, col])
        else:
            log.debug("row %d is redundant; artificial stays basic", row)
    tab.refactor()


def _failed(status: str, n: int, m: int, iters: int) -> LPSolution:
    return LPSolution(status, np.full(n, np.nan), np.nan, np.full(m, np.nan), np.array([], int), iters, iters)
