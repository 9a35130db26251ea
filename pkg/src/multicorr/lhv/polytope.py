"""Local-polytope membership by linear programming.

The LP is posed in correlator coordinates: a no-signaling behavior is fixed by
the tensor ``T[c_1, ..., c_n]`` (see ``Behavior.correlator_tensor``), and the
deterministic strategy ``lambda`` has the product column ``(x)_k u_k(lambda_k)`` with
``u_k = (1, o_k(0), ..., o_k(m_k - 1))``.  These coordinates are an invertible
linear image of the no-signaling (a, s) table, so the program

    max v   s.t.  sum_l q_l D_l(a|s) = v P(a|s) + (1 - v) 2^-n,  q >= 0,  sum q = 1

is the same program with a constraint matrix of full row rank that does not
depend on the measurement directions.  White noise has all correlators zero.

Strategy ``lambda`` is encoded as one integer per party whose bit ``s`` is the
outcome for setting ``s`` (0 -> +1, 1 -> -1); the flat column index is the
mixed-radix number with party 0 most significant.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ColumnCapExceeded, DimensionMismatch, InvalidState, SolverNumericalFailure
from .scenario import Behavior, Scenario
from .simplex import LPSolution, solve_standard_form

COLUMN_CAP = 200_000
V_MAX = 2.0
DEFAULT_TOL = 1e-5
SAMPLED_STRATEGIES = 10_000
SYMMETRY_TOL = 1e-9


def strategy_count(m: Sequence[int]) -> int:
    return int(np.prod([2**mk for mk in m], dtype=object))


def party_columns(mk: int) -> np.ndarray:
    """(m_k + 1, 2**m_k): column ``l`` is (1, o(0), ..., o(m_k - 1)) for local strategy ``l``."""
    local = np.arange(2**mk)
    bits = (local[None, :] >> np.arange(mk)[:, None]) & 1
    return np.vstack([np.ones(2**mk), 1.0 - 2.0 * bits])


def strategy_matrix(m: Sequence[int]) -> np.ndarray:
    out = np.ones((1, 1))
    for mk in m:
        out = np.kron(out, party_columns(mk))
    return out


def decode_strategy(index: int, m: Sequence[int]) -> tuple:
    """Flat column index -> per-party local strategy words."""
    words = []
    for mk in reversed(m):
        index, w = divmod(index, 2**mk)
        words.append(w)
    return tuple(reversed(words))


def encode_strategy(words: Sequence[int], m: Sequence[int]) -> int:
    index = 0
    for w, mk in zip(words, m):
        index = index * 2**mk + int(w)
    return index


def deterministic_table(words: Sequence[int], m: Sequence[int]) -> np.ndarray:
    """D_lambda(a|s) as a table of shape (m..., 2...)."""
    n = len(m)
    table = np.ones(())
    for w, mk in zip(words, m):
        local = np.zeros((mk, 2))
        for s in range(mk):
            local[s, (w >> s) & 1] = 1.0
        table = np.multiply.outer(table, local)
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return table.transpose(order)


def strategy_values(coeffs: np.ndarray, m: Sequence[int]) -> np.ndarray:
    """``coeffs . column(lambda)`` for every strategy, by party-wise contraction.

    ``coeffs`` has shape (m_1+1, ..., m_n+1); the result has shape
    (2**m_1, ..., 2**m_n) and flattens in the column order of ``strategy_matrix``.
    """
    out = np.asarray(coeffs, dtype=float)
    for mk in m:
        out = np.tensordot(out, party_columns(mk), axes=([0], [0]))
    return out


# -- certificates ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Certificate:
    """Bell functional ``sum_{a,s} B(a,s) P(a|s) <= lhv_bound`` for all local behaviors."""

    coefficients: np.ndarray  # shape (m..., 2...)
    lhv_bound: float
    quantum_value: float

    def value(self, b: Behavior) -> float:
        return float(np.sum(self.coefficients * b.table))

    def to_dict(self, atol: float = 1e-12) -> dict:
        coeffs = []
        c = self.coefficients
        n = c.ndim // 2
        for idx in zip(*np.nonzero(np.abs(c) > atol)):
            s, a = idx[:n], idx[n:]
            coeffs.append([[int(x) for x in s], [1 - 2 * int(x) for x in a], float(c[idx])])
        return {"coefficients": coeffs, "lhv_bound": self.lhv_bound, "quantum_value": self.quantum_value}

    def correlator_form(self) -> np.ndarray:
        """Coefficients on correlator coordinates, shape (m_k + 1)..."""
        m = self.coefficients.shape[: self.coefficients.ndim // 2]
        return table_functional_to_correlators(self.coefficients, m)


def _correlator_functional_to_table(g: np.ndarray, m: Sequence[int]) -> np.ndarray:
    """B(a,s) with sum B P = g . T(P) on no-signaling P; g[0,...,0] is dropped."""
    n = len(m)
    g = np.array(g, dtype=float)
    g[(0,) * n] = 0.0
    out = g
    for mk in m:
        # party map: c=0 -> spread 1/m_k over settings with +1 for both outcomes;
        # c=j -> setting j-1 with outcome sign
        R = np.zeros((mk + 1, mk, 2))
        R[0] = 1.0 / mk
        for s in range(mk):
            R[s + 1, s] = (1.0, -1.0)
        out = np.tensordot(out, R, axes=([0], [0]))
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return out.transpose(order)


def lhv_bound(B: np.ndarray, m: Sequence[int]) -> float:
    """Max of sum B D_lambda over all deterministic strategies, by contraction."""
    return float(np.max(strategy_values(table_functional_to_correlators(B, m), m)))


def table_functional_to_correlators(B: np.ndarray, m: Sequence[int]) -> np.ndarray:
    """Coefficients G on correlator coordinates with G . T(P) = sum B P.

    For a deterministic strategy D(a|s) = prod_k [a_k = o_k(s_k)] and
    [a = o] = (1 + a o)/2, so sum B D expands into products of the local
    columns (1, o(s)), giving G . column(lambda) = sum B D_lambda exactly.  Local
    behaviors span the no-signaling affine space, so the identity extends to
    every no-signaling P.
    """
    n = len(m)
    out = np.asarray(B, dtype=float)
    order = [ax for k in range(n) for ax in (k, n + k)]
    out = out.transpose(order)
    for mk in m:
        F = np.zeros((mk, 2, mk + 1))
        for s in range(mk):
            F[s, :, 0] = 0.5
            F[s, 0, s + 1] = 0.5
            F[s, 1, s + 1] = -0.5
        out = np.tensordot(out, F, axes=([0, 1], [0, 1]))
    return out


def check_certificate(
    cert: Certificate | None,
    b: Behavior,
    tol: float = DEFAULT_TOL,
    max_strategies: int | None = None,
    seed: int = 0,
) -> bool:
    """Verify the certificate separates ``b`` from every local deterministic strategy.

    All strategies are enumerated unless ``max_strategies`` is smaller than
    their number, in which case that many are sampled (seeded).
    """
    if cert is None:
        return False
    m = b.scenario.m
    B = np.asarray(cert.coefficients, dtype=float)
    if B.shape != b.table.shape or not np.any(np.abs(B) > 0):
        return False
    quantum = float(np.sum(B * b.table))
    G = table_functional_to_correlators(B, m)
    total = strategy_count(m)
    if max_strategies is None or total <= max_strategies:
        best = float(np.max(strategy_values(G, m)))
    else:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, total, size=max_strategies)
        cols = np.stack([_column(decode_strategy(int(i), m), m) for i in idx], axis=1)
        best = float(np.max(G.ravel() @ cols))
    return quantum > cert.lhv_bound + tol and best <= cert.lhv_bound + tol


def _column(words: Sequence[int], m: Sequence[int]) -> np.ndarray:
    out = np.ones(1)
    for w, mk in zip(words, m):
        out = np.kron(out, party_columns(mk)[:, w])
    return out


# -- LP ------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LPResult:
    visibility: float
    feasible_at_one: bool
    certificate: Certificate | None
    weights: np.ndarray = field(repr=False)  # q over strategy columns at v*
    columns: np.ndarray = field(repr=False)  # strategy indices the weights refer to
    solver_stats: dict = field(default_factory=dict)
    m: tuple = ()

    def local_model(self, b: Behavior) -> np.ndarray:
        """Strategy weights reproducing ``b`` itself (dense over all strategies).

        Valid when v* >= 1: the optimal mixture reproduces v* P + (1 - v*) noise,
        and noise is the uniform mixture of all strategies, so
        P = q*/v* + (1 - 1/v*) uniform.  For v* slightly below one the optimal q
        is returned as is.
        """
        total = strategy_count(self.m)
        q = np.zeros(total)
        np.add.at(q, self.columns, self.weights)
        v = self.visibility
        if v >= 1.0:
            q = q / v + (1.0 - 1.0 / v) / total
        return q

    def to_dict(self) -> dict:
        return {
            "visibility": self.visibility,
            "feasible_at_one": self.feasible_at_one,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "solver_stats": self.solver_stats,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _lp_arrays(d: np.ndarray, A: np.ndarray, v_max: float):
    """Standard-form data over columns [strategies..., v, slack]; ``d`` is the behavior's column."""
    rows, ncols = A.shape
    d = np.array(d, dtype=float)
    d[0] = 0.0
    top = np.hstack([A, -d[:, None], np.zeros((rows, 1))])
    cap_row = np.zeros(ncols + 2)
    cap_row[ncols] = cap_row[ncols + 1] = 1.0
    Aeq = np.vstack([top, cap_row])
    b = np.zeros(rows + 1)
    b[0] = 1.0
    b[-1] = v_max
    c = np.zeros(ncols + 2)
    c[ncols] = -1.0
    return Aeq, b, c


def _solve(d, A, v_max, basis=None, pricer=None) -> LPSolution:
    Aeq, b, c = _lp_arrays(d, A, v_max)
    sol = solve_standard_form(Aeq, b, c, basis=basis, pricer=pricer)
    if not sol.ok:
        raise SolverNumericalFailure(f"simplex ended with status {sol.status}", sol.status)
    return sol


def _local_basis(mk: int) -> list[int]:
    """m_k + 1 local strategies with independent columns, starting with all +1 and all -1."""
    U = party_columns(mk)
    chosen = [0, 2**mk - 1] if mk >= 1 else [0]
    for j in range(2**mk):
        if len(chosen) == mk + 1:
            break
        if j not in chosen and np.linalg.matrix_rank(U[:, chosen + [j]]) == len(chosen) + 1:
            chosen.append(j)
    return chosen


@functools.lru_cache(maxsize=32)
def start_basis(m: tuple) -> np.ndarray:
    """Feasible basis at v = 0 for the full program.

    The Kronecker product of nonsingular local blocks is nonsingular, and the
    block of each party contains both constant strategies, whose mixture hits
    (1, 0, ..., 0).  Hence e_0 has a nonnegative representation and, with the
    slack at v_max, the basis is feasible for every behavior.
    """
    cols = [encode_strategy(w, m) for w in itertools.product(*[_local_basis(mk) for mk in m])]
    out = np.array(cols + [strategy_count(m) + 1], dtype=np.int64)
    out.setflags(write=False)
    return out


def _kron_pricer(m: Sequence[int], d: np.ndarray):
    """``y @ Aeq`` for the full program without forming the strategy block product."""
    shape = [mk + 1 for mk in m]

    def pricer(y):
        top = y[:-1]
        values = strategy_values(top.reshape(shape), m).ravel()
        return np.concatenate([values, [y[-1] - top @ d, y[-1]]])

    return pricer


def _build_result(
    b: Behavior, v: float, duals: np.ndarray, weights: np.ndarray, columns: np.ndarray, tol: float, stats: dict
) -> LPResult:
    m = b.scenario.m
    v = float(min(max(v, 0.0), V_MAX))
    cert = None
    if v < 1.0:
        # row multipliers g on correlator coordinates: g.T(lambda) <= v* and g.T(P) >= 1
        g = duals[:-1].reshape([mk + 1 for mk in m])
        B = _correlator_functional_to_table(g, m)
        scale = np.max(np.abs(B))
        if scale > 0:
            B = B / scale
            B[np.abs(B) < 1e-12] = 0.0
            cert = Certificate(B, lhv_bound(B, m), float(np.sum(B * b.table)))
    return LPResult(
        visibility=v,
        feasible_at_one=v >= 1.0 - tol,
        certificate=cert,
        weights=weights,
        columns=columns,
        solver_stats=stats,
        m=tuple(m),
    )


def lp_membership(
    b: Behavior,
    tol: float = DEFAULT_TOL,
    *,
    column_cap: int = COLUMN_CAP,
    v_max: float = V_MAX,
    column_generation: bool = False,
) -> LPResult:
    """Critical visibility of ``b`` against white noise, with a Bell certificate when v* < 1.

    With ``column_generation=True`` the strategy columns are priced on demand
    and ``column_cap`` is not enforced.
    """
    m = b.scenario.m
    T = b.correlator_tensor()
    if column_generation:
        return _lp_column_generation(b, T, tol, v_max)
    total = strategy_count(m)
    if total > column_cap:
        raise ColumnCapExceeded(
            f"{total} deterministic strategies exceeds the column cap {column_cap}; "
            "use fewer settings or column generation"
        )
    A = strategy_matrix(m)
    d = T.ravel().copy()
    d[0] = 0.0
    sol = _solve(d, A, v_max, basis=start_basis(tuple(m)), pricer=_kron_pricer(m, d))
    ncols = A.shape[1]
    v = sol.x[ncols]
    weights = sol.x[:ncols]
    support = np.flatnonzero(weights > 0)
    stats = {"iterations": sol.iterations, "phase1_iterations": sol.phase1_iterations,
             "status": sol.status, "columns": ncols}
    return _build_result(b, v, sol.duals, weights[support], support, tol, stats)


# -- permutation-symmetric reduction ------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetricLP:
    """Orbit form of the program for n parties sharing the same m settings.

    Rows are multisets of correlator indices, columns multisets of local
    strategies; ``A[R, O]`` averages the full entries over permutations.  For a
    permutation-invariant behavior, symmetrizing any feasible mixture keeps it
    feasible, so the reduced program has the same optimum.
    """

    n: int
    mk: int
    rows: np.ndarray  # (R, n) sorted correlator index tuples
    orbits: np.ndarray  # (O, n) sorted local strategy tuples
    A: np.ndarray = field(repr=False)
    row_sizes: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)


def _multiset_size(t: Sequence[int]) -> int:
    out = math.factorial(len(t))
    for c in np.unique(t, return_counts=True)[1]:
        out //= math.factorial(int(c))
    return out


@functools.lru_cache(maxsize=8)
def symmetric_lp(n: int, mk: int) -> SymmetricLP:
    U = party_columns(mk)
    rows = np.array(list(itertools.combinations_with_replacement(range(mk + 1), n)), dtype=np.int64)
    orbits = np.array(list(itertools.combinations_with_replacement(range(2**mk), n)), dtype=np.int64)
    if rows.shape[0] * orbits.shape[0] > 50_000_000:
        raise ColumnCapExceeded(f"symmetric program for n={n}, m={mk} is too large")
    A = np.zeros((rows.shape[0], orbits.shape[0]))
    perms = list(itertools.permutations(range(n)))
    for perm in perms:
        prod = np.ones_like(A)
        for k in range(n):
            prod *= U[rows[:, k]][:, orbits[:, perm[k]]]
        A += prod
    A /= len(perms)
    sizes = np.array([_multiset_size(r) for r in rows])
    # a vertex of {A q = e0, q >= 0} plus the slack is feasible for every behavior
    e0 = np.zeros(rows.shape[0])
    e0[0] = 1.0
    cost = np.random.default_rng(0).uniform(1.0, 2.0, orbits.shape[0])
    sol = solve_standard_form(A, e0, cost)
    if not sol.ok or np.any(sol.basis >= orbits.shape[0]):
        raise SolverNumericalFailure("no symmetric start basis", sol.status)
    basis = np.concatenate([sol.basis, [orbits.shape[0] + 1]])
    for arr in (rows, orbits, A, sizes, basis):
        arr.setflags(write=False)
    return SymmetricLP(n, mk, rows, orbits, A, sizes, basis)


def is_symmetric_behavior(b: Behavior, tol: float = SYMMETRY_TOL) -> bool:
    """Same settings for every party and a correlator tensor invariant under party swaps."""
    sc = b.scenario
    first = sc.settings[0]
    if any(s.shape != first.shape or np.max(np.abs(s - first)) > 1e-12 for s in sc.settings):
        return False
    T = b.correlator_tensor()
    for k in range(b.n - 1):
        if np.max(np.abs(T - np.swapaxes(T, k, k + 1))) > tol:
            return False
    return True


def _symmetric_solve(T: np.ndarray, data: SymmetricLP, v_max: float = V_MAX) -> LPSolution:
    d = T[tuple(data.rows.T)]
    return _solve(d, data.A, v_max, basis=data.basis)


def symmetric_visibility(T: np.ndarray, data: SymmetricLP, v_max: float = V_MAX) -> float:
    """v* of a permutation-invariant correlator tensor; the inner loop of the settings search."""
    sol = _symmetric_solve(T, data, v_max)
    return float(min(max(sol.x[data.orbits.shape[0]], 0.0), v_max))


def lp_membership_symmetric(b: Behavior, tol: float = DEFAULT_TOL, *, v_max: float = V_MAX) -> LPResult:
    """``lp_membership`` through the orbit program; weights and certificate are lifted back.

    A row multiplier ``y_R`` lifts to ``g[c] = y_R / |R|`` on each member ``c``
    of the row orbit, which is dual feasible for the full program with the same
    value; orbit weights are spread evenly over their strategies.
    """
    if not is_symmetric_behavior(b):
        raise InvalidState("behavior is not invariant under permutations of the parties")
    m = b.scenario.m
    data = symmetric_lp(b.n, m[0])
    T = b.correlator_tensor()
    sol = _symmetric_solve(T, data, v_max)
    nor = data.orbits.shape[0]
    y = sol.duals[:-1] / data.row_sizes
    g = np.zeros([mk + 1 for mk in m])
    for r, val in zip(data.rows, y):
        for c in set(itertools.permutations(r)):
            g[c] = val
    duals = np.concatenate([g.ravel(), sol.duals[-1:]])
    cols, weights = [], []
    for o, q in zip(data.orbits, sol.x[:nor]):
        if q <= 0:
            continue
        members = sorted(set(itertools.permutations(o)))
        cols.extend(encode_strategy(w, m) for w in members)
        weights.extend([q / len(members)] * len(members))
    stats = {"iterations": sol.iterations, "phase1_iterations": sol.phase1_iterations,
             "status": sol.status, "columns": nor, "mode": "symmetric"}
    return _build_result(b, sol.x[nor], duals, np.array(weights), np.array(cols, dtype=np.int64), tol, stats)


def _noise_orbit(m: Sequence[int]) -> np.ndarray:
    """Strategy 0 and all its per-party global outcome flips; their uniform mix is white noise."""
    cols = []
    for flips in itertools.product((0, 1), repeat=len(m)):
        cols.append(encode_strategy([(2**mk - 1) * f for f, mk in zip(flips, m)], m))
    return np.array(sorted(set(cols)), dtype=np.int64)


def _lp_column_generation(b: Behavior, T: np.ndarray, tol: float, v_max: float,
                          batch: int = 64, max_rounds: int = 500) -> LPResult:
    m = b.scenario.m
    active = _noise_orbit(m)
    rows = int(np.prod([mk + 1 for mk in m]))
    basis = None
    iterations = 0
    for rnd in range(max_rounds):
        A = np.stack([_column(decode_strategy(int(i), m), m) for i in active], axis=1)
        sol = _solve(T.ravel(), A, v_max, basis=basis)
        iterations += sol.iterations
        g = sol.duals[:-1].reshape([mk + 1 for mk in m])
        # reduced cost of strategy l is -g.column(l); price all of them by contraction
        prices = strategy_values(g, m).ravel()
        prices[active] = -np.inf
        order = np.argsort(-prices, kind="stable")[:batch]
        new = order[prices[order] > 1e-9]
        if new.size == 0:
            ncols = len(active)
            v = sol.x[ncols]
            weights = sol.x[:ncols]
            keep = weights > 0
            stats = {"iterations": iterations, "status": sol.status, "columns": ncols,
                     "rounds": rnd + 1, "mode": "column_generation"}
            return _build_result(b, v, sol.duals, weights[keep], active[keep], tol, stats)
        # keep the old basis valid: new columns go after the strategy block
        ncols = len(active)
        active = np.concatenate([active, new])
        shift = np.where(sol.basis >= ncols, sol.basis + len(new), sol.basis)
        basis = shift if np.all(sol.basis < ncols + 2) else None
    raise SolverNumericalFailure("column generation did not converge", "iteration_limit")
