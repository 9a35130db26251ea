"""Measurement scenarios and the probability tables (behaviors) they produce.

Outcome convention: outcome index 0 is the +1 eigenvalue of ``n.sigma`` and
index 1 the -1 eigenvalue.  A behavior table has shape
``(m_1, ..., m_n, 2, ..., 2)``: setting indices first, outcome indices after.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, InvalidDirection, InvalidState
from ..qstate import I2, SIGMA_X, SIGMA_Y, SIGMA_Z, State, as_low_rank

DIRECTION_TOL = 1e-10
ROW_SUM_TOL = 1e-10
PROB_TOL = 1e-12
NO_SIGNALING_TOL = 1e-9


def bloch_from_angles(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


@dataclass(frozen=True, eq=False)
class Scenario:
    """Per-party lists of projective qubit measurements given as unit Bloch vectors."""

    n: int
    settings: tuple

    def __post_init__(self):
        parties = []
        for k, dirs in enumerate(self.settings):
            arr = np.array(dirs, dtype=float).reshape(-1, 3)
            if arr.shape[0] < 1:
                raise InvalidDirection(f"party {k} has no settings")
            norms = np.linalg.norm(arr, axis=1)
            if np.any(np.abs(norms - 1.0) > DIRECTION_TOL):
                raise InvalidDirection(f"party {k} has a non-unit Bloch vector (norms {norms})")
            arr.setflags(write=False)
            parties.append(arr)
        if len(parties) != self.n:
            raise DimensionMismatch(f"{len(parties)} parties listed for n={self.n}")
        object.__setattr__(self, "settings", tuple(parties))

    @property
    def m(self) -> tuple:
        return tuple(a.shape[0] for a in self.settings)

    @classmethod
    def from_angles(cls, m: Sequence[int], angles: np.ndarray) -> "Scenario":
        """Build from a flat vector of (theta, phi) pairs, party by party."""
        angles = np.asarray(angles, dtype=float).reshape(-1, 2)
        if angles.shape[0] != sum(m):
            raise DimensionMismatch(f"{angles.shape[0]} angle pairs for settings {tuple(m)}")
        out, pos = [], 0
        for mk in m:
            out.append([bloch_from_angles(t, p) for t, p in angles[pos:pos + mk]])
            pos += mk
        return cls(len(m), tuple(out))

    def to_angles(self) -> np.ndarray:
        pairs = []
        for arr in self.settings:
            for x, y, z in arr:
                pairs.append((np.arccos(np.clip(z, -1, 1)), np.arctan2(y, x)))
        return np.array(pairs).ravel()

    @classmethod
    def random(cls, m: Sequence[int], rng: np.random.Generator) -> "Scenario":
        """Directions uniform on the sphere."""
        parties = []
        for mk in m:
            v = rng.standard_normal((mk, 3))
            parties.append(v / np.linalg.norm(v, axis=1, keepdims=True))
        return cls(len(m), tuple(parties))

    @classmethod
    def uniform(cls, n: int, directions: Sequence) -> "Scenario":
        """Every party measures the same list of directions."""
        return cls(n, tuple([list(directions)] * n))

    def to_dict(self) -> dict:
        return {"n": self.n, "settings": [a.tolist() for a in self.settings]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        try:
            return cls(int(doc["n"]), tuple(doc["settings"]))
        except (KeyError, TypeError) as exc:
            raise InvalidDirection(f"malformed scenario document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def _projector_stack(dirs: np.ndarray) -> np.ndarray:
    """Array (m, 2, 2, 2): [setting, outcome] -> (I + a n.sigma)/2."""
    ops = np.einsum("si,ijk->sjk", dirs, np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z]))
    plus = 0.5 * (I2[None] + ops)
    minus = 0.5 * (I2[None] - ops)
    return np.stack([plus, minus], axis=1)


@dataclass(frozen=True, eq=False)
class Behavior:
    scenario: Scenario
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        expected = self.scenario.m + (2,) * self.scenario.n
        if t.shape != expected:
            raise DimensionMismatch(f"table shape {t.shape}, expected {expected}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n(self) -> int:
        return self.scenario.n

    def rows(self) -> np.ndarray:
        """Table reshaped to (settings tuples, outcome tuples)."""
        return self.table.reshape(int(np.prod(self.scenario.m)), 2**self.n)

    def validate(self) -> None:
        rows = self.rows()
        if rows.min() < -PROB_TOL or rows.max() > 1 + PROB_TOL:
            raise InvalidState("probability outside [0, 1]")
        if np.max(np.abs(rows.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise InvalidState("a setting row does not sum to one")
        if no_signaling_violation(self) > NO_SIGNALING_TOL:
            raise InvalidState("behavior is signaling")

    def correlator_tensor(self) -> np.ndarray:
        """Full-rank coordinates of the behavior, shape ``(m_1+1, ..., m_n+1)``.

        Index 0 on party k means "k not included"; index j >= 1 means k measured
        setting j-1 and contributes its +-1 outcome.  Entry [0,...,0] is 1.  For a
        party that is left out, the marginal is averaged over its settings, which
        is exact for a no-signaling table.
        """
        return to_correlators(self.table, self.scenario.m)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.n
        w.writerow([f"s{k + 1}" for k in range(n)] + [f"a{k + 1}" for k in range(n)] + ["p"])
        for s in itertools.product(*[range(mk) for mk in self.scenario.m]):
            for a in itertools.product((0, 1), repeat=n):
                w.writerow(list(s) + [1 - 2 * ai for ai in a] + [repr(float(self.table[s + a]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, scenario: Scenario, text: str) -> "Behavior":
        table = np.full(scenario.m + (2,) * scenario.n, np.nan)
        reader = csv.reader(io.StringIO(text))
        next(reader)
        n = scenario.n
        for row in reader:
            s = tuple(int(v) for v in row[:n])
            a = tuple((1 - int(v)) // 2 for v in row[n:2 * n])
            table[s + a] = float(row[2 * n])
        if np.isnan(table).any():
            raise InvalidState("behavior CSV is missing rows")
        return cls(scenario, table)


def _party_maps(m: Sequence[int]) -> list[np.ndarray]:
    """Per-party linear maps from (setting, outcome) to correlator coordinates."""
    maps = []
    for mk in m:
        L = np.zeros((mk + 1, mk, 2))
        L[0] = 1.0 / mk
        for s in range(mk):
            L[s + 1, s] = (1.0, -1.0)
        maps.append(L)
    return maps


def to_correlators(table: np.ndarray, m: Sequence[int]) -> np.ndarray:
    n = len(m)
    out = np.asarray(table, dtype=float)
    # interleave (s_k, a_k) pairs so each party's map contracts two adjacent axes
    order = [ax for k in range(n) for ax in (k, n + k)]
    out = out.transpose(order)
    for L in _party_maps(m):
        # contract the leading (s, a) pair and append the new axis at the end
        out = np.tensordot(L, out, axes=([1, 2], [0, 1]))
        out = np.moveaxis(out, 0, -1)
    return out


def no_signaling_violation(b: Behavior) -> float:
    """Largest change of any subset marginal under a change of the other parties' settings."""
    n = b.n
    worst = 0.0
    t = b.table
    for r in range(1, n):
        for subset in itertools.combinations(range(n), r):
            others = [k for k in range(n) if k not in subset]
            marg = t.sum(axis=tuple(n + k for k in others))
            # marg axes: all n setting axes then outcome axes of subset
            spread = marg.max(axis=tuple(others)) - marg.min(axis=tuple(others))
            worst = max(worst, float(spread.max()))
    return worst


def _einsum_spec(n: int) -> str:
    letters = string.ascii_letters
    if 3 * n > len(letters):
        raise DimensionMismatch(f"behavior construction supports at most {len(letters) // 3} parties")
    outs, bras, kets = letters[:n], letters[n:2 * n], letters[2 * n:3 * n]
    ops = ",".join(f"{outs[k]}{bras[k]}{kets[k]}" for k in range(n))
    return f"{bras},{ops},{kets}->{outs}"


def behavior(state: State, scenario: Scenario) -> Behavior:
    """P(a|s) = Tr(rho (x)_k (I + a_k n_{k,s_k}.sigma)/2) from the rank decomposition."""
    state = as_low_rank(state)
    if scenario.n != state.n:
        raise DimensionMismatch(f"scenario for {scenario.n} parties, state on {state.n} qubits")
    n = state.n
    stacks = [_projector_stack(d).reshape(-1, 2, 2) for d in scenario.settings]
    spec = _einsum_spec(n)
    total = np.zeros([2 * mk for mk in scenario.m], dtype=complex)
    for w, v in state.terms:
        t = v.tensor()
        total += w * np.einsum(spec, t.conj(), *stacks, t, optimize=True)
    probs = total.real.reshape([x for mk in scenario.m for x in (mk, 2)])
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    b = Behavior(scenario, probs.transpose(order))
    b.validate()
    return b


def white_noise(scenario: Scenario) -> Behavior:
    return Behavior(scenario, np.full(scenario.m + (2,) * scenario.n, 2.0**-scenario.n))


def mix_with_noise(b: Behavior, visibility: float) -> Behavior:
    return Behavior(b.scenario, visibility * b.table + (1 - visibility) * 2.0**-b.n)
