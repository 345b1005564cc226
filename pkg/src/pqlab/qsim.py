"""Exact state-vector simulation of the learner's states and measurements.

States live on a register-labelled basis instead of a qubit array:

* ``"jxi"``: triples ``(j, x, i)`` with ``j`` in 1..N-1, ``x`` in Z_N, ``i`` in {0, 1}
* ``"jx"``:  pairs ``(j, x)``
* ``"z"``:   a single Z_N register

Every measurement is available both as a full list of branches (exact
probabilities and post-measurement states) and as a single sampled outcome.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import sqrt
from typing import Hashable

import numpy as np

from .concepts import Concept
from .modmath import Matching

NORM_TOL = 1e-9
ZERO_PROB = 1e-12
_SQRT1_2 = 1 / sqrt(2)

_SHAPES = {
    "jxi": lambda n: (n - 1, n, 2),
    "jx": lambda n: (n - 1, n),
    "z": lambda n: (n,),
}


class MeasurementError(RuntimeError):
    """A measurement produced an outcome the algorithm rules out."""


@dataclass(frozen=True, eq=False)
class StateVector:
    kind: str
    modulus: int
    amps: np.ndarray

    def __post_init__(self):
        if self.kind not in _SHAPES:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.amps.shape != _SHAPES[self.kind](self.modulus):
            raise ValueError(f"amplitude shape {self.amps.shape} does not fit kind {self.kind!r}")
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (norm {self.norm():.12g})")
        self.amps.setflags(write=False)

    @classmethod
    def normalised(cls, kind: str, n: int, amps: np.ndarray) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        return cls(kind, n, amps / np.linalg.norm(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def label(self, index: tuple[int, ...]) -> tuple[int, ...]:
        if self.kind == "z":
            return index
        j, *rest = index
        return (j + 1, *rest)

    def index(self, label: tuple[int, ...]) -> tuple[int, ...]:
        if self.kind == "z":
            return tuple(label)
        j, *rest = label
        return (j - 1, *rest)

    def amplitude(self, *label: int) -> complex:
        return complex(self.amps[self.index(label)])

    def support(self, tol: float = NORM_TOL) -> list[tuple[int, ...]]:
        idx = np.argwhere(np.abs(self.amps) > tol)
        return [self.label(tuple(int(v) for v in row)) for row in idx]

    def to_json(self) -> str:
        """Debug dump: list of ``[label, re, im]`` over the nonzero amplitudes."""
        rows = []
        for label in self.support(tol=0.0):
            a = self.amplitude(*label)
            rows.append([list(label), a.real, a.imag])
        return json.dumps({"kind": self.kind, "N": self.modulus, "amplitudes": rows})


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    label: Hashable
    probability: float
    post_state: StateVector


def phase_aligned(s: StateVector) -> np.ndarray:
    """Amplitudes rotated so the first nonzero one is real and positive."""
    flat = s.amps.ravel()
    nz = np.flatnonzero(np.abs(flat) > NORM_TOL)
    if nz.size == 0:
        return flat.copy()
    lead = flat[nz[0]]
    return flat * (abs(lead) / lead)


def equal_up_to_phase(a: StateVector, b: StateVector, tol: float = NORM_TOL) -> bool:
    if a.kind != b.kind or a.modulus != b.modulus:
        return False
    return bool(np.max(np.abs(phase_aligned(a) - phase_aligned(b))) <= tol)


def sample_index(probs, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, len(cdf) - 1)


# -- state preparation -------------------------------------------------------

def _parity_table(c: Concept) -> np.ndarray:
    """``table[j-1, x] = C[x] ^ C[x+j]``."""
    n = c.modulus
    bits = np.array(c.bits, dtype=np.int8)
    x = np.arange(n)
    return np.stack([bits ^ bits[(x + j) % n] for j in range(1, n)])


@lru_cache(maxsize=4096)
def prepare_example(c: Concept) -> StateVector:
    n = c.modulus
    par = _parity_table(c)
    amps = np.zeros((n - 1, n, 2), dtype=complex)
    jj, xx = np.indices(par.shape)
    amps[jj, xx, par] = 1 / sqrt((n - 1) * n)
    return StateVector("jxi", n, amps)


@lru_cache(maxsize=4096)
def prepare_phase_example(c: Concept) -> StateVector:
    n = c.modulus
    amps = (1 - 2 * _parity_table(c)).astype(complex) / sqrt((n - 1) * n)
    return StateVector("jx", n, amps)


# -- the +/- measurement on the answer-bit register -------------------------

def _pm_projections(s: StateVector) -> dict[str, np.ndarray]:
    if s.kind != "jxi":
        raise ValueError("the +/- measurement needs a state with an answer-bit register")
    a0, a1 = s.amps[..., 0], s.amps[..., 1]
    return {"+": (a0 + a1) * _SQRT1_2, "-": (a0 - a1) * _SQRT1_2}


def pm_branches(s: StateVector) -> list[MeasurementOutcome]:
    out = []
    for sign, comp in _pm_projections(s).items():
        p = float(np.vdot(comp, comp).real)
        if p > ZERO_PROB:
            out.append(MeasurementOutcome(sign, p, StateVector.normalised("jx", s.modulus, comp)))
    return out


def measure_pm_basis(s: StateVector, rng: np.random.Generator) -> MeasurementOutcome:
    proj = _pm_projections(s)
    signs = list(proj)
    probs = [float(np.vdot(proj[sign], proj[sign]).real) for sign in signs]
    k = sample_index(probs, rng)
    return MeasurementOutcome(signs[k], probs[k], StateVector.normalised("jx", s.modulus, proj[signs[k]]))


# -- computational-basis measurement of the x register ----------------------

def _x_axis(s: StateVector) -> int:
    if s.kind not in ("jxi", "jx"):
        raise ValueError("state has no x register")
    return 1


def x_probabilities(s: StateVector) -> np.ndarray:
    axis = _x_axis(s)
    w = np.abs(s.amps) ** 2
    other = tuple(a for a in range(w.ndim) if a != axis)
    return w.sum(axis=other)


def _project_x(s: StateVector, x0: int) -> StateVector:
    amps = np.zeros_like(s.amps)
    amps[:, x0] = s.amps[:, x0]
    return StateVector.normalised(s.kind, s.modulus, amps)


def x_branches(s: StateVector) -> list[MeasurementOutcome]:
    probs = x_probabilities(s)
    return [
        MeasurementOutcome(x0, float(p), _project_x(s, x0))
        for x0, p in enumerate(probs)
        if p > ZERO_PROB
    ]


def measure_computational(
    s: StateVector, rng: np.random.Generator, register: str = "x"
) -> MeasurementOutcome:
    if register != "x":
        raise ValueError(f"only the x register can be measured, got {register!r}")
    probs = x_probabilities(s)
    x0 = sample_index(probs, rng)
    return MeasurementOutcome(x0, float(probs[x0]), _project_x(s, x0))


# -- relabelling and the matching measurement --------------------------------

def shift_transform(s: StateVector, x0: int) -> StateVector:
    """Map ``|j, x0>`` to ``|x0 + j>`` on a single Z_N register."""
    if s.kind != "jx":
        raise ValueError("shift expects a (j, x) state")
    n = s.modulus
    x0 %= n
    rest = np.delete(s.amps, x0, axis=1)
    if rest.size and np.max(np.abs(rest)) > NORM_TOL:
        raise ValueError(f"state is not supported on x = {x0} alone")
    out = np.zeros(n, dtype=complex)
    out[(np.arange(1, n) + x0) % n] = s.amps[:, x0]
    return StateVector("z", n, out)


COMPLETION = "completion"


def _check_matching_state(s: StateVector, m: Matching) -> None:
    if s.kind != "z":
        raise ValueError("matching measurement expects a single-register state")
    if m.modulus != s.modulus:
        raise ValueError("matching and state have different moduli")


def matching_probabilities(s: StateVector, m: Matching) -> tuple[list[float], float]:
    """Per-edge probabilities and the probability of the ``|x0><x0|`` completion."""
    _check_matching_state(s, m)
    w = np.abs(s.amps) ** 2
    return [float(w[a] + w[b]) for a, b in m.edges], float(w[m.excluded])


def _project_edge(s: StateVector, edge: tuple[int, int]) -> StateVector:
    amps = np.zeros_like(s.amps)
    amps[list(edge)] = s.amps[list(edge)]
    return StateVector.normalised("z", s.modulus, amps)


def matching_branches(s: StateVector, m: Matching) -> list[MeasurementOutcome]:
    edge_p, p_done = matching_probabilities(s, m)
    out = [
        MeasurementOutcome(e, p, _project_edge(s, e))
        for e, p in zip(m.edges, edge_p)
        if p > ZERO_PROB
    ]
    if p_done > ZERO_PROB:
        amps = np.zeros_like(s.amps)
        amps[m.excluded] = 1.0
        out.append(MeasurementOutcome(COMPLETION, p_done, StateVector("z", s.modulus, amps)))
    return out


def measure_matching(s: StateVector, m: Matching, rng: np.random.Generator) -> MeasurementOutcome:
    edge_p, p_done = matching_probabilities(s, m)
    k = sample_index(edge_p + [p_done], rng)
    if k == len(m.edges):
        raise MeasurementError(f"completion outcome |{m.excluded}> occurred")
    e = m.edges[k]
    return MeasurementOutcome(e, edge_p[k], _project_edge(s, e))


def distinguish_parity(post: StateVector, edge: tuple[int, int]) -> int:
    """0 for ``|a> + |b>``, 1 for ``|a> - |b>`` (up to global phase)."""
    a, b = edge
    if post.kind != "z":
        raise ValueError("parity discrimination expects a single-register state")
    rest = np.delete(post.amps, [a, b])
    if rest.size and np.max(np.abs(rest)) > NORM_TOL:
        raise MeasurementError("post-measurement state leaks outside the edge")
    va, vb = post.amps[a], post.amps[b]
    if abs(abs(va + vb) * _SQRT1_2 - 1) <= NORM_TOL:
        return 0
    if abs(abs(va - vb) * _SQRT1_2 - 1) <= NORM_TOL:
        return 1
    raise MeasurementError(f"state on edge {edge} is neither |a>+|b> nor |a>-|b>")


def state_from_signs(n: int, x0: int, bits) -> StateVector:
    """``sum_{k != x0} (-1)^{bits[k]} |k>``: the residue the learner should hold."""
    amps = np.array([(-1) ** bits[k] for k in range(n)], dtype=complex)
    amps[x0] = 0
    return StateVector.normalised("z", n, amps)


def branch_total(branches: list[MeasurementOutcome]) -> float:
    return float(sum(b.probability for b in branches))

