"""One-way communication: information measures, the quantum-to-classical
conversion for single-input relational problems, the single-input
transformation of two-sided problems, and brute-force distributional costs.

A quantum protocol enters only through its answer family: the prior over
Alice's inputs and, for each input, the distribution of Bob's answer.
Logarithms are base 2 throughout.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

from .concepts import all_concepts
from .errors import CapExceeded
from .modmath import check_odd_prime

NORM_TOL = 1e-9
DEFAULT_SAMPLE_CAP = 2**20
DEFAULT_TUPLE_CAP = 4096


def _check_prob_vector(p: np.ndarray, what: str) -> None:
    if np.any(p < -NORM_TOL):
        raise ValueError(f"{what} has negative entries")
    if abs(float(p.sum()) - 1.0) > NORM_TOL:
        raise ValueError(f"{what} sums to {float(p.sum()):.12g}, not 1")


@dataclass(frozen=True, eq=False)
class Distribution:
    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (len(self.support),):
            raise ValueError("one probability per support element is required")
        _check_prob_vector(probs, "distribution")
        object.__setattr__(self, "probs", np.clip(probs, 0.0, None))

    @classmethod
    def uniform(cls, support: Sequence) -> "Distribution":
        return cls(tuple(support), np.full(len(support), 1 / len(support)))

    @classmethod
    def point(cls, support: Sequence, z: Hashable) -> "Distribution":
        support = tuple(support)
        p = np.zeros(len(support))
        p[support.index(z)] = 1.0
        return cls(support, p)

    def prob(self, z: Hashable) -> float:
        try:
            return float(self.probs[self.support.index(z)])
        except ValueError:
            return 0.0


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def kl_divergence(p: Distribution, q: Distribution) -> float:
    universe = list(dict.fromkeys(p.support + q.support))
    pv = np.array([p.prob(z) for z in universe])
    qv = np.array([q.prob(z) for z in universe])
    return _kl(pv, qv)


def binary_entropy(e: float) -> float:
    if e <= 0.0 or e >= 1.0:
        return 0.0
    return -e * math.log2(e) - (1 - e) * math.log2(1 - e)


@dataclass(frozen=True, eq=False)
class AnswerFamily:
    """Prior over Alice's inputs plus Bob's answer distribution per input."""

    inputs: tuple
    answers: tuple
    prior: np.ndarray
    channel: np.ndarray

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=float)
        channel = np.asarray(self.channel, dtype=float)
        if prior.shape != (len(self.inputs),):
            raise ValueError("prior must have one entry per input")
        if channel.shape != (len(self.inputs), len(self.answers)):
            raise ValueError("channel must be |inputs| x |answers|")
        _check_prob_vector(prior, "prior")
        for i, row in enumerate(channel):
            _check_prob_vector(row, f"answer distribution of input {self.inputs[i]!r}")
        object.__setattr__(self, "prior", np.clip(prior, 0.0, None))
        object.__setattr__(self, "channel", np.clip(channel, 0.0, None))

    def marginal(self) -> np.ndarray:
        return self.prior @ self.channel

    def per_input(self, x: Hashable) -> Distribution:
        return Distribution(self.answers, self.channel[self.inputs.index(x)])

    def to_json(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "answers": list(self.answers),
            "prior": self.prior.tolist(),
            "channel": self.channel.tolist(),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "AnswerFamily":
        return cls(tuple(d["inputs"]), tuple(d["answers"]), np.array(d["prior"]), np.array(d["channel"]))


@dataclass(frozen=True, eq=False)
class SingleInputProblem:
    """Relation between Alice's input and Bob's answer; Bob has no input."""

    inputs: tuple
    answers: tuple
    relation: frozenset
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.shape != (len(self.inputs),):
            raise ValueError("mu must have one entry per input")
        _check_prob_vector(mu, "mu")
        object.__setattr__(self, "mu", mu)
        xs, zs = set(self.inputs), set(self.answers)
        for x, z in self.relation:
            if x not in xs or z not in zs:
                raise ValueError(f"relation pair {(x, z)!r} is outside inputs x answers")

    @cached_property
    def valid(self) -> np.ndarray:
        xi = {x: i for i, x in enumerate(self.inputs)}
        zi = {z: i for i, z in enumerate(self.answers)}
        out = np.zeros((len(self.inputs), len(self.answers)), dtype=bool)
        for x, z in self.relation:
            out[xi[x], zi[z]] = True
        return out

    def to_json(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "answers": [list(z) if isinstance(z, tuple) else z for z in self.answers],
            "relation": sorted([[i, j] for i, j in zip(*np.nonzero(self.valid))]),
            "mu": self.mu.tolist(),
        }


@dataclass(frozen=True, eq=False)
class TwoSidedProblem:
    xs: tuple
    ys: tuple
    zs: tuple
    relation: frozenset
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.shape != (len(self.xs), len(self.ys)):
            raise ValueError("mu must be |X| x |Y|")
        _check_prob_vector(mu.ravel(), "mu")
        object.__setattr__(self, "mu", mu)
        xs, ys, zs = set(self.xs), set(self.ys), set(self.zs)
        for x, y, z in self.relation:
            if x not in xs or y not in ys or z not in zs:
                raise ValueError(f"relation triple {(x, y, z)!r} is outside X x Y x Z")

    @cached_property
    def valid(self) -> np.ndarray:
        xi = {x: i for i, x in enumerate(self.xs)}
        yi = {y: i for i, y in enumerate(self.ys)}
        zi = {z: i for i, z in enumerate(self.zs)}
        out = np.zeros((len(self.xs), len(self.ys), len(self.zs)), dtype=bool)
        for x, y, z in self.relation:
            out[xi[x], yi[y], zi[z]] = True
        return out

    def to_json(self) -> dict:
        return {
            "X": list(self.xs),
            "Y": list(self.ys),
            "Z": list(self.zs),
            "relation": sorted([list(map(int, t)) for t in zip(*np.nonzero(self.valid))]),
            "mu": self.mu.tolist(),
        }


# -- information measures ----------------------------------------------------

def mutual_information(f: AnswerFamily) -> float:
    """``I(A;B) = E_x KL(mu_x^B || mu^B)``."""
    marg = f.marginal()
    return float(sum(p * _kl(row, marg) for p, row in zip(f.prior, f.channel) if p > 0))


def _check_match(f: AnswerFamily, p: SingleInputProblem) -> None:
    if tuple(f.inputs) != tuple(p.inputs) or tuple(f.answers) != tuple(p.answers):
        raise ValueError("answer family and problem disagree on inputs or answers")


def error_rates(f: AnswerFamily, p: SingleInputProblem) -> np.ndarray:
    """Per-input probability that the family answers incorrectly."""
    _check_match(f, p)
    return np.clip(1.0 - (f.channel * p.valid).sum(axis=1), 0.0, 1.0)


def refine_family(f: AnswerFamily, p: SingleInputProblem) -> tuple[AnswerFamily, np.ndarray]:
    """Condition each answer distribution on correctness.

    Returns the refined family and the per-input error ``eps_x``.
    """
    eps = error_rates(f, p)
    dead = [f.inputs[i] for i in np.flatnonzero(eps >= 1.0 - 1e-15)]
    if dead:
        raise ValueError(f"family is never correct on inputs {dead!r}")
    refined = np.where(p.valid, f.channel, 0.0) / (1.0 - eps)[:, None]
    refined /= refined.sum(axis=1, keepdims=True)
    return AnswerFamily(f.inputs, f.answers, f.prior, refined), eps


@dataclass
class RefinementBounds:
    """Per-input and averaged divergences of the refined family from ``mu^B``.

    ``stated_bound`` is ``(KL(mu_x || mu^B) + log 1/(1-eps_x)) / (1-eps_x)``;
    ``entropy_bound`` replaces the logarithm with ``h(eps_x)``, which also
    accounts for the incorrect answers dropped by the refinement.
    """

    kl: np.ndarray
    kl_refined: np.ndarray
    eps: np.ndarray
    stated_bound: np.ndarray
    entropy_bound: np.ndarray
    m: float
    eps_max: float
    average_refined: float
    aggregate_bound: float
    simplified_bound: float

    @property
    def per_input_stated_holds(self) -> np.ndarray:
        return self.kl_refined <= self.stated_bound + NORM_TOL

    @property
    def per_input_entropy_holds(self) -> np.ndarray:
        return self.kl_refined <= self.entropy_bound + NORM_TOL

    @property
    def aggregate_holds(self) -> bool:
        return self.average_refined <= self.aggregate_bound + NORM_TOL

    @property
    def simplified_holds(self) -> bool:
        return self.average_refined < self.simplified_bound + NORM_TOL

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "eps_max": self.eps_max,
            "average_refined_kl": self.average_refined,
            "aggregate_bound": self.aggregate_bound,
            "simplified_bound": self.simplified_bound,
            "aggregate_holds": bool(self.aggregate_holds),
            "simplified_holds": bool(self.simplified_holds),
            "simplified_applies": self.m >= 1,
            "per_input_stated_holds": [bool(v) for v in self.per_input_stated_holds],
            "per_input_entropy_holds": [bool(v) for v in self.per_input_entropy_holds],
        }


def refinement_bounds(f: AnswerFamily, p: SingleInputProblem, m: float | None = None) -> RefinementBounds:
    """Evaluate the divergence chain with ``eps = max_x eps_x``.

    ``m`` defaults to ``I(A;B)``.
    """
    refined, eps = refine_family(f, p)
    marg = f.marginal()
    kl = np.array([_kl(row, marg) for row in f.channel])
    kl_ref = np.array([_kl(row, marg) for row in refined.channel])
    stated = (kl + np.log2(1 / (1 - eps))) / (1 - eps)
    ent = (kl + np.array([binary_entropy(e) for e in eps])) / (1 - eps)
    m = mutual_information(f) if m is None else m
    e = float(eps.max())
    avg = float(f.prior @ np.where(f.prior > 0, kl_ref, 0.0))
    return RefinementBounds(
        kl=kl,
        kl_refined=kl_ref,
        eps=eps,
        stated_bound=stated,
        entropy_bound=ent,
        m=m,
        eps_max=e,
        average_refined=avg,
        aggregate_bound=(m + math.log2(1 / (1 - e))) / (1 - e),
        simplified_bound=2 * m / (1 - e),
    )


# -- quantum-to-classical conversion -----------------------------------------

def pointer_bits(m: float, eps: float) -> int:
    return math.ceil(11 * m / (eps * (1 - eps)))


def sample_count(m: float, eps: float) -> int:
    return math.ceil(2 ** (11 * m / (eps * (1 - eps))))


@dataclass
class ClassicalProtocol:
    """Shared list of answers drawn from ``mu^B``; Alice points at one.

    Alice sends the position of the first sample that is correct for her
    input, or position 0 when none is.
    """

    answers: tuple
    samples: np.ndarray
    valid: np.ndarray
    cost_bits: int

    def pointer(self, x_index: int) -> int:
        hits = np.flatnonzero(self.valid[x_index, self.samples])
        return int(hits[0]) if hits.size else 0

    def output(self, pointer: int) -> Hashable:
        return self.answers[int(self.samples[pointer])]

    def error(self, mu: np.ndarray) -> float:
        """Exact distributional error of this draw over ``x ~ mu``."""
        seen = np.zeros(self.valid.shape[1], dtype=bool)
        seen[np.unique(self.samples)] = True
        solved = (self.valid & seen).any(axis=1)
        return float(mu @ ~solved)


@dataclass
class ConversionReport:
    m: float
    information: float
    eps: float
    samples: int
    cost_bits: int
    family_error: float
    draw_error: float
    expected_error: float
    hit_probability: list[float]
    good_inputs: list[Any]
    good_mass: float
    diagnostics: dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "I(A;B)": self.information,
            "eps": self.eps,
            "M": self.samples,
            "cost_bits": self.cost_bits,
            "family_error": self.family_error,
            "draw_error": self.draw_error,
            "expected_error": self.expected_error,
            "hit_probability": self.hit_probability,
            "X_prime": self.good_inputs,
            "mu(X_prime)": self.good_mass,
            "diagnostics": self.diagnostics,
        }


def _conversion_setup(f, p, eps, m, cap):
    _check_match(f, p)
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    info = mutual_information(f)
    if m < info - 1e-6:
        raise ValueError(f"declared cost m={m:.6g} is below I(A;B)={info:.6g}")
    exponent = 11 * m / (eps * (1 - eps))
    if exponent > math.log2(cap):
        raise CapExceeded(f"M = 2^{exponent:.3g} samples exceeds the cap of {cap}")
    return info, sample_count(m, eps)


def convert_to_classical(
    f: AnswerFamily,
    p: SingleInputProblem,
    eps: float,
    m: float,
    rng: np.random.Generator,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> tuple[ClassicalProtocol, ConversionReport]:
    info, M = _conversion_setup(f, p, eps, m, cap)
    marg = f.marginal()
    samples = rng.choice(len(f.answers), size=M, p=marg / marg.sum())
    proto = ClassicalProtocol(f.answers, samples, p.valid, pointer_bits(m, eps))

    hit = (p.valid * marg).sum(axis=1)
    eps_x = error_rates(f, p)
    scale = eps * (1 - eps)
    good: list[Any] = []
    if np.all(eps_x < 1):
        refined, _ = refine_family(f, p)
        kl_ref = np.array([_kl(row, marg) for row in refined.channel])
        good_idx = np.flatnonzero(kl_ref < 5 * m / scale)
        good = [f.inputs[i] for i in good_idx]
        good_mass = float(f.prior[good_idx].sum())
    else:
        good_idx = np.array([], dtype=int)
        good_mass = 0.0
    floor = 2.0 ** (-10 * m / scale - 1)
    miss = (1 - hit) ** M
    report = ConversionReport(
        m=m,
        information=info,
        eps=eps,
        samples=M,
        cost_bits=proto.cost_bits,
        family_error=float(f.prior @ eps_x),
        draw_error=proto.error(f.prior),
        expected_error=float(f.prior @ miss),
        hit_probability=hit.tolist(),
        good_inputs=good,
        good_mass=good_mass,
        diagnostics={
            "family_error_within_eps": bool(f.prior @ eps_x <= eps + NORM_TOL),
            "mu(X')>1-eps/2": good_mass > 1 - eps / 2,
            "hit_probability_floor_on_X'": bool(np.all(hit[good_idx] > floor)),
            "miss_below_eps/3_on_X'": bool(np.all(miss[good_idx] < eps / 3)),
            "expected_error_within_eps": bool(f.prior @ miss <= eps + NORM_TOL),
        },
    )
    return proto, report


def conversion_errors(
    f: AnswerFamily,
    p: SingleInputProblem,
    eps: float,
    m: float,
    draws: int,
    seed: int,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> np.ndarray:
    """Distributional error of ``draws`` independent protocol draws.

    Only the set of distinct sampled answers decides which inputs are
    solved, so each draw samples answer counts from a multinomial instead of
    materialising all ``M`` samples.
    """
    _, M = _conversion_setup(f, p, eps, m, cap)
    marg = f.marginal()
    marg = marg / marg.sum()
    out = np.empty(draws)
    for d in range(draws):
        rng = np.random.default_rng([seed, d])
        seen = rng.multinomial(M, marg) > 0
        solved = (p.valid & seen).any(axis=1)
        out[d] = f.prior @ ~solved
    return out


# -- problem constructors ----------------------------------------------------

def _conditionals(mu: np.ndarray) -> np.ndarray:
    """``mu_x`` over Bob's inputs; uniform where ``x`` has no mass."""
    rows = mu.sum(axis=1, keepdims=True)
    uniform = np.full_like(mu, 1 / mu.shape[1])
    return np.where(rows > 0, mu / np.where(rows > 0, rows, 1), uniform)


def single_input_transform(p: TwoSidedProblem, eps: float, cap: int = DEFAULT_TUPLE_CAP) -> SingleInputProblem:
    """Bob must list an answer for every one of his possible inputs.

    A tuple ``(z_y)`` is correct for ``x`` when it is right with probability
    at least ``eps`` over ``y ~ mu_x``.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    nx, ny, nz = len(p.xs), len(p.ys), len(p.zs)
    if nz**ny > cap:
        raise CapExceeded(f"|Z|^|Y| = {nz ** ny} exceeds the cap of {cap}")
    cond = _conditionals(p.mu)
    positive = cond[cond > 0]
    if positive.size and eps <= positive.min():
        warnings.warn("eps is at most the smallest conditional mass; any tuple right somewhere qualifies")
    tuples = np.array(list(itertools.product(range(nz), repeat=ny)), dtype=int).reshape(-1, ny)
    cols = np.arange(ny)
    relation = set()
    for i in range(nx):
        ok = p.valid[i][cols, tuples]  # (tuples, ny)
        success = ok @ cond[i]
        for t in np.flatnonzero(success >= eps - NORM_TOL):
            relation.add((p.xs[i], tuple(p.zs[k] for k in tuples[t])))
    answers = tuple(tuple(p.zs[k] for k in t) for t in tuples)
    return SingleInputProblem(tuple(p.xs), answers, frozenset(relation), p.mu.sum(axis=1))


def concept_to_comm(n: int, threshold: Fraction = Fraction(4, 5), cap: int = 10**4) -> SingleInputProblem:
    """Alice holds a concept; Bob must output answers to all queries, enough of them valid.

    Inputs are all ``2^N`` concept strings (uniform ``mu``); answers are
    tuples ``((x_1, b_1), ..., (x_{N-1}, b_{N-1}))``.
    """
    check_odd_prime(n)
    if (2 * n) ** (n - 1) > cap:
        raise CapExceeded(f"{(2 * n) ** (n - 1)} answer tuples exceed the cap of {cap}")
    need = math.ceil(Fraction(threshold) * (n - 1))
    concepts = list(all_concepts(n))
    bits = np.array([c.bits for c in concepts], dtype=np.int8)
    # per query: valid[q-1][c, d] for answer digit d = 2x + b
    valid = np.zeros((n - 1, len(concepts), 2 * n), dtype=np.int8)
    for q in range(1, n):
        for x in range(n):
            par = bits[:, x] ^ bits[:, (x + q) % n]
            valid[q - 1, :, 2 * x + 1] = par
            valid[q - 1, :, 2 * x] = 1 - par
    digits = np.array(list(itertools.product(range(2 * n), repeat=n - 1)), dtype=int)
    counts = sum(valid[q][:, digits[:, q]] for q in range(n - 1))  # (concepts, tuples)
    answers = tuple(tuple((int(d) // 2, int(d) % 2) for d in row) for row in digits)
    relation = frozenset(
        (str(concepts[i]), answers[t]) for i, t in zip(*np.nonzero(counts >= need))
    )
    inputs = tuple(str(c) for c in concepts)
    return SingleInputProblem(inputs, answers, relation, np.full(len(inputs), 1 / len(inputs)))


def comm_threshold(n: int, threshold: Fraction = Fraction(4, 5)) -> int:
    return math.ceil(Fraction(threshold) * (n - 1))


def func_eval_problem(
    functions: Sequence[Sequence[Hashable]],
    domain: Sequence[Hashable],
    mu: np.ndarray | None = None,
) -> TwoSidedProblem:
    """Alice gets ``f``, Bob gets ``x``, Bob must output ``f(x)``.

    ``functions[i][j]`` is the value of function ``i`` at ``domain[j]``;
    Alice's inputs are function indices.
    """
    domain = tuple(domain)
    if any(len(f) != len(domain) for f in functions):
        raise ValueError("each function needs one value per domain element")
    zs = tuple(sorted({v for f in functions for v in f}))
    relation = frozenset((i, domain[j], f[j]) for i, f in enumerate(functions) for j in range(len(domain)))
    if mu is None:
        mu = np.full((len(functions), len(domain)), 1 / (len(functions) * len(domain)))
    return TwoSidedProblem(tuple(range(len(functions))), domain, zs, relation, mu)


# -- distributional one-way cost ---------------------------------------------

@dataclass(frozen=True)
class CostResult:
    messages: int | None
    success: float

    @property
    def bits(self) -> int | None:
        if self.messages is None:
            return None
        return math.ceil(math.log2(self.messages)) if self.messages > 1 else 0


def _block_values(weights: np.ndarray) -> np.ndarray:
    """``value[S]``: best success mass Bob gets when Alice's message means ``x in S``.

    ``weights[x, y, z]`` is ``mu(x, y)`` when ``z`` is correct for ``(x, y)``.
    """
    nx = weights.shape[0]
    acc = np.zeros((1 << nx,) + weights.shape[1:])
    for s in range(1, 1 << nx):
        low = (s & -s).bit_length() - 1
        acc[s] = acc[s & (s - 1)] + weights[low]
    return acc.max(axis=2).sum(axis=1)


def brute_force_one_way_cost(
    p: SingleInputProblem | TwoSidedProblem,
    eps: float,
    mu: np.ndarray | None = None,
    max_inputs: int = 8,
    max_answers: int = 8,
    max_bob_inputs: int = 4,
) -> CostResult:
    """Fewest messages ``c`` for which a deterministic protocol has error <= eps under mu.

    A deterministic protocol partitions Alice's inputs into at most ``c``
    blocks; Bob best-responds per block (and per own input).  Returns
    ``messages=None`` when even full disclosure misses the target.
    """
    if isinstance(p, SingleInputProblem):
        mu = p.mu if mu is None else np.asarray(mu, dtype=float)
        weights = (p.valid * mu[:, None])[:, None, :]
        nx, nz, ny = len(p.inputs), len(p.answers), 1
    else:
        mu = p.mu if mu is None else np.asarray(mu, dtype=float)
        weights = p.valid * mu[:, :, None]
        nx, ny, nz = len(p.xs), len(p.ys), len(p.zs)
    if nx > max_inputs or nz > max_answers or ny > max_bob_inputs:
        raise CapExceeded(f"instance |X|={nx}, |Y|={ny}, |Z|={nz} exceeds the search caps")
    _check_prob_vector(np.ravel(mu), "mu")
    value = _block_values(weights)
    full = (1 << nx) - 1
    target = 1.0 - eps - 1e-12
    best = value.copy()  # best[S] with at most one block
    c = 1
    while True:
        if best[full] >= target:
            return CostResult(c, float(best[full]))
        if c >= nx:
            return CostResult(None, float(best[full]))
        nxt = best.copy()
        for s in range(1, full + 1):
            low = s & -s
            rest = s ^ low
            sub = rest
            # blocks T containing the lowest element of S
            while True:
                t = sub | low
                cand = value[t] + best[s ^ t] if s ^ t else value[t]
                if cand > nxt[s]:
                    nxt[s] = cand
                if sub == 0:
                    break
                sub = (sub - 1) & rest
        best = nxt
        c += 1


# -- random tiny instances ---------------------------------------------------

@dataclass
class ConversionInstance:
    family: AnswerFamily
    problem: SingleInputProblem
    eps: float
    m: float


def random_conversion_instance(
    rng: np.random.Generator,
    max_inputs: int = 8,
    max_answers: int = 8,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> ConversionInstance:
    """Low-information family with a random relation, error within eps, and M under the cap.

    Draws are rejected until every input has a correct answer with positive
    mass, the family's distributional error is at most eps, and
    ``11 m / (eps (1 - eps)) <= log2(cap)`` with ``m = I(A;B)``.
    """
    while True:
        nx = int(rng.integers(2, max_inputs + 1))
        nz = int(rng.integers(2, max_answers + 1))
        prior = rng.dirichlet(np.ones(nx))
        lam = rng.uniform(0.0, 0.3)
        channel = (1 - lam) * rng.dirichlet(np.ones(nz)) + lam * rng.dirichlet(np.ones(nz), size=nx)
        channel /= channel.sum(axis=1, keepdims=True)
        valid = rng.random((nx, nz)) < 0.5
        for i in range(nx):
            if not valid[i].any():
                valid[i, rng.integers(nz)] = True
        eps = float(rng.uniform(0.2, 0.8))
        xs, zs = tuple(range(nx)), tuple(range(nz))
        fam = AnswerFamily(xs, zs, prior, channel)
        prob = SingleInputProblem(
            xs, zs, frozenset((i, j) for i, j in zip(*np.nonzero(valid))), prior
        )
        eps_x = error_rates(fam, prob)
        m = mutual_information(fam)
        if np.all(eps_x < 1) and prior @ eps_x <= eps and 11 * m / (eps * (1 - eps)) <= math.log2(cap):
            return ConversionInstance(fam, prob, eps, m)


def random_two_sided(
    rng: np.random.Generator,
    max_x: int = 5,
    max_y: int = 3,
    max_z: int = 3,
    density: float = 0.5,
) -> TwoSidedProblem:
    nx = int(rng.integers(2, max_x + 1))
    ny = int(rng.integers(1, max_y + 1))
    nz = int(rng.integers(2, max_z + 1))
    valid = rng.random((nx, ny, nz)) < density
    for i in range(nx):
        for j in range(ny):
            if not valid[i, j].any():
                valid[i, j, rng.integers(nz)] = True
    mu = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    relation = frozenset((int(a), int(b), int(c)) for a, b, c in zip(*np.nonzero(valid)))
    return TwoSidedProblem(tuple(range(nx)), tuple(range(ny)), tuple(range(nz)), relation, mu)
