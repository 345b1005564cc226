"""The predictive quantum learner for the hidden-parity class.

Learning phase: measure the answer-bit register of each example copy in the
+/- basis until a minus outcome appears (give up if none does), measure the
x register, and shift the remaining register so it holds
``sum_{k != x0} (-1)^{C_k} |k>``.  Testing phase: measure that state against
the matching for the query and read the parity off the surviving edge.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .concepts import Answer, Concept, valid_answer
from .modmath import build_matching, check_odd_prime
from .qsim import (
    COMPLETION,
    MeasurementError,
    StateVector,
    distinguish_parity,
    matching_branches,
    measure_computational,
    measure_matching,
    measure_pm_basis,
    pm_branches,
    prepare_example,
    prepare_phase_example,
    shift_transform,
    x_branches,
)

# Success probability the predictive model asks of a learner.
PQ_SUCCESS = 5 / 6


class GiveUp:
    """Every +/- measurement came out plus."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "GIVE_UP"


GIVE_UP = GiveUp()


@dataclass
class LearnerMemory:
    modulus: int
    x0: int
    state: StateVector
    consumed: bool = False

    def __post_init__(self):
        if self.state.kind != "z" or self.state.modulus != self.modulus:
            raise ValueError("learner memory must be a single Z_N register")
        if abs(self.state.amps[self.x0]) > 1e-9:
            raise ValueError("learner memory has weight on its own anchor x0")

    def _take(self) -> None:
        if self.consumed:
            raise RuntimeError("learner memory was already used to answer a query")
        self.consumed = True


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"need at least one example copy, got k={k}")


def acquire(c: Concept, k: int, rng: np.random.Generator) -> LearnerMemory | GiveUp:
    _check_k(k)
    example = prepare_example(c)
    for _ in range(k):
        out = measure_pm_basis(example, rng)
        if out.label == "-":
            break
    else:
        return GIVE_UP
    xo = measure_computational(out.post_state, rng)
    return LearnerMemory(c.modulus, xo.label, shift_transform(xo.post_state, xo.label))


def acquire_branches(c: Concept, k: int) -> list[tuple[float, LearnerMemory | GiveUp]]:
    """Every outcome of :func:`acquire` with its exact probability.

    Copies are identical, so the branch "first minus at copy t" leaves the
    same state for every t; those branches are merged.
    """
    _check_k(k)
    by_sign = {b.label: b for b in pm_branches(prepare_example(c))}
    p_plus = by_sign["+"].probability if "+" in by_sign else 0.0
    minus = by_sign.get("-")
    p_all_plus, p_success = 1.0, 0.0
    for _ in range(k):
        if minus is not None:
            p_success += p_all_plus * minus.probability
        p_all_plus *= p_plus
    out: list[tuple[float, LearnerMemory | GiveUp]] = []
    if minus is not None:
        for xb in x_branches(minus.post_state):
            mem = LearnerMemory(c.modulus, xb.label, shift_transform(xb.post_state, xb.label))
            out.append((p_success * xb.probability, mem))
    if p_all_plus > 0:
        out.append((p_all_plus, GIVE_UP))
    return out


def answer_query(mem: LearnerMemory, q: int, rng: np.random.Generator) -> Answer:
    m = build_matching(mem.modulus, mem.x0, q)
    mem._take()
    out = measure_matching(mem.state, m, rng)
    return Answer(out.label[0], distinguish_parity(out.post_state, out.label))


def answer_branches(mem: LearnerMemory, q: int) -> list[tuple[float, Answer]]:
    m = build_matching(mem.modulus, mem.x0, q)
    mem._take()
    out = []
    for br in matching_branches(mem.state, m):
        if br.label == COMPLETION:
            raise MeasurementError(f"completion outcome has probability {br.probability:.3g}")
        out.append((br.probability, Answer(br.label[0], distinguish_parity(br.post_state, br.label))))
    return out


def _phase_memories(c: Concept) -> list[tuple[float, LearnerMemory]]:
    return [
        (xb.probability, LearnerMemory(c.modulus, xb.label, shift_transform(xb.post_state, xb.label)))
        for xb in x_branches(prepare_phase_example(c))
    ]


def learn_exact(c: Concept, q: int, rng: np.random.Generator) -> Answer:
    """Answer ``q`` from a single phase-encoded example; never gives up."""
    xo = measure_computational(prepare_phase_example(c), rng)
    mem = LearnerMemory(c.modulus, xo.label, shift_transform(xo.post_state, xo.label))
    return answer_query(mem, q, rng)


def learn_exact_branches(c: Concept, q: int) -> list[tuple[float, Answer]]:
    return [
        (p * pa, ans)
        for p, mem in _phase_memories(c)
        for pa, ans in answer_branches(mem, q)
    ]


def full_branches(c: Concept, k: int, q: int) -> list[tuple[float, Answer | GiveUp]]:
    """Exact outcome distribution of learning with ``k`` copies then answering ``q``."""
    out: list[tuple[float, Answer | GiveUp]] = []
    for p, mem in acquire_branches(c, k):
        if mem is GIVE_UP:
            out.append((p, GIVE_UP))
        else:
            out.extend((p * pa, ans) for pa, ans in answer_branches(mem, q))
    return out


# -- empirical harness -------------------------------------------------------

CSV_COLUMNS = ("trial", "N", "k", "q", "gave_up", "ans_x", "ans_b", "correct")

QueryPolicy = Literal["all-queries", "uniform-random"]


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    modulus: int
    k: int
    q: int
    gave_up: bool
    answer: Answer | None
    correct: bool | None
    seed: int
    concept: str

    def csv_row(self) -> list[str]:
        a = self.answer
        return [
            str(self.trial), str(self.modulus), str(self.k), str(self.q),
            str(int(self.gave_up)),
            "" if a is None else str(a.x),
            "" if a is None else str(a.b),
            "" if self.correct is None else str(int(self.correct)),
        ]


@dataclass
class QueryTally:
    asked: int = 0
    give_ups: int = 0
    answered: int = 0
    correct: int = 0

    def add(self, r: TrialRecord) -> None:
        self.asked += 1
        if r.gave_up:
            self.give_ups += 1
        else:
            self.answered += 1
            self.correct += bool(r.correct)


@dataclass
class TrialStats:
    modulus: int
    k: int
    trials: int
    seed: int
    query_policy: str
    records: list[TrialRecord] = field(default_factory=list)

    @property
    def totals(self) -> QueryTally:
        t = QueryTally()
        for r in self.records:
            t.add(r)
        return t

    def per_query(self) -> dict[int, QueryTally]:
        out = {q: QueryTally() for q in range(1, self.modulus)}
        for r in self.records:
            out[r.q].add(r)
        return out

    def summary(self) -> dict:
        t = self.totals
        return {
            "N": self.modulus,
            "k": self.k,
            "trials": self.trials,
            "seed": self.seed,
            "query_policy": self.query_policy,
            "queries_asked": t.asked,
            "give_ups": t.give_ups,
            "answered": t.answered,
            "correct": t.correct,
            "wrong": t.answered - t.correct,
            "give_up_fraction": t.give_ups / t.asked,
            "expected_give_up": 0.5**self.k,
            "correct_over_answered": t.correct / t.answered if t.answered else None,
            "meets_pq_success": 0.5**self.k <= 1 - PQ_SUCCESS,
            "per_query": {str(q): vars(v) for q, v in self.per_query().items()},
        }


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def _run_one(n: int, k: int, trial: int, seed: int, policy: str, concept: Concept | None) -> list[TrialRecord]:
    rng = trial_rng(seed, trial)
    c = concept if concept is not None else Concept.random(n, rng)
    if policy == "all-queries":
        queries: Iterable[int] = range(1, n)
    else:
        queries = [int(rng.integers(1, n))]
    recs = []
    for q in queries:
        mem = acquire(c, k, rng)
        if mem is GIVE_UP:
            recs.append(TrialRecord(trial, n, k, q, True, None, None, seed, str(c)))
        else:
            ans = answer_query(mem, q, rng)
            recs.append(TrialRecord(trial, n, k, q, False, ans, valid_answer(c, q, ans), seed, str(c)))
    return recs


def _run_chunk(args) -> list[TrialRecord]:
    n, k, lo, hi, seed, policy, concept = args
    out = []
    for t in range(lo, hi):
        out.extend(_run_one(n, k, t, seed, policy, concept))
    return out


def run_trials(
    n: int,
    k: int,
    trials: int,
    seed: int,
    query_policy: QueryPolicy = "uniform-random",
    concept: Concept | None = None,
    workers: int | None = None,
) -> TrialStats:
    """Run independent learn-then-answer trials.

    Trial ``t`` draws from its own stream seeded by ``(seed, t)``, so results
    do not depend on ``workers``.  Without a fixed ``concept`` each trial
    draws a uniformly random one.  A memory answers one query, so the
    all-queries policy re-acquires for every query.
    """
    check_odd_prime(n)
    _check_k(k)
    if trials < 1:
        raise ValueError("need at least one trial")
    if query_policy not in ("all-queries", "uniform-random"):
        raise ValueError(f"unknown query policy {query_policy!r}")
    if concept is not None and concept.modulus != n:
        raise ValueError("concept modulus does not match N")
    workers = workers or 1
    stats = TrialStats(n, k, trials, seed, query_policy)
    if workers == 1:
        stats.records = _run_chunk((n, k, 0, trials, seed, query_policy, concept))
        return stats
    step = -(-trials // (4 * workers))
    chunks = [(n, k, lo, min(lo + step, trials), seed, query_policy, concept) for lo in range(0, trials, step)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, chunks):
            stats.records.extend(part)
    return stats


def default_workers() -> int:
    return max(1, int(os.environ.get("PQLAB_THREADS", "1")))
