"""The hidden-parity relational concept class.

A concept is a bit string ``C`` of odd prime length ``N``.  For a query
``q`` in ``1..N-1`` an answer ``(x, b)`` is valid when ``C[x] ^ C[x+q] == b``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .modmath import check_odd_prime


@dataclass(frozen=True)
class Concept:
    modulus: int
    bits: tuple[int, ...]

    def __post_init__(self):
        check_odd_prime(self.modulus)
        if len(self.bits) != self.modulus:
            raise ValueError(f"expected {self.modulus} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("concept bits must be 0 or 1")

    @classmethod
    def from_string(cls, s: str) -> "Concept":
        return cls(len(s), tuple(int(ch) for ch in s))

    @classmethod
    def from_int(cls, n: int, value: int) -> "Concept":
        """Bit ``k`` of ``value`` becomes ``C[k]``."""
        return cls(n, tuple((value >> k) & 1 for k in range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Concept":
        return cls(n, tuple(int(b) for b in rng.integers(0, 2, size=n)))

    def __str__(self):
        return "".join(map(str, self.bits))

    def __getitem__(self, k: int) -> int:
        return self.bits[k % self.modulus]

    def to_int(self) -> int:
        return sum(b << k for k, b in enumerate(self.bits))

    def complement(self) -> "Concept":
        return Concept(self.modulus, tuple(1 - b for b in self.bits))

    def canonical(self) -> "Concept":
        """Representative of ``{C, ~C}`` with ``C[0] == 0``."""
        return self.complement() if self.bits[0] else self

    def parity(self, x: int, q: int) -> int:
        return self[x] ^ self[x + q]

    def to_json(self) -> dict:
        return {"N": self.modulus, "bits": str(self)}

    @classmethod
    def from_json(cls, d: Mapping) -> "Concept":
        c = cls.from_string(d["bits"])
        if c.modulus != d["N"]:
            raise ValueError("bit string length does not match N")
        return c


@dataclass(frozen=True)
class Answer:
    x: int
    b: int

    def __post_init__(self):
        if self.b not in (0, 1):
            raise ValueError("answer bit must be 0 or 1")


@dataclass(frozen=True)
class Hypothesis:
    modulus: int
    table: Mapping[int, Answer]

    def __post_init__(self):
        check_odd_prime(self.modulus)
        if set(self.table) != set(range(1, self.modulus)):
            raise ValueError("hypothesis must answer every query 1..N-1")
        for a in self.table.values():
            if not 0 <= a.x < self.modulus:
                raise ValueError(f"answer position {a.x} out of range")

    def __call__(self, q: int) -> Answer:
        return self.table[q]

    def __hash__(self):
        return hash((self.modulus, self.as_tuple()))

    def as_tuple(self) -> tuple[tuple[int, int], ...]:
        return tuple((self.table[q].x, self.table[q].b) for q in range(1, self.modulus))

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "Hypothesis":
        return cls(n, {q: Answer(x, b) for q, (x, b) in enumerate(pairs, start=1)})

    @classmethod
    def from_concept(cls, c: Concept, x: int = 0) -> "Hypothesis":
        """Hypothesis answering each query at position ``x`` with the true parity."""
        n = c.modulus
        return cls(n, {q: Answer(x, c.parity(x, q)) for q in range(1, n)})

    def to_json(self) -> list[list[int]]:
        return [list(p) for p in self.as_tuple()]


def _check_query(c: Concept, q: int) -> None:
    if not 1 <= q <= c.modulus - 1:
        raise ValueError(f"query must lie in [1, {c.modulus - 1}], got {q}")


def valid_answer(c: Concept, q: int, a: Answer) -> bool:
    _check_query(c, q)
    return c.parity(a.x, q) == a.b


def relation_of(c: Concept) -> frozenset[tuple[int, int, int]]:
    n = c.modulus
    return frozenset((q, x, c.parity(x, q)) for q in range(1, n) for x in range(n))


def approx_threshold(n: int) -> int:
    """Fewest correct queries out of ``n-1`` that reach the 2/3 mark."""
    return -(-2 * (n - 1) // 3)


def correct_count(h: Hypothesis, c: Concept) -> int:
    if h.modulus != c.modulus:
        raise ValueError("hypothesis and concept have different moduli")
    return sum(valid_answer(c, q, h(q)) for q in range(1, c.modulus))


def approximates(h: Hypothesis, c: Concept) -> bool:
    return correct_count(h, c) >= approx_threshold(c.modulus)


def all_concepts(n: int) -> Iterator[Concept]:
    for v in range(2**n):
        yield Concept.from_int(n, v)


def concept_classes(n: int) -> list[Concept]:
    """One representative (``C[0] == 0``) per complement pair, in integer order."""
    return [Concept.from_int(n, 2 * v) for v in range(2 ** (n - 1))]


def all_answers(n: int) -> list[Answer]:
    return [Answer(x, b) for x in range(n) for b in (0, 1)]


def all_hypotheses(n: int) -> Iterator[Hypothesis]:
    answers = [(x, b) for x in range(n) for b in (0, 1)]
    for pairs in itertools.product(answers, repeat=n - 1):
        yield Hypothesis.from_pairs(n, pairs)
