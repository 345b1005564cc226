"""Arithmetic over Z_N and the perfect matchings used by the query measurement."""
from __future__ import annotations

from dataclasses import dataclass
from math import isqrt


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for d in range(3, isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def check_odd_prime(n: int) -> None:
    if n < 3 or not is_prime(n):
        raise ValueError(f"modulus must be an odd prime, got {n}")


@dataclass(frozen=True)
class Zmod:
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be positive")
        if not 0 <= self.value < self.modulus:
            raise ValueError(f"{self.value} is not a residue mod {self.modulus}")

    @classmethod
    def of(cls, value: int, modulus: int) -> "Zmod":
        return cls(value % modulus, modulus)

    def __add__(self, other):
        other = other.value if isinstance(other, Zmod) else other
        return Zmod((self.value + other) % self.modulus, self.modulus)

    def __sub__(self, other):
        other = other.value if isinstance(other, Zmod) else other
        return Zmod((self.value - other) % self.modulus, self.modulus)

    def __int__(self):
        return self.value


@dataclass(frozen=True)
class Matching:
    """Edges ``(a, a + q)`` pairing up every residue except ``excluded``."""

    modulus: int
    excluded: int
    step: int
    edges: tuple[tuple[int, int], ...]

    def vertices(self) -> set[int]:
        return {v for e in self.edges for v in e}

    def edge_of(self, vertex: int) -> tuple[int, int] | None:
        for e in self.edges:
            if vertex in e:
                return e
        return None


def build_matching(n: int, x0: Zmod | int, q: int) -> Matching:
    """Pair ``x0 + (2i+1)q`` with ``x0 + (2i+2)q`` for ``0 <= i <= (n-3)/2``."""
    check_odd_prime(n)
    if not 1 <= q <= n - 1:
        raise ValueError(f"step q must lie in [1, {n - 1}], got {q}")
    x0 = int(x0) % n
    edges = tuple(
        ((x0 + (2 * i + 1) * q) % n, (x0 + (2 * i + 2) * q) % n)
        for i in range((n - 3) // 2 + 1)
    )
    return Matching(modulus=n, excluded=x0, step=q, edges=edges)


def is_perfect_matching(m: Matching) -> bool:
    seen: set[int] = set()
    for a, b in m.edges:
        if a == b or a in seen or b in seen:
            return False
        seen.update((a, b))
    return seen == set(range(m.modulus)) - {m.excluded}
