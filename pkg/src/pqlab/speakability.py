"""Approximating covers of the hidden-parity class and the counting audit.

Concepts are handled up to complement: ``C`` and ``~C`` induce the same
relation, so each class is represented by the member with ``C[0] == 0`` and
class ``i`` is the concept whose integer encoding is ``2 * i``.  Coverage
sets are bitmasks over class indices (at most 64 classes, so ``N <= 7``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .concepts import (
    Concept,
    Hypothesis,
    all_concepts,
    approx_threshold,
    approximates,
    concept_classes,
    valid_answer,
)
from .errors import CapExceeded
from .modmath import check_odd_prime

EXACT_MAX_N = 5
GREEDY_MAX_N = 7
AUDIT_TOL = 1e-9


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def entropy(counts: Iterable[int]) -> float:
    """Entropy in bits of the empirical distribution given by ``counts``."""
    counts = [c for c in counts if c > 0]
    total = sum(counts)
    return -sum(c / total * math.log2(c / total) for c in counts)


# -- hypothesis coverage -----------------------------------------------------

def hypothesis_from_index(n: int, index: int) -> Hypothesis:
    """Decode the ``index``-th hypothesis in ``itertools.product`` order.

    Query 1 is the most significant digit; digit ``d`` stands for the answer
    ``(d // 2, d % 2)``.
    """
    base = 2 * n
    digits = []
    for _ in range(n - 1):
        index, d = divmod(index, base)
        digits.append(d)
    return Hypothesis.from_pairs(n, [(d // 2, d % 2) for d in reversed(digits)])


def hypothesis_index(h: Hypothesis) -> int:
    idx = 0
    for x, b in h.as_tuple():
        idx = idx * 2 * h.modulus + 2 * x + b
    return idx


def _validity_tensor(n: int) -> np.ndarray:
    """``valid[q-1, d, c]``: answer digit ``d`` is valid for query ``q`` on class ``c``."""
    classes = concept_classes(n)
    bits = np.array([c.bits for c in classes], dtype=np.int8)  # (classes, n)
    out = np.zeros((n - 1, 2 * n, len(classes)), dtype=np.int8)
    for q in range(1, n):
        for x in range(n):
            par = bits[:, x] ^ bits[:, (x + q) % n]
            out[q - 1, 2 * x] = par == 0
            out[q - 1, 2 * x + 1] = par == 1
    return out


def coverage_masks(n: int) -> dict[int, int]:
    """Map each distinct nonempty coverage bitmask to its first hypothesis index."""
    check_odd_prime(n)
    if n > GREEDY_MAX_N:
        raise CapExceeded(f"coverage enumeration is limited to N <= {GREEDY_MAX_N}")
    valid = _validity_tensor(n)
    base, nq, ncls = 2 * n, n - 1, valid.shape[2]
    thr = approx_threshold(n)
    weights = np.left_shift(np.uint64(1), np.arange(ncls, dtype=np.uint64))
    split = max(0, nq - 4)
    # counts over the trailing queries, enumerated with the last query fastest
    tail = np.zeros((1, ncls), dtype=np.int8)
    for q in range(split, nq):
        tail = (tail[:, None, :] + valid[q][None, :, :]).reshape(-1, ncls)
    first: dict[int, int] = {}
    for prefix, digits in enumerate(itertools.product(range(base), repeat=split)):
        head = sum(valid[q, d] for q, d in enumerate(digits)) if split else 0
        covered = (tail + head) >= thr
        masks = (covered.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
        uniq, idx = np.unique(masks, return_index=True)
        offset = prefix * len(tail)
        for m, i in zip(uniq.tolist(), idx.tolist()):
            if m and m not in first:
                first[m] = offset + i
    return first


def concepts_approximated_by(h: Hypothesis) -> list[Concept]:
    """Class representatives (``C[0] == 0``) that ``h`` approximates."""
    return [c for c in concept_classes(h.modulus) if approximates(h, c)]


def with_complements(concepts: Iterable[Concept]) -> list[Concept]:
    seen = {}
    for c in concepts:
        for d in (c, c.complement()):
            seen.setdefault(d.to_int(), d)
    return [seen[k] for k in sorted(seen)]


# -- set cover ---------------------------------------------------------------

def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a)


def greedy_cover(masks: Sequence[int], universe: int) -> list[int]:
    """Repeatedly take the mask covering the most uncovered elements (first on ties)."""
    arr = np.array(masks, dtype=np.uint64)
    chosen: list[int] = []
    left = universe
    while left:
        gain = _popcount(arr & np.uint64(left))
        k = int(np.argmax(gain))
        if gain[k] == 0:
            raise ValueError("universe cannot be covered")
        chosen.append(int(arr[k]))
        left &= ~int(arr[k])
    return chosen


def maximal_masks(masks: Iterable[int]) -> list[int]:
    """Drop masks strictly contained in another; order by size desc then value."""
    ms = sorted(set(masks), key=lambda m: (-m.bit_count(), m))
    keep: list[int] = []
    for m in ms:
        if not any(m & k == m for k in keep):
            keep.append(m)
    return keep


@dataclass
class SearchLog:
    nodes: int = 0
    incumbents: list[int] = field(default_factory=list)


def exact_cover(masks: Sequence[int], universe: int) -> tuple[list[int], SearchLog]:
    """Minimum set cover by branch and bound, seeded with the greedy cover.

    Branches on the uncovered element with the fewest candidate masks; prunes
    with ``ceil(uncovered / largest mask)``.  The first optimum reached in
    this deterministic order is returned.
    """
    cands = maximal_masks(masks)
    biggest = max(m.bit_count() for m in cands)
    containing: dict[int, list[int]] = {}
    for e in range(universe.bit_length()):
        if universe >> e & 1:
            containing[e] = [m for m in cands if m >> e & 1]
            if not containing[e]:
                raise ValueError(f"element {e} cannot be covered")
    best = greedy_cover(cands, universe)
    log = SearchLog(incumbents=[len(best)])

    def rec(left: int, chosen: list[int]) -> None:
        nonlocal best
        log.nodes += 1
        if not left:
            if len(chosen) < len(best):
                best = list(chosen)
                log.incumbents.append(len(best))
            return
        if len(chosen) + -(-left.bit_count() // biggest) >= len(best):
            return
        e = min(
            (e for e in containing if left >> e & 1),
            key=lambda e: (len(containing[e]), e),
        )
        for m in containing[e]:
            chosen.append(m)
            rec(left & ~m, chosen)
            chosen.pop()

    rec(universe, [])
    return best, log


def cover_exists(masks: Sequence[int], universe: int, size: int) -> bool:
    """Plain enumeration over ``size``-subsets of the maximal masks."""
    if size <= 0:
        return universe == 0
    cands = maximal_masks(masks)
    for combo in itertools.combinations(cands, size):
        acc = 0
        for m in combo:
            acc |= m
        if acc & universe == universe:
            return True
    return False


# -- certificates ------------------------------------------------------------

@dataclass
class CoverCertificate:
    modulus: int
    cover: list[Hypothesis]
    coverage: dict[str, int]
    minimal: bool
    method: str
    search: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.cover)

    def verify(self) -> bool:
        """Recheck every class against its assigned hypothesis and the union."""
        classes = concept_classes(self.modulus)
        if set(self.coverage) != {str(c) for c in classes}:
            return False
        return all(approximates(self.cover[i], Concept.from_string(s)) for s, i in self.coverage.items())

    def to_json(self) -> dict:
        return {
            "N": self.modulus,
            "size": self.size,
            "minimal": self.minimal,
            "method": self.method,
            "cover": [h.to_json() for h in self.cover],
            "coverage": dict(sorted(self.coverage.items())),
            "search": self.search,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CoverCertificate":
        n = d["N"]
        return cls(
            modulus=n,
            cover=[Hypothesis.from_pairs(n, [tuple(p) for p in h]) for h in d["cover"]],
            coverage=dict(d["coverage"]),
            minimal=d["minimal"],
            method=d["method"],
            search=d.get("search", {}),
        )


def approx_cover_oracle(n: int, mode: str = "exact") -> CoverCertificate:
    check_odd_prime(n)
    if mode == "exact" and n > EXACT_MAX_N:
        raise CapExceeded(f"exact mode is limited to N <= {EXACT_MAX_N}")
    if mode == "greedy" and n > GREEDY_MAX_N:
        raise CapExceeded(f"greedy mode is limited to N <= {GREEDY_MAX_N}")
    if mode not in ("exact", "greedy"):
        raise ValueError(f"unknown mode {mode!r}")
    first = coverage_masks(n)
    classes = concept_classes(n)
    universe = (1 << len(classes)) - 1
    search = {
        "distinct_coverage_sets": len(first),
        "hypotheses": (2 * n) ** (n - 1),
        "classes": len(classes),
    }
    if mode == "exact":
        chosen, log = exact_cover(list(first), universe)
        search.update(
            maximal_coverage_sets=len(maximal_masks(first)),
            nodes=log.nodes,
            incumbent_sizes=log.incumbents,
        )
        method = "branch-and-bound over maximal coverage sets, greedy incumbent; search completed"
    else:
        chosen = greedy_cover(sorted(first, key=lambda m: first[m]), universe)
        method = "greedy upper bound"
    cover = [hypothesis_from_index(n, first[m]) for m in chosen]
    coverage = {}
    for i, c in enumerate(classes):
        coverage[str(c)] = next(j for j, m in enumerate(chosen) if m >> i & 1)
    return CoverCertificate(n, cover, coverage, mode == "exact", method, search)


# -- the counting audit ------------------------------------------------------

@dataclass
class CountingAudit:
    modulus: int
    h0: Hypothesis
    c0: list[Concept]
    q0: list[int]
    edge_queries: dict[tuple[int, int], list[int]]
    nonisolated: int
    forest: list[tuple[tuple[int, int], int]]
    values: dict[str, float]
    checks: dict[str, bool]

    @property
    def e0(self) -> list[tuple[int, int]]:
        return sorted(self.edge_queries)

    @property
    def q0_prime(self) -> list[int]:
        return [q for _, q in self.forest]

    @property
    def entropy_gap(self) -> float:
        return self.values["log_ratio"]

    @property
    def all_hold(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "N": self.modulus,
            "h0": self.h0.to_json(),
            "C0": [str(c) for c in self.c0],
            "Q0": self.q0,
            "E0": [list(e) for e in self.e0],
            "edge_queries": {f"{a}-{b}": qs for (a, b), qs in sorted(self.edge_queries.items())},
            "nonisolated": self.nonisolated,
            "forest": [[list(e), q] for e, q in self.forest],
            "Q0_prime": self.q0_prime,
            "values": self.values,
            "checks": self.checks,
            "asymptotic_step": "sqrt(N)/250 bound holds only for large N; not machine-checked",
        }


def _spanning_forest(n: int, edges_by_q: Sequence[tuple[int, tuple[int, int]]]):
    parent = list(range(n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    forest = []
    for q, (a, b) in edges_by_q:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            forest.append(((a, b), q))
    return forest


def _conditional_entropy(keys: Sequence[tuple]) -> tuple[float, float]:
    """``H(J)`` and ``H(C | J)`` for ``C`` uniform over a list whose J-values are ``keys``."""
    groups: dict[tuple, int] = {}
    for k in keys:
        groups[k] = groups.get(k, 0) + 1
    total = len(keys)
    h_j = entropy(groups.values())
    h_c_given_j = sum(cnt / total * math.log2(cnt) for cnt in groups.values())
    return h_j, h_c_given_j


def counting_audit(h0: Hypothesis, c0: Iterable[Concept]) -> CountingAudit:
    """Evaluate every quantity of the counting argument on one instance.

    ``c0`` is closed under complement before use (approximation does not see
    the difference).  Entropies are exact, by enumeration of all ``2^N``
    concepts.
    """
    n = h0.modulus
    c0 = with_complements(c0)
    if not c0:
        raise ValueError("C0 must be nonempty")
    for c in c0:
        if c.modulus != n:
            raise ValueError("concept modulus does not match the hypothesis")
        if not approximates(h0, c):
            raise ValueError(f"h0 does not approximate {c}")
    size0 = len(c0)

    q0 = [q for q in range(1, n) if 5 * sum(valid_answer(c, q, h0(q)) for c in c0) >= 3 * size0]
    edge_queries: dict[tuple[int, int], list[int]] = {}
    for q in q0:
        x = h0(q).x
        e = tuple(sorted((x, (x + q) % n)))
        edge_queries.setdefault(e, []).append(q)
    nonisolated = len({v for e in edge_queries for v in e})
    forest = _spanning_forest(n, [(q, tuple(sorted((h0(q).x, (h0(q).x + q) % n)))) for q in q0])
    qp = [q for _, q in forest]

    def jkey(c: Concept) -> tuple:
        return tuple(c[a] ^ c[b] for (a, b), _ in forest)

    everyone = list(all_concepts(n))
    h_all_j, h_all_cj = _conditional_entropy([jkey(c) for c in everyone])
    h0_j, h0_cj = _conditional_entropy([jkey(c) for c in c0])
    h_all_c, h0_c = float(n), math.log2(size0)
    bias = {}
    h_iq = {}
    for (a, b), q in forest:
        ones = sum(c[a] ^ c[b] for c in c0)
        p = ones / size0
        bias[q] = max(p, 1 - p)
        h_iq[q] = binary_entropy(p)
    log_ratio = math.log2(2**n / size0)
    lower = sum(1 - h_iq[q] for q in qp)

    values = {
        "log_ratio": log_ratio,
        "H_D_C": h_all_c,
        "H_D0_C": h0_c,
        "H_D_J": h_all_j,
        "H_D0_J": h0_j,
        "H_D_C_given_J": h_all_cj,
        "H_D0_C_given_J": h0_cj,
        "sum_H_D0_Iq": sum(h_iq.values()),
        "entropy_lower_bound": lower,
        "min_bias": min(bias.values()) if bias else 1.0,
        "max_edge_multiplicity": max((len(v) for v in edge_queries.values()), default=0),
        "sqrt_N_over_250": math.sqrt(n) / 250,
    }
    t = AUDIT_TOL
    checks = {
        "Q0_at_least_(N-1)/6": len(q0) >= (n - 1) / 6,
        "edge_multiplicity_at_most_2": values["max_edge_multiplicity"] <= 2,
        "E0_at_least_(N-1)/12": len(edge_queries) >= (n - 1) / 12,
        "nonisolated_at_least_sqrt(2|E0|)": nonisolated >= math.sqrt(2 * len(edge_queries)) - t,
        "sqrt(2|E0|)_at_least_sqrt((N-1)/6)": math.sqrt(2 * len(edge_queries)) >= math.sqrt((n - 1) / 6) - t,
        "forest_edges_at_least_sqrt((N-1)/24)": len(forest) >= math.sqrt((n - 1) / 24) - t,
        "chain_identity_H(C)": abs(log_ratio - (h_all_c - h0_c)) <= t,
        "chain_identity_H(C)=H(J)+H(C|J)_D": abs(h_all_c - (h_all_j + h_all_cj)) <= t,
        "chain_identity_H(C)=H(J)+H(C|J)_D0": abs(h0_c - (h0_j + h0_cj)) <= t,
        "H_D(J)_equals_|Q0'|": abs(h_all_j - len(qp)) <= t,
        "H_D(C|J)_equals_N-|Q0'|": abs(h_all_cj - (n - len(qp))) <= t,
        "H_D(C|J)_at_least_H_D0(C|J)": h_all_cj >= h0_cj - t,
        "log_ratio_at_least_H_D(J)-H_D0(J)": log_ratio >= h_all_j - h0_j - t,
        "H_D0(J)_subadditive": h0_j <= values["sum_H_D0_Iq"] + t,
        "log_ratio_at_least_sum(1-H(I_q))": log_ratio >= lower - t,
        "I_q_bias_at_least_3/5": all(b >= 3 / 5 - t for b in bias.values()),
        "H(I_q)_at_most_49/50": all(h <= 49 / 50 + t for h in h_iq.values()),
        "log_ratio_at_least_|Q0'|/50": log_ratio >= len(qp) / 50 - t,
    }
    return CountingAudit(n, h0, c0, q0, edge_queries, nonisolated, forest, values, checks)
