import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import parity
from pqlab.concepts import (
    Answer,
    Concept,
    Hypothesis,
    all_answers,
    all_concepts,
    approx_threshold,
    approximates,
    concept_classes,
    relation_of,
    valid_answer,
)


def test_valid_answer_examples():
    assert valid_answer(Concept.from_string("01011"), 1, Answer(2, 1))
    assert not valid_answer(Concept.from_string("010"), 2, Answer(0, 1))
    zero = Concept.from_string("00000")
    assert all(valid_answer(zero, q, Answer(x, 0)) for q in range(1, 5) for x in range(5))


@pytest.mark.parametrize("q", [0, 5, -1])
def test_valid_answer_rejects_bad_query(q):
    with pytest.raises(ValueError):
        valid_answer(Concept.from_string("01011"), q, Answer(0, 0))


def test_relation_of_example():
    rel = relation_of(Concept.from_string("010"))
    assert rel == {(1, 0, 1), (1, 1, 1), (1, 2, 0), (2, 0, 0), (2, 1, 1), (2, 2, 1)}
    zero = relation_of(Concept.from_string("00000"))
    assert len(zero) == 20 and all(b == 0 for _, _, b in zero)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_relation_is_complement_invariant_exhaustive(n):
    for c in all_concepts(n):
        rel = relation_of(c)
        assert len(rel) == (n - 1) * n
        assert rel == relation_of(c.complement())


@given(st.sampled_from([11, 13]), st.integers(0, 2**13 - 1))
def test_relation_complement_invariance_sampled(n, v):
    c = Concept.from_int(n, v % 2**n)
    assert relation_of(c) == relation_of(c.complement())


@pytest.mark.parametrize("n", [3, 5, 7, 11, 13])
def test_exactly_n_valid_answers_per_query(n):
    rng = np.random.default_rng(n)
    concepts = list(all_concepts(n)) if n <= 7 else [Concept.random(n, rng) for _ in range(50)]
    for c in concepts:
        for q in range(1, n):
            valid = [a for a in all_answers(n) if valid_answer(c, q, a)]
            assert len(valid) == n
            assert {a.x for a in valid} == set(range(n))


def test_valid_answer_agrees_with_parity_oracle():
    for c in all_concepts(5):
        for q in range(1, 5):
            for x, b in itertools.product(range(5), (0, 1)):
                assert valid_answer(c, q, Answer(x, b)) == (parity(c.bits, x, q) == b)


def test_approximates_examples():
    h = Hypothesis.from_pairs(3, [(0, 0), (0, 0)])
    assert approximates(h, Concept.from_string("000"))
    assert not approximates(h, Concept.from_string("010"))
    c = Concept.from_string("01011")
    perfect = Hypothesis(5, {q: Answer(x, b) for q, x, b in relation_of(c) if x == 3})
    assert approximates(perfect, c)


def test_approximates_rejects_mismatched_modulus():
    with pytest.raises(ValueError):
        approximates(Hypothesis.from_pairs(3, [(0, 0), (0, 0)]), Concept.from_string("00000"))


@pytest.mark.parametrize("n,thr", [(3, 2), (5, 3), (7, 4), (11, 7), (13, 8)])
def test_threshold_is_two_thirds_rounded_up(n, thr):
    assert approx_threshold(n) == thr
    assert 3 * thr >= 2 * (n - 1) > 3 * (thr - 1)


@given(st.integers(0, 31), st.lists(st.tuples(st.integers(0, 4), st.integers(0, 1)), min_size=4, max_size=4), st.integers(1, 4))
def test_fixing_an_answer_never_breaks_approximation(v, pairs, q):
    c = Concept.from_int(5, v)
    h = Hypothesis.from_pairs(5, pairs)
    fixed = dict(h.table)
    x = pairs[q - 1][0]
    fixed[q] = Answer(x, c.parity(x, q))
    if approximates(h, c):
        assert approximates(Hypothesis(5, fixed), c)


def test_concept_validation_and_serialisation():
    with pytest.raises(ValueError):
        Concept.from_string("0101")
    with pytest.raises(ValueError):
        Concept(5, (0, 1, 2, 0, 0))
    c = Concept.from_string("01011")
    assert Concept.from_json(c.to_json()) == c
    assert c.to_json() == {"N": 5, "bits": "01011"}
    assert Concept.from_int(5, c.to_int()) == c
    assert c.canonical() == c and c.complement().canonical() == c


def test_hypothesis_must_be_total():
    with pytest.raises(ValueError):
        Hypothesis(3, {1: Answer(0, 0)})
    with pytest.raises(ValueError):
        Hypothesis.from_pairs(3, [(0, 0), (3, 0)])


def test_concept_classes_are_complement_representatives():
    classes = concept_classes(5)
    assert len(classes) == 16
    assert all(c.bits[0] == 0 for c in classes)
    assert {c.to_int() for c in classes} | {c.complement().to_int() for c in classes} == set(range(32))
