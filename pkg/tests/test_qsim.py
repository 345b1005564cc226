import math

import numpy as np
import pytest

from oracles import dense_example, dense_pm_probabilities
from pqlab.concepts import Concept, all_concepts
from pqlab.modmath import build_matching
from pqlab.qsim import (
    COMPLETION,
    MeasurementError,
    StateVector,
    branch_total,
    distinguish_parity,
    equal_up_to_phase,
    matching_branches,
    measure_computational,
    measure_matching,
    measure_pm_basis,
    pm_branches,
    prepare_example,
    prepare_phase_example,
    shift_transform,
    state_from_signs,
    x_branches,
)


def test_example_state_for_n3():
    s = prepare_example(Concept.from_string("010"))
    assert len(s.support()) == 6
    amp = 1 / math.sqrt(6)
    assert s.amplitude(1, 0, 1) == pytest.approx(amp)
    assert s.amplitude(2, 0, 0) == pytest.approx(amp)
    assert s.amplitude(1, 0, 0) == 0


@pytest.mark.parametrize("n", [3, 5])
def test_example_matches_dense_construction(n):
    for c in all_concepts(n):
        assert np.allclose(prepare_example(c).amps.ravel(), dense_example(c.bits), atol=1e-12)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_pm_probabilities_match_projector_oracle(n):
    rng = np.random.default_rng(1)
    for _ in range(10):
        c = Concept.random(n, rng)
        want = dense_pm_probabilities(dense_example(c.bits), n)
        got = {b.label: b.probability for b in pm_branches(prepare_example(c))}
        assert got["+"] == pytest.approx(want["+"], abs=1e-12)
        assert got["-"] == pytest.approx(want["-"], abs=1e-12)
        assert want["-"] == pytest.approx(0.5, abs=1e-12)


def test_zero_concept_example():
    s = prepare_example(Concept.from_string("00000"))
    labels = [b.label for b in pm_branches(s)]
    assert labels == ["+", "-"]
    minus = [b for b in pm_branches(s) if b.label == "-"][0]
    assert all(b.probability == pytest.approx(0.2) for b in x_branches(minus.post_state))


@pytest.mark.parametrize("n", [3, 5, 7])
def test_branch_probabilities_sum_to_one(n):
    rng = np.random.default_rng(2)
    for _ in range(10):
        c = Concept.random(n, rng)
        minus = [b for b in pm_branches(prepare_example(c)) if b.label == "-"][0]
        assert branch_total(pm_branches(prepare_example(c))) == pytest.approx(1, abs=1e-12)
        xs = x_branches(minus.post_state)
        assert branch_total(xs) == pytest.approx(1, abs=1e-12)
        for xb in xs:
            z = shift_transform(xb.post_state, xb.label)
            for q in range(1, n):
                mb = matching_branches(z, build_matching(n, xb.label, q))
                assert branch_total(mb) == pytest.approx(1, abs=1e-12)
                assert all(b.label != COMPLETION for b in mb)


def test_minus_state_matches_sign_pattern():
    c = Concept.from_string("01011")
    minus = [b for b in pm_branches(prepare_example(c)) if b.label == "-"][0]
    x0 = 3
    xb = [b for b in x_branches(minus.post_state) if b.label == x0][0]
    z = shift_transform(xb.post_state, x0)
    assert equal_up_to_phase(z, state_from_signs(5, x0, c.bits))


def test_phase_example_matches_sign_pattern():
    c = Concept.from_string("0110100")
    for xb in x_branches(prepare_phase_example(c)):
        z = shift_transform(xb.post_state, xb.label)
        assert equal_up_to_phase(z, state_from_signs(7, xb.label, c.bits))


def test_distinguish_parity_on_edge_states():
    plus = StateVector.normalised("z", 5, np.array([0, 1, 1, 0, 0]))
    minus = StateVector.normalised("z", 5, np.array([0, 1j, -1j, 0, 0]))
    assert distinguish_parity(plus, (1, 2)) == 0
    assert distinguish_parity(minus, (1, 2)) == 1
    skew = StateVector.normalised("z", 5, np.array([0, 1, 0.5, 0, 0]))
    with pytest.raises(MeasurementError):
        distinguish_parity(skew, (1, 2))


def test_completion_outcome_raises_in_sampled_mode():
    s = StateVector.normalised("z", 3, np.array([1, 0, 0]))
    m = build_matching(3, 0, 1)
    with pytest.raises(MeasurementError):
        measure_matching(s, m, np.random.default_rng(0))
    assert [b.label for b in matching_branches(s, m)] == [COMPLETION]


def test_state_validation():
    with pytest.raises(ValueError):
        StateVector("z", 3, np.array([1, 1, 0], dtype=complex))
    with pytest.raises(ValueError):
        StateVector("jx", 3, np.ones(3, dtype=complex) / math.sqrt(3))
    s = StateVector.normalised("z", 3, np.array([1, 1, 0]))
    with pytest.raises(ValueError):
        s.amps[0] = 0


def test_shift_rejects_mixed_x():
    with pytest.raises(ValueError):
        shift_transform(prepare_phase_example(Concept.from_string("010")), 0)


def test_sampled_measurements_follow_born_rule():
    rng = np.random.default_rng(3)
    s = prepare_example(Concept.from_string("01011"))
    minus = sum(measure_pm_basis(s, rng).label == "-" for _ in range(4000))
    assert abs(minus - 2000) < 3 * math.sqrt(1000)
    xs = [measure_computational(prepare_phase_example(Concept.from_string("010")), rng).label for _ in range(3000)]
    counts = np.bincount(xs, minlength=3)
    assert np.all(np.abs(counts - 1000) < 4 * math.sqrt(3000 * 2 / 9))
    with pytest.raises(ValueError):
        measure_computational(s, rng, register="j")


def test_json_dump_lists_support():
    s = state_from_signs(3, 0, (0, 1, 0))
    assert '"kind": "z"' in s.to_json()
    assert len(s.support()) == 2
