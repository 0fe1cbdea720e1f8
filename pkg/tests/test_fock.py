import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockchip.chip import ChipReflectivities, chip_unitary, coupler_unitary
from fockchip.errors import DimensionError, InvalidTransitionError
from fockchip.fock import (
    FockState, enumerate_fock_states, output_distribution, permanent, permanent_naive,
    transition_amplitude,
)
from oracles import naive_permanent, random_unitary, two_photon_amplitude


def test_permanent_small_cases():
    assert permanent([[2.5 - 1j]]) == 2.5 - 1j
    a, b, c, d = 1 + 2j, -0.5j, 3.0, 0.25 + 1j
    assert permanent([[a, b], [c, d]]) == pytest.approx(a * d + b * c)
    assert permanent(np.ones((3, 3))) == pytest.approx(6.0)
    assert permanent(np.zeros((0, 0))) == 1


def test_permanent_rejects_non_square():
    with pytest.raises(DimensionError):
        permanent(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        permanent_naive(np.ones(3))


def test_permanent_random_4x4_against_permutation_sum():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    expected = naive_permanent(m)
    assert abs(permanent(m) - expected) < 1e-12 * max(1.0, abs(expected))


@pytest.mark.parametrize("n", [4, 6, 8])
def test_permanent_of_ones_is_factorial(n):
    assert permanent(np.ones((n, n))) == pytest.approx(math.factorial(n), rel=1e-12)


def test_permanent_identity_and_diagonal():
    d = np.diag([1 + 1j, 2, -3j, 0.5, 4, 1j, 2])
    assert permanent(d) == pytest.approx(np.prod(np.diag(d)))


complex_entries = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(
    lambda n: st.lists(complex_entries, min_size=n * n, max_size=n * n).map(
        lambda xs: np.array(xs, dtype=complex).reshape(n, n))))
def test_permanent_matches_oracle_property(m):
    assert abs(permanent(m) - naive_permanent(m)) <= 1e-10 * max(1.0, np.abs(m).max() ** len(m))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 4))
def test_permanent_invariant_under_row_and_column_permutation(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    p = rng.permutation(n)
    q = rng.permutation(n)
    assert permanent(m[p][:, q]) == pytest.approx(permanent(m), rel=1e-10, abs=1e-10)


def test_enumerate_small():
    assert [s.occupations for s in enumerate_fock_states(2, 1)] == [(1, 0), (0, 1)]
    assert [s.occupations for s in enumerate_fock_states(2, 2)] == [(2, 0), (1, 1), (0, 2)]
    assert len(enumerate_fock_states(6, 2)) == 21


@pytest.mark.parametrize("modes,photons", [(1, 0), (1, 3), (3, 3), (6, 2), (4, 4), (5, 1)])
def test_enumerate_is_complete_sorted_and_unique(modes, photons):
    states = enumerate_fock_states(modes, photons)
    assert len(states) == math.comb(photons + modes - 1, modes - 1)
    occ = [s.occupations for s in states]
    assert occ == sorted(occ, reverse=True)
    assert len(set(occ)) == len(occ)
    assert all(s.total_photons == photons and len(s) == modes for s in states)


def test_enumerate_rejects_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_fock_states(0, 1)
    with pytest.raises(ValueError):
        enumerate_fock_states(2, -1)


def test_fock_state_basics():
    s = FockState((0, 2, 1))
    assert s.total_photons == 3
    assert s.mode_list() == [1, 1, 2]
    assert s == FockState([0, 2, 1])
    assert s != FockState((0, 2, 1, 0))
    assert FockState.from_modes([2, 1, 1], 3) == s
    with pytest.raises(ValueError):
        FockState((1, -1))


def test_identity_amplitude():
    s = FockState((1, 1, 0, 0, 0, 0))
    assert transition_amplitude(np.eye(6), s, s) == pytest.approx(1.0)


def test_balanced_coupler_suppresses_coincidences():
    s = FockState((1, 1))
    assert abs(transition_amplitude(coupler_unitary(0.5), s, s)) < 1e-15


def test_one_third_coupler_coincidence_amplitude():
    s = FockState((1, 1))
    # Column/row expansion of the 2x2 permanent: eta - (1 - eta).
    assert transition_amplitude(coupler_unitary(1 / 3), s, s) == pytest.approx(-1 / 3)


def test_amplitude_photon_number_mismatch():
    with pytest.raises(InvalidTransitionError):
        transition_amplitude(np.eye(2), FockState((1, 1)), FockState((1, 0)))
    with pytest.raises(InvalidTransitionError):
        transition_amplitude(np.eye(2), FockState((1, 1)), FockState((1, 1, 0)))


def test_bunching_distribution():
    dist = output_distribution(coupler_unitary(0.5), FockState((1, 1)))
    assert dist[FockState((2, 0))] == pytest.approx(0.5)
    assert dist[FockState((0, 2))] == pytest.approx(0.5)
    assert dist[FockState((1, 1))] == pytest.approx(0.0, abs=1e-15)


def test_identity_distribution_is_deterministic():
    s = FockState((0, 1, 0, 0, 1, 0))
    dist = output_distribution(np.eye(6), s)
    assert dist[s] == pytest.approx(1.0)
    assert sum(dist.values()) == pytest.approx(1.0)


@pytest.mark.parametrize("r", [ChipReflectivities.design(), ChipReflectivities.measured()])
def test_chip_distribution_sums_to_one(r):
    u = chip_unitary(r, 0.9)
    for pair in itertools.combinations(range(6), 2):
        dist = output_distribution(u, FockState.from_modes(pair, 6))
        assert abs(sum(dist.values()) - 1) < 1e-9


def test_too_many_photons_rejected():
    with pytest.raises(InvalidTransitionError):
        output_distribution(np.eye(5), FockState((1, 1, 1, 1, 1)))


@pytest.mark.parametrize("photons", [1, 2, 3, 4])
def test_probability_conservation_random_unitary(photons):
    rng = np.random.default_rng(photons)
    u = random_unitary(4, rng)
    for inp in enumerate_fock_states(4, photons):
        assert abs(sum(output_distribution(u, inp).values()) - 1) < 1e-9


def test_two_photon_amplitudes_match_symmetrized_tensor_product():
    rng = np.random.default_rng(11)
    u = random_unitary(5, rng)
    for inp in enumerate_fock_states(5, 2):
        for out in enumerate_fock_states(5, 2):
            ref = two_photon_amplitude(u, inp.mode_list(), out.mode_list())
            assert abs(transition_amplitude(u, inp, out) - ref) < 1e-12


@pytest.mark.parametrize("modes", [2, 3, 4])
def test_amplitudes_compose_through_intermediate_states(modes):
    rng = np.random.default_rng(modes)
    u1, u2 = random_unitary(modes, rng), random_unitary(modes, rng)
    basis = enumerate_fock_states(modes, 2)
    for inp in basis:
        for out in basis:
            chained = sum(transition_amplitude(u2, mid, out) * transition_amplitude(u1, inp, mid)
                          for mid in basis)
            assert abs(transition_amplitude(u2 @ u1, inp, out) - chained) < 1e-12
