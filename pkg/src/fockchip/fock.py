"""Fock-state bookkeeping and multi-photon transition amplitudes.

Amplitude convention: a mode unitary ``u`` maps input creation operators to
outputs as ``a_in^dag -> sum_out u[out, in] a_out^dag``, i.e. columns index
input modes and rows index output modes. Every function in the package uses
this convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import DimensionError, InvalidTransitionError

UNITARITY_TOL = 1e-10
MAX_PHOTONS = 4


@dataclass(frozen=True, order=False)
class FockState:
    """Occupation-number vector over a fixed set of modes."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        if any(n < 0 for n in occ):
            raise ValueError(f"negative occupation in {occ}")
        object.__setattr__(self, "occupations", occ)

    @classmethod
    def from_modes(cls, modes: Iterable[int], mode_count: int) -> "FockState":
        """One photon per listed mode index (repeats stack)."""
        occ = [0] * mode_count
        for m in modes:
            if not 0 <= m < mode_count:
                raise DimensionError(f"mode {m} outside 0..{mode_count - 1}")
            occ[m] += 1
        return cls(tuple(occ))

    @property
    def total_photons(self) -> int:
        return sum(self.occupations)

    @property
    def mode_count(self) -> int:
        return len(self.occupations)

    def mode_list(self) -> list[int]:
        """Mode index of each photon, repeated by occupation, ascending."""
        return [m for m, n in enumerate(self.occupations) for _ in range(n)]

    def __len__(self):
        return len(self.occupations)

    def __iter__(self):
        return iter(self.occupations)

    def __repr__(self):
        return "|" + ",".join(map(str, self.occupations)) + ">"


def permanent_naive(m) -> complex:
    """Permutation-sum definition of the permanent. O(n! n); oracle only."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"permanent needs a square matrix, got {m.shape}")
    n = m.shape[0]
    total = 0j
    for sigma in itertools.permutations(range(n)):
        prod = 1 + 0j
        for i, j in enumerate(sigma):
            prod *= m[i, j]
        total += prod
    return complex(total)


@numba.njit(cache=True)
def _ryser_gray(m):
    n = m.shape[0]
    row_sums = np.zeros(n, dtype=np.complex128)
    total = 0j
    # Gray-code walk over column subsets; each step toggles one column.
    in_set = np.zeros(n, dtype=np.bool_)
    size = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        if in_set[j]:
            in_set[j] = False
            size -= 1
            for i in range(n):
                row_sums[i] -= m[i, j]
        else:
            in_set[j] = True
            size += 1
            for i in range(n):
                row_sums[i] += m[i, j]
        prod = 1 + 0j
        for i in range(n):
            prod *= row_sums[i]
        if size % 2 == 1:
            total -= prod
        else:
            total += prod
    if n % 2 == 1:
        return -total
    return total


def permanent(m) -> complex:
    """Permanent of a square complex matrix.

    Sizes up to 3 are expanded directly; larger matrices use Ryser's
    inclusion-exclusion formula with Gray-code subset updates, O(2^n n).
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"permanent needs a square matrix, got {m.shape}")
    n = m.shape[0]
    if n == 0:
        return 1 + 0j
    if n == 1:
        return complex(m[0, 0])
    if n == 2:
        return complex(m[0, 0] * m[1, 1] + m[0, 1] * m[1, 0])
    if n == 3:
        return complex(
            m[0, 0] * (m[1, 1] * m[2, 2] + m[1, 2] * m[2, 1])
            + m[0, 1] * (m[1, 0] * m[2, 2] + m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] + m[1, 1] * m[2, 0])
        )
    return complex(_ryser_gray(np.ascontiguousarray(m)))


@lru_cache(maxsize=None)
def _fock_tuples(modes: int, photons: int) -> tuple[tuple[int, ...], ...]:
    if modes == 1:
        return ((photons,),)
    out = []
    for first in range(photons, -1, -1):
        for rest in _fock_tuples(modes - 1, photons - first):
            out.append((first,) + rest)
    return tuple(out)


def enumerate_fock_states(modes: int, photons: int) -> list[FockState]:
    """All states of ``photons`` bosons in ``modes`` modes.

    Ordered lexicographically descending in the occupation vector, so for
    two modes and two photons: (2,0), (1,1), (0,2).
    """
    if modes < 1 or photons < 0:
        raise ValueError(f"need modes >= 1 and photons >= 0, got {modes}, {photons}")
    return [FockState(t) for t in _fock_tuples(modes, photons)]


def as_unitary(u, tol: float = UNITARITY_TOL) -> np.ndarray:
    """Validate a square matrix as unitary and return it as complex128."""
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"mode unitary must be square, got {u.shape}")
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() if u.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {dev:.3g})")
    return u


def _norm_factor(state: FockState) -> int:
    return math.prod(math.factorial(n) for n in state.occupations)


def transition_amplitude(u, inp: FockState, out: FockState) -> complex:
    """<out| U |inp> for bosons: Per(U_sub) / sqrt(prod in_i! prod out_j!).

    ``U_sub`` repeats column i of ``u`` in_i times and row j out_j times.
    """
    u = np.asarray(u, dtype=np.complex128)
    dim = u.shape[0]
    if len(inp) != dim or len(out) != dim:
        raise InvalidTransitionError(
            f"states have {len(inp)} and {len(out)} modes, unitary has {dim}"
        )
    if inp.total_photons != out.total_photons:
        raise InvalidTransitionError(
            f"photon number mismatch: {inp.total_photons} -> {out.total_photons}"
        )
    sub = u[np.ix_(out.mode_list(), inp.mode_list())]
    norm = _norm_factor(inp) * _norm_factor(out)
    return permanent(sub) / math.sqrt(norm)


def output_distribution(u, inp: FockState) -> dict[FockState, float]:
    """Probability of every output Fock state for input ``inp``."""
    u = np.asarray(u, dtype=np.complex128)
    if inp.total_photons > MAX_PHOTONS:
        raise InvalidTransitionError(
            f"{inp.total_photons} photons requested, at most {MAX_PHOTONS} supported"
        )
    return {
        out: abs(transition_amplitude(u, inp, out)) ** 2
        for out in enumerate_fock_states(u.shape[0], inp.total_photons)
    }


def amplitude_vector(u, inp: FockState, basis: Sequence[FockState] | None = None) -> np.ndarray:
    """Output amplitudes over ``basis`` (default: the full ordered Fock basis)."""
    u = np.asarray(u, dtype=np.complex128)
    if basis is None:
        basis = enumerate_fock_states(u.shape[0], inp.total_photons)
    return np.array([transition_amplitude(u, inp, b) for b in basis])
