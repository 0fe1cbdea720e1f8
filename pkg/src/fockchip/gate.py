"""Post-selected two-qubit gate analysis.

Logical basis order is |00>, |01>, |10>, |11> (control first), index
``2 * control + target``. Gate matrices follow the amplitude convention of
:mod:`fockchip.fock`: ``G[out, in]``. Probability tables are indexed the
other way round, ``p[in, out]``, because that is how per-input rows are
read off an experiment.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import polar

from .chip import C0, C1, T0, T1
from .errors import DegenerateTableError, DimensionError, DomainError
from .fock import FockState, transition_amplitude

BASIS_LABELS = ("00", "01", "10", "11")


@dataclass(frozen=True)
class LogicalEncoding:
    """Dual-rail assignment of the control and target qubits to modes.

    ``target_swapped`` relabels the target rails at the output: logical
    target |t> is read from ``target_modes[1 - t]``. This is how the
    sigma_x permutation of the target waveguides enters the chip gate.
    """

    control_modes: tuple[int, int]
    target_modes: tuple[int, int]
    target_swapped: bool = False

    def __post_init__(self):
        modes = tuple(self.control_modes) + tuple(self.target_modes)
        if len(modes) != 4 or len(set(modes)) != 4:
            raise DimensionError(f"encoding needs four distinct modes, got {modes}")
        if min(modes) < 0:
            raise DimensionError("negative mode index in encoding")

    @classmethod
    def chip(cls) -> "LogicalEncoding":
        return cls((C0, C1), (T0, T1), target_swapped=True)

    def check(self, mode_count: int) -> None:
        if max(self.control_modes + self.target_modes) >= mode_count:
            raise DimensionError(f"encoding does not fit a {mode_count}-mode unitary")

    def input_modes(self, index: int | str) -> tuple[int, int]:
        c, t = divmod(_basis_index(index), 2)
        return self.control_modes[c], self.target_modes[t]

    def output_modes(self, index: int | str) -> tuple[int, int]:
        c, t = divmod(_basis_index(index), 2)
        if self.target_swapped:
            t = 1 - t
        return self.control_modes[c], self.target_modes[t]

    def output_index(self, control_mode: int, target_mode: int) -> int | None:
        """Logical output index for a detected (control, target) mode pair."""
        for k in range(4):
            if self.output_modes(k) == (control_mode, target_mode):
                return k
        return None


def _basis_index(state) -> int:
    if isinstance(state, str):
        if state not in BASIS_LABELS:
            raise ValueError(f"unknown logical state {state!r}")
        return BASIS_LABELS.index(state)
    idx = int(state)
    if not 0 <= idx < 4:
        raise ValueError(f"logical index {idx} outside 0..3")
    return idx


@dataclass(frozen=True)
class GateMatrix:
    entries: np.ndarray
    prefactor: float = 1.0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.complex128)
        if e.shape != (4, 4):
            raise DimensionError(f"gate matrix must be 4x4, got {e.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def normalized(self) -> np.ndarray:
        return self.entries / self.prefactor

    def closest_unitary_distance(self) -> float:
        """Max-entry distance from ``entries/prefactor`` to its polar unitary."""
        w, _ = polar(self.normalized)
        return float(np.abs(self.normalized - w).max())

    def to_dict(self) -> dict:
        return {
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
            "prefactor": float(self.prefactor),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GateMatrix":
        e = np.array([[complex(re, im) for re, im in row] for row in data["entries"]])
        return cls(e, float(data["prefactor"]))


@dataclass(frozen=True)
class ProbTable:
    """4x4 table ``p[in, out]`` of output probabilities per logical input."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (4, 4):
            raise DimensionError(f"probability table must be 4x4, got {v.shape}")
        object.__setattr__(self, "values", v)

    def row(self, state) -> np.ndarray:
        return self.values[_basis_index(state)]

    def to_dict(self) -> dict:
        return {"basis": list(BASIS_LABELS), "p": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ProbTable":
        return cls(np.array(data["p"], dtype=float))

    def csv_rows(self, phi_deg: float, source: str) -> list[list]:
        return [[phi_deg, BASIS_LABELS[i], *self.values[i].tolist(), source] for i in range(4)]


TABLE_CSV_HEADER = ("phi_deg", "input", "p00", "p01", "p10", "p11", "source")


def tables_to_csv(rows) -> str:
    """Serialize ``(phi_deg, ProbTable, source)`` triples in the sweep schema."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_CSV_HEADER)
    for phi_deg, table, source in rows:
        for r in table.csv_rows(phi_deg, source):
            w.writerow([repr(float(r[0]))] + [r[1]] + [repr(float(x)) for x in r[2:6]] + [r[6]])
    return buf.getvalue()


def tables_from_csv(text: str) -> list[tuple[float, ProbTable, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TABLE_CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    grouped: dict[tuple[float, str], np.ndarray] = {}
    order = []
    for rec in reader:
        key = (float(rec["phi_deg"]), rec["source"])
        if key not in grouped:
            grouped[key] = np.full((4, 4), np.nan)
            order.append(key)
        grouped[key][_basis_index(rec["input"])] = [float(rec[k]) for k in TABLE_CSV_HEADER[2:6]]
    return [(phi, ProbTable(grouped[(phi, src)]), src) for phi, src in order]


def ideal_gate(phi: float) -> GateMatrix:
    """Ideal tunable controlled gate; a CNOT-like gate at phi = 0."""
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return GateMatrix(np.array([
        [1j * c, 1j * s, 0, 0],
        [-1j * s, 1j * c, 0, 0],
        [0, 0, -s, c],
        [0, 0, -c, -s],
    ], dtype=np.complex128), 1.0)


def logical_amplitudes(u, enc: LogicalEncoding) -> np.ndarray:
    """Raw 4x4 post-selected amplitude block ``A[out, in]``."""
    u = np.asarray(u, dtype=np.complex128)
    n = u.shape[0]
    enc.check(n)
    block = np.empty((4, 4), dtype=np.complex128)
    for i in range(4):
        fin = FockState.from_modes(enc.input_modes(i), n)
        for o in range(4):
            fout = FockState.from_modes(enc.output_modes(o), n)
            block[o, i] = transition_amplitude(u, fin, fout)
    return block


def extract_logical_gate(u, enc: LogicalEncoding) -> GateMatrix:
    """Logical block of ``u`` with its amplitude scale.

    The prefactor is the largest singular value of the block. For an ideal
    chip all singular values coincide, so ``entries / prefactor`` is exactly
    unitary; otherwise see :meth:`GateMatrix.closest_unitary_distance`.
    """
    block = logical_amplitudes(u, enc)
    scale = float(np.linalg.svd(block, compute_uv=False)[0])
    return GateMatrix(block, scale if scale > 0 else 1.0)


def success_probability(u, enc: LogicalEncoding, state) -> float:
    block = logical_amplitudes(u, enc)
    return float(np.sum(np.abs(block[:, _basis_index(state)]) ** 2))


def raw_prob_table(u, enc: LogicalEncoding) -> np.ndarray:
    """Unnormalized ``|A[out, in]|^2`` arranged as ``[in, out]``."""
    return (np.abs(logical_amplitudes(u, enc)) ** 2).T


def normalize_rows(raw) -> ProbTable:
    raw = np.asarray(raw, dtype=float)
    sums = raw.sum(axis=1)
    if np.any(sums <= 0):
        bad = [BASIS_LABELS[i] for i in np.flatnonzero(sums <= 0)]
        raise DegenerateTableError(f"zero post-selected probability for inputs {bad}")
    return ProbTable(raw / sums[:, None])


def prob_table(u, enc: LogicalEncoding) -> ProbTable:
    """Post-selected output probabilities, renormalized per input."""
    return normalize_rows(raw_prob_table(u, enc))


def gate_prob_table(gate: GateMatrix) -> ProbTable:
    return normalize_rows((np.abs(gate.entries) ** 2).T)


def ideal_prob_table(phi: float) -> ProbTable:
    return gate_prob_table(ideal_gate(phi))


def similarity(ideal: ProbTable, measured: ProbTable) -> float:
    """Classical overlap of two 4x4 tables: (sum sqrt(I M))^2 / 16."""
    a = ideal.values if isinstance(ideal, ProbTable) else np.asarray(ideal, float)
    b = measured.values if isinstance(measured, ProbTable) else np.asarray(measured, float)
    if a.shape != (4, 4) or b.shape != (4, 4):
        raise DimensionError("similarity needs two 4x4 tables")
    if (a < 0).any() or (b < 0).any():
        raise DomainError("probability tables must be non-negative")
    return float(np.sum(np.sqrt(a * b)) ** 2 / 16.0)


def global_phase(a, b) -> complex:
    """Unit phase e^{i theta} aligning ``b`` to ``a`` at b's largest entry."""
    a = a.entries if isinstance(a, GateMatrix) else np.asarray(a, complex)
    b = b.entries if isinstance(b, GateMatrix) else np.asarray(b, complex)
    k = int(np.argmax(np.abs(b)))
    bk, ak = b.flat[k], a.flat[k]
    if bk == 0 or ak == 0:
        return 1 + 0j
    ratio = ak / bk
    return ratio / abs(ratio)


def equal_up_to_global_phase(a, b, tol: float = 1e-9) -> bool:
    am = a.entries if isinstance(a, GateMatrix) else np.asarray(a, complex)
    bm = b.entries if isinstance(b, GateMatrix) else np.asarray(b, complex)
    if am.shape != bm.shape:
        raise DimensionError(f"shape mismatch {am.shape} vs {bm.shape}")
    return bool(np.abs(am - global_phase(am, bm) * bm).max() <= tol)


def concurrence(psi) -> float:
    """Concurrence |<psi*| sy(x)sy |psi>| of a normalized two-qubit pure state."""
    psi = np.asarray(psi, dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]])
    return float(abs(psi @ np.kron(sy, sy) @ psi))


def entanglement_of_output(gate: GateMatrix, state, tol: float = 1e-9) -> float:
    """Concurrence of ``gate`` applied to a normalized two-qubit input."""
    state = np.asarray(state, dtype=np.complex128)
    if state.shape != (4,):
        raise DimensionError("input must be a 4-vector")
    if abs(np.linalg.norm(state) - 1.0) > tol:
        raise DomainError("input state is not normalized")
    out = gate.normalized @ state
    norm = np.linalg.norm(out)
    if norm == 0:
        raise DomainError("gate annihilates the input state")
    return concurrence(out / norm)
