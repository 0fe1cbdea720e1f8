"""Element-level description of the six-waveguide chip and its unitary.

Mode order used throughout: V_A, C0, C1, T0, T1, V_B (indices 0-5).
Elements in a :class:`CircuitSpec` are listed in propagation order; the
first element acts on the input state first.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import least_squares

from .errors import DimensionError, DomainError, FitError

V_A, C0, C1, T0, T1, V_B = range(6)
MODE_NAMES = ("V_A", "C0", "C1", "T0", "T1", "V_B")
CHIP_MODES = 6

# Mode carrying the thermal phase shifter and the sign of its phase. With
# this choice the post-selected logical block equals the ideal gate up to a
# global phase for every phi (checked in tests/test_gate.py).
PHASE_MODE = T1
PHASE_SIGN = +1


@dataclass(frozen=True)
class CouplerElement:
    mode_a: int
    mode_b: int
    eta: float

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise DimensionError("coupler needs two distinct modes")
        if self.mode_a < 0 or self.mode_b < 0:
            raise DimensionError("negative mode index")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"reflectivity {self.eta} outside [0, 1]")

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode_a, self.mode_b)


@dataclass(frozen=True)
class PhaseElement:
    mode: int
    phi: float

    def __post_init__(self):
        if self.mode < 0:
            raise DimensionError("negative mode index")

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode,)


Element = Union[CouplerElement, PhaseElement]


@dataclass(frozen=True)
class CircuitSpec:
    mode_count: int
    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.mode_count < 1:
            raise DimensionError("circuit needs at least one mode")
        for el in self.elements:
            if max(el.modes) >= self.mode_count:
                raise DimensionError(f"{el} references a mode >= {self.mode_count}")

    def to_dict(self) -> dict:
        els = []
        for el in self.elements:
            if isinstance(el, CouplerElement):
                els.append({"type": "coupler", "a": el.mode_a, "b": el.mode_b, "eta": el.eta})
            else:
                els.append({"type": "phase", "mode": el.mode, "phi": el.phi})
        return {"modes": self.mode_count, "elements": els}

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitSpec":
        els: list[Element] = []
        for raw in data["elements"]:
            kind = raw.get("type")
            if kind == "coupler":
                els.append(CouplerElement(int(raw["a"]), int(raw["b"]), float(raw["eta"])))
            elif kind == "phase":
                els.append(PhaseElement(int(raw["mode"]), float(raw["phi"])))
            else:
                raise ValueError(f"unknown element type {kind!r}")
        return cls(int(data["modes"]), tuple(els))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ChipReflectivities:
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    # Quoted one-sigma uncertainties; reporting only.
    uncertainties: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("eta1", "eta2", "eta3", "eta4", "eta5"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")

    @classmethod
    def design(cls) -> "ChipReflectivities":
        return cls(1 / 3, 1 / 2, 1 / 2, 1 / 3, 1 / 3)

    @classmethod
    def measured(cls) -> "ChipReflectivities":
        return cls(0.324, 0.435, 0.469, 0.317, 0.298,
                   uncertainties=(0.008, 0.015, 0.009, 0.007, 0.012))

    def as_tuple(self) -> tuple[float, ...]:
        return (self.eta1, self.eta2, self.eta3, self.eta4, self.eta5)

    def to_dict(self) -> dict:
        d = {f"eta{i + 1}": v for i, v in enumerate(self.as_tuple())}
        if self.uncertainties is not None:
            d["uncertainties"] = list(self.uncertainties)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ChipReflectivities":
        unc = data.get("uncertainties")
        return cls(*(float(data[f"eta{i}"]) for i in range(1, 6)),
                   uncertainties=tuple(unc) if unc is not None else None)


def coupler_unitary(eta: float) -> np.ndarray:
    """2x2 directional coupler with same-waveguide power fraction ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"reflectivity {eta} outside [0, 1]")
    r = math.sqrt(eta)
    t = 1j * math.sqrt(1.0 - eta)
    return np.array([[r, t], [t, r]], dtype=np.complex128)


def embed(element: Element, mode_count: int) -> np.ndarray:
    """Full ``mode_count`` x ``mode_count`` unitary of a single element."""
    if max(element.modes) >= mode_count:
        raise DimensionError(f"{element} does not fit in {mode_count} modes")
    u = np.eye(mode_count, dtype=np.complex128)
    if isinstance(element, PhaseElement):
        u[element.mode, element.mode] = np.exp(1j * element.phi)
    else:
        idx = [element.mode_a, element.mode_b]
        u[np.ix_(idx, idx)] = coupler_unitary(element.eta)
    return u


def compose(spec: CircuitSpec) -> np.ndarray:
    u = np.eye(spec.mode_count, dtype=np.complex128)
    for el in spec.elements:
        u = embed(el, spec.mode_count) @ u
    return u


def standard_chip(r: ChipReflectivities, phi: float) -> CircuitSpec:
    """The reconfigurable six-mode gate at phase ``phi`` (radians)."""
    return CircuitSpec(CHIP_MODES, (
        CouplerElement(T0, T1, r.eta2),
        PhaseElement(PHASE_MODE, PHASE_SIGN * phi),
        CouplerElement(C1, T0, r.eta1),
        CouplerElement(C0, V_A, r.eta5),
        CouplerElement(T1, V_B, r.eta4),
        CouplerElement(T0, T1, r.eta3),
    ))


def chip_unitary(r: ChipReflectivities | None = None, phi: float = 0.0) -> np.ndarray:
    return compose(standard_chip(r or ChipReflectivities.design(), phi))


@dataclass(frozen=True)
class PhaseCalibration:
    """Thermal phase-shifter model phi(v) = phi0 + alpha v^2."""

    phi0: float
    alpha: float
    v_max: float = 7.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseCalibration":
        return cls(float(data["phi0"]), float(data["alpha"]), float(data.get("v_max", 7.0)))


def phase_from_voltage(c: PhaseCalibration, v: float) -> float:
    if not 0.0 <= v <= c.v_max:
        raise DomainError(f"voltage {v} outside [0, {c.v_max}]")
    return c.phi0 + c.alpha * v * v


@dataclass(frozen=True)
class CalibrationFit:
    calibration: PhaseCalibration
    offset: float
    amplitude: float
    residual: float
    n_samples: int

    def to_dict(self) -> dict:
        d = self.calibration.to_dict()
        d.update(offset=self.offset, amplitude=self.amplitude,
                 residual=self.residual, n_samples=self.n_samples)
        return d


def _linear_fringe(alpha, v2, y):
    # y = A + Bc cos(alpha v^2) - Bs sin(alpha v^2) is linear in (A, Bc, Bs).
    x = alpha * v2
    design = np.column_stack([np.ones_like(x), np.cos(x), -np.sin(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, float(resid @ resid)


def fit_calibration(samples, v_max: float | None = None,
                    alpha_max: float | None = None) -> CalibrationFit:
    """Fit ``signal = A + B cos(phi0 + alpha v^2)`` to (volts, signal) pairs.

    For fixed alpha the model is linear in (A, B cos phi0, B sin phi0), so a
    dense alpha scan with linear solves gives the starting point and a
    nonlinear least-squares polish finishes it.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 4:
        raise FitError("need at least 4 (volts, signal) samples")
    v, y = data[:, 0], data[:, 1]
    spread = np.ptp(y)
    if spread <= 1e-12 * max(1.0, np.abs(y).max()):
        raise FitError("signal is constant; no fringe to fit")
    v2 = v * v
    vmax = float(v.max()) if v_max is None else float(v_max)
    if alpha_max is None:
        # Nyquist-style bound from the sampling of v^2.
        dv2 = np.diff(np.sort(v2))
        dv2 = dv2[dv2 > 0]
        if dv2.size == 0:
            raise FitError("all samples at the same voltage")
        alpha_max = math.pi / float(np.median(dv2))
    alphas = np.linspace(0.0, alpha_max, 4000)[1:]
    costs = np.array([_linear_fringe(a, v2, y)[1] for a in alphas])
    best = alphas[int(np.argmin(costs))]
    (a0, bc, bs), _ = _linear_fringe(best, v2, y)

    def resid(p):
        return p[0] + p[1] * np.cos(p[2] + p[3] * v2) - y

    start = [a0, math.hypot(bc, bs), math.atan2(bs, bc), best]
    sol = least_squares(resid, start, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    if not sol.success:
        raise FitError("fringe fit did not converge", {"message": sol.message})
    offset, amp, phi0, alpha = sol.x
    if amp < 0:
        amp, phi0 = -amp, phi0 + math.pi
    if amp <= 1e-9 * spread:
        raise FitError("fitted fringe amplitude is zero")
    phi0 = math.remainder(phi0, 2 * math.pi)
    return CalibrationFit(
        calibration=PhaseCalibration(phi0, float(alpha), vmax),
        offset=float(offset),
        amplitude=float(amp),
        residual=float(np.linalg.norm(sol.fun)),
        n_samples=int(len(v)),
    )
