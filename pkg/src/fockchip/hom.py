"""Hong-Ou-Mandel interference: visibility law, dip curves and dip fitting.

Delays at the public interface are optical path differences in meters;
:func:`overlap` itself works in seconds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitError
from .fock import FockState, transition_amplitude

SPEED_OF_LIGHT = 299_792_458.0
_SHAPES = ("gaussian", "rect", "gaussian_times_rect")
# Product of filter bandwidth and Gaussian coherence time, sqrt(ln 2)/pi,
# fixed by matching a Gaussian spectrum of the same FWHM.
_SINC_SCALE = math.sqrt(math.log(2.0))


def visibility(eta: float) -> float:
    """Ideal dip visibility of a coupler with reflectivity ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"reflectivity {eta} outside [0, 1]")
    if eta in (0.0, 1.0):
        raise DomainError("no coincidence baseline at eta = 0 or 1")
    return 1.0 - (2 * eta - 1) ** 2 / (eta**2 + (eta - 1) ** 2)


def coincidence_probability(eta: float, x: float) -> float:
    """Coincidence probability at a coupler for mode overlap ``x``.

    Interpolates between distinguishable photons (x = 0) and
    indistinguishable ones (x = 1): the indistinguishable part is weighted
    by x^2.
    """
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"reflectivity {eta} outside [0, 1]")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"overlap {x} outside [0, 1]")
    x2 = x * x
    return (1 - x2) * (eta**2 + (1 - eta) ** 2) + x2 * (2 * eta - 1) ** 2


def network_coincidence_probability(u, inputs: tuple[int, int], outputs: tuple[int, int],
                                    x: float) -> float:
    """Same interpolation for one photon in each input mode of an arbitrary network.

    Outputs must be two distinct modes.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"overlap {x} outside [0, 1]")
    u = np.asarray(u, dtype=np.complex128)
    n = u.shape[0]
    (i, j), (k, l) = inputs, outputs
    quantum = abs(transition_amplitude(
        u, FockState.from_modes(inputs, n), FockState.from_modes(outputs, n))) ** 2
    classical = (abs(u[k, i]) ** 2 * abs(u[l, j]) ** 2
                 + abs(u[l, i]) ** 2 * abs(u[k, j]) ** 2)
    return (1 - x * x) * classical + x * x * quantum


@dataclass(frozen=True)
class WavepacketModel:
    """Single-photon spectrum set by a bandpass filter."""

    center_wavelength: float = 810e-9
    filter_fwhm: float = 2e-9
    shape: str = "gaussian"

    def __post_init__(self):
        if self.filter_fwhm <= 0 or self.center_wavelength <= 0:
            raise DomainError("wavelength and filter width must be positive")
        if self.shape not in _SHAPES:
            raise ValueError(f"shape must be one of {_SHAPES}")

    @property
    def bandwidth_hz(self) -> float:
        return SPEED_OF_LIGHT * self.filter_fwhm / self.center_wavelength**2

    @property
    def coherence_time(self) -> float:
        """RMS width sigma_tau of the Gaussian overlap exp(-tau^2 / 2 sigma_tau^2)."""
        sigma_nu = self.bandwidth_hz / (2 * math.sqrt(2 * math.log(2)))
        return 1.0 / (2 * math.sqrt(2) * math.pi * sigma_nu)

    @property
    def coherence_length(self) -> float:
        """lambda^2 / delta-lambda, the characteristic dip width in path length."""
        return self.center_wavelength**2 / self.filter_fwhm


def _shape_profile(shape: str, z):
    """Overlap as a function of delay in units of the coherence time."""
    z = np.asarray(z, dtype=float)
    if shape == "gaussian":
        return np.exp(-0.5 * z * z)
    arg = _SINC_SCALE * z
    sinc2 = np.sinc(arg / math.pi) ** 2
    if shape == "rect":
        return sinc2
    return np.exp(-0.5 * z * z) * sinc2


def overlap(model: WavepacketModel, tau):
    """|normalized Fourier transform of the filter|^2 at delay ``tau`` (s)."""
    val = _shape_profile(model.shape, np.asarray(tau, float) / model.coherence_time)
    return float(val) if np.ndim(val) == 0 else val


def dip_curve(eta: float, model: WavepacketModel, visibility_scale: float,
              baseline: float, delays: Sequence[float], center: float = 0.0) -> np.ndarray:
    """Coincidence rate versus path delay (m) at a single coupler.

    ``visibility_scale`` is the source-limited overlap V0; the dip depth is
    ``V0 * visibility(eta)``.
    """
    if not 0.0 <= visibility_scale <= 1.0:
        raise DomainError("visibility scale outside [0, 1]")
    if baseline <= 0:
        raise DomainError("baseline rate must be positive")
    tau = (np.asarray(delays, float) - center) / SPEED_OF_LIGHT
    x2 = visibility_scale * np.asarray(overlap(model, tau))
    dist = coincidence_probability(eta, 0.0)
    indist = coincidence_probability(eta, 1.0)
    return baseline * ((1 - x2) * dist + x2 * indist) / dist


def network_dip_curve(u, inputs, outputs, model: WavepacketModel, visibility_scale: float,
                      reference_rate: float, delays, center: float = 0.0) -> np.ndarray:
    """Coincidence rate between ``outputs`` for photons injected at ``inputs``.

    ``reference_rate`` is the distinguishable-photon rate the network would
    give if its coincidence probability were 1.
    """
    if not 0.0 <= visibility_scale <= 1.0:
        raise DomainError("visibility scale outside [0, 1]")
    tau = (np.asarray(delays, float) - center) / SPEED_OF_LIGHT
    x2 = visibility_scale * np.asarray(overlap(model, tau))
    dist = network_coincidence_probability(u, inputs, outputs, 0.0)
    indist = network_coincidence_probability(u, inputs, outputs, 1.0)
    return reference_rate * ((1 - x2) * dist + x2 * indist)


@dataclass
class DipFit:
    visibility: float
    width: float
    baseline_rate: float
    center: float
    residual: float
    shape: str = "gaussian"
    stderr: dict = field(default_factory=dict)
    width_uncertain: bool = False
    nfev: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def dip_model(delays, baseline, vis, width, center, shape="gaussian"):
    """R0 (1 - V g((d - center) / width)) with g the normalized overlap profile."""
    z = (np.asarray(delays, float) - center) / width
    return baseline * (1.0 - vis * _shape_profile(shape, z))


def fit_dip(samples, shape: str = "gaussian", max_nfev: int = 2000,
            sigma=None) -> DipFit:
    """Least-squares fit of (delay_m, rate) samples to :func:`dip_model`.

    ``width`` is the coherence time times c, i.e. the path-length RMS width
    for the Gaussian profile. ``sigma`` optionally weights the residuals.
    """
    if shape not in _SHAPES:
        raise ValueError(f"shape must be one of {_SHAPES}")
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 6:
        raise FitError("need at least 6 (delay, rate) samples")
    d, y = data[:, 0], data[:, 1]
    order = np.argsort(d)
    d, y = d[order], y[order]
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, float)[order]

    span = float(d[-1] - d[0])
    if span <= 0:
        raise FitError("delays do not span a range")
    edge = max(2, len(y) // 6)
    r0 = float(np.mean(np.concatenate([y[:edge], y[-edge:]])))
    if r0 <= 0:
        raise FitError("non-positive baseline estimate", {"baseline": r0})
    kmin = int(np.argmin(y))
    v0 = float(np.clip(1.0 - y[kmin] / r0, 1e-3, 1.0))
    half = r0 * (1 - v0 / 2)
    below = d[y < half]
    w0 = (below[-1] - below[0]) / 2.355 if below.size >= 2 else span / 10
    w0 = max(w0, span / (4 * len(d)))
    start = np.array([r0, v0, w0, d[kmin]])

    def resid(p):
        return w * (dip_model(d, p[0], p[1], p[2], p[3], shape) - y)

    lower = [0.0, 0.0, span * 1e-6, d[0] - span]
    upper = [np.inf, 1.0, 10 * span, d[-1] + span]
    sol = least_squares(resid, start, bounds=(lower, upper), x_scale="jac",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if sol.status <= 0:
        raise FitError("dip fit did not converge",
                       {"message": sol.message, "nfev": sol.nfev, "x": sol.x.tolist()})

    baseline, vis, width, center = (float(v) for v in sol.x)
    dof = max(1, len(y) - 4)
    s2 = float(sol.fun @ sol.fun) / dof
    jtj = sol.jac.T @ sol.jac
    names = ("baseline_rate", "visibility", "width", "center")
    try:
        if np.linalg.cond(jtj) > 1e14:
            raise np.linalg.LinAlgError
        cov = np.linalg.inv(jtj) * s2
        stderr = {k: float(math.sqrt(max(cov[i, i], 0.0))) for i, k in enumerate(names)}
    except np.linalg.LinAlgError:
        stderr = {k: math.inf for k in names}
    width_uncertain = (not math.isfinite(stderr["width"])) or stderr["width"] > 0.5 * width
    return DipFit(
        visibility=vis, width=width, baseline_rate=baseline, center=center,
        residual=float(np.linalg.norm(sol.fun)), shape=shape, stderr=stderr,
        width_uncertain=bool(width_uncertain), nfev=int(sol.nfev),
    )
