"""Monte-Carlo emulation of the photon-pair experiment.

Timestamps are integer picoseconds on a 100 ps grid. A coincidence window
``w`` is the full width of the acceptance interval: two clicks coincide when
``|t_a - t_b| <= w / 2``, so uncorrelated channels at rates R1, R2 give
R1 * R2 * w accidentals per second.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .chip import ChipReflectivities, chip_unitary
from .errors import DomainError, StreamOrderError
from .fock import FockState, output_distribution
from .gate import LogicalEncoding, ProbTable, raw_prob_table

MAX_CHANNELS = 16
PS = 1e12


@dataclass(frozen=True)
class SourceModel:
    """Photon-pair source plus the lossy path to the detectors.

    ``pair_rate`` is the detected-pair rate the source would give when
    connected straight to the detectors (11000 /s in the reference setup),
    so detector efficiency is already inside it unless
    ``detector_in_pair_rate`` is False. ``unpaired_rate`` adds uncorrelated
    photons per input port (detected singles minus pairs; 69000 /s
    reproduces the 80000 /s singles of the reference source).
    """

    pair_rate: float = 11000.0
    multipair_prob: float = 0.005
    coupling: float | tuple[float, ...] = 0.65
    detector_efficiency: float = 0.5
    detector_in_pair_rate: bool = True
    coincidence_window: float = 4e-9
    duty_cycle: tuple[float, float] | None = (1.0, 5.0)
    dark_count_rate: float = 0.0
    unpaired_rate: float = 0.0
    timing_resolution: float = 100e-12

    def __post_init__(self):
        if self.pair_rate < 0 or self.unpaired_rate < 0 or self.dark_count_rate < 0:
            raise DomainError("rates must be non-negative")
        if not 0.0 <= self.multipair_prob <= 1.0:
            raise DomainError("multipair_prob outside [0, 1]")
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise DomainError("detector_efficiency outside [0, 1]")
        coupling = self.coupling
        if isinstance(coupling, (list, tuple, np.ndarray)):
            coupling = tuple(float(c) for c in coupling)
            object.__setattr__(self, "coupling", coupling)
            vals = coupling
        else:
            vals = (float(coupling),)
        if any(not 0.0 <= c <= 1.0 for c in vals):
            raise DomainError("coupling efficiency outside [0, 1]")
        if self.coincidence_window <= 0:
            raise DomainError("coincidence window must be positive")
        if self.timing_resolution <= 0:
            raise DomainError("timing resolution must be positive")
        if self.duty_cycle is not None:
            on, off = self.duty_cycle
            if on <= 0 or off < 0:
                raise DomainError("duty cycle needs pulse_on > 0 and pulse_off >= 0")
            object.__setattr__(self, "duty_cycle", (float(on), float(off)))

    @classmethod
    def with_background(cls, **overrides) -> "SourceModel":
        """Reference source including the uncorrelated singles background."""
        return replace(cls(unpaired_rate=69000.0), **overrides)

    def efficiencies(self, modes: int) -> np.ndarray:
        """Per-mode click probability for one photon leaving the chip."""
        if isinstance(self.coupling, tuple):
            if len(self.coupling) != modes:
                raise DomainError(f"{len(self.coupling)} coupling values for {modes} modes")
            eff = np.array(self.coupling)
        else:
            eff = np.full(modes, float(self.coupling))
        if not self.detector_in_pair_rate:
            eff = eff * self.detector_efficiency
        return eff

    def live_time(self, duration: float) -> float:
        """Counting time inside ``duration`` seconds of wall-clock acquisition."""
        if self.duty_cycle is None:
            return duration
        on, off = self.duty_cycle
        cycles, rem = divmod(duration, on + off)
        return cycles * on + min(rem, on)

    def wall_time(self, live: float) -> float:
        """Shortest acquisition that contains ``live`` seconds of counting."""
        if self.duty_cycle is None:
            return live
        on, off = self.duty_cycle
        cycles, rem = divmod(live, on)
        if rem == 0:
            return cycles * (on + off) - off if cycles else 0.0
        return cycles * (on + off) + rem

    def to_dict(self) -> dict:
        return {
            "pair_rate": self.pair_rate,
            "multipair_prob": self.multipair_prob,
            "coupling": list(self.coupling) if isinstance(self.coupling, tuple) else self.coupling,
            "detector_efficiency": self.detector_efficiency,
            "detector_in_pair_rate": self.detector_in_pair_rate,
            "coincidence_window": self.coincidence_window,
            "duty_cycle": list(self.duty_cycle) if self.duty_cycle else None,
            "dark_count_rate": self.dark_count_rate,
            "unpaired_rate": self.unpaired_rate,
            "timing_resolution": self.timing_resolution,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SourceModel":
        data = dict(data)
        if isinstance(data.get("coupling"), list):
            data["coupling"] = tuple(data["coupling"])
        if data.get("duty_cycle") is not None:
            data["duty_cycle"] = tuple(data["duty_cycle"])
        return cls(**data)


@dataclass
class TimeTagStream:
    channels: np.ndarray
    timestamps: np.ndarray  # int64 picoseconds
    duration: float
    live_time: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.int64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.channels.shape != self.timestamps.shape:
            raise ValueError("channels and timestamps differ in length")
        if self.channels.size and (self.channels.min() < 0 or self.channels.max() >= MAX_CHANNELS):
            raise ValueError(f"channel index outside 0..{MAX_CHANNELS - 1}")

    def __len__(self):
        return int(self.timestamps.size)

    @property
    def timestamps_ns(self) -> np.ndarray:
        return self.timestamps / 1000.0

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.timestamps) >= 0))

    def singles(self) -> dict[int, int]:
        counts = np.bincount(self.channels, minlength=MAX_CHANNELS)
        return {int(c): int(counts[c]) for c in np.flatnonzero(counts)}

    def write(self, path) -> Path:
        """Write ``channel,timestamp_ns`` CSV plus a JSON sidecar; returns sidecar path."""
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("channel,timestamp_ns\n")
            for c, t in zip(self.channels.tolist(), self.timestamps.tolist()):
                fh.write(f"{c},{_format_ns(t)}\n")
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps({
            "duration": self.duration, "live_time": self.live_time,
            "events": len(self), **self.metadata,
        }, indent=2) + "\n")
        return sidecar

    @classmethod
    def read(cls, path) -> "TimeTagStream":
        path = Path(path)
        lines = path.read_text().splitlines()
        if not lines or lines[0].strip() != "channel,timestamp_ns":
            raise ValueError(f"{path}: missing 'channel,timestamp_ns' header")
        chans, stamps = [], []
        for line in lines[1:]:
            if not line.strip():
                continue
            c, t = line.split(",")
            chans.append(int(c))
            stamps.append(_parse_ns(t))
        meta = {}
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
        duration = float(meta.pop("duration", (max(stamps) / PS) if stamps else 0.0))
        live = float(meta.pop("live_time", duration))
        meta.pop("events", None)
        return cls(np.array(chans, dtype=np.int64), np.array(stamps, dtype=np.int64),
                   duration, live, meta)


def _format_ns(ps: int) -> str:
    sign = "-" if ps < 0 else ""
    ns, frac = divmod(abs(ps), 1000)
    return f"{sign}{ns}.{frac:03d}".rstrip("0").rstrip(".") if frac else f"{sign}{ns}"


def _parse_ns(text: str) -> int:
    text = text.strip()
    neg = text.startswith("-")
    whole, _, frac = text.lstrip("+-").partition(".")
    frac = (frac + "000")[:3]
    val = int(whole or 0) * 1000 + int(frac)
    return -val if neg else val


def _live_to_wall(t_live: np.ndarray, duty) -> np.ndarray:
    if duty is None:
        return t_live
    on, off = duty
    cycle = np.floor(t_live / on)
    return t_live + cycle * off


def _click_categories(probs, first, second, eff):
    """Probabilities of (output state, clicked detectors) for one pair."""
    cat_p, cat_modes = [], []
    for p, m1, m2 in zip(probs, first, second):
        e1, e2 = eff[m1], eff[m2]
        if m1 == m2:
            # A detector reached by both photons clicks once.
            click = 1 - (1 - e1) ** 2
            cat_p += [p * click, p * (1 - click)]
            cat_modes += [(int(m1),), ()]
        else:
            cat_p += [p * e1 * e2, p * e1 * (1 - e2), p * (1 - e1) * e2, p * (1 - e1) * (1 - e2)]
            cat_modes += [(int(m1), int(m2)), (int(m1),), (int(m2),), ()]
    cat_p = np.clip(np.array(cat_p), 0.0, None)
    return cat_p / cat_p.sum(), cat_modes


def generate_stream(src: SourceModel, u, input_ports: tuple[int, int], seed: int,
                    duration: float, channel_map: Sequence[int] | None = None) -> TimeTagStream:
    """Simulate detector clicks for photon pairs injected at ``input_ports``.

    ``duration`` is wall-clock acquisition time; pairs are only produced
    while the phase-shifter pulse is on. A detector reached by two photons
    of the same pair clicks once. Deterministic for a fixed seed.
    """
    u = np.asarray(u, dtype=np.complex128)
    modes = u.shape[0]
    a, b = input_ports
    if not (0 <= a < modes and 0 <= b < modes) or a == b:
        raise DomainError(f"invalid input ports {input_ports} for {modes} modes")
    if duration <= 0:
        raise DomainError("duration must be positive")
    chmap = np.arange(modes) if channel_map is None else np.asarray(channel_map, dtype=np.int64)
    if chmap.shape != (modes,) or chmap.min() < 0 or chmap.max() >= MAX_CHANNELS:
        raise DomainError("channel map must assign each mode a channel in 0..15")

    rng = np.random.default_rng(seed)
    live = src.live_time(duration)
    eff = src.efficiencies(modes)
    res_ps = src.timing_resolution * PS

    dist = output_distribution(u, FockState.from_modes(input_ports, modes))
    states = list(dist)
    probs = np.array([dist[s] for s in states])
    probs = probs / probs.sum()
    first = np.array([s.mode_list()[0] for s in states])
    second = np.array([s.mode_list()[1] for s in states])

    times: list[np.ndarray] = []
    modes_hit: list[np.ndarray] = []

    def add_pairs(t_live):
        k = rng.choice(len(states), size=t_live.size, p=probs)
        m1, m2 = first[k], second[k]
        s1 = rng.random(t_live.size) < eff[m1]
        s2 = rng.random(t_live.size) < eff[m2]
        bunched = m1 == m2
        # One click for a bunched pair if either photon survives.
        s1 = np.where(bunched, s1 | s2, s1)
        s2 = s2 & ~bunched
        times.append(t_live[s1])
        modes_hit.append(m1[s1])
        times.append(t_live[s2])
        modes_hit.append(m2[s2])

    n_pairs = rng.poisson(src.pair_rate * live)
    n_multi = rng.binomial(n_pairs, src.multipair_prob) if src.multipair_prob > 0 else 0
    # Pairs without an overlaid second pair: split the Poisson process by
    # (output state, detection pattern); each category is an independent
    # uniform process, so only detected clicks are ever drawn.
    cat_p, cat_modes = _click_categories(probs, first, second, eff)
    for n, emitted in zip(rng.multinomial(n_pairs - n_multi, cat_p), cat_modes):
        if n == 0 or not emitted:
            continue
        t = rng.random(n) * live
        for m in emitted:
            times.append(t)
            modes_hit.append(np.full(n, m))
    if n_multi:
        t_host = rng.random(n_multi) * live
        add_pairs(t_host)
        add_pairs(np.minimum(t_host + rng.random(n_multi) * src.coincidence_window, live))

    if src.unpaired_rate > 0:
        for port in input_ports:
            weights = np.abs(u[:, port]) ** 2 * eff
            for m in range(modes):
                n = rng.poisson(src.unpaired_rate * live * weights[m])
                times.append(rng.random(n) * live)
                modes_hit.append(np.full(n, m))
    if src.dark_count_rate > 0:
        for m in range(modes):
            n = rng.poisson(src.dark_count_rate * live)
            times.append(rng.random(n) * live)
            modes_hit.append(np.full(n, m))

    t_live = np.concatenate(times) if times else np.empty(0)
    hit = np.concatenate(modes_hit).astype(np.int64) if modes_hit else np.empty(0, np.int64)
    t_wall = _live_to_wall(t_live, src.duty_cycle)
    jitter = rng.random(t_wall.size)
    ticks = np.floor(t_wall * (PS / res_ps) + jitter).astype(np.int64)
    stamps = np.rint(ticks * res_ps).astype(np.int64)
    key = stamps * MAX_CHANNELS + chmap[hit]
    key.sort()
    return TimeTagStream(
        channels=key % MAX_CHANNELS,
        timestamps=key // MAX_CHANNELS,
        duration=float(duration),
        live_time=float(live),
        metadata={"input_ports": [int(a), int(b)], "seed": int(seed), "source": src.to_dict()},
    )


@numba.njit(cache=True)
def _split_by_channel(channels, timestamps):
    # Counting sort by channel; keeps each channel's timestamps in order.
    bounds = np.zeros(MAX_CHANNELS + 1, dtype=np.int64)
    for c in channels:
        bounds[c + 1] += 1
    for c in range(MAX_CHANNELS):
        bounds[c + 1] += bounds[c]
    fill = bounds[:-1].copy()
    out = np.empty_like(timestamps)
    for k in range(channels.size):
        c = channels[k]
        out[fill[c]] = timestamps[k]
        fill[c] += 1
    return out, bounds


@numba.njit(cache=True)
def _greedy_pairs(ta, tb, half, delay):
    i = 0
    j = 0
    n = 0
    na = ta.size
    nb = tb.size
    while i < na and j < nb:
        d = ta[i] - (tb[j] + delay)
        if d > half:
            j += 1
        elif d < -half:
            i += 1
        else:
            n += 1
            i += 1
            j += 1
    return n


@dataclass
class CoincidenceReport:
    counts: dict[tuple[int, int], int]
    singles: dict[int, int]
    window: float
    live_time: float

    def coincidences(self, a: int, b: int) -> int:
        return self.counts.get((min(a, b), max(a, b)), 0)

    def __add__(self, other: "CoincidenceReport") -> "CoincidenceReport":
        if other.window != self.window:
            raise ValueError("cannot merge reports with different windows")
        counts = dict(self.counts)
        for k, v in other.counts.items():
            counts[k] = counts.get(k, 0) + v
        singles = dict(self.singles)
        for k, v in other.singles.items():
            singles[k] = singles.get(k, 0) + v
        return CoincidenceReport(dict(sorted(counts.items())), dict(sorted(singles.items())),
                                 self.window, self.live_time + other.live_time)

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "live_time": self.live_time,
            "singles": {str(k): v for k, v in self.singles.items()},
            "counts": {f"{a},{b}": v for (a, b), v in self.counts.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoincidenceReport":
        counts = {tuple(int(x) for x in k.split(",")): int(v) for k, v in data["counts"].items()}
        singles = {int(k): int(v) for k, v in data["singles"].items()}
        return cls(counts, singles, float(data["window"]), float(data["live_time"]))


def count_coincidences(stream: TimeTagStream, window: float, delay: float = 0.0,
                       channels: Sequence[int] | None = None) -> CoincidenceReport:
    """Greedy earliest-match coincidence counting for every channel pair.

    ``delay`` shifts the higher-numbered channel of each pair; a delay much
    larger than the window counts accidentals only.
    """
    if window <= 0:
        raise DomainError("window must be positive")
    if not stream.is_sorted():
        raise StreamOrderError("time-tag stream is not sorted by timestamp")
    half = int(round(window * PS / 2))
    shift = int(round(delay * PS))
    singles = stream.singles()
    present = sorted(singles) if channels is None else sorted(set(channels))
    by_channel, bounds = _split_by_channel(stream.channels, stream.timestamps)
    per_channel = {c: by_channel[bounds[c]:bounds[c + 1]] for c in present}
    counts = {}
    for i, a in enumerate(present):
        for b in present[i + 1:]:
            counts[(a, b)] = int(_greedy_pairs(per_channel[a], per_channel[b], half, shift))
    return CoincidenceReport(counts, singles, float(window), stream.live_time)


def accidental_rate(r1: float, r2: float, window: float) -> float:
    """Expected accidental coincidences per second between uncorrelated channels."""
    return r1 * r2 * window


@dataclass
class RateEstimate:
    singles: dict[int, float]
    coincidences: dict[tuple[int, int], float]
    logical_rate: float | None = None
    accidentals: dict[tuple[int, int], float] = field(default_factory=dict)

    def coincidence(self, a: int, b: int) -> float:
        return self.coincidences.get((min(a, b), max(a, b)), 0.0)

    def to_dict(self) -> dict:
        return {
            "singles": {str(k): v for k, v in self.singles.items()},
            "coincidences": {f"{a},{b}": v for (a, b), v in self.coincidences.items()},
            "accidentals": {f"{a},{b}": v for (a, b), v in self.accidentals.items()},
            "logical_rate": self.logical_rate,
        }


def estimate_rates(src: SourceModel, u, input_ports: tuple[int, int],
                   encoding: LogicalEncoding | None = None,
                   distinguishable: bool = False) -> RateEstimate:
    """Analytic singles and coincidence rates per output mode.

    Coincidence rate for outputs (a, b) is pair_rate * eff_a * eff_b * P(a, b)
    where P is the two-photon output probability (classical if
    ``distinguishable``). ``logical_rate`` sums the post-selected outputs.
    """
    u = np.asarray(u, dtype=np.complex128)
    modes = u.shape[0]
    eff = src.efficiencies(modes)
    i, j = input_ports
    pair_probs: dict[tuple[int, int], float] = {}
    if distinguishable:
        for a in range(modes):
            for b in range(modes):
                key = (min(a, b), max(a, b))
                pair_probs[key] = pair_probs.get(key, 0.0) + abs(u[a, i]) ** 2 * abs(u[b, j]) ** 2
    else:
        for state, p in output_distribution(u, FockState.from_modes(input_ports, modes)).items():
            m = state.mode_list()
            pair_probs[(m[0], m[1])] = p

    singles = np.zeros(modes)
    coinc = {}
    for (a, b), p in pair_probs.items():
        if a == b:
            singles[a] += src.pair_rate * p * (1 - (1 - eff[a]) ** 2)
        else:
            singles[a] += src.pair_rate * p * eff[a]
            singles[b] += src.pair_rate * p * eff[b]
            coinc[(a, b)] = src.pair_rate * p * eff[a] * eff[b]
    for port in input_ports:
        singles += src.unpaired_rate * np.abs(u[:, port]) ** 2 * eff
    singles += src.dark_count_rate
    accidentals = {k: accidental_rate(singles[k[0]], singles[k[1]], src.coincidence_window)
                   for k in sorted(coinc)}
    logical = None
    if encoding is not None:
        logical = 0.0
        for k in range(4):
            c, t = encoding.output_modes(k)
            logical += coinc.get((min(c, t), max(c, t)), 0.0)
    return RateEstimate({m: float(singles[m]) for m in range(modes)},
                        dict(sorted(coinc.items())), logical, accidentals)


@dataclass
class SweepPoint:
    phi: float
    table: ProbTable
    counts: np.ndarray  # post-selected coincidences [in, out]
    reports: tuple[CoincidenceReport, ...] | None
    degenerate: bool = False


def _run_seed(seed: int, phi: float, logical_input: int) -> int:
    # Keyed on the phase value itself so any grid order gives the same runs.
    phi_bits = int(np.float64(phi).view(np.uint64))
    words = [int(seed) & 0xFFFFFFFF, phi_bits & 0xFFFFFFFF, phi_bits >> 32, logical_input]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def _empirical_row(report: CoincidenceReport, enc: LogicalEncoding, chmap) -> np.ndarray:
    row = np.zeros(4, dtype=np.int64)
    for k in range(4):
        c, t = enc.output_modes(k)
        row[k] = report.coincidences(int(chmap[c]), int(chmap[t]))
    return row


def run_phase_sweep_experiment(src: SourceModel, reflectivities: ChipReflectivities,
                               phis: Sequence[float], pairs_per_point: int, seed: int,
                               encoding: LogicalEncoding | None = None,
                               analytic: bool = False) -> list[SweepPoint]:
    """Simulate all four logical inputs at each phase and tabulate outputs.

    Each (phase, input) run collects ``pairs_per_point / pair_rate`` seconds
    of live time with its own seed derived from (seed, phase, input), so
    results do not depend on grid order. ``analytic=True`` returns
    the infinite-statistics tables instead.
    """
    if pairs_per_point <= 0:
        raise DomainError("pairs_per_point must be positive")
    enc = encoding or LogicalEncoding.chip()
    chmap = np.arange(6)
    live = pairs_per_point / src.pair_rate
    duration = src.wall_time(live)
    points = []
    for phi in phis:
        u = chip_unitary(reflectivities, phi)
        if analytic:
            eff = src.efficiencies(u.shape[0])
            raw = raw_prob_table(u, enc)
            for k in range(4):
                c, t = enc.output_modes(k)
                raw[:, k] *= eff[c] * eff[t]
            sums = raw.sum(axis=1, keepdims=True)
            degenerate = bool(np.any(sums == 0))
            table = ProbTable(np.divide(raw, sums, out=np.zeros_like(raw), where=sums > 0))
            points.append(SweepPoint(float(phi), table, raw, None, degenerate))
            continue
        counts = np.zeros((4, 4), dtype=np.int64)
        reports = []
        for k in range(4):
            run_seed = _run_seed(seed, phi, k)
            stream = generate_stream(src, u, enc.input_modes(k), int(run_seed), duration)
            wanted = sorted({int(chmap[m]) for m in enc.control_modes + enc.target_modes})
            rep = count_coincidences(stream, src.coincidence_window, channels=wanted)
            reports.append(rep)
            counts[k] = _empirical_row(rep, enc, chmap)
        sums = counts.sum(axis=1, keepdims=True)
        degenerate = bool(np.any(sums == 0))
        table = ProbTable(np.divide(counts, sums, out=np.zeros((4, 4)), where=sums > 0))
        points.append(SweepPoint(float(phi), table, counts, tuple(reports), degenerate))
    return points
