"""Command-line front end: ``fockchip {gate,sweep,hom,calibrate,simulate}``.

Angles are degrees unless suffixed with ``rad`` (``--phi 1.57rad``); a
``deg`` suffix is also accepted. Exit codes: 0 success, 1 computation
error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chip import (
    C1, T0, T1, V_B, ChipReflectivities, PhaseCalibration, chip_unitary,
    fit_calibration, phase_from_voltage, standard_chip,
)
from .errors import FockChipError
from .experiment import (
    SourceModel, count_coincidences, estimate_rates, generate_stream, run_phase_sweep_experiment,
)
from .gate import (
    BASIS_LABELS, LogicalEncoding, equal_up_to_global_phase, extract_logical_gate, global_phase,
    ideal_gate, ideal_prob_table, prob_table, similarity, success_probability, tables_to_csv,
)
from .hom import (
    SPEED_OF_LIGHT, WavepacketModel, coincidence_probability, dip_curve, fit_dip, network_dip_curve, visibility,
)


class UsageError(Exception):
    pass


def parse_angle(text) -> float:
    """Angle in radians, wrapped to [0, 2 pi). Degrees are wrapped before conversion."""
    s = str(text).strip().lower()
    if s.endswith("rad"):
        return float(s[:-3]) % (2 * math.pi)
    if s.endswith("deg"):
        s = s[:-3]
    try:
        deg = float(s)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None
    return math.radians(deg % 360.0)


def _deg(phi: float) -> float:
    return round(math.degrees(phi), 9)


def _reflectivities(args) -> ChipReflectivities:
    if args.eta == "design":
        if args.eta_file:
            raise UsageError("--eta-file only goes with --eta custom")
        return ChipReflectivities.design()
    if args.eta == "measured":
        if args.eta_file:
            raise UsageError("--eta-file only goes with --eta custom")
        return ChipReflectivities.measured()
    if not args.eta_file:
        raise UsageError("--eta custom needs --eta-file")
    data = _read_json(args.eta_file)
    try:
        return ChipReflectivities.from_dict(data)
    except KeyError as exc:
        raise UsageError(f"{args.eta_file}: missing {exc}") from None


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _emit(text: str, out) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _complex_rows(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _phase_grid(args) -> list[float]:
    if args.phis is not None:
        items = [p for p in args.phis.split(",") if p.strip()]
        if not items:
            raise UsageError("empty phase grid")
        return [parse_angle(p) for p in items]
    if args.grid < 1:
        raise UsageError("--grid must be at least 1")
    return [math.radians(360.0 * k / args.grid) for k in range(args.grid)]


def cmd_gate(args) -> int:
    r = _reflectivities(args)
    if args.volts is not None:
        if not args.calibration:
            raise UsageError("--volts needs --calibration")
        cal = PhaseCalibration.from_dict(_read_json(args.calibration))
        phi = phase_from_voltage(cal, args.volts) % (2 * math.pi)
    else:
        phi = parse_angle(args.phi)
    enc = LogicalEncoding.chip()
    u = chip_unitary(r, phi)
    gate = extract_logical_gate(u, enc)
    ideal = ideal_gate(phi)
    aligned = gate.normalized * np.conj(global_phase(gate.normalized, ideal.entries))
    report = {
        "phi_deg": _deg(phi),
        "reflectivities": r.to_dict(),
        "prefactor": gate.prefactor,
        "gate": _complex_rows(gate.entries),
        "gate_normalized_phase_aligned": _complex_rows(aligned),
        "ideal": _complex_rows(ideal.entries),
        "match": equal_up_to_global_phase(gate.normalized, ideal.entries, args.tol),
        "closest_unitary_distance": gate.closest_unitary_distance(),
        "success_probability": {
            lab: success_probability(u, enc, lab) for lab in BASIS_LABELS
        },
        "similarity_to_ideal": similarity(ideal_prob_table(phi), prob_table(u, enc)),
    }
    _emit(_dump(report), args.out)
    return 0


def cmd_sweep(args) -> int:
    phis = _phase_grid(args)
    r = _reflectivities(args)
    enc = LogicalEncoding.chip()
    rows, points = [], []
    mc = None
    if args.mc:
        src = _source(args)
        mc = run_phase_sweep_experiment(src, r, phis, args.pairs, args.seed)
    for k, phi in enumerate(phis):
        theory = prob_table(chip_unitary(r, phi), enc)
        ideal = ideal_prob_table(phi)
        rows.append((_deg(phi), theory, "theory"))
        entry = {"phi_deg": _deg(phi), "theory": theory.values.tolist(),
                 "similarity_theory_vs_ideal": similarity(ideal, theory)}
        if mc is not None:
            pt = mc[k]
            rows.append((_deg(phi), pt.table, "mc"))
            entry.update(mc=pt.table.values.tolist(), mc_counts=pt.counts.tolist(),
                         mc_degenerate=pt.degenerate,
                         similarity_mc_vs_ideal=similarity(ideal, pt.table))
        points.append(entry)
    if args.format == "csv":
        _emit(tables_to_csv(rows), args.out)
    else:
        sims = [p["similarity_theory_vs_ideal"] for p in points]
        bundle = {"reflectivities": r.to_dict(), "basis": list(BASIS_LABELS),
                  "mean_similarity_theory_vs_ideal": float(np.mean(sims)), "points": points}
        if mc is not None:
            bundle["seed"] = args.seed
            bundle["mean_similarity_mc_vs_ideal"] = float(
                np.mean([p["similarity_mc_vs_ideal"] for p in points]))
        _emit(_dump(bundle), args.out)
    return 0


def _source(args) -> SourceModel:
    kwargs = {}
    for name in ("pair_rate", "coupling", "multipair_prob", "unpaired_rate"):
        val = getattr(args, name, None)
        if val is not None:
            kwargs[name] = val
    if getattr(args, "window_ns", None) is not None:
        kwargs["coincidence_window"] = args.window_ns * 1e-9
    return SourceModel(**kwargs)


def cmd_hom(args) -> int:
    model = WavepacketModel(shape=args.shape)
    span = args.span if args.span is not None else 6 * model.coherence_time * SPEED_OF_LIGHT
    delays = np.linspace(-span, span, args.points)
    r = _reflectivities(args)
    if args.path == "chip":
        u = chip_unitary(r, 0.0)
        inputs, outputs = (C1, V_B), (T0, T1)
        eta = r.eta3
        # Normalized so a bare coupler would show ``baseline`` for distinguishable photons.
        ref = args.baseline / coincidence_probability(eta, 0.0)
        rates = network_dip_curve(u, inputs, outputs, model, args.overlap, ref, delays)
    else:
        eta = args.coupler_eta if args.coupler_eta is not None else getattr(r, args.coupler)
        rates = dip_curve(eta, model, args.overlap, args.baseline, delays)
    expected = rates.copy()
    if args.mc:
        rng = np.random.default_rng(args.seed)
        rates = rng.poisson(expected * args.seconds) / args.seconds
        sigma = np.sqrt(np.maximum(rates, 1.0 / args.seconds) / args.seconds)
        fit = fit_dip(np.column_stack([delays, rates]), shape=args.shape, sigma=sigma)
    else:
        fit = fit_dip(np.column_stack([delays, rates]), shape=args.shape)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delay_m", "rate_cps"])
        for d, v in zip(delays, rates):
            w.writerow([repr(float(d)), repr(float(v))])
        _emit(buf.getvalue(), args.out)
    else:
        report = {
            "path": args.path,
            "eta": eta,
            "visibility_theory": visibility(eta) if args.path == "direct" else None,
            "overlap": args.overlap,
            "baseline_theory": float(expected[np.argmax(np.abs(delays))]),
            "fit": fit.to_dict(),
            "samples": [[float(d), float(v)] for d, v in zip(delays, rates)],
        }
        _emit(_dump(report), args.out)
    return 0


def _read_samples(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(";", ",").split(",")
        try:
            rows.append([float(parts[0]), float(parts[1])])
        except (ValueError, IndexError):
            if rows:
                raise UsageError(f"{path}: cannot parse line {line!r}") from None
            # header line
    if not rows:
        raise UsageError(f"{path}: no samples")
    return np.array(rows)


def cmd_calibrate(args) -> int:
    if args.samples:
        fit = fit_calibration(_read_samples(args.samples), v_max=args.v_max)
        report = fit.to_dict()
        cal = fit.calibration
    elif args.calibration:
        cal = PhaseCalibration.from_dict(_read_json(args.calibration))
        report = cal.to_dict()
    else:
        raise UsageError("calibrate needs --samples or --calibration")
    if args.volts is not None:
        phi = phase_from_voltage(cal, args.volts)
        report["volts"] = args.volts
        report["phi_rad"] = phi
        report["phi_deg"] = _deg(phi)
    _emit(_dump(report), args.out)
    return 0


def cmd_simulate(args) -> int:
    r = _reflectivities(args)
    phi = parse_angle(args.phi)
    enc = LogicalEncoding.chip()
    if args.ports:
        try:
            ports = tuple(int(p) for p in args.ports.split(","))
        except ValueError:
            raise UsageError(f"bad --ports {args.ports!r}") from None
        if len(ports) != 2:
            raise UsageError("--ports needs two mode indices")
    else:
        ports = enc.input_modes(BASIS_LABELS.index(args.input))
    src = _source(args)
    u = chip_unitary(r, phi)
    stream = generate_stream(src, u, ports, args.seed, src.wall_time(args.seconds))
    report = count_coincidences(stream, src.coincidence_window)
    out = {
        "phi_deg": _deg(phi),
        "input_ports": list(ports),
        "seed": args.seed,
        "events": len(stream),
        "report": report.to_dict(),
        "predicted": estimate_rates(src, u, ports, enc).to_dict(),
    }
    if args.stream_out:
        stream.write(args.stream_out)
    if args.circuit_out:
        Path(args.circuit_out).write_text(_dump(standard_chip(r, phi).to_dict()))
    _emit(_dump(out), args.out)
    return 0


def _add_eta(p):
    p.add_argument("--eta", choices=("design", "measured", "custom"), default="design",
                   help="reflectivity set")
    p.add_argument("--eta-file", help="JSON with eta1..eta5 (with --eta custom)")


def _add_source(p):
    p.add_argument("--pair-rate", type=float, dest="pair_rate")
    p.add_argument("--coupling", type=float)
    p.add_argument("--multipair-prob", type=float, dest="multipair_prob")
    p.add_argument("--unpaired-rate", type=float, dest="unpaired_rate")
    p.add_argument("--window-ns", type=float, dest="window_ns")


def build_parser() -> argparse.ArgumentParser:
    default_seed = int(os.environ.get("FOCKCHIP_SEED", "0"))
    parser = argparse.ArgumentParser(prog="fockchip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON file of option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gate", help="extracted vs ideal logical gate at one phase")
    _add_eta(g)
    g.add_argument("--phi", default="0")
    g.add_argument("--volts", type=float)
    g.add_argument("--calibration")
    g.add_argument("--tol", type=float, default=1e-9)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gate)

    s = sub.add_parser("sweep", help="probability tables over a phase grid")
    _add_eta(s)
    s.add_argument("--grid", type=int, default=16, help="evenly spaced points over 360 deg")
    s.add_argument("--phis", help="comma-separated explicit angles")
    s.add_argument("--mc", action="store_true", help="add Monte-Carlo tables")
    s.add_argument("--pairs", type=int, default=110000, help="source pairs per (phase, input)")
    s.add_argument("--seed", type=int, default=default_seed)
    _add_source(s)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    h = sub.add_parser("hom", help="HOM dip scan and fit")
    _add_eta(h)
    h.add_argument("--path", choices=("direct", "chip"), default="direct")
    h.add_argument("--coupler", choices=[f"eta{i}" for i in range(1, 6)], default="eta3")
    h.add_argument("--coupler-eta", type=float, dest="coupler_eta")
    h.add_argument("--overlap", type=float, default=1.0, help="source overlap V0")
    h.add_argument("--baseline", type=float, default=1000.0, help="bare-coupler rate (cps)")
    h.add_argument("--shape", choices=("gaussian", "rect", "gaussian_times_rect"),
                   default="gaussian")
    h.add_argument("--points", type=int, default=61)
    h.add_argument("--span", type=float, help="half scan range in meters")
    h.add_argument("--mc", action="store_true", help="Poisson counts per point")
    h.add_argument("--seconds", type=float, default=10.0)
    h.add_argument("--seed", type=int, default=default_seed)
    h.add_argument("--format", choices=("json", "csv"), default="json")
    h.add_argument("--out")
    h.set_defaults(func=cmd_hom)

    c = sub.add_parser("calibrate", help="fit or evaluate the phase-voltage relation")
    c.add_argument("--samples", help="CSV of volts,signal")
    c.add_argument("--calibration", help="existing calibration JSON")
    c.add_argument("--volts", type=float)
    c.add_argument("--v-max", type=float, dest="v_max", default=7.0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    m = sub.add_parser("simulate", help="raw time-tag stream and coincidence counting")
    _add_eta(m)
    m.add_argument("--phi", default="0")
    m.add_argument("--input", choices=BASIS_LABELS, default="00")
    m.add_argument("--ports", help="explicit input modes, e.g. 2,5")
    m.add_argument("--seconds", type=float, default=1.0, help="live counting time")
    m.add_argument("--seed", type=int, default=default_seed)
    _add_source(m)
    m.add_argument("--stream-out")
    m.add_argument("--circuit-out")
    m.add_argument("--out")
    m.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        pre, _ = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if pre.config and pre.command:
            cfg = _read_json(pre.config)
            if not isinstance(cfg, dict):
                raise UsageError(f"{pre.config}: config must be a JSON object")
            subparser = parser._subparsers._group_actions[0].choices[pre.command]
            subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"fockchip: error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fockchip: error: {exc}", file=sys.stderr)
        return 2
    except (FockChipError, ValueError) as exc:
        print(f"fockchip: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
