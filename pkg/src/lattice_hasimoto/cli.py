"""Command-line interface.

One binary, seven subcommands: sample / transform / evolve / verify /
invariance / converge / spectrum.  All randomness flows through --seed; when
it is omitted an entropy seed is drawn and printed so the run can be
replayed.  A TOML config file (flat sections named after subcommands) is
merged underneath command-line flags; flags win.

Exit codes: 0 success, 1 a verification verdict failed, 2 usage error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import secrets
import sys

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from . import __version__
from .core import (ALField, Beta, IntegrationError, LatticeError,
                   NumericalError, ParameterError, RngStream, Rotation,
                   SpinField, Window, read_jsonl, write_jsonl,
                   write_scalar_csv, write_trajectory)
from .dynamics import IntegratorConfig, conserved_report, integrate
from .hasimoto import (alphas_from_spins_frame, rotation_with_third_column,
                       spins_from_alphas)
from .sampling import (kernel_spectrum, sample_gibbs_chain, sample_haar_rotation,
                       sample_white_noise)

USAGE_ERROR, VERDICT_ERROR, NUMERICAL_ERROR = 2, 1, 3


def _version_string() -> str:
    from .brackets import bracket_table_hash
    return f"lattice-hasimoto {__version__} (tables {bracket_table_hash()})"


def _parse_window(text: str) -> Window:
    try:
        lo, hi = text.split("..")
        return Window(int(lo), int(hi))
    except (ValueError, LatticeError) as exc:
        raise ParameterError(f"bad window {text!r} (expected LO..HI): {exc}")


def _parse_times(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ParameterError(f"bad time list {text!r}: {exc}")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    seed = secrets.randbits(63)
    print(f"seed: {seed} (chosen from entropy; pass --seed {seed} to replay)")
    return seed


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lattice-hasimoto",
        description="Integrable lattice spin chain / Ablowitz-Ladik laboratory")
    p.add_argument("--version", action="version", version=_version_string())
    p.add_argument("--config", help="TOML config file merged under flags")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw fields from the exact samplers")
    sp.add_argument("--measure", choices=["wn", "gibbs"], required=True)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--window", default=None, help="LO..HI (inclusive)")
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)

    tp = sub.add_parser("transform", help="lattice Hasimoto transform")
    tp.add_argument("--direction", choices=["s2a", "a2s"], required=True)
    tp.add_argument("--gauge", choices=["identity", "haar", "file"],
                    default=None)
    tp.add_argument("--gauge-file", default=None)
    tp.add_argument("--in", dest="infile", default=None)
    tp.add_argument("--out", default=None)
    tp.add_argument("--frames-out", default=None)
    tp.add_argument("--seed", type=int, default=None)

    ep = sub.add_parser("evolve", help="integrate a lattice flow")
    ep.add_argument("--model", choices=["al", "lhm", "heis"], required=True)
    ep.add_argument("--boundary", choices=["free", "periodic"], default=None)
    ep.add_argument("--tfinal", type=float, default=None)
    ep.add_argument("--rtol", type=float, default=None)
    ep.add_argument("--atol", type=float, default=None)
    ep.add_argument("--samples", type=int, default=None)
    ep.add_argument("--in", dest="infile", default=None)
    ep.add_argument("--out", default=None)
    ep.add_argument("--conserved", default=None, help="CSV of energy series")

    vp = sub.add_parser("verify", help="bracket algebra verification suites")
    vp.add_argument("--suite", choices=["jacobi", "compat", "hamilton", "tables"],
                    required=True)
    vp.add_argument("--window", type=int, default=None,
                    help="generator half-width (jacobi/compat) or window "
                         "half-width (hamilton)")
    vp.add_argument("--samples", type=int, default=None)
    vp.add_argument("--seed", type=int, default=None)
    vp.add_argument("--out", default=None, help="JSON report path")

    ip = sub.add_parser("invariance", help="measure-invariance experiments")
    ip.add_argument("--measure", choices=["wn", "gibbs"], required=True)
    ip.add_argument("--beta", type=float, default=None)
    ip.add_argument("-K", type=int, default=None, dest="half_width")
    ip.add_argument("-N", type=int, default=None, dest="n_ensembles")
    ip.add_argument("--tfinal", type=float, default=None)
    ip.add_argument("--times", default=None, help="comma-separated")
    ip.add_argument("--seed", type=int, default=None)
    ip.add_argument("--rtol", type=float, default=None)
    ip.add_argument("--atol", type=float, default=None)
    ip.add_argument("--out", default=None)

    cp = sub.add_parser("converge", help="truncation-convergence experiment")
    cp.add_argument("--beta", type=float, default=None)
    cp.add_argument("--Ks", default=None, help="comma-separated, increasing")
    cp.add_argument("--tfinal", type=float, default=None)
    cp.add_argument("--seed", type=int, default=None)
    cp.add_argument("--out", default=None)

    kp = sub.add_parser("spectrum", help="transfer-operator spectrum")
    kp.add_argument("--beta", type=float, default=None)
    kp.add_argument("--lmax", type=int, default=None)
    kp.add_argument("--out", default=None)
    return p


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if not args.config:
        return args
    with open(args.config, "rb") as fh:
        conf = tomllib.load(fh)
    section = conf.get(args.command, {})
    for key, value in section.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)
    return args


def _require(args, **defaults):
    """Fill remaining None attributes with defaults; error on missing."""
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            if value is _REQUIRED:
                raise ParameterError(f"missing required option --{key}")
            setattr(args, key, value)


class _Required:
    pass


_REQUIRED = _Required()


# --------------------------------------------------------------------------
# Subcommand implementations
# --------------------------------------------------------------------------

def _cmd_sample(args) -> int:
    _require(args, beta=_REQUIRED, window="-16..16", count=1, out=_REQUIRED)
    beta = Beta(float(args.beta))
    w = _parse_window(args.window)
    seed = _resolve_seed(args)
    records = []
    for i in range(int(args.count)):
        rng = RngStream(seed, i)
        if args.measure == "wn":
            records.append((0.0, sample_white_noise(beta, w, rng)))
        else:
            records.append((0.0, sample_gibbs_chain(beta, w, rng)))
    write_jsonl(args.out, records)
    print(f"wrote {len(records)} {args.measure} field(s) on "
          f"[{w.lo}, {w.hi}] to {args.out}")
    return 0


def _load_gauge(args, head_spin=None) -> Rotation:
    gauge = args.gauge or "identity"
    if gauge == "file":
        if not args.gauge_file:
            raise ParameterError("--gauge file needs --gauge-file")
        pairs = read_jsonl(args.gauge_file)
        frame = pairs[0][1]
        return frame.rotation_at(frame.window.lo)
    if gauge == "haar":
        return sample_haar_rotation(RngStream(_resolve_seed(args), 0))
    if head_spin is not None:
        return rotation_with_third_column(head_spin)
    return Rotation.identity()


def _cmd_transform(args) -> int:
    _require(args, infile=_REQUIRED, out=_REQUIRED)
    pairs = read_jsonl(args.infile)
    out_records, frame_records = [], []
    for t, state in pairs:
        if args.direction == "s2a":
            if not isinstance(state, SpinField):
                raise ParameterError("s2a expects spin records")
            gauge = args.gauge or "identity"
            if gauge == "haar":
                # random rotation about the head spin: completion then a
                # Haar twist about e3
                twist = sample_haar_rotation(RngStream(_resolve_seed(args), 0))
                psi = float(np.arctan2(twist.m[1, 0], twist.m[0, 0]))
                c, s = np.cos(psi), np.sin(psi)
                about_e3 = Rotation(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]]))
                p0 = rotation_with_third_column(state.values[0]).compose(about_e3)
            elif gauge == "file":
                p0 = _load_gauge(args)
            else:
                p0 = rotation_with_third_column(state.values[0])
            a, frames = alphas_from_spins_frame(state, p0)
            out_records.append((t, a))
            frame_records.append((t, frames))
        else:
            if not isinstance(state, ALField):
                raise ParameterError("a2s expects amplitude records")
            o = _load_gauge(args)
            s, frames = spins_from_alphas(state, o)
            out_records.append((t, s))
            frame_records.append((t, frames))
    write_jsonl(args.out, out_records)
    if args.frames_out:
        write_jsonl(args.frames_out, frame_records)
    print(f"transformed {len(out_records)} record(s) -> {args.out}")
    return 0


def _cmd_evolve(args) -> int:
    _require(args, boundary="free", tfinal=_REQUIRED, rtol=1e-10, atol=1e-12,
             samples=9, infile=_REQUIRED, out=_REQUIRED)
    pairs = read_jsonl(args.infile)
    if not pairs:
        raise ParameterError(f"no records in {args.infile}")
    state = pairs[0][1]
    cfg = IntegratorConfig(float(args.rtol), float(args.atol), 0.25)
    t_final = float(args.tfinal)
    ts = np.linspace(0.0, t_final, max(2, int(args.samples))) \
        if t_final != 0 else [0.0]
    traj = integrate(state, args.model, args.boundary, t_final, cfg,
                     sample_times=ts)
    write_trajectory(args.out, traj)
    if args.conserved:
        write_scalar_csv(args.conserved,
                         conserved_report(traj, args.boundary).as_rows())
    print(f"evolved {args.model} ({args.boundary}) to t={t_final} "
          f"with {len(traj)} samples -> {args.out}")
    return 0


def _cmd_verify(args) -> int:
    from .brackets import (PolyRing, TABLE_ALPHA, jacobi_residual,
                           compatibility_residual, generators_in,
                           hamilton_check, hamilton_check_standard,
                           verify_bracket_tables)
    suite = args.suite
    report: dict = {"suite": suite}
    ok = True
    if suite in ("jacobi", "compat"):
        _require(args, window=3)
        reach = int(args.window)
        ring = PolyRing(Window(-reach - 2, reach + 2))
        gens = generators_in(ring, -reach, reach)
        polys = {g: ring.var(g) for g in gens}
        n_checked, failures = 0, []
        for f, g, h in itertools.combinations(gens, 3):
            if suite == "jacobi":
                r = jacobi_residual(polys[f], polys[g], polys[h], TABLE_ALPHA)
            else:
                r = compatibility_residual(polys[f], polys[g], polys[h])
            n_checked += 1
            if not r.is_zero():
                failures.append([list(f), list(g), list(h)])
        ok = not failures
        report.update(generator_reach=reach, triples_checked=n_checked,
                      failures=failures)
        print(f"{suite}: {n_checked} generator triples, "
              f"{'all residuals exactly zero' if ok else f'{len(failures)} FAILURES'}")
    elif suite == "hamilton":
        _require(args, window=3)
        k = int(args.window)
        rep = hamilton_check(Window(-k, k))
        rep_std = hamilton_check_standard(Window(-k, k))
        ok = rep.passed and rep_std.passed
        report.update(window=[-k, k], cases=rep.cases_checked,
                      sums=rep.sums_checked, failures=rep.failures,
                      standard_cases=rep_std.cases_checked,
                      standard_failures=rep_std.failures)
        print(f"hamilton: {rep.cases_checked} flow cases + "
              f"{rep_std.cases_checked} standard cases, "
              f"{'exact' if ok else 'FAILURES'}")
    else:  # tables
        _require(args, samples=100)
        seed = _resolve_seed(args)
        rep = verify_bracket_tables(int(args.samples), RngStream(seed, 0))
        ok = rep.passed(1e-6)
        report.update(n_samples=int(args.samples), seed=seed,
                      max_discrepancy=rep.max_discrepancy(),
                      rows=[{"criterion": r.name, "value": r.max_discrepancy,
                             "target": 0.0, "tolerance": 1e-6,
                             "pass": r.max_discrepancy <= 1e-6}
                            for r in rep.rows])
        print(f"tables: {len(rep.rows)} rows at {args.samples} configurations, "
              f"max discrepancy {rep.max_discrepancy():.3e} "
              f"({'pass' if ok else 'FAIL'} at 1e-6)")
    report["pass"] = bool(ok)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
    return 0 if ok else VERDICT_ERROR


def _cmd_invariance(args) -> int:
    from .experiments import (EnsembleSpec, gibbs_invariance_experiment,
                              wn_invariance_experiment)
    _require(args, beta=_REQUIRED, half_width=64, n_ensembles=10000,
             tfinal=1.0, times="0,0.25,0.5,1", rtol=1e-6, atol=1e-8,
             out=_REQUIRED)
    times = args.times if isinstance(args.times, tuple) else _parse_times(args.times)
    spec = EnsembleSpec(Beta(float(args.beta)),
                        Window.symmetric(int(args.half_width)),
                        int(args.n_ensembles), float(args.tfinal),
                        times, _resolve_seed(args),
                        IntegratorConfig(float(args.rtol), float(args.atol), 0.25))
    run = (wn_invariance_experiment if args.measure == "wn"
           else gibbs_invariance_experiment)
    report = run(spec)
    with open(args.out, "w") as fh:
        fh.write(report.to_json(indent=2))
    n_stats = len(report.statistics)
    n_ks = len(report.ks_tests)
    print(f"{report.kind}: {n_stats} moment checks, {n_ks} KS tests -> "
          f"{'PASS' if report.passed else 'FAIL'} ({args.out})")
    return 0 if report.passed else VERDICT_ERROR


def _cmd_converge(args) -> int:
    from .experiments import truncation_convergence_experiment
    _require(args, beta=_REQUIRED, Ks="8,16,32,64", tfinal=1.0, out=None)
    ks = [int(x) for x in str(args.Ks).split(",")]
    rep = truncation_convergence_experiment(Beta(float(args.beta)), ks,
                                            float(args.tfinal),
                                            _resolve_seed(args))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep, fh, indent=2)
    gaps = ", ".join(f"K={k}: {g:.3e}" for (k, _), g in
                     zip(rep["pairs"], rep["sup_gap"]))
    print(f"truncation gaps ({gaps}); strictly decreasing: "
          f"{rep['strictly_decreasing']}")
    return 0 if rep["strictly_decreasing"] else VERDICT_ERROR


def _cmd_spectrum(args) -> int:
    _require(args, beta=_REQUIRED, lmax=8, out=None)
    spec = kernel_spectrum(Beta(float(args.beta)), int(args.lmax))
    payload = {"beta": float(args.beta),
               "eigenvalues": spec.eigenvalues.tolist(),
               "spectral_gap": spec.spectral_gap}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
    print("eigenvalues:", ", ".join(f"{v:.12g}" for v in spec.eigenvalues))
    return 0


_COMMANDS = {
    "sample": _cmd_sample,
    "transform": _cmd_transform,
    "evolve": _cmd_evolve,
    "verify": _cmd_verify,
    "invariance": _cmd_invariance,
    "converge": _cmd_converge,
    "spectrum": _cmd_spectrum,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except (ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (IntegrationError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except LatticeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
