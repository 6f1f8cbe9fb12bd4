"""``fhawkes`` command-line interface.

Exit codes: 0 success, 1 fit or replay failure, 2 invalid configuration or
nonstationary model, 3 unreadable event file, 4 independence test on fewer than
two marks, 5 more than 10 % of experiment replications failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from ..errors import (
    ConfigurationError,
    DataError,
    DomainError,
    ExperimentError,
    HawkesError,
    NonstationaryError,
    ShapeError,
)
from ..indeptest import KERNELS, run_independence_test
from ..model import make_parameterization, spectral_density
from ..simulate import SimConfig, read_events_csv, simulate_hawkes, write_events_csv
from ..whittle import FITTERS, FitOptions
from .config import load_json, resolve_model
from .manifest import compare_outputs, write_manifest
from .presets import get_preset
from .runner import default_threads, replications_csv, run_experiment, timings_text

log = logging.getLogger("fhawkes")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _sidecar(events: Path) -> Path:
    return events.with_suffix(".json")


def _load_events(path: str, T: float | None):
    events = Path(path)
    meta = {}
    if _sidecar(events).exists():
        meta = json.loads(_sidecar(events).read_text())
    T = T if T is not None else meta.get("T")
    if T is None:
        raise CliError(2, f"horizon unknown: pass --T or provide {_sidecar(events).name}")
    try:
        return read_events_csv(events, float(T), meta.get("D"))
    except OSError as exc:
        raise CliError(3, f"cannot read {events}: {exc}") from None
    except (DataError, DomainError) as exc:
        raise CliError(3, f"{events}: {exc}") from None


# ---------------------------------------------------------------------------
# Commands; each returns (tracked outputs, untracked outputs)


def cmd_simulate(args, out: Path):
    cfg = load_json(args.config)
    model = resolve_model(cfg.get("model"))
    if "T" not in cfg:
        raise ConfigurationError("config needs a horizon T")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    sim = SimConfig(float(cfg["T"]), seed=seed, burn_in=cfg.get("burn_in"),
                    max_events=int(cfg.get("max_events", 10_000_000)))
    events = simulate_hawkes(model, sim)
    path = out / "events.csv"
    write_events_csv(events, path)
    meta = {"T": sim.T, "D": model.D, "seed": seed, "burn_in": sim.B, "model": model.to_dict()}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(events)} events to {path}")
    return [path, _sidecar(path)], []


def _fit_options(args) -> FitOptions:
    initial = None
    if args.initial:
        initial = tuple(float(x) for x in args.initial.split(","))
    return FitOptions(mt_rule=args.mt_rule, initial=initial, restarts=args.restarts,
                      seed=args.seed if args.seed is not None else 0)


def cmd_fit(args, out: Path):
    events = _load_events(args.events, args.T)
    descriptor = load_json(args.family_config) if args.family_config else args.family
    par = make_parameterization(descriptor)
    res = FITTERS[args.method](events, par, _fit_options(args))
    path = out / "fit.json"
    path.write_text(res.to_json())
    print(res.to_json(), end="")
    return [path], []


def cmd_test_independence(args, out: Path):
    events = _load_events(args.events, args.T)
    if events.D < 2:
        raise CliError(4, "need D ≥ 2 marks for an independence test")
    report = run_independence_test(events, args.mt_rule, KERNELS[args.kernel])
    path = out / "independence.json"
    path.write_text(report.to_json())
    print(report.to_json(), end="")
    return [path], []


def cmd_experiment(args, out: Path):
    preset = get_preset(args.preset)
    try:
        res = run_experiment(preset, args.reps, args.T, args.mt_rules, args.estimators,
                             seed=args.seed if args.seed is not None else 0, threads=args.threads,
                             alpha=args.alpha)
    except ExperimentError as exc:
        failures = out / f"{preset.name}_failures.txt"
        failures.write_text("\n".join(exc.result.failures()) + "\n")
        raise CliError(5, f"{exc}; see {failures}") from None
    table = out / f"{preset.name}_table.txt"
    table.write_text(res.table())
    reps = out / f"{preset.name}_replications.csv"
    reps.write_text(replications_csv(res))
    timings = out / f"{preset.name}_timings.txt"
    timings.write_text(timings_text(res))
    print(res.table(), end="")
    return [table, reps], [timings]


def cmd_spectrum(args, out: Path):
    if args.config:
        model = resolve_model(load_json(args.config).get("model"))
    else:
        spec = {"preset": args.preset, "a": args.a, "b": args.b}
        model = resolve_model(spec)
    model.require_stationary()
    if args.omegas:
        omegas = np.array([float(x) for x in args.omegas.split(",")])
    else:
        omegas = np.linspace(0.0, args.omega_max, args.num)
    f2 = spectral_density(model, omegas)
    path = out / "spectrum.csv"
    with open(path, "w") as fh:
        fh.write("omega,i,j,re,im\n")
        for k, w in enumerate(omegas):
            for i in range(model.D):
                for j in range(model.D):
                    z = f2[k, i, j]
                    fh.write(f"{w:.17g},{i + 1},{j + 1},{z.real:.17g},{z.imag:.17g}\n")
    print(f"wrote {path}")
    return [path], []


@contextmanager
def _cwd(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


def cmd_replay(args, out: Path):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = ["--out", str(out.resolve()), "--threads", str(args.threads)]
    if manifest.get("seed") is not None:
        argv += ["--seed", str(manifest["seed"])]
    with _cwd(manifest["cwd"]):
        code = main(argv + manifest["argv"])
    if code != 0:
        raise CliError(code, "replayed command failed")
    bad = compare_outputs(manifest, out)
    if bad:
        raise CliError(1, "outputs differ from the manifest: " + ", ".join(bad))
    print(f"reproduced {len(manifest['outputs'])} output(s) byte-identically")
    return [], []


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "test-independence": cmd_test_independence,
    "experiment": cmd_experiment,
    "spectrum": cmd_spectrum,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fhawkes", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="root seed (default: config value or 0)")
    p.add_argument("--threads", type=int, default=default_threads(), help="worker processes")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate an event log from a JSON config")
    s.add_argument("config")

    s = sub.add_parser("fit", help="fit a parametric family to an event file")
    s.add_argument("events")
    s.add_argument("--family", default="univariate-ml")
    s.add_argument("--family-config", help="JSON descriptor with family/fixed/initial")
    s.add_argument("--method", choices=sorted(FITTERS), default="whittle")
    s.add_argument("--T", type=float, help="horizon (default: from the sidecar)")
    s.add_argument("--mt-rule", default="TlogT", help="2T, TlogT, 10sqrtT or an integer")
    s.add_argument("--restarts", type=int, default=3)
    s.add_argument("--initial", help="comma-separated starting values on the natural scale")

    s = sub.add_parser("test-independence", help="chi-square test of independent components")
    s.add_argument("events")
    s.add_argument("--T", type=float)
    s.add_argument("--mt-rule", default="10sqrtT")
    s.add_argument("--kernel", choices=sorted(KERNELS), default="flat")

    s = sub.add_parser("experiment", help="Monte Carlo study for a preset")
    s.add_argument("preset")
    s.add_argument("--reps", type=int)
    s.add_argument("--T", type=float, nargs="+")
    s.add_argument("--mt-rules", nargs="+")
    s.add_argument("--estimators", nargs="+", choices=["mle", "whittle", "independence"])
    s.add_argument("--alpha", type=float, default=0.05)

    s = sub.add_parser("spectrum", help="tabulate the spectral density matrix")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--preset")
    s.add_argument("--a", type=float, default=0.0, help="FH6 cross interaction nu12")
    s.add_argument("--b", type=float, default=0.0, help="FH6 cross interaction nu21")
    s.add_argument("--omegas", help="comma-separated frequencies")
    s.add_argument("--omega-max", type=float, default=10.0)
    s.add_argument("--num", type=int, default=101)

    s = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    s.add_argument("manifest")
    return p


def _strip_globals(argv: list) -> list:
    """Subcommand arguments only; globals are recorded separately."""
    out, skip = [], False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a in ("--seed", "--threads", "--out"):
            skip = True
            continue
        if a.startswith(("--seed=", "--threads=", "--out=")) or a in ("-v", "--verbose"):
            continue
        out.append(a)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        tracked, untracked = COMMANDS[args.command](args, out)
    except CliError as exc:
        print(f"fhawkes: {exc}", file=sys.stderr)
        return exc.code
    except (NonstationaryError, ConfigurationError, DomainError, ShapeError) as exc:
        print(f"fhawkes: {exc}", file=sys.stderr)
        return 2
    except HawkesError as exc:
        print(f"fhawkes: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.command != "replay":
        write_manifest(out, args.command, _strip_globals(argv), os.getcwd(), args.seed, tracked, untracked)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
