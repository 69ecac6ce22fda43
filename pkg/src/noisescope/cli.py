"""Batch front-end: run configured experiments and write CSV/report files.

Exit codes: 0 success, 1 validation/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytics
from .config import (
    ConfigError,
    load_decay_jobs,
    load_protocol_job,
    load_sweep_job,
)
from .linalg import NumericalError, ValidationError
from .protocol import (
    chernoff_budget,
    format_report,
    plan_protocol,
    run_protocol,
    simulation_gamma_source,
)
from .sim import FirstStep, estimate_decay_rate, run_experiment


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class _Manifest:
    """Records how outputs were produced, for bit-exact reruns."""

    def __init__(self, command: str, config: str | None, args) -> None:
        self.data = {
            "tool": "noisescope",
            "version": __version__,
            "command": command,
            "config": config,
            "overrides": {
                "seed": args.seed,
                "realizations": args.realizations,
                "steps": getattr(args, "steps", None),
            },
            "threads": args.threads,
            "started": _now(),
            "outputs": [],
            "seeds": {},
        }

    def add_output(self, path: Path) -> None:
        self.data["outputs"].append(str(path))

    def record_seed(self, label: str, seed: int) -> None:
        self.data["seeds"][label] = seed

    def write(self, path: Path) -> None:
        self.data["finished"] = _now()
        path.write_text(json.dumps(self.data, indent=2) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "realizations": args.realizations,
        "steps": getattr(args, "steps", None),
    }


def cmd_decay(args) -> int:
    jobs = load_decay_jobs(args.config, _overrides(args))
    out = _out_dir(args)
    manifest = _Manifest("decay", args.config, args)
    for job in jobs:
        curve = run_experiment(job.config, threads=args.threads)
        curve_path = out / f"{job.label}_curve.csv"
        curve.write_csv(curve_path)
        manifest.add_output(curve_path)
        manifest.record_seed(job.label, job.config.seed)
        laws = analytics.closed_form_laws(job.config.noise)
        if laws is not None:
            f0s = [
                1.0 if job.config.initial_state[q] != "mixed" else 0.5
                for q in range(job.config.n_qubits)
            ]
            t = np.arange(job.config.steps + 1)
            theory = analytics.system_fidelity(laws, f0s, t)
            theory_path = out / f"{job.label}_theory.csv"
            with open(theory_path, "w") as fh:
                fh.write("t,f_theory\n")
                for ti, fi in zip(t, theory):
                    fh.write(f"{int(ti)},{fi:.17g}\n")
            manifest.add_output(theory_path)
        print(f"wrote {curve_path}")
    manifest.write(out / "manifest.json")
    return 0


def cmd_gamma_sweep(args) -> int:
    job = load_sweep_job(args.config, _overrides(args))
    out = _out_dir(args)
    manifest = _Manifest("gamma-sweep", args.config, args)
    rows = []
    for chi, cfg in zip(job.strengths, job.configs):
        est = estimate_decay_rate(cfg, FirstStep(), threads=args.threads)
        rows.append((chi, est.value, est.stderr))
        manifest.record_seed(f"chi={chi}", cfg.seed)
    sweep_path = out / "sweep.csv"
    with open(sweep_path, "w") as fh:
        fh.write("chi,gamma,stderr\n")
        for chi, gamma, stderr in rows:
            fh.write(f"{chi:.17g},{gamma:.17g},{stderr:.17g}\n")
    manifest.add_output(sweep_path)
    fit = analytics.quadratic_strength_fit(
        [r[0] for r in rows], [r[1] for r in rows]
    )
    fit_path = out / "sweep_fit.json"
    fit_path.write_text(
        json.dumps(
            {
                "model": "gamma = c * chi^2",
                "coefficient": fit.coefficient,
                "r_squared": fit.r_squared,
                "residuals": list(fit.residuals),
            },
            indent=2,
        )
        + "\n"
    )
    manifest.add_output(fit_path)
    manifest.write(out / "manifest.json")
    print(f"wrote {sweep_path} (c = {fit.coefficient:.6g}, R^2 = {fit.r_squared:.6f})")
    return 0


def cmd_protocol(args) -> int:
    job = load_protocol_job(args.config, _overrides(args))
    out = _out_dir(args)
    manifest = _Manifest("protocol", args.config, args)
    budget = None
    if job.delta is not None and job.epsilon is not None:
        budget = chernoff_budget(job.delta, job.epsilon)
    plan = plan_protocol(job.noise.n_qubits, job.max_body, job.triples)
    source = simulation_gamma_source(
        job.noise,
        realizations=job.realizations,
        seed=job.seed,
        measurement_mode=job.measurement_mode,
        threads=args.threads,
    )
    report = run_protocol(plan, source, budget=budget)
    report_path = out / "report.txt"
    report_path.write_text(format_report(report))
    manifest.add_output(report_path)

    gammas_path = out / "gammas.csv"
    with open(gammas_path, "w") as fh:
        fh.write("subset,gamma,stderr\n")
        for subset in sorted(report.gammas, key=lambda s: (len(s), sorted(s))):
            est = report.gammas[subset]
            label = "+".join(str(q) for q in sorted(subset))
            fh.write(f"{label},{est.value:.17g},{est.stderr:.17g}\n")
    manifest.add_output(gammas_path)

    strengths_path = out / "strengths.csv"
    with open(strengths_path, "w") as fh:
        fh.write("subset,value,stderr,clamped\n")
        for group in (report.singles, report.pairs, report.triples):
            for est in sorted(group, key=lambda e: sorted(e.subset)):
                label = "+".join(str(q) for q in sorted(est.subset))
                fh.write(
                    f"{label},{est.value:.17g},{est.stderr:.17g},"
                    f"{est.clamped:.17g}\n"
                )
    manifest.add_output(strengths_path)
    manifest.record_seed("protocol", job.seed)
    manifest.write(out / "manifest.json")
    print(report_path.read_text(), end="")
    return 0


def cmd_budget(args) -> int:
    budget = chernoff_budget(args.delta, args.epsilon)
    print(budget.n_realizations)
    return 0


def _add_common(parser: argparse.ArgumentParser, steps: bool = True) -> None:
    parser.add_argument("config", help="TOML configuration file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument(
        "--realizations", type=int, default=None, help="override realization count"
    )
    if steps:
        parser.add_argument(
            "--steps", type=int, default=None, help="override the step count"
        )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker processes (default: $NOISESCOPE_THREADS or 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisescope",
        description="Fidelity-decay simulation and noise-strength estimation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decay", help="simulate fidelity-decay curves")
    _add_common(p)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("gamma-sweep", help="decay rate vs noise strength")
    _add_common(p)
    p.set_defaults(func=cmd_gamma_sweep)

    p = sub.add_parser("protocol", help="subset decay rates and strength inversion")
    _add_common(p, steps=False)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("budget", help="realization count for a precision target")
    p.add_argument("--delta", type=float, required=True, help="precision")
    p.add_argument("--epsilon", type=float, required=True, help="error probability")
    p.set_defaults(func=cmd_budget)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
