"""Experiment configuration files (TOML).

Layout::

    [system]
    n_qubits = 8

    [initial_state]             # optional; default all "zero"
    default = "zero"            # zero | one | mixed
    [[initial_state.override]]
    qubit = 2
    state = "mixed"             # or: theta = 0.4, phi = 1.2

    [noise]
    correlation = "coherent"    # coherent | incoherent_long | incoherent_short
    one_body = "constant(0.05)"
    two_body = "gaussian(0, 0.05)"
    pairs = "all"               # all | first_neighbor | [[0,1], [2,3]]
    [[noise.term]]              # individually planted terms
    qubits = [0, 2]
    axes = "XZ"
    coeff = "gaussian(0, 0.05)"

    [run]
    steps = 60
    realizations = 100
    seed = 1
    measured = [0, 1]           # omitted -> all qubits
    circuit = "motion_reversal" # | stepwise_twirl
    measurement = "exact"       # | bernoulli

Decay configs may replace [noise] with one or more [[variant]] tables
(each with a label and its own noise spec); sweep configs add a [sweep]
section whose strengths substitute the "@" placeholder in coefficient
specs; protocol configs add a [protocol] section.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

from .linalg import ProductOperator, ValidationError
from .noise import (
    CoefficientSpec,
    Constant,
    Correlation,
    Gaussian,
    NoiseModel,
    NoiseTerm,
    build_noise_model,
)
from .sim import (
    CircuitForm,
    ExperimentConfig,
    MeasurementMode,
    PureBloch,
    QubitState,
)


class ConfigError(ValidationError):
    """A configuration file is malformed; the message carries the field."""


_COEFF_RE = re.compile(r"^\s*(constant|gaussian)\s*\(([^)]*)\)\s*$")


def parse_coefficient(text: str, *, strength: float | None = None) -> CoefficientSpec:
    """Parse "constant(x)" or "gaussian(mean, std)"; "@" takes ``strength``."""
    m = _COEFF_RE.match(text)
    if not m:
        raise ConfigError(
            f"cannot parse coefficient spec {text!r}; expected "
            f"constant(x) or gaussian(mean, std)"
        )
    kind, arg_text = m.group(1), m.group(2)

    def number(tok: str) -> float:
        tok = tok.strip()
        if tok == "@":
            if strength is None:
                raise ConfigError(
                    f"coefficient spec {text!r} uses the sweep placeholder "
                    f"'@' outside a sweep"
                )
            return strength
        try:
            return float(tok)
        except ValueError:
            raise ConfigError(f"bad number {tok!r} in coefficient spec {text!r}")

    args = [number(tok) for tok in arg_text.split(",") if tok.strip() != ""]
    if kind == "constant":
        if len(args) != 1:
            raise ConfigError(f"constant(...) takes one value, got {text!r}")
        return Constant(args[0])
    if len(args) != 2:
        raise ConfigError(f"gaussian(...) takes mean and std, got {text!r}")
    return Gaussian(args[0], args[1])


def _get(table: Mapping[str, Any], key: str, kind, where: str, default=None):
    if key not in table:
        if default is not None:
            return default
        raise ConfigError(f"[{where}] missing required key {key!r}")
    value = table[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(
            f"[{where}] key {key!r} should be {kind.__name__}, "
            f"got {type(value).__name__}"
        )
    return value


def _check_keys(table: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"[{where}] unknown keys {unknown}")


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_noise(
    table: Mapping[str, Any],
    n_qubits: int,
    *,
    strength: float | None = None,
    where: str = "noise",
) -> NoiseModel:
    _check_keys(
        table, {"correlation", "one_body", "two_body", "pairs", "term"}, where
    )
    corr_text = _get(table, "correlation", str, where)
    try:
        correlation = Correlation(corr_text)
    except ValueError:
        options = ", ".join(c.value for c in Correlation)
        raise ConfigError(
            f"[{where}] unknown correlation {corr_text!r}; one of: {options}"
        )
    one_body = two_body = None
    if "one_body" in table:
        one_body = parse_coefficient(
            _get(table, "one_body", str, where), strength=strength
        )
    if "two_body" in table:
        two_body = parse_coefficient(
            _get(table, "two_body", str, where), strength=strength
        )
    pairs = table.get("pairs", "all")
    if not isinstance(pairs, str):
        pairs = [tuple(int(q) for q in pair) for pair in pairs]
    extra = []
    for i, term_table in enumerate(table.get("term", [])):
        term_where = f"{where}.term #{i + 1}"
        _check_keys(term_table, {"qubits", "axes", "coeff"}, term_where)
        qubits = _get(term_table, "qubits", list, term_where)
        axes = _get(term_table, "axes", str, term_where)
        if len(qubits) != len(axes):
            raise ConfigError(
                f"[{term_where}] {len(qubits)} qubits but {len(axes)} axes"
            )
        coeff = parse_coefficient(
            _get(term_table, "coeff", str, term_where), strength=strength
        )
        try:
            op = ProductOperator.from_assignments(
                n_qubits, {int(q): a for q, a in zip(qubits, axes.upper())}
            )
        except ValidationError as exc:
            raise ConfigError(f"[{term_where}] {exc}") from exc
        extra.append(NoiseTerm(op, coeff))
    try:
        return build_noise_model(
            n_qubits,
            correlation,
            one_body=one_body,
            two_body=two_body,
            pairs=pairs,
            extra_terms=extra,
        )
    except ValidationError as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def parse_initial_state(
    table: Mapping[str, Any], n_qubits: int
) -> tuple[QubitState, ...]:
    _check_keys(table, {"default", "override"}, "initial_state")
    default = _get(table, "default", str, "initial_state", default="zero")
    if default not in ("zero", "one", "mixed"):
        raise ConfigError(
            f"[initial_state] default must be zero|one|mixed, got {default!r}"
        )
    states: list[QubitState] = [default] * n_qubits
    for i, ov in enumerate(table.get("override", [])):
        where = f"initial_state.override #{i + 1}"
        _check_keys(ov, {"qubit", "state", "theta", "phi"}, where)
        q = _get(ov, "qubit", int, where)
        if not 0 <= q < n_qubits:
            raise ConfigError(f"[{where}] qubit {q} out of range 0..{n_qubits - 1}")
        if "theta" in ov or "phi" in ov:
            states[q] = PureBloch(
                _get(ov, "theta", float, where, default=0.0),
                _get(ov, "phi", float, where, default=0.0),
            )
        else:
            state = _get(ov, "state", str, where)
            if state not in ("zero", "one", "mixed"):
                raise ConfigError(
                    f"[{where}] state must be zero|one|mixed, got {state!r}"
                )
            states[q] = state
    return tuple(states)


@dataclass(frozen=True)
class RunSettings:
    steps: int
    realizations: int
    seed: int
    measured: tuple[int, ...]
    circuit_form: CircuitForm
    measurement_mode: MeasurementMode


def parse_run(table: Mapping[str, Any], n_qubits: int) -> RunSettings:
    _check_keys(
        table,
        {"steps", "realizations", "seed", "measured", "circuit", "measurement"},
        "run",
    )
    measured = table.get("measured", list(range(n_qubits)))
    if not isinstance(measured, list):
        raise ConfigError("[run] measured must be a list of qubit indices")
    measured = tuple(int(q) for q in measured)
    bad = [q for q in measured if not 0 <= q < n_qubits]
    if bad:
        raise ConfigError(
            f"[run] measured qubits {bad} out of range 0..{n_qubits - 1}"
        )
    circuit_text = _get(table, "circuit", str, "run", default="motion_reversal")
    try:
        circuit = CircuitForm(circuit_text)
    except ValueError:
        raise ConfigError(f"[run] unknown circuit form {circuit_text!r}")
    mode_text = _get(table, "measurement", str, "run", default="exact")
    try:
        mode = MeasurementMode(mode_text)
    except ValueError:
        raise ConfigError(f"[run] unknown measurement mode {mode_text!r}")
    return RunSettings(
        steps=_get(table, "steps", int, "run", default=1),
        realizations=_get(table, "realizations", int, "run"),
        seed=_get(table, "seed", int, "run", default=0),
        measured=measured,
        circuit_form=circuit,
        measurement_mode=mode,
    )


@dataclass(frozen=True)
class DecayJob:
    label: str
    config: ExperimentConfig


@dataclass(frozen=True)
class SweepJob:
    strengths: tuple[float, ...]
    configs: tuple[ExperimentConfig, ...]


@dataclass(frozen=True)
class ProtocolJob:
    noise: NoiseModel
    max_body: int
    triples: tuple[tuple[int, ...], ...]
    realizations: int
    seed: int
    measurement_mode: MeasurementMode
    delta: float | None
    epsilon: float | None


def _experiment_config(
    n_qubits: int,
    noise: NoiseModel,
    states: tuple[QubitState, ...],
    run: RunSettings,
    overrides: Mapping[str, Any],
) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            n_qubits=n_qubits,
            noise=noise,
            initial_state=states,
            measured=run.measured,
            steps=int(overrides.get("steps") or run.steps),
            realizations=int(overrides.get("realizations") or run.realizations),
            circuit_form=run.circuit_form,
            measurement_mode=run.measurement_mode,
            seed=int(
                overrides["seed"] if overrides.get("seed") is not None else run.seed
            ),
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _system_and_states(doc: Mapping[str, Any]):
    if "system" not in doc:
        raise ConfigError("missing [system] section")
    n_qubits = _get(doc["system"], "n_qubits", int, "system")
    states = parse_initial_state(doc.get("initial_state", {}), n_qubits)
    return n_qubits, states


def load_decay_jobs(path, overrides: Mapping[str, Any] = {}) -> list[DecayJob]:
    doc = load_toml(path)
    n_qubits, states = _system_and_states(doc)
    if "run" not in doc:
        raise ConfigError("missing [run] section")
    run = parse_run(doc["run"], n_qubits)
    jobs = []
    if "variant" in doc:
        for i, var in enumerate(doc["variant"]):
            where = f"variant #{i + 1}"
            label = var.get("label", f"variant{i + 1}")
            if "noise" not in var:
                raise ConfigError(f"[{where}] missing noise table")
            noise = parse_noise(
                var["noise"], n_qubits, where=f"{where}.noise"
            )
            jobs.append(
                DecayJob(label, _experiment_config(n_qubits, noise, states, run, overrides))
            )
    if "noise" in doc:
        noise = parse_noise(doc["noise"], n_qubits)
        jobs.append(
            DecayJob("curve", _experiment_config(n_qubits, noise, states, run, overrides))
        )
    if not jobs:
        raise ConfigError("config defines neither [noise] nor [[variant]]")
    labels = [j.label for j in jobs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate variant labels {labels}")
    return jobs


def load_sweep_job(path, overrides: Mapping[str, Any] = {}) -> SweepJob:
    doc = load_toml(path)
    n_qubits, states = _system_and_states(doc)
    if "run" not in doc:
        raise ConfigError("missing [run] section")
    if "sweep" not in doc:
        raise ConfigError("missing [sweep] section")
    if "noise" not in doc:
        raise ConfigError("missing [noise] section")
    run = parse_run(doc["run"], n_qubits)
    _check_keys(doc["sweep"], {"strengths"}, "sweep")
    strengths = _get(doc["sweep"], "strengths", list, "sweep")
    if not strengths:
        raise ConfigError("[sweep] strengths must be a nonempty list")
    strengths = tuple(float(s) for s in strengths)
    configs = []
    for chi in strengths:
        noise = parse_noise(doc["noise"], n_qubits, strength=chi)
        configs.append(_experiment_config(n_qubits, noise, states, run, overrides))
    return SweepJob(strengths, configs)


def load_protocol_job(path, overrides: Mapping[str, Any] = {}) -> ProtocolJob:
    doc = load_toml(path)
    n_qubits, _ = _system_and_states(doc)
    if "noise" not in doc:
        raise ConfigError("missing [noise] section")
    if "protocol" not in doc:
        raise ConfigError("missing [protocol] section")
    noise = parse_noise(doc["noise"], n_qubits)
    table = doc["protocol"]
    _check_keys(
        table,
        {"max_body", "triples", "realizations", "seed", "measurement",
         "delta", "epsilon"},
        "protocol",
    )
    triples = tuple(
        tuple(int(q) for q in t) for t in table.get("triples", [])
    )
    mode_text = _get(table, "measurement", str, "protocol", default="exact")
    try:
        mode = MeasurementMode(mode_text)
    except ValueError:
        raise ConfigError(f"[protocol] unknown measurement mode {mode_text!r}")
    delta = table.get("delta")
    epsilon = table.get("epsilon")
    return ProtocolJob(
        noise=noise,
        max_body=_get(table, "max_body", int, "protocol", default=2),
        triples=triples,
        realizations=int(
            overrides.get("realizations")
            or _get(table, "realizations", int, "protocol")
        ),
        seed=int(
            overrides["seed"]
            if overrides.get("seed") is not None
            else _get(table, "seed", int, "protocol", default=0)
        ),
        measurement_mode=mode,
        delta=float(delta) if delta is not None else None,
        epsilon=float(epsilon) if epsilon is not None else None,
    )
