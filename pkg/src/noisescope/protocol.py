"""Noise-characterization protocol: schedule decay-rate measurements over
qubit subsets, invert them into collective term strengths, and budget the
realization count for single-shot estimation.

The inversion is exact linear algebra on the measured decay rates:

* pair strength   (9/4) (g_a + g_b - g_ab)
* single strength (3/2) g_a - sum over pairs containing a
* triple probe    (27/8) of the inclusion-exclusion combination

Standard errors propagate in quadrature, treating the per-subset
measurements as independent experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Mapping

from .linalg import ValidationError
from .noise import NoiseModel
from .sim import (
    DecayRateEstimate,
    ExperimentConfig,
    FidelityCurve,
    FirstStep,
    GammaMethod,
    MeasurementMode,
    QubitState,
    decay_rate_from_curve,
    estimate_decay_rate,
)

Subset = frozenset


@dataclass(frozen=True)
class MeasurementTask:
    """Measure the initial decay rate of one qubit subset."""

    measured: tuple[int, ...]

    @property
    def subset(self) -> frozenset:
        return frozenset(self.measured)


@dataclass(frozen=True)
class ProtocolPlan:
    n_qubits: int
    max_body: int
    tasks: tuple[MeasurementTask, ...]


def plan_protocol(
    n_qubits: int, max_body: int = 2, triples: Iterable = ()
) -> ProtocolPlan:
    """Deterministic task list: all singletons, all pairs, chosen triples.

    Which triples to probe is up to the caller; ``triples`` is ignored
    unless ``max_body`` is 3.
    """
    if max_body not in (2, 3):
        raise ValidationError(f"max_body must be 2 or 3, got {max_body}")
    if n_qubits < 2:
        raise ValidationError("the protocol needs at least 2 qubits")
    if max_body == 3 and n_qubits < 3:
        raise ValidationError("three-body probes need at least 3 qubits")
    tasks = [MeasurementTask((q,)) for q in range(n_qubits)]
    tasks += [MeasurementTask(pair) for pair in combinations(range(n_qubits), 2)]
    if max_body == 3:
        seen = set()
        for triple in triples:
            t = tuple(sorted(int(q) for q in triple))
            if len(set(t)) != 3 or t[0] < 0 or t[-1] >= n_qubits:
                raise ValidationError(f"invalid triple {triple}")
            if t in seen:
                raise ValidationError(f"duplicate triple {t}")
            seen.add(t)
            tasks.append(MeasurementTask(t))
    return ProtocolPlan(n_qubits, max_body, tuple(tasks))


# ---------------------------------------------------------------------------
# Inversion of decay rates into collective strengths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientEstimate:
    """Estimated collective strength of one qubit subset.

    ``value`` is the raw estimate and may be negative from statistical
    fluctuation; ``clamped`` is the zero-floored convenience value.
    """

    subset: frozenset
    value: float
    stderr: float

    @property
    def clamped(self) -> float:
        return max(0.0, self.value)

    @property
    def is_clamped(self) -> bool:
        return self.value < 0.0


GammaTable = Mapping[frozenset, DecayRateEstimate]


def _combine(
    subset: frozenset, pieces: Mapping[frozenset, float], gammas: GammaTable
) -> CoefficientEstimate:
    value = 0.0
    var = 0.0
    for key, coeff in pieces.items():
        est = gammas[key]
        value += coeff * est.value
        var += (coeff * est.stderr) ** 2
    return CoefficientEstimate(subset, value, math.sqrt(var))


def _require(gammas: GammaTable, subsets: Iterable[frozenset]) -> None:
    missing = [sorted(s) for s in subsets if s not in gammas]
    if missing:
        raise ValidationError(f"missing decay rates for subsets {missing}")


def invert_pair_strengths(gammas: GammaTable) -> list[CoefficientEstimate]:
    """Pair and single collective strengths from singleton and pair rates.

    Valid when terms touching three or more qubits are negligible. The
    qubit set is taken from the singleton keys; all singletons and all
    pairs over it must be present.
    """
    qubits = sorted(q for s in gammas if len(s) == 1 for q in s)
    if len(qubits) < 2:
        raise ValidationError("need singleton decay rates for at least 2 qubits")
    singles = [frozenset((q,)) for q in qubits]
    pairs = [frozenset(p) for p in combinations(qubits, 2)]
    _require(gammas, singles + pairs)

    estimates = []
    for pair in pairs:
        a, b = sorted(pair)
        pieces = {
            frozenset((a,)): 9.0 / 4.0,
            frozenset((b,)): 9.0 / 4.0,
            pair: -9.0 / 4.0,
        }
        estimates.append(_combine(pair, pieces, gammas))
    for q in qubits:
        pieces: dict[frozenset, float] = {frozenset((q,)): 1.5}
        for other in qubits:
            if other == q:
                continue
            pair = frozenset((q, other))
            pieces[frozenset((q,))] -= 9.0 / 4.0
            pieces[frozenset((other,))] = pieces.get(frozenset((other,)), 0.0) - 9.0 / 4.0
            pieces[pair] = pieces.get(pair, 0.0) + 9.0 / 4.0
        estimates.append(_combine(frozenset((q,)), pieces, gammas))
    return estimates


def probe_triple_strength(gammas: GammaTable, triple) -> CoefficientEstimate:
    """Three-body collective strength from the seven subset rates of a triple.

    The inclusion-exclusion combination cancels every contribution of
    weight <= 2 exactly; with terms of weight >= 4 negligible it isolates
    (27/8) times the triple's collective strength.
    """
    t = sorted(int(q) for q in triple)
    if len(set(t)) != 3:
        raise ValidationError(f"need three distinct qubits, got {triple}")
    a, b, c = t
    pieces = {
        frozenset((a,)): 27.0 / 8.0,
        frozenset((b,)): 27.0 / 8.0,
        frozenset((c,)): 27.0 / 8.0,
        frozenset((a, b)): -27.0 / 8.0,
        frozenset((a, c)): -27.0 / 8.0,
        frozenset((b, c)): -27.0 / 8.0,
        frozenset((a, b, c)): 27.0 / 8.0,
    }
    _require(gammas, pieces)
    return _combine(frozenset(t), pieces, gammas)


# ---------------------------------------------------------------------------
# Sample budgeting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleBudget:
    """Realization count guaranteeing |estimate - mean| < delta except with
    probability at most epsilon, for estimators bounded in [0, 1]."""

    delta: float
    epsilon: float
    n_realizations: int


def chernoff_budget(delta: float, epsilon: float) -> SampleBudget:
    """Minimum realizations: ceil(-ln(epsilon/2) / (2 delta^2))."""
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon must be in (0, 1), got {epsilon}")
    n = math.ceil(-math.log(epsilon / 2.0) / (2.0 * delta**2))
    return SampleBudget(delta, epsilon, int(n))


# ---------------------------------------------------------------------------
# Protocol execution
# ---------------------------------------------------------------------------

GammaSource = Callable[[MeasurementTask], DecayRateEstimate]


def simulation_gamma_source(
    noise: NoiseModel,
    *,
    realizations: int,
    seed: int,
    steps: int = 1,
    measured_state: QubitState = "zero",
    unmeasured_state: QubitState = "mixed",
    measurement_mode: MeasurementMode = MeasurementMode.EXACT_TRACE,
    method: GammaMethod = FirstStep(),
    threads: int | None = None,
) -> GammaSource:
    """Live decay-rate source running one experiment per subset.

    Measured qubits start in |0> and the rest maximally mixed by default
    (the rate does not depend on the unmeasured states). Each task gets
    its own seed, offset by the subset's bitmask, so measurements are
    independent.
    """

    def source(task: MeasurementTask) -> DecayRateEstimate:
        initial = tuple(
            measured_state if q in task.subset else unmeasured_state
            for q in range(noise.n_qubits)
        )
        task_seed = seed + sum(1 << q for q in task.measured)
        cfg = ExperimentConfig(
            n_qubits=noise.n_qubits,
            noise=noise,
            initial_state=initial,
            measured=task.measured,
            steps=steps,
            realizations=realizations,
            measurement_mode=measurement_mode,
            seed=task_seed,
        )
        return estimate_decay_rate(cfg, method, threads=threads)

    return source


def curve_gamma_source(
    curves: Mapping[frozenset, FidelityCurve], method: GammaMethod = FirstStep()
) -> GammaSource:
    """Decay-rate source reading previously saved fidelity curves."""

    def source(task: MeasurementTask) -> DecayRateEstimate:
        if task.subset not in curves:
            raise ValidationError(
                f"no saved curve for subset {sorted(task.subset)}"
            )
        return decay_rate_from_curve(curves[task.subset], method)

    return source


@dataclass(frozen=True)
class ProtocolReport:
    n_qubits: int
    gammas: dict
    singles: tuple[CoefficientEstimate, ...]
    pairs: tuple[CoefficientEstimate, ...]
    triples: tuple[CoefficientEstimate, ...]
    budget: SampleBudget | None = None


def run_protocol(
    plan: ProtocolPlan,
    source: GammaSource,
    *,
    budget: SampleBudget | None = None,
) -> ProtocolReport:
    """Measure every planned subset, then run the inversions."""
    gammas = {task.subset: source(task) for task in plan.tasks}
    estimates = invert_pair_strengths(gammas)
    singles = tuple(e for e in estimates if len(e.subset) == 1)
    pairs = tuple(e for e in estimates if len(e.subset) == 2)
    triples = tuple(
        probe_triple_strength(gammas, sorted(task.subset))
        for task in plan.tasks
        if len(task.measured) == 3
    )
    return ProtocolReport(plan.n_qubits, gammas, singles, pairs, triples, budget)


def _fmt_subset(subset) -> str:
    return "(" + ",".join(str(q) for q in sorted(subset)) + ")"


def format_report(report: ProtocolReport) -> str:
    """Structured-text report: decay-rate table, strengths, budget echo."""
    lines = [f"qubits: {report.n_qubits}", "", "decay rates"]
    lines.append(f"{'subset':<12} {'gamma':>14} {'stderr':>12}")
    for subset in sorted(report.gammas, key=lambda s: (len(s), sorted(s))):
        est = report.gammas[subset]
        lines.append(
            f"{_fmt_subset(subset):<12} {est.value:>14.6e} {est.stderr:>12.3e}"
        )
    lines += ["", "collective strengths"]
    lines.append(
        f"{'subset':<12} {'value':>14} {'stderr':>12} {'clamped':>14}"
    )
    for group in (report.singles, report.pairs, report.triples):
        for est in sorted(group, key=lambda e: sorted(e.subset)):
            lines.append(
                f"{_fmt_subset(est.subset):<12} {est.value:>14.6e} "
                f"{est.stderr:>12.3e} {est.clamped:>14.6e}"
            )
    if report.budget is not None:
        lines += [
            "",
            f"sample budget: delta={report.budget.delta} "
            f"epsilon={report.budget.epsilon} -> "
            f"N_R={report.budget.n_realizations}",
        ]
    return "\n".join(lines) + "\n"
