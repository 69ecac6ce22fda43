"""Monte Carlo engine for average fidelity decay under random rotations.

Each realization applies, per step, fresh Haar-random single-qubit
rotations followed by the error unitary, and reads out the overlap of the
motion-reversed state with the initial state on the measured qubits
(or, in the stepwise-twirl form, conjugates the error by the rotation
within the step). Fidelities are recorded at every integer step.

Reproducibility contract: realization ``r`` of an experiment with seed
``s`` draws from a Philox stream keyed by ``(s, r)``. Within a
realization the draw order is: realization-scope coefficients (long
correlation time only); then per step: rotation uniforms for qubits
0..n-1 (three per qubit: xi, psi, chi), step-scope coefficients (short
correlation time only), and one measurement uniform in Bernoulli mode.
Experiment-scope coefficients use the stream keyed by ``(s, 2**64 - 1)``.
Results are bit-identical for a given (config, seed) regardless of the
worker count.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import reduce
from typing import Sequence, Union

import numpy as np

from . import analytics
from .linalg import (
    MAX_QUBITS,
    NumericalError,
    PAULI_I,
    ValidationError,
    conjugate_qubit,
    density_from_bloch,
    haar_angles_from_uniform,
    kron,
    su2_from_angles,
    transform_qubit_vector,
)
from .noise import (
    Correlation,
    DrawScope,
    NoiseModel,
    draw_coefficients,
    error_unitary,
    one_body_unitaries,
)

#: Realizations per work unit. Fixed so that results never depend on the
#: thread count; workers always process whole batches in index order.
BATCH_SIZE = 1024

_EXPERIMENT_STREAM = 2**64 - 1

THREADS_ENV_VAR = "NOISESCOPE_THREADS"


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PureBloch:
    """Pure single-qubit state at polar angle theta, azimuth phi."""

    theta: float
    phi: float


QubitState = Union[str, PureBloch]  # "zero" | "one" | "mixed" | PureBloch

_BASIS_BIT = {"zero": 0, "one": 1}


def qubit_density(state: QubitState) -> np.ndarray:
    if isinstance(state, PureBloch):
        st, ct = math.sin(state.theta), math.cos(state.theta)
        return density_from_bloch(
            st * math.cos(state.phi), st * math.sin(state.phi), ct
        )
    if state == "zero":
        return density_from_bloch(0.0, 0.0, 1.0)
    if state == "one":
        return density_from_bloch(0.0, 0.0, -1.0)
    if state == "mixed":
        return 0.5 * PAULI_I.copy()
    raise ValidationError(f"unknown qubit state {state!r}")


def qubit_ket(state: QubitState) -> np.ndarray:
    if isinstance(state, PureBloch):
        return np.array(
            [
                math.cos(state.theta / 2.0),
                math.sin(state.theta / 2.0) * np.exp(1j * state.phi),
            ],
            dtype=complex,
        )
    if state == "zero":
        return np.array([1.0, 0.0], dtype=complex)
    if state == "one":
        return np.array([0.0, 1.0], dtype=complex)
    raise ValidationError(f"state {state!r} is not pure")


def qubit_purity(state: QubitState) -> float:
    return 0.5 if state == "mixed" else 1.0


def is_basis_state(state: QubitState) -> bool:
    return state in _BASIS_BIT


# ---------------------------------------------------------------------------
# Experiment configuration and results
# ---------------------------------------------------------------------------


class CircuitForm(enum.Enum):
    MOTION_REVERSAL = "motion_reversal"
    STEPWISE_TWIRL = "stepwise_twirl"


class MeasurementMode(enum.Enum):
    EXACT_TRACE = "exact"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class ExperimentConfig:
    """One fidelity-decay experiment.

    The initial state is a product state over qubits; ``measured`` is the
    nonempty set of qubits whose reduced state enters the fidelity. In
    Bernoulli mode every measured qubit must start in a computational
    basis state.
    """

    n_qubits: int
    noise: NoiseModel
    initial_state: tuple[QubitState, ...]
    measured: tuple[int, ...]
    steps: int
    realizations: int
    circuit_form: CircuitForm = CircuitForm.MOTION_REVERSAL
    measurement_mode: MeasurementMode = MeasurementMode.EXACT_TRACE
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValidationError(
                f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}"
            )
        if self.noise.n_qubits != self.n_qubits:
            raise ValidationError(
                f"noise model is on {self.noise.n_qubits} qubits, "
                f"experiment has {self.n_qubits}"
            )
        if len(self.initial_state) != self.n_qubits:
            raise ValidationError(
                f"need {self.n_qubits} initial qubit states, "
                f"got {len(self.initial_state)}"
            )
        for st in self.initial_state:
            qubit_density(st)  # validates
        measured = tuple(sorted(set(int(q) for q in self.measured)))
        if len(measured) != len(self.measured):
            raise ValidationError(f"measured set {self.measured} has duplicates")
        object.__setattr__(self, "measured", measured)
        if not measured:
            raise ValidationError("measured set must be nonempty")
        if measured[0] < 0 or measured[-1] >= self.n_qubits:
            raise ValidationError(
                f"measured set {measured} not within 0..{self.n_qubits - 1}"
            )
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.realizations < 1:
            raise ValidationError(
                f"realizations must be >= 1, got {self.realizations}"
            )
        if self.measurement_mode is MeasurementMode.BERNOULLI:
            bad = [q for q in measured if not is_basis_state(self.initial_state[q])]
            if bad:
                raise ValidationError(
                    f"Bernoulli mode needs computational-basis initial states "
                    f"on measured qubits; offending qubits: {bad}"
                )

    @property
    def f0(self) -> float:
        """Purity of the reduced initial state on the measured qubits."""
        out = 1.0
        for q in self.measured:
            out *= qubit_purity(self.initial_state[q])
        return out


@dataclass(frozen=True)
class FidelityCurve:
    """Average fidelity per step with standard errors.

    ``mean_f[0]`` equals ``f0`` exactly in exact-trace mode;
    ``stderr[t]`` is the sample standard deviation over realizations
    divided by sqrt(n_realizations) (binomial in Bernoulli mode).
    """

    t: np.ndarray
    mean_f: np.ndarray
    stderr: np.ndarray
    n_realizations: int
    f0: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "mean_f", "stderr", "n_realizations", "f0"])
            for t, m, s in zip(self.t, self.mean_f, self.stderr):
                writer.writerow(
                    [
                        int(t),
                        f"{m:.17g}",
                        f"{s:.17g}",
                        self.n_realizations,
                        f"{self.f0:.17g}",
                    ]
                )

    @classmethod
    def read_csv(cls, path) -> "FidelityCurve":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["t", "mean_f", "stderr", "n_realizations", "f0"]:
                raise ValidationError(f"unexpected CSV header {header}")
            rows = [row for row in reader if row]
        if not rows:
            raise ValidationError("fidelity CSV has no data rows")
        return cls(
            t=np.array([int(r[0]) for r in rows]),
            mean_f=np.array([float(r[1]) for r in rows]),
            stderr=np.array([float(r[2]) for r in rows]),
            n_realizations=int(rows[0][3]),
            f0=float(rows[0][4]),
        )


# ---------------------------------------------------------------------------
# Engine internals
# ---------------------------------------------------------------------------


def _realization_rng(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & (2**64 - 1), index & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _experiment_coefficients(cfg: ExperimentConfig) -> np.ndarray | None:
    if cfg.noise.scope is not DrawScope.EXPERIMENT:
        return None
    rng = _realization_rng(cfg.seed, _EXPERIMENT_STREAM)
    return draw_coefficients(cfg.noise, DrawScope.EXPERIMENT, rng)


def _readout_matrix(cfg: ExperimentConfig) -> np.ndarray:
    """Dense rho_0^(M) (x) I_Mbar, so f = Tr[rho_mr . P]."""
    measured = set(cfg.measured)
    factors = []
    for q in reversed(range(cfg.n_qubits)):
        if q in measured:
            factors.append(qubit_density(cfg.initial_state[q]))
        else:
            factors.append(PAULI_I)
    return reduce(kron, factors)


def _target_index(cfg: ExperimentConfig) -> int:
    idx = 0
    for rank, q in enumerate(cfg.measured):
        idx += _BASIS_BIT[cfg.initial_state[q]] << rank
    return idx


def _draw_batch(cfg: ExperimentConfig, start: int, stop: int):
    """All randomness for realizations [start, stop), in contract order."""
    n, T = cfg.n_qubits, cfg.steps
    nb = stop - start
    scope = cfg.noise.scope
    bernoulli = cfg.measurement_mode is MeasurementMode.BERNOULLI
    rot = np.empty((nb, T, n, 3), dtype=float)
    real_coeffs = (
        np.empty((nb, cfg.noise.n_terms), dtype=float)
        if scope is DrawScope.REALIZATION
        else None
    )
    step_coeffs = (
        np.empty((nb, T, cfg.noise.n_terms), dtype=float)
        if scope is DrawScope.STEP
        else None
    )
    meas_u = np.empty((nb, T), dtype=float) if bernoulli else None
    interleaved = scope is DrawScope.STEP or bernoulli
    for i, r in enumerate(range(start, stop)):
        rng = _realization_rng(cfg.seed, r)
        if real_coeffs is not None:
            real_coeffs[i] = draw_coefficients(cfg.noise, scope, rng)
        if not interleaved:
            rot[i] = rng.random((T, n, 3))
            continue
        for s in range(T):
            rot[i, s] = rng.random((n, 3))
            if step_coeffs is not None:
                step_coeffs[i, s] = draw_coefficients(cfg.noise, scope, rng)
            if meas_u is not None:
                meas_u[i, s] = rng.random()
    return rot, real_coeffs, step_coeffs, meas_u


def _initial_states(cfg: ExperimentConfig, nb: int, pure: bool) -> np.ndarray:
    if pure:
        kets = [qubit_ket(cfg.initial_state[q]) for q in reversed(range(cfg.n_qubits))]
        psi = reduce(np.kron, kets)
        return np.tile(psi, (nb, 1))
    mats = [qubit_density(cfg.initial_state[q]) for q in reversed(range(cfg.n_qubits))]
    rho = reduce(kron, mats)
    return np.tile(rho, (nb, 1, 1))


def _apply_error(state, e, pure: bool):
    if pure:
        if e.ndim == 2:
            return state @ e.T
        return np.matmul(e, state[..., None])[..., 0]
    if e.ndim == 2:
        return e @ state @ e.conj().T
    return e @ state @ np.conj(np.swapaxes(e, -1, -2))


def _fidelity(state, p_mat, pure: bool) -> np.ndarray:
    if pure:
        return np.einsum("Bi,ij,Bj->B", state.conj(), p_mat, state).real
    return np.einsum("Bij,ji->B", state, p_mat).real


def _measured_probabilities(state, cfg: ExperimentConfig, pure: bool) -> np.ndarray:
    n = cfg.n_qubits
    nb = state.shape[0]
    diag = np.abs(state) ** 2 if pure else np.einsum("Bii->Bi", state).real
    diag = diag.reshape([nb] + [2] * n)
    unmeasured = [q for q in range(n) if q not in cfg.measured]
    if unmeasured:
        axes = tuple(sorted(1 + (n - 1 - q) for q in unmeasured))
        diag = diag.sum(axis=axes)
    return diag.reshape(nb, -1)


def _batch_fidelities(
    cfg: ExperimentConfig,
    start: int,
    stop: int,
    exp_coeffs: np.ndarray | None,
    engine: str,
) -> np.ndarray:
    """Per-realization fidelity rows (stop-start, steps+1)."""
    n, T, nb = cfg.n_qubits, cfg.steps, stop - start
    model = cfg.noise
    bernoulli = cfg.measurement_mode is MeasurementMode.BERNOULLI
    motion_reversal = cfg.circuit_form is CircuitForm.MOTION_REVERSAL
    pure = engine != "dense" and all(
        st != "mixed" for st in cfg.initial_state
    )
    factorized = engine != "dense" and model.one_body_only

    rot_u, real_coeffs, step_coeffs, meas_u = _draw_batch(cfg, start, stop)
    rotations = su2_from_angles(*haar_angles_from_uniform(rot_u))  # (nb,T,n,2,2)

    # Error unitaries for experiment/realization scope are fixed during a
    # realization; step scope builds them inside the loop.
    e_fixed = None
    if model.scope is not DrawScope.STEP:
        values = exp_coeffs if real_coeffs is None else real_coeffs
        e_fixed = (
            one_body_unitaries(model, values)
            if factorized
            else error_unitary(model, values)
        )

    def error_at(s: int):
        if e_fixed is not None:
            return e_fixed
        values = step_coeffs[:, s]
        return (
            one_body_unitaries(model, values)
            if factorized
            else error_unitary(model, values)
        )

    p_mat = _readout_matrix(cfg)
    state = _initial_states(cfg, nb, pure)
    rows = np.empty((nb, T + 1), dtype=float)
    rows[:, 0] = 1.0 if bernoulli else cfg.f0
    if motion_reversal:
        acc = np.tile(PAULI_I, (nb, n, 1, 1))

    if bernoulli:
        target = _target_index(cfg)

    apply_gate = transform_qubit_vector if pure else conjugate_qubit
    for s in range(T):
        for q in range(n):
            state = apply_gate(state, q, rotations[:, s, q])
        err = error_at(s)
        if factorized:
            for q in range(n):
                state = apply_gate(state, q, err[..., q, :, :])
        else:
            state = _apply_error(state, err, pure)
        if motion_reversal:
            acc = acc @ np.conj(np.swapaxes(rotations[:, s], -1, -2))
            readout = state
            for q in range(n):
                readout = apply_gate(readout, q, acc[:, q])
        else:
            for q in range(n):
                state = apply_gate(
                    state, q, np.conj(np.swapaxes(rotations[:, s, q], -1, -2))
                )
            readout = state
        if bernoulli:
            probs = _measured_probabilities(readout, cfg, pure)
            cum = np.cumsum(probs, axis=1)
            lo = cum[:, target - 1] if target > 0 else 0.0
            hi = cum[:, target]
            rows[:, s + 1] = ((meas_u[:, s] >= lo) & (meas_u[:, s] < hi)).astype(float)
        else:
            f = _fidelity(readout, p_mat, pure)
            if f.min() < -1e-9 or f.max() > 1.0 + 1e-9:
                raise NumericalError(
                    f"per-realization fidelity left [0, 1]: "
                    f"min {f.min():.3e}, max {f.max():.3e}"
                )
            rows[:, s + 1] = f
    return rows


def _batch_worker(args) -> np.ndarray:
    return _batch_fidelities(*args)


def _resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV_VAR)
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def run_experiment(
    cfg: ExperimentConfig,
    *,
    threads: int | None = None,
    engine: str = "auto",
) -> FidelityCurve:
    """Average the fidelity decay over ``cfg.realizations`` realizations.

    ``engine="auto"`` uses a pure-state representation when the initial
    state is pure and factorized per-qubit error unitaries for one-body
    models; ``engine="dense"`` forces the density-matrix representation
    with dense error matrices (validation path). Both compute the same
    quantities; per-realization values agree to float precision.
    """
    if engine not in ("auto", "dense"):
        raise ValidationError(f"unknown engine {engine!r}")
    exp_coeffs = _experiment_coefficients(cfg)
    n_workers = _resolve_threads(threads)
    batches = [
        (cfg, lo, min(lo + BATCH_SIZE, cfg.realizations), exp_coeffs, engine)
        for lo in range(0, cfg.realizations, BATCH_SIZE)
    ]
    if n_workers == 1 or len(batches) == 1:
        parts = [_batch_worker(b) for b in batches]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_batch_worker, batches))
    f = np.vstack(parts)
    mean = f.mean(axis=0)
    nr = cfg.realizations
    if cfg.measurement_mode is MeasurementMode.BERNOULLI:
        stderr = np.sqrt(np.clip(mean * (1.0 - mean), 0.0, None) / nr)
    elif nr > 1:
        stderr = f.std(axis=0, ddof=1) / math.sqrt(nr)
    else:
        stderr = np.zeros_like(mean)
    return FidelityCurve(
        t=np.arange(cfg.steps + 1),
        mean_f=mean,
        stderr=stderr,
        n_realizations=nr,
        f0=cfg.f0,
    )


def run_experiment_bernoulli(
    cfg: ExperimentConfig, *, threads: int | None = None
) -> FidelityCurve:
    """Run ``cfg`` with single-shot projective sampling of the outcome."""
    if cfg.measurement_mode is not MeasurementMode.BERNOULLI:
        cfg = replace(cfg, measurement_mode=MeasurementMode.BERNOULLI)
    return run_experiment(cfg, threads=threads)


# ---------------------------------------------------------------------------
# Initial decay rate estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FirstStep:
    """Decay rate from the first step: 1 - <f(1)>/f0."""


@dataclass(frozen=True)
class LinearFit:
    """Negated least-squares slope of f(t)/f0 over points with f > f_lim*f0."""

    f_lim: float = 0.9


GammaMethod = Union[FirstStep, LinearFit]


@dataclass(frozen=True)
class DecayRateEstimate:
    value: float
    stderr: float
    method: str
    n_realizations: int = 0


def decay_rate_from_curve(
    curve: FidelityCurve, method: GammaMethod = FirstStep()
) -> DecayRateEstimate:
    if isinstance(method, FirstStep):
        if len(curve.t) < 2:
            raise ValidationError("first-step estimate needs at least one step")
        return DecayRateEstimate(
            value=1.0 - curve.mean_f[1] / curve.f0,
            stderr=curve.stderr[1] / curve.f0,
            method="first_step",
            n_realizations=curve.n_realizations,
        )
    if isinstance(method, LinearFit):
        fit = analytics.linear_decay_fit(
            curve.t, curve.mean_f, curve.f0, f_lim=method.f_lim
        )
        return DecayRateEstimate(
            value=fit.decay_rate,
            stderr=fit.stderr,
            method=f"linear_fit(f_lim={method.f_lim})",
            n_realizations=curve.n_realizations,
        )
    raise ValidationError(f"unknown decay-rate method {method!r}")


def estimate_decay_rate(
    cfg: ExperimentConfig,
    method: GammaMethod = FirstStep(),
    *,
    threads: int | None = None,
) -> DecayRateEstimate:
    """Run the experiment and extract its initial decay rate."""
    return decay_rate_from_curve(run_experiment(cfg, threads=threads), method)
