"""Closed-form decay laws, decay-rate predictions, and curve fitting.

Everything here is deterministic: distribution averaging enters only
through coefficient second moments supplied by the caller, and the
Monte Carlo engine is validated against these expressions, never the
other way around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .linalg import (
    PAULI_I,
    PAULI_Z,
    ProductOperator,
    ValidationError,
    density_from_bloch,
)
from .noise import Constant, Correlation, Gaussian, NoiseModel

#: Coherent decay rates are real only below this strength.
COHERENT_STRENGTH_LIMIT = math.pi / 6.0


def _touched_factor(purity: float) -> float:
    """Per-qubit contraction factor for a qubit hit by a Pauli factor."""
    return (2.0 / 3.0) * (1.0 - purity / 2.0)


# ---------------------------------------------------------------------------
# Initial decay rate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayRatePrediction:
    """Predicted initial decay rate with per-term contributions."""

    value: float
    contributions: tuple[tuple[ProductOperator, float], ...]


def initial_decay_rate(
    terms: Iterable[tuple],
    measured: Sequence[int],
    purities: Mapping[int, float],
) -> DecayRatePrediction:
    """Second-order initial decay rate of the measured-subset fidelity.

    ``terms`` holds ``(op, m2)`` pairs where ``m2`` is the coefficient's
    second moment ``<Re[chi]^2>``, or ``(op, re2, im2)`` triples when the
    generator has an anti-Hermitian part (analytic-only: the simulator
    accepts real coefficients). Each term contributes

        [re2 * (prod_j P_j - prod_j C_j) - im2 * (prod_j P_j + prod_j C_j)]
            / prod_j P_j

    over j in the measured set, with C_j = (2/3)(1 - P_j/2) when the term
    carries a Pauli factor on qubit j and C_j = P_j otherwise. The
    division by the purity product makes this the rate in the sense
    f(1) = f0 (1 - rate); it is a no-op when the measured qubits are
    pure. Terms with no support inside the measured set contribute zero
    (real case).
    """
    measured = sorted(set(int(q) for q in measured))
    if set(purities) != set(measured):
        raise ValidationError(
            f"purities must be given for exactly the measured qubits "
            f"{measured}, got {sorted(purities)}"
        )
    for q, p in purities.items():
        if not 0.5 - 1e-12 <= p <= 1.0 + 1e-12:
            raise ValidationError(f"purity of qubit {q} must be in [1/2, 1], got {p}")

    prod_p = 1.0
    for q in measured:
        prod_p *= purities[q]

    contributions = []
    total = 0.0
    for entry in terms:
        if len(entry) == 2:
            op, re2 = entry
            im2 = 0.0
        else:
            op, re2, im2 = entry
        prod_c = 1.0
        for q in measured:
            if op.axes[q] != "I":
                prod_c *= _touched_factor(purities[q])
            else:
                prod_c *= purities[q]
        contrib = (re2 * (prod_p - prod_c) - im2 * (prod_p + prod_c)) / prod_p
        contributions.append((op, contrib))
        total += contrib
    return DecayRatePrediction(total, tuple(contributions))


def predicted_decay_rate(
    model: NoiseModel, measured: Sequence[int], purities: Mapping[int, float]
) -> DecayRatePrediction:
    """Decay-rate prediction for a noise model, averaging its distributions."""
    return initial_decay_rate(
        [(t.op, t.coeff.second_moment) for t in model.terms], measured, purities
    )


def subset_decay_rate(
    strengths: Mapping[frozenset, float], measured: Sequence[int]
) -> float:
    """Initial decay rate of one, two or three pure measured qubits.

    ``strengths`` maps qubit subsets to collective strengths (sums of
    squared coefficients over the subset's Pauli assignments). A subset
    overlapping the measured set on nu qubits is weighted by
    1 - 1/3^nu (2/3, 8/9, 26/27 for nu = 1, 2, 3).
    """
    measured_set = set(int(q) for q in measured)
    if not 1 <= len(measured_set) <= 3:
        raise ValidationError(
            "subset formulas cover one to three measured qubits; "
            "use initial_decay_rate for larger sets"
        )
    shrink = _touched_factor(1.0)
    total = 0.0
    for subset, strength in strengths.items():
        if strength < 0:
            raise ValidationError(f"strength of {sorted(subset)} is negative")
        weight = 1.0
        for q in subset:
            if q in measured_set:
                weight *= shrink
        total += strength * (1.0 - weight)
    return total


# ---------------------------------------------------------------------------
# Closed-form fidelity decay for one-body noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoherentDecay:
    """Fixed per-step rotation of magnitude ``strength`` on one qubit."""

    strength: float

    def __post_init__(self) -> None:
        if abs(self.strength) >= COHERENT_STRENGTH_LIMIT:
            raise ValidationError(
                f"coherent strength {self.strength} is outside the "
                f"monotonic-decay regime (|strength| < pi/6); the average "
                f"fidelity oscillates and no closed form applies"
            )

    @property
    def rate(self) -> float:
        return -math.log((4.0 * math.cos(self.strength) ** 2 - 1.0) / 3.0)

    def factor(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class LongCorrelationDecay:
    """Gaussian-drawn strength held fixed within each realization."""

    mean: float
    std: float

    def factor(self, t):
        t = np.asarray(t, dtype=float)
        widening = 1.0 + (8.0 / 3.0) * self.std**2 * t
        a_t = (4.0 / 3.0) * self.mean**2 * t / widening
        return np.exp(-a_t) / np.sqrt(widening)


@dataclass(frozen=True)
class ShortCorrelationDecay:
    """Gaussian strength redrawn at every step."""

    mean: float
    std: float

    @property
    def rate(self) -> float:
        return -math.log(
            (1.0 + 2.0 * math.cos(2.0 * self.mean) * math.exp(-2.0 * self.std**2))
            / 3.0
        )

    def factor(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))


DecayLaw = Union[CoherentDecay, LongCorrelationDecay, ShortCorrelationDecay]


def single_qubit_fidelity(law: DecayLaw, f0: float, t):
    """<f(t)> = 1/2 + (f0 - 1/2) * decay factor, for one qubit."""
    return 0.5 + (f0 - 0.5) * law.factor(t)


def system_fidelity(laws: Sequence[DecayLaw], f0s: Sequence[float], t):
    """Product of per-qubit fidelities for separable one-body noise."""
    if len(laws) != len(f0s):
        raise ValidationError("need one decay law and one f0 per qubit")
    out = np.ones_like(np.asarray(t, dtype=float))
    for law, f0 in zip(laws, f0s):
        out = out * single_qubit_fidelity(law, f0, t)
    return out


def closed_form_laws(model: NoiseModel) -> list[DecayLaw] | None:
    """Per-qubit decay laws for models with a closed form, else None.

    Covered cases: one-body-only models that are either coherent with all
    constant coefficients (per-qubit strength = euclidean norm of the
    axis values, below pi/6), or incoherent with exactly one Gaussian term
    per qubit. Anything else has no closed form here.
    """
    if not model.one_body_only:
        return None
    per_qubit: dict[int, list] = {q: [] for q in range(model.n_qubits)}
    for term in model.terms:
        per_qubit[term.op.support[0]].append(term.coeff)

    laws: list[DecayLaw] = []
    if model.correlation is Correlation.COHERENT:
        for q in range(model.n_qubits):
            specs = per_qubit[q]
            if not all(isinstance(c, Constant) for c in specs):
                return None
            strength = math.sqrt(sum(c.value**2 for c in specs))
            if strength >= COHERENT_STRENGTH_LIMIT:
                return None
            laws.append(CoherentDecay(strength))
        return laws
    law_cls = (
        LongCorrelationDecay
        if model.correlation is Correlation.INCOHERENT_LONG
        else ShortCorrelationDecay
    )
    for q in range(model.n_qubits):
        specs = per_qubit[q]
        if len(specs) == 0:
            laws.append(CoherentDecay(0.0))
        elif len(specs) == 1 and isinstance(specs[0], Gaussian):
            laws.append(law_cls(specs[0].mean, specs[0].std))
        else:
            return None
    return laws


# ---------------------------------------------------------------------------
# Single-qubit dephasing model (incoherent noise on one qubit)
# ---------------------------------------------------------------------------


def dephasing_exponent(sigma: float, t: float, correlation: Correlation) -> float:
    """Transverse decay exponent: 2 sigma^2 t^2 (long) or 2 sigma^2 t (short)."""
    if correlation is Correlation.INCOHERENT_LONG:
        return 2.0 * sigma**2 * t**2
    if correlation is Correlation.INCOHERENT_SHORT:
        return 2.0 * sigma**2 * t
    raise ValidationError("dephasing model covers the incoherent classes only")


def dephased_single_qubit_state(
    bloch: Sequence[float],
    alpha: float,
    sigma: float,
    t: float,
    correlation: Correlation,
) -> np.ndarray:
    """State after t steps of exp(-i chi sz) with chi ~ N(alpha, sigma^2).

    The transverse polarization rotates by 2*alpha*t and shrinks by
    exp(-delta); the longitudinal component is unchanged.
    """
    x, y, z = (float(v) for v in bloch)
    if math.sqrt(x * x + y * y + z * z) > 1.0 + 1e-12:
        raise ValidationError("Bloch vector has norm > 1")
    delta = dephasing_exponent(sigma, t, correlation)
    c, s = math.cos(2.0 * alpha * t), math.sin(2.0 * alpha * t)
    damp = math.exp(-delta)
    xt = (x * c - y * s) * damp
    yt = (x * s + y * c) * damp
    return density_from_bloch(xt, yt, z)


def dephasing_kraus_pair(angle: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Kraus pair: rotation about z by ``angle`` plus a phase-flip channel.

    M1 = sqrt((1+e^-delta)/2) I e^{-i angle sz},
    M2 = sqrt((1-e^-delta)/2) sz e^{-i angle sz}; completeness
    M1^+ M1 + M2^+ M2 = I holds exactly.
    """
    damp = math.exp(-delta)
    rot = np.diag([np.exp(-1j * angle), np.exp(1j * angle)])
    m1 = math.sqrt((1.0 + damp) / 2.0) * PAULI_I @ rot
    m2 = math.sqrt((1.0 - damp) / 2.0) * PAULI_Z @ rot
    return m1, m2


# ---------------------------------------------------------------------------
# Curve fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearFitResult:
    decay_rate: float
    stderr: float
    rss: float
    n_points: int


@dataclass(frozen=True)
class SaturatingFitResult:
    rate: float
    rss: float
    n_points: int


def linear_decay_fit(t, f, f0: float, f_lim: float = 0.9) -> LinearFitResult:
    """Negated least-squares slope of f/f0 over the points with f > f_lim*f0."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    mask = f > f_lim * f0
    if mask.sum() < 2:
        raise ValidationError(
            f"linear decay fit needs at least 2 points with f > {f_lim} * f0, "
            f"have {int(mask.sum())}"
        )
    x, y = t[mask], f[mask] / f0
    xbar, ybar = x.mean(), y.mean()
    sxx = ((x - xbar) ** 2).sum()
    slope = ((x - xbar) * (y - ybar)).sum() / sxx
    resid = y - (ybar + slope * (x - xbar))
    rss = float((resid**2).sum())
    n = int(mask.sum())
    stderr = math.sqrt(rss / (n - 2) / sxx) if n > 2 else 0.0
    return LinearFitResult(-slope, stderr, rss, n)


def saturating_decay_fit(
    t, f, f0: float, dim: int, f_co: float = 0.1
) -> SaturatingFitResult:
    """Fit f(t) = e^{-rate t}(f0 - 1/dim) + 1/dim by a log-space linear fit.

    A linear fit of log(f - 1/dim) against t with the intercept pinned at
    log(f0 - 1/dim); the rate is the only fitted parameter. Only points
    with f > f_co enter; any admissible point at or below 1/dim makes the
    log undefined and is an error.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    mask = f > f_co
    if mask.sum() < 2:
        raise ValidationError(
            f"saturating fit needs at least 2 points with f > {f_co}, "
            f"have {int(mask.sum())}"
        )
    floor = 1.0 / dim
    x, y = t[mask], f[mask]
    if (y <= floor).any():
        raise ValidationError(
            "saturating fit has admissible points at or below 1/dim; "
            "raise f_co above the saturation floor"
        )
    logy = np.log(y - floor)
    c0 = math.log(f0 - floor)
    rate = float((x * (c0 - logy)).sum() / (x**2).sum())
    resid = logy - (c0 - rate * x)
    return SaturatingFitResult(rate, float((resid**2).sum()), int(mask.sum()))


@dataclass(frozen=True)
class QuadraticFitResult:
    coefficient: float
    r_squared: float
    residuals: tuple[float, ...]


def quadratic_strength_fit(strengths, values) -> QuadraticFitResult:
    """Least-squares fit of value = c * strength^2 through the origin."""
    x = np.asarray(strengths, dtype=float) ** 2
    y = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValidationError("quadratic fit needs at least one point")
    c = float((y * x).sum() / (x * x).sum())
    resid = y - c * x
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return QuadraticFitResult(c, r2, tuple(float(r) for r in resid))
