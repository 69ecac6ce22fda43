"""Noise-generator models: Pauli-product terms with coefficient distributions.

A noise model is a set of Pauli-product operators, each with a coefficient
specification (a constant value or a Gaussian distribution), plus a
time-correlation class that fixes how often coefficients are redrawn:

* coherent          - one draw per experiment,
* incoherent_long   - one draw per realization,
* incoherent_short  - one draw per step.

The per-step error unitary is exp(-i * sum_l chi_l O_l).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .linalg import (
    MAX_QUBITS,
    PAULI_AXES,
    PAULIS,
    ProductOperator,
    ValidationError,
    unitary_from_generator,
)


@dataclass(frozen=True)
class Constant:
    """A coefficient fixed at ``value``; draws never consume randomness."""

    value: float

    @property
    def second_moment(self) -> float:
        return self.value**2

    def draw(self, rng: np.random.Generator, size=None) -> np.ndarray | float:
        if size is None:
            return self.value
        return np.full(size, self.value, dtype=float)


@dataclass(frozen=True)
class Gaussian:
    """A coefficient drawn from N(mean, std^2); draws are unbounded."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if self.std < 0:
            raise ValidationError(f"std must be >= 0, got {self.std}")

    @property
    def second_moment(self) -> float:
        return self.mean**2 + self.std**2

    def draw(self, rng: np.random.Generator, size=None) -> np.ndarray | float:
        return rng.normal(self.mean, self.std, size)


CoefficientSpec = Union[Constant, Gaussian]


class Correlation(enum.Enum):
    """How the error operator varies in time."""

    COHERENT = "coherent"
    INCOHERENT_LONG = "incoherent_long"
    INCOHERENT_SHORT = "incoherent_short"


class DrawScope(enum.Enum):
    EXPERIMENT = "experiment"
    REALIZATION = "realization"
    STEP = "step"


SCOPE_FOR_CORRELATION = {
    Correlation.COHERENT: DrawScope.EXPERIMENT,
    Correlation.INCOHERENT_LONG: DrawScope.REALIZATION,
    Correlation.INCOHERENT_SHORT: DrawScope.STEP,
}


@dataclass(frozen=True)
class NoiseTerm:
    op: ProductOperator
    coeff: CoefficientSpec


@dataclass(frozen=True)
class NoiseModel:
    """The full generator decomposition plus its correlation class.

    Terms must have unique axes patterns: the coefficient of each product
    operator is unique, duplicates are rejected.
    """

    n_qubits: int
    terms: tuple[NoiseTerm, ...]
    correlation: Correlation

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValidationError(
                f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}"
            )
        seen: set[tuple[str, ...]] = set()
        for term in self.terms:
            if term.op.n_qubits != self.n_qubits:
                raise ValidationError(
                    f"term {term.op} is on {term.op.n_qubits} qubits, "
                    f"model has {self.n_qubits}"
                )
            if term.op.axes in seen:
                raise ValidationError(f"duplicate axes pattern {term.op}")
            seen.add(term.op.axes)

    @property
    def scope(self) -> DrawScope:
        return SCOPE_FOR_CORRELATION[self.correlation]

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @cached_property
    def one_body_only(self) -> bool:
        return all(t.op.hamming_weight == 1 for t in self.terms)

    @cached_property
    def is_random(self) -> bool:
        """True when any coefficient actually fluctuates."""
        return any(isinstance(t.coeff, Gaussian) and t.coeff.std > 0 for t in self.terms)

    @cached_property
    def term_matrices(self) -> np.ndarray:
        """Dense stack (n_terms, d, d) of the product-operator matrices."""
        d = 2**self.n_qubits
        if not self.terms:
            return np.zeros((0, d, d), dtype=complex)
        return np.stack([t.op.matrix() for t in self.terms])

    @cached_property
    def one_body_layout(self) -> tuple[np.ndarray, np.ndarray]:
        """(qubit, axis-index) per term; only valid for one-body models."""
        qubits = np.array([t.op.support[0] for t in self.terms], dtype=int)
        axes = np.array(
            [PAULI_AXES.index(t.op.axes[q]) for t, q in zip(self.terms, qubits)],
            dtype=int,
        )
        return qubits, axes

    def collective_strengths(self) -> dict[frozenset[int], float]:
        """Sum of coefficient second moments per qubit subset.

        For Gaussian coefficients the second moment is mean^2 + std^2,
        matching what the decay-rate measurements estimate.
        """
        out: dict[frozenset[int], float] = {}
        for term in self.terms:
            key = frozenset(term.op.support)
            out[key] = out.get(key, 0.0) + term.coeff.second_moment
        return out


def _pair_list(n_qubits: int, pairs) -> list[tuple[int, int]]:
    if isinstance(pairs, str):
        if pairs == "all":
            return [(j, k) for j in range(n_qubits) for k in range(j + 1, n_qubits)]
        if pairs == "first_neighbor":
            # linear chain, no wraparound
            return [(j, j + 1) for j in range(n_qubits - 1)]
        raise ValidationError(f"unknown pair selector {pairs!r}")
    out = []
    for pair in pairs:
        j, k = (int(q) for q in pair)
        if not (0 <= j < k < n_qubits):
            raise ValidationError(
                f"invalid pair ({j}, {k}): need 0 <= j < k < {n_qubits}"
            )
        out.append((j, k))
    return out


def build_noise_model(
    n_qubits: int,
    correlation: Correlation,
    *,
    one_body: CoefficientSpec | None = None,
    two_body: CoefficientSpec | None = None,
    pairs="all",
    extra_terms: Iterable[NoiseTerm] = (),
) -> NoiseModel:
    """Expand uniform-strength shorthand into a full term list.

    ``one_body`` plants X, Y, Z terms on every qubit (3n terms).
    ``two_body`` plants all nine axis combinations on each selected pair:
    ``pairs`` may be ``"all"`` (9 n(n-1)/2 terms), ``"first_neighbor"``
    (9(n-1) terms on a linear chain), or an explicit list of (j, k) with
    j < k. Individually planted ``extra_terms`` are appended last.
    """
    terms: list[NoiseTerm] = []
    if one_body is not None:
        for q in range(n_qubits):
            for axis in PAULI_AXES:
                op = ProductOperator.from_assignments(n_qubits, {q: axis})
                terms.append(NoiseTerm(op, one_body))
    if two_body is not None:
        if n_qubits < 2:
            raise ValidationError("two-body terms need at least 2 qubits")
        selected = _pair_list(n_qubits, pairs)
        if not selected:
            raise ValidationError("two-body requested but no pairs selected")
        for j, k in selected:
            for p in PAULI_AXES:
                for q in PAULI_AXES:
                    op = ProductOperator.from_assignments(n_qubits, {j: p, k: q})
                    terms.append(NoiseTerm(op, two_body))
    terms.extend(extra_terms)
    return NoiseModel(n_qubits, tuple(terms), correlation)


def draw_coefficients(
    model: NoiseModel,
    scope: DrawScope,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw one value per term at the given scope.

    The scope must match the model's correlation class. Values are drawn
    term by term in term order; Constant specs return their value without
    consuming the stream. Shape is (n_terms,), or (size, n_terms).
    """
    if scope is not model.scope:
        raise ValidationError(
            f"{model.correlation.value} noise draws at "
            f"{model.scope.value} scope, not {scope.value}"
        )
    shape = (model.n_terms,) if size is None else (size, model.n_terms)
    values = np.empty(shape, dtype=float)
    for i, term in enumerate(model.terms):
        values[..., i] = term.coeff.draw(rng, None if size is None else size)
    return values


def error_unitary(model: NoiseModel, values: np.ndarray) -> np.ndarray:
    """exp(-i sum_l chi_l O_l) for one or a batch of coefficient draws.

    ``values`` has shape (n_terms,) or (..., n_terms); the result is the
    matching (d, d) or (..., d, d) unitary (within 1e-10).
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != model.n_terms and not (
        model.n_terms == 0 and values.size == 0
    ):
        raise ValidationError(
            f"expected {model.n_terms} coefficients, got {values.shape[-1]}"
        )
    d = 2**model.n_qubits
    if model.n_terms == 0:
        shape = values.shape[:-1] if values.ndim else ()
        return np.broadcast_to(np.eye(d, dtype=complex), shape + (d, d)).copy()
    g = np.tensordot(values, model.term_matrices, axes=([-1], [0]))
    return unitary_from_generator(g)


def one_body_unitaries(model: NoiseModel, values: np.ndarray) -> np.ndarray:
    """Per-qubit error factors for a one-body-only model.

    Commuting single-qubit generators factorize the error operator:
    exp(-i sum chi O) = prod_j exp(-i v_j . sigma). Returns shape
    (..., n, 2, 2) given ``values`` of shape (..., n_terms); the product
    over the qubit axis equals :func:`error_unitary` on the same draw.
    """
    if not model.one_body_only:
        raise ValidationError("factorized errors need a one-body-only model")
    values = np.asarray(values, dtype=float)
    n = model.n_qubits
    qubits, axes = model.one_body_layout
    vec = np.zeros(values.shape[:-1] + (n, 3), dtype=float)
    vec[..., qubits, axes] = values  # axes patterns are unique per term
    r = np.linalg.norm(vec, axis=-1)
    # exp(-i r n.sigma) = cos(r) I - i sin(r) (n.sigma); sinc handles r = 0
    sinc = np.sinc(r / np.pi)  # sin(r)/r
    out = np.zeros(vec.shape[:-1] + (2, 2), dtype=complex)
    cos_r = np.cos(r)
    vx, vy, vz = vec[..., 0], vec[..., 1], vec[..., 2]
    out[..., 0, 0] = cos_r - 1j * sinc * vz
    out[..., 0, 1] = sinc * (-1j * vx - vy)
    out[..., 1, 0] = sinc * (-1j * vx + vy)
    out[..., 1, 1] = cos_r + 1j * sinc * vz
    return out
