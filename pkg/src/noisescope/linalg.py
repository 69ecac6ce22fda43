"""Dense complex linear algebra for multi-qubit density matrices.

Conventions used throughout the package:

* Qubit 0 is the rightmost tensor factor, i.e. the least significant bit
  of the computational-basis index.
* States and operators are plain ``numpy`` arrays of dtype complex128.
* Batched variants accept a leading batch axis and broadcast 2x2 gates
  over it; all operations are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

#: Dense-storage cap on the number of qubits (dim 4096).
MAX_QUBITS = 12
MAX_DIM = 2**MAX_QUBITS

HERMITIAN_ATOL = 1e-10
UNITARY_ATOL = 1e-10
TRACE_ATOL = 1e-9


class ValidationError(ValueError):
    """An input violates a documented contract (shape, index, range)."""


class NumericalError(RuntimeError):
    """A numerical operation failed: non-convergence or unitarity breach."""


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

PAULIS: Mapping[str, np.ndarray] = {
    "I": PAULI_I,
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
}

#: The non-identity axes, in canonical order.
PAULI_AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class ProductOperator:
    """Tensor product of Pauli/identity factors, one factor per qubit.

    ``axes[j]`` is the factor on qubit j, one of ``'I','X','Y','Z'``.
    At least one factor must be a Pauli matrix, so the operator is
    traceless; all such operators are Hermitian.
    """

    n_qubits: int
    axes: tuple[str, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValidationError(
                f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}"
            )
        if len(self.axes) != self.n_qubits:
            raise ValidationError(
                f"expected {self.n_qubits} axes, got {len(self.axes)}"
            )
        bad = [a for a in self.axes if a not in PAULIS]
        if bad:
            raise ValidationError(f"unknown Pauli axes {bad!r}")
        if all(a == "I" for a in self.axes):
            raise ValidationError("product operator must touch at least one qubit")

    @classmethod
    def from_assignments(
        cls, n_qubits: int, assignments: Mapping[int, str]
    ) -> "ProductOperator":
        """Build from a sparse qubit -> axis mapping ('I' everywhere else)."""
        axes = ["I"] * n_qubits
        for q, axis in assignments.items():
            if not 0 <= q < n_qubits:
                raise ValidationError(f"qubit index {q} out of range 0..{n_qubits - 1}")
            axes[q] = axis
        return cls(n_qubits, tuple(axes))

    @property
    def hamming_weight(self) -> int:
        return sum(1 for a in self.axes if a != "I")

    @property
    def support(self) -> tuple[int, ...]:
        """Qubits carrying a non-identity factor, ascending."""
        return tuple(j for j, a in enumerate(self.axes) if a != "I")

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (qubit 0 rightmost)."""
        return kron_all(PAULIS[self.axes[j]] for j in reversed(range(self.n_qubits)))

    def __str__(self) -> str:
        return "".join(f"{a}{j}" for j, a in enumerate(self.axes) if a != "I")


# ---------------------------------------------------------------------------
# Kronecker composition and state helpers
# ---------------------------------------------------------------------------


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the package-wide dimension cap."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] * b.shape[-1] > MAX_DIM:
        raise ValidationError(
            f"Kronecker product dimension {a.shape[-1] * b.shape[-1]} exceeds "
            f"the cap {MAX_DIM} (n <= {MAX_QUBITS} qubits)"
        )
    return np.kron(a, b)


def kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    """Left-to-right Kronecker chain of ``factors``."""
    return reduce(kron, factors)


def n_qubits_of(dim: int) -> int:
    """Number of qubits for a dimension that must be a power of two."""
    n = int(dim).bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def density_from_bloch(x: float, y: float, z: float) -> np.ndarray:
    """Single-qubit state (I + x*sx + y*sy + z*sz)/2 for |r| <= 1."""
    r = float(np.hypot(np.hypot(x, y), z))
    if r > 1.0 + 1e-12:
        raise ValidationError(f"Bloch vector has norm {r} > 1")
    return 0.5 * (PAULI_I + x * PAULI_X + y * PAULI_Y + z * PAULI_Z)


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def validate_density_matrix(rho: np.ndarray, *, check_positive: bool = False) -> int:
    """Check Hermiticity/trace (and optionally positivity); return n_qubits."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density matrix must be square, got {rho.shape}")
    n = n_qubits_of(rho.shape[0])
    if np.abs(rho - rho.conj().T).max() > HERMITIAN_ATOL:
        raise ValidationError("density matrix is not Hermitian within 1e-10")
    if abs(np.trace(rho) - 1.0) > TRACE_ATOL:
        raise ValidationError("density matrix trace differs from 1 by more than 1e-9")
    if check_positive:
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValidationError("density matrix has eigenvalues below -1e-9")
    return n


# ---------------------------------------------------------------------------
# Haar-random SU(2)
# ---------------------------------------------------------------------------


def su2_from_angles(phi, psi, chi) -> np.ndarray:
    """SU(2) element from the (phi, psi, chi) parametrization.

    ``[[cos(phi) e^{i psi},  sin(phi) e^{i chi}],
       [-sin(phi) e^{-i chi}, cos(phi) e^{-i psi}]]``

    Arguments broadcast; the result has shape ``(..., 2, 2)``.
    """
    phi, psi, chi = np.broadcast_arrays(phi, psi, chi)
    c, s = np.cos(phi), np.sin(phi)
    u = np.empty(np.shape(phi) + (2, 2), dtype=complex)
    u[..., 0, 0] = c * np.exp(1j * np.asarray(psi))
    u[..., 0, 1] = s * np.exp(1j * np.asarray(chi))
    u[..., 1, 0] = -s * np.exp(-1j * np.asarray(chi))
    u[..., 1, 1] = c * np.exp(-1j * np.asarray(psi))
    return u


def haar_angles_from_uniform(u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map uniforms ``u[..., 3]`` in [0,1) to Haar (phi, psi, chi) angles."""
    u = np.asarray(u)
    phi = np.arcsin(np.sqrt(u[..., 0]))
    psi = 2.0 * np.pi * u[..., 1]
    chi = 2.0 * np.pi * u[..., 2]
    return phi, psi, chi


def sample_haar_su2(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed SU(2) matrices.

    Returns a single 2x2 matrix, or ``(size, 2, 2)`` when ``size`` is given.
    Consumes exactly three uniforms per matrix, in the order
    (xi, psi, chi) with phi = arcsin(sqrt(xi)).
    """
    shape = (3,) if size is None else (size, 3)
    return su2_from_angles(*haar_angles_from_uniform(rng.random(shape)))


def haar_second_moment(rho: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    """Closed form of the Haar average <Tr[rho R^+ A R rho R^+ B R]> on one qubit.

    Equals ``Tr[AB](1 - P/2)/3 + Tr[A]Tr[B](P - 1/2)/3`` with P = Tr[rho^2].
    Used as a deterministic oracle against sampled rotation averages.
    """
    rho, a, b = (np.asarray(m, dtype=complex) for m in (rho, a, b))
    for m in (rho, a, b):
        if m.shape != (2, 2):
            raise ValidationError(f"expected 2x2 operators, got shape {m.shape}")
    if abs(np.trace(rho) - 1.0) > TRACE_ATOL:
        raise ValidationError("rho must have unit trace")
    p = np.trace(rho @ rho)
    return complex(
        np.trace(a @ b) * (1.0 - p / 2.0) / 3.0
        + np.trace(a) * np.trace(b) * (p - 0.5) / 3.0
    )


# ---------------------------------------------------------------------------
# Single-qubit gate application and partial trace
# ---------------------------------------------------------------------------


def _as_batch(state: np.ndarray, core_ndim: int) -> tuple[np.ndarray, bool]:
    if state.ndim == core_ndim:
        return state[np.newaxis], False
    if state.ndim == core_ndim + 1:
        return state, True
    raise ValidationError(f"unexpected state rank {state.ndim}")


def transform_qubit_vector(psi: np.ndarray, q: int, u: np.ndarray) -> np.ndarray:
    """Apply a 2x2 gate to qubit ``q`` of state vector(s) ``psi``.

    ``psi`` has shape ``(d,)`` or ``(B, d)``; ``u`` has shape ``(2, 2)``
    or ``(B, 2, 2)``.
    """
    psi, batched = _as_batch(np.asarray(psi), 1)
    bdim = psi.shape[0]
    d = psi.shape[1]
    lo = 1 << q
    hi = d >> (q + 1)
    uu = np.broadcast_to(np.asarray(u), (bdim, 2, 2))
    t = psi.reshape(bdim, hi, 2, lo)
    out = np.einsum("Bab,BxbY->BxaY", uu, t).reshape(bdim, d)
    return out if batched else out[0]


def conjugate_qubit(rho: np.ndarray, q: int, u: np.ndarray) -> np.ndarray:
    """Apply ``(I x u x I) rho (.)^+`` on qubit ``q`` of density matrix(es)."""
    rho, batched = _as_batch(np.asarray(rho), 2)
    bdim, d = rho.shape[0], rho.shape[1]
    lo = 1 << q
    hi = d >> (q + 1)
    uu = np.broadcast_to(np.asarray(u), (bdim, 2, 2))
    t = rho.reshape(bdim, hi, 2, lo * d)
    t = np.einsum("Bab,BxbY->BxaY", uu, t)
    t = t.reshape(bdim, d, hi, 2, lo)
    t = np.einsum("Bcd,BZxdY->BZxcY", uu.conj(), t)
    out = t.reshape(bdim, d, d)
    return out if batched else out[0]


def apply_single_qubit_gate(rho: np.ndarray, q: int, u: np.ndarray) -> np.ndarray:
    """Conjugate a density matrix by a single-qubit unitary on qubit ``q``.

    Never materializes the full Kronecker factor; agrees with the naive
    kron-then-multiply path to 1e-12.
    """
    rho = np.asarray(rho, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n = n_qubits_of(rho.shape[-1])
    if not 0 <= q < n:
        raise ValidationError(f"qubit index {q} out of range 0..{n - 1}")
    if u.shape != (2, 2):
        raise ValidationError(f"gate must be 2x2, got {u.shape}")
    if np.abs(u.conj().T @ u - PAULI_I).max() > UNITARY_ATOL:
        raise ValidationError("gate is not unitary within 1e-10")
    return conjugate_qubit(rho, q, u)


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep``.

    The kept qubits preserve their ascending order: the smallest kept
    index becomes qubit 0 of the reduced system.
    """
    rho = np.asarray(rho)
    n = n_qubits_of(rho.shape[-1])
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValidationError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValidationError(f"keep indices {keep} out of range 0..{n - 1}")

    letters = "abcdefghijklmnopqrstuvwxyz"
    row = {q: letters[i] for i, q in enumerate(range(n))}
    col = {
        q: (row[q] if q not in keep else letters[n + i])
        for i, q in enumerate(range(n))
    }
    # axis k of the reshaped array is qubit n-1-k (row block), then columns
    sub_in = "".join(row[n - 1 - k] for k in range(n)) + "".join(
        col[n - 1 - k] for k in range(n)
    )
    sub_out = "".join(row[q] for q in reversed(keep)) + "".join(
        col[q] for q in reversed(keep)
    )
    m = len(keep)
    reduced = np.einsum(
        f"{sub_in}->{sub_out}", rho.reshape([2] * (2 * n))
    ).reshape(2**m, 2**m)
    return reduced


# ---------------------------------------------------------------------------
# Unitary synthesis from Hermitian generators
# ---------------------------------------------------------------------------


def unitary_from_generator(g: np.ndarray) -> np.ndarray:
    """exp(-i g) for Hermitian ``g`` via real-eigenvalue spectral synthesis.

    Accepts a single matrix or a batch ``(..., d, d)``; the result is
    unitary within 1e-10 (max-entry norm of U^+ U - I) or NumericalError
    is raised.
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim < 2 or g.shape[-1] != g.shape[-2]:
        raise ValidationError(f"generator must be square, got {g.shape}")
    herm_defect = np.abs(g - np.conj(np.swapaxes(g, -1, -2))).max() if g.size else 0.0
    if herm_defect > HERMITIAN_ATOL:
        raise ValidationError(
            f"generator is not Hermitian within {HERMITIAN_ATOL} "
            f"(defect {herm_defect:.3e})"
        )
    try:
        w, v = np.linalg.eigh(g)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed to converge: {exc}") from exc
    phases = np.exp(-1j * w)
    u = np.einsum("...ij,...j,...kj->...ik", v, phases, v.conj())
    eye = np.eye(g.shape[-1])
    defect = np.abs(np.swapaxes(u, -1, -2).conj() @ u - eye).max()
    if defect > UNITARY_ATOL:
        raise NumericalError(f"synthesized unitary defect {defect:.3e} exceeds 1e-10")
    return u
