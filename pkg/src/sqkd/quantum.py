"""State-vector algebra for the single-state protocol.

Bob's qubit lives in a two-dimensional space spanned by ``|0>`` and ``|1>``
(the two Z-basis phase states).  Eve's probe is an ancilla of configurable
dimension ``d``; joint states are stored Bob-major, i.e. amplitude index
``b * d + e``.  Alice never holds coherent memory, so her key bit is kept as
a classical label on :class:`JointState`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

NORM_TOL = 1e-12
JOINT_NORM_TOL = 1e-10
SQRT1_2 = math.sqrt(0.5)  # 0.7071067811865476


class Basis(IntEnum):
    """Bob's measurement setting.

    ``XPLUS`` and ``XMINUS`` measure the same observable; they differ only in
    which detector the ``|+>`` outcome lands on.
    """

    Z = 0
    XPLUS = 1
    XMINUS = 2


@dataclass(frozen=True)
class QubitState:
    a0: complex
    a1: complex

    def __post_init__(self):
        a0, a1 = complex(self.a0), complex(self.a1)
        if not all(math.isfinite(x) for x in (a0.real, a0.imag, a1.real, a1.imag)):
            raise ValueError("qubit amplitudes must be finite")
        norm = abs(a0) ** 2 + abs(a1) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"qubit state not normalized (|a0|^2+|a1|^2 = {norm!r})")
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "a1", a1)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=complex)

    @classmethod
    def from_vector(cls, v) -> "QubitState":
        v = np.asarray(v, dtype=complex).reshape(2)
        return cls(complex(v[0]), complex(v[1]))

    def norm(self) -> float:
        return math.sqrt(abs(self.a0) ** 2 + abs(self.a1) ** 2)


KET0 = QubitState(1.0, 0.0)
KET1 = QubitState(0.0, 1.0)


def make_plus() -> QubitState:
    """``|+> = (|0> + |1>)/sqrt(2)``, the only state Bob ever prepares."""
    return QubitState(SQRT1_2, SQRT1_2)


def make_plus_complex() -> QubitState:
    """``|+>`` in the equatorial form ``((1+i)|0> + (1-i)|1>)/2``.

    Same measurement statistics as :func:`make_plus` for every basis used by
    the protocol; kept for comparison with the time-bin picture.
    """
    return QubitState((1 + 1j) / 2, (1 - 1j) / 2)


def make_minus() -> QubitState:
    return QubitState(SQRT1_2, -SQRT1_2)


def inner(a: QubitState, b: QubitState) -> complex:
    """``<a|b>``."""
    return complex(np.vdot(a.vector, b.vector))


def ry(delta: float) -> np.ndarray:
    """Counterclockwise rotation by ``delta`` about the Bloch y-axis."""
    delta = float(delta)
    if not math.isfinite(delta):
        raise ValueError(f"rotation angle must be finite, got {delta!r}")
    c, s = math.cos(delta / 2.0), math.sin(delta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def sift_operator(bit: int) -> np.ndarray:
    """Alice's selective modulation: ``S0 = ry(-pi/2)``, ``S1 = ry(+pi/2)``.

    ``S0|+> = |0>`` and ``S1|+> = |1>``.
    """
    if bit not in (0, 1):
        raise ValueError(f"SIFT bit must be 0 or 1, got {bit!r}")
    # ry(-/+pi/2) with exact equal entries; in floating point cos(pi/4) != sin(pi/4),
    # which would leave a 1e-33 wrong-outcome probability on an undisturbed qubit
    h = SQRT1_2 if bit == 0 else -SQRT1_2
    return np.array([[SQRT1_2, h], [-h, SQRT1_2]], dtype=complex)


def is_unitary(m: np.ndarray, tol: float = NORM_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol)


def apply(op: np.ndarray, state: QubitState) -> QubitState:
    op = np.asarray(op)
    if op.shape != (2, 2):
        raise ValueError(f"single-qubit operator must be 2x2, got {op.shape}")
    return QubitState.from_vector(op @ state.vector)


@dataclass(frozen=True)
class JointState:
    """Bob qubit tensored with Eve's ancilla, plus Alice's classical bit."""

    amps: np.ndarray
    dim_e: int = 4
    alice_bit: int | None = None
    dim_b: int = field(default=2, init=False)

    def __post_init__(self):
        if self.dim_e < 1:
            raise ValueError(f"ancilla dimension must be >= 1, got {self.dim_e}")
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size != 2 * self.dim_e:
            raise ValueError(
                f"joint state needs {2 * self.dim_e} amplitudes, got {amps.size}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > JOINT_NORM_TOL:
            raise ValueError(f"joint state not normalized (norm^2 = {norm!r})")
        if self.alice_bit not in (None, 0, 1):
            raise ValueError(f"alice_bit must be None, 0 or 1, got {self.alice_bit!r}")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @classmethod
    def product(cls, qubit: QubitState, ancilla=None, dim_e: int = 4) -> "JointState":
        """``|qubit> (x) |ancilla>``; ancilla defaults to ``|0>_E``."""
        if ancilla is None:
            ancilla = np.zeros(dim_e, dtype=complex)
            ancilla[0] = 1.0
        ancilla = np.asarray(ancilla, dtype=complex).reshape(-1)
        return cls(np.kron(qubit.vector, ancilla), dim_e=ancilla.size)

    def blocks(self) -> np.ndarray:
        """Amplitudes as a ``(2, d)`` array: row ``b`` is Eve's sub-state given Bob ``|b>``."""
        return self.amps.reshape(2, self.dim_e)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def with_bit(self, bit: int | None) -> "JointState":
        return JointState(self.amps, self.dim_e, bit)

    def eve_density(self) -> np.ndarray:
        """Reduced density matrix of the ancilla (Bob traced out)."""
        m = self.blocks()
        return m.T @ m.conj()

    def bob_density(self) -> np.ndarray:
        m = self.blocks()
        return m @ m.conj().T


def _combine(coef, blocks: np.ndarray) -> np.ndarray:
    """``coef[0] * blocks[0] + coef[1] * blocks[1]`` without BLAS.

    Fused multiply-add in matmul kernels turns ``a*b - a*b`` into the rounding
    error of the product; elementwise arithmetic keeps exact cancellations exact.
    """
    return coef[0] * blocks[0] + coef[1] * blocks[1]


def apply_on_qubit(op: np.ndarray, state: JointState) -> JointState:
    """Apply ``op (x) I_E``."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"qubit operator must be 2x2, got {op.shape}")
    m = state.blocks()
    out = np.stack([_combine(op[0], m), _combine(op[1], m)])
    return JointState(out.reshape(-1), state.dim_e, state.alice_bit)


def apply_joint(u: np.ndarray, state: JointState) -> JointState:
    """Apply a unitary on the full qubit (x) ancilla space."""
    u = np.asarray(u, dtype=complex)
    n = 2 * state.dim_e
    if u.shape != (n, n):
        raise ValueError(f"joint operator must be {n}x{n}, got {u.shape}")
    return JointState(u @ state.amps, state.dim_e, state.alice_bit)


def basis_states(basis: Basis) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors for outcome 0 and outcome 1.

    Z: ``|0>, |1>``.  X (either sign): ``|+>, |->``.
    """
    if Basis(basis) == Basis.Z:
        return np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    return (
        np.array([SQRT1_2, SQRT1_2], dtype=complex),
        np.array([SQRT1_2, -SQRT1_2], dtype=complex),
    )


def born_probabilities(state: JointState | QubitState, basis: Basis) -> tuple[float, float]:
    """Exact outcome probabilities of Bob's measurement (ancilla untouched)."""
    if isinstance(state, QubitState):
        blocks = state.vector.reshape(2, 1)
    else:
        blocks = state.blocks()
    e0, e1 = basis_states(basis)
    p0 = float(np.sum(np.abs(_combine(e0.conj(), blocks)) ** 2))
    p1 = float(np.sum(np.abs(_combine(e1.conj(), blocks)) ** 2))
    return p0, p1


def measure(state: QubitState, basis: Basis, rng: np.random.Generator) -> tuple[int, QubitState]:
    """Sample a projective measurement; returns the outcome and collapsed state."""
    p0, _ = born_probabilities(state, basis)
    e0, e1 = basis_states(basis)
    if rng.random() < p0:
        return 0, QubitState.from_vector(e0)
    return 1, QubitState.from_vector(e1)
