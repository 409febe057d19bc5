"""Two-way attacks on the returned qubit and the information they buy.

Eve applies ``U_F`` on Bob's qubit and her ancilla on the way to Alice and
``U_R`` on the way back.  Everything here is exact state-vector algebra; the
Monte-Carlo engine only consumes :meth:`AttackModel.outcome_table`.

The search in :func:`max_info_at_error_budget` maximizes the trace distance
between Eve's key-conditioned states subject to
``max(e_ctrl_x, e_sift_z) <= epsilon``.  Unitaries are parametrized as
``exp(-i H(theta))`` with ``H`` spanned by a fixed Hermitian basis; gradients
are exact (Daleckii-Krein derivative of the exponential plus an adjoint pass
through the state algebra).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .protocol import AliceOp
from .quantum import (
    SQRT1_2,
    Basis,
    JointState,
    apply_joint,
    apply_on_qubit,
    born_probabilities,
    make_plus,
    sift_operator,
)

UNITARY_TOL = 1e-10
FEASIBILITY_TOL = 1e-13
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2


class AttackKind(Enum):
    IDENTITY = "identity"
    FORWARD_Z_INTERCEPT_RESEND = "forward_z_intercept_resend"
    BACKWARD_Z_INTERCEPT_RESEND = "backward_z_intercept_resend"
    BOTH_Z_INTERCEPT_RESEND = "both_z_intercept_resend"
    FORWARD_X_INTERCEPT_RESEND = "forward_x_intercept_resend"


@dataclass(frozen=True, eq=False)
class AttackModel:
    u_forward: np.ndarray
    u_backward: np.ndarray
    ancilla_dim: int = 4
    ancilla_init: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        n = 2 * self.ancilla_dim
        if self.ancilla_dim < 1:
            raise ValueError("ancilla_dim must be >= 1")
        for label in ("u_forward", "u_backward"):
            u = np.array(getattr(self, label), dtype=complex)
            if u.shape != (n, n):
                raise ValueError(f"{label} must be {n}x{n}, got {u.shape}")
            if np.max(np.abs(u.conj().T @ u - np.eye(n))) > UNITARY_TOL:
                raise ValueError(f"{label} is not unitary within {UNITARY_TOL}")
            u.flags.writeable = False
            object.__setattr__(self, label, u)
        init = self.ancilla_init
        if init is None:
            init = np.zeros(self.ancilla_dim, dtype=complex)
            init[0] = 1.0
        init = np.array(init, dtype=complex).reshape(-1)
        if init.size != self.ancilla_dim or abs(np.linalg.norm(init) - 1.0) > UNITARY_TOL:
            raise ValueError("ancilla_init must be a unit vector of length ancilla_dim")
        init.flags.writeable = False
        object.__setattr__(self, "ancilla_init", init)

    def initial_state(self) -> JointState:
        return JointState.product(make_plus(), self.ancilla_init)

    def outcome_table(self) -> np.ndarray:
        """``P(outcome 0 | op, basis)`` for Bob's measurement, shape (3, 3)."""
        table = np.empty((3, 3))
        for op in AliceOp:
            final = evolve_round(self, op)
            for b in Basis:
                table[op, b] = born_probabilities(final, b)[0]
        return table


def _alice_operator(op: AliceOp) -> np.ndarray:
    op = AliceOp(op)
    return np.eye(2, dtype=complex) if op == AliceOp.CTRL else sift_operator(op.sift_bit)


def evolve_round(attack: AttackModel, alice_op: AliceOp) -> JointState:
    """``U_R (A (x) I) U_F (|+> (x) |chi>)`` with Alice's SIFT bit recorded."""
    alice_op = AliceOp(alice_op)
    state = apply_joint(attack.u_forward, attack.initial_state())
    state = apply_on_qubit(_alice_operator(alice_op), state)
    state = apply_joint(attack.u_backward, state)
    return state.with_bit(alice_op.sift_bit)


def induced_error_rates(attack: AttackModel) -> tuple[float, float]:
    """Exact ``(e_ctrl_x, e_sift_z)``.

    ``e_ctrl_x`` is the ``|->`` probability after CTRL; ``e_sift_z`` averages
    the wrong-bit probabilities after SIFT(0) and SIFT(1).
    """
    e_ctrl = born_probabilities(evolve_round(attack, AliceOp.CTRL), Basis.XPLUS)[1]
    e0 = born_probabilities(evolve_round(attack, AliceOp.SIFT0), Basis.Z)[1]
    e1 = born_probabilities(evolve_round(attack, AliceOp.SIFT1), Basis.Z)[0]
    return e_ctrl, 0.5 * (e0 + e1)


def eve_conditional_states(attack: AttackModel) -> tuple[np.ndarray, np.ndarray]:
    """Eve's ancilla state given Alice's SIFT bit 0 and 1."""
    return (
        evolve_round(attack, AliceOp.SIFT0).eve_density(),
        evolve_round(attack, AliceOp.SIFT1).eve_density(),
    )


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    td = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))
    return min(td, 1.0)  # rounding can push orthogonal states past 1


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits."""
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log2(lam)))


def holevo_bits(rho0: np.ndarray, rho1: np.ndarray) -> float:
    """Holevo quantity of the equiprobable ensemble ``{rho0, rho1}``."""
    chi = von_neumann_entropy(0.5 * (rho0 + rho1)) - 0.5 * (
        von_neumann_entropy(rho0) + von_neumann_entropy(rho1)
    )
    return min(max(chi, 0.0), 1.0)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def eve_information(attack: AttackModel) -> tuple[float, float]:
    """``(trace distance, Holevo bits)`` between Eve's key-conditioned states."""
    rho0, rho1 = eve_conditional_states(attack)
    return trace_distance(rho0, rho1), holevo_bits(rho0, rho1)


@dataclass(frozen=True)
class AttackOutcome:
    e_ctrl_x: float
    e_sift_z: float
    eve_trace_distance: float
    eve_holevo_bits: float


def attack_outcome(attack: AttackModel) -> AttackOutcome:
    e_c, e_s = induced_error_rates(attack)
    td, hol = eve_information(attack)
    return AttackOutcome(e_c, e_s, td, hol)


# -- sub-state decomposition -------------------------------------------------


def chi_forward(attack: AttackModel) -> np.ndarray:
    """``chi[j, k]``: Eve's sub-state with Bob ``|k>`` after ``U_F`` acts on ``|j>|chi>``."""
    d = attack.ancilla_dim
    out = np.empty((2, 2, d), dtype=complex)
    for j in range(2):
        ket = np.zeros(2, dtype=complex)
        ket[j] = 1.0
        out[j] = (attack.u_forward @ np.kron(ket, attack.ancilla_init)).reshape(2, d)
    return out


def chi_two_way(attack: AttackModel) -> np.ndarray:
    """``chi[j, k, l, m]``: ``U_R`` maps ``|l>|chi_jk>`` to ``sum_m |m>|chi_jklm>``."""
    d = attack.ancilla_dim
    fwd = chi_forward(attack)
    out = np.empty((2, 2, 2, 2, d), dtype=complex)
    for j in range(2):
        for k in range(2):
            for l in range(2):
                ket = np.zeros(2, dtype=complex)
                ket[l] = 1.0
                out[j, k, l] = (attack.u_backward @ np.kron(ket, fwd[j, k])).reshape(2, d)
    return out


def chi_backward(attack: AttackModel) -> np.ndarray:
    """``chi[l, m]`` of ``U_R`` alone on ``|l>|chi>`` (the backward-only decomposition)."""
    d = attack.ancilla_dim
    out = np.empty((2, 2, d), dtype=complex)
    for l in range(2):
        ket = np.zeros(2, dtype=complex)
        ket[l] = 1.0
        out[l] = (attack.u_backward @ np.kron(ket, attack.ancilla_init)).reshape(2, d)
    return out


@dataclass(frozen=True)
class ConstraintReport:
    """Residual norms of the zero-error conditions and the implied information bound.

    ``ctrl_x_residual`` is ``|| sum chi_jkk0 - sum chi_jkk1 ||`` (so
    ``e_ctrl_x = r^2 / 4``); ``sift0_residual``/``sift1_residual`` are the norms
    of the wrong-outcome sub-states (times 2) after SIFT(0)/SIFT(1).
    """

    ctrl_x_residual: float
    sift0_residual: float
    sift1_residual: float
    backward_only: bool
    backward_cross_residual: float
    backward_equal_residual: float
    component_norms: dict = field(repr=False)
    trace_distance: float = 0.0
    trace_distance_bound: float = 0.0
    tol: float = 1e-9

    @property
    def max_residual(self) -> float:
        return max(self.ctrl_x_residual, self.sift0_residual, self.sift1_residual)

    @property
    def satisfied(self) -> bool:
        return self.max_residual <= self.tol

    @property
    def implication_holds(self) -> bool:
        """Eve's trace distance never exceeds the bound implied by the residuals."""
        return self.trace_distance <= self.trace_distance_bound + 1e-12

    @property
    def linear_bound(self) -> float:
        """``g(tol) = 2.5 tol`` (valid because every residual is at most 2)."""
        return 2.5 * self.max_residual


def information_bound(r_ctrl: float, r0: float, r1: float) -> float:
    """Upper bound on Eve's trace distance from the three zero-error residuals.

    From ``S0 + S1 = sqrt(2) I``: the SIFT(0) and SIFT(1) final states sum to
    ``sqrt(2)`` times the CTRL final state, which ties Eve's two conditional
    sub-states to the CTRL and SIFT error components.
    """
    return r_ctrl + 0.5 * (r0 + r1) + (r0 * r0 + r1 * r1) / 8.0


def verify_no_error_constraints(attack: AttackModel, tol: float = 1e-9) -> ConstraintReport:
    if not tol > 0:
        raise ValueError("tol must be > 0")
    chi = chi_two_way(attack)
    s0 = math.sqrt(2.0) * sift_operator(0).real  # entries +/-1
    s1 = math.sqrt(2.0) * sift_operator(1).real
    ctrl = sum(chi[j, k, k, 0] - chi[j, k, k, 1] for j in range(2) for k in range(2))
    wrong0 = sum(s0[l, k] * chi[j, k, l, 1] for j in range(2) for k in range(2) for l in range(2))
    wrong1 = sum(s1[l, k] * chi[j, k, l, 0] for j in range(2) for k in range(2) for l in range(2))
    r_c = float(np.linalg.norm(ctrl))
    r0, r1 = float(np.linalg.norm(wrong0)), float(np.linalg.norm(wrong1))
    back = chi_backward(attack)
    n = 2 * attack.ancilla_dim
    td, _ = eve_information(attack)
    return ConstraintReport(
        ctrl_x_residual=r_c,
        sift0_residual=r0,
        sift1_residual=r1,
        backward_only=bool(np.max(np.abs(attack.u_forward - np.eye(n))) <= UNITARY_TOL),
        backward_cross_residual=float(max(np.linalg.norm(back[0, 1]), np.linalg.norm(back[1, 0]))),
        backward_equal_residual=float(np.linalg.norm(back[0, 0] - back[1, 1])),
        component_norms={
            f"{j}{k}{l}{m}": float(np.linalg.norm(chi[j, k, l, m]))
            for j in range(2)
            for k in range(2)
            for l in range(2)
            for m in range(2)
        },
        trace_distance=td,
        trace_distance_bound=information_bound(r_c, r0, r1),
        tol=tol,
    )


# -- named attacks -----------------------------------------------------------


def _copy_permutation(d: int, mask: int) -> np.ndarray:
    """Ancilla permutation ``|e> -> |e xor mask>`` on the lowest four levels."""
    lim = min(d, 4)
    if mask >= lim:
        raise ValueError(f"ancilla dimension {d} too small for copy register {mask}")
    perm = np.eye(d, dtype=complex)
    for e in range(lim):
        t = e ^ mask
        if t < lim:
            perm[e, e], perm[t, e] = 0.0, 1.0
    return perm


def controlled_copy(d: int, mask: int = 1, basis: str = "z") -> np.ndarray:
    """Unitary dilation of a Z (or X) measurement whose result is written into the ancilla."""
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    u = np.kron(p0, np.eye(d)) + np.kron(p1, _copy_permutation(d, mask))
    if basis == "x":
        h = np.kron(HADAMARD, np.eye(d))
        u = h @ u @ h
    elif basis != "z":
        raise ValueError("basis must be 'z' or 'x'")
    return u


def named_attack(kind: AttackKind | str, d: int = 4) -> AttackModel:
    kind = AttackKind(kind)
    eye = np.eye(2 * d, dtype=complex)
    if kind == AttackKind.IDENTITY:
        uf, ur = eye, eye
    elif kind == AttackKind.FORWARD_Z_INTERCEPT_RESEND:
        uf, ur = controlled_copy(d, 1), eye
    elif kind == AttackKind.BACKWARD_Z_INTERCEPT_RESEND:
        uf, ur = eye, controlled_copy(d, 1)
    elif kind == AttackKind.BOTH_Z_INTERCEPT_RESEND:
        uf, ur = controlled_copy(d, 1), controlled_copy(d, 2)
    else:
        uf, ur = controlled_copy(d, 1, "x"), eye
    return AttackModel(uf, ur, ancilla_dim=d, name=kind.value)


# -- generator parametrization -----------------------------------------------


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal (Frobenius) basis of n x n Hermitian matrices, shape (n*n, n, n)."""
    out = []
    for j in range(n):
        g = np.zeros((n, n), dtype=complex)
        g[j, j] = 1.0
        out.append(g)
    for j in range(n):
        for k in range(j + 1, n):
            g = np.zeros((n, n), dtype=complex)
            g[j, k] = g[k, j] = SQRT1_2
            out.append(g)
            g = np.zeros((n, n), dtype=complex)
            g[j, k], g[k, j] = -1j * SQRT1_2, 1j * SQRT1_2
            out.append(g)
    return np.array(out)


def unitary_from_generator(theta) -> np.ndarray:
    """``exp(-i H)`` with ``H = sum_i theta_i G_i``; ``theta`` has length ``n*n``."""
    theta = np.asarray(theta, dtype=float)
    n = math.isqrt(theta.size)
    if n * n != theta.size:
        raise ValueError("generator length must be a perfect square")
    h = np.tensordot(theta, hermitian_basis(n), axes=1)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def attack_from_generator(theta, d: int = 4) -> AttackModel:
    """Attack from ``2 * (2d)^2`` reals: forward generator then backward generator."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    m = (2 * d) ** 2
    if theta.size != 2 * m:
        raise ValueError(f"expected {2 * m} generator parameters for d={d}, got {theta.size}")
    return AttackModel(
        unitary_from_generator(theta[:m]),
        unitary_from_generator(theta[m:]),
        ancilla_dim=d,
        name="generator",
    )


def _complete_unitary(columns: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unitary whose first columns are the given orthonormal ``columns``."""
    n, k = columns.shape
    rest = rng.normal(size=(n, n - k)) + 1j * rng.normal(size=(n, n - k))
    q, r = np.linalg.qr(np.hstack([columns, rest]))
    q = q * (np.diag(r) / np.abs(np.diag(r)))  # undo QR phase freedom so q[:, :k] == columns
    return q


def constraint_satisfying_attack(rng: np.random.Generator, d: int = 4) -> AttackModel:
    """Random attack that causes no CTRL-X and no SIFT-Z errors.

    Any forward state ``Psi`` with ``<Y_B> = 0`` can be completed: ``U_R``
    sends ``Psi -> |+>|f>`` and ``iY Psi -> |->|f>``, which fixes the CTRL,
    SIFT(0) and SIFT(1) outputs to ``|+>|f>, |0>|f>, |1>|f>``.
    """
    n = 2 * d
    v = rng.normal(size=(2, d)) + 1j * rng.normal(size=(2, d))
    v[1] *= np.exp(-1j * np.angle(np.vdot(v[0], v[1])))  # <v0|v1> real  <=>  <Y_B> = 0
    psi = (v / np.linalg.norm(v)).reshape(n)
    init = np.zeros(d, dtype=complex)
    init[0] = 1.0
    start = np.kron(make_plus().vector, init)
    uf = _complete_unitary(psi[:, None], rng) @ _complete_unitary(start[:, None], rng).conj().T
    y = np.array([[0, -1j], [1j, 0]])
    ipsi = 1j * (np.kron(y, np.eye(d)) @ psi)
    f = rng.normal(size=d) + 1j * rng.normal(size=d)
    f /= np.linalg.norm(f)
    plus = np.kron(make_plus().vector, f)
    minus = np.kron(np.array([SQRT1_2, -SQRT1_2]), f)
    src = _complete_unitary(np.stack([psi, ipsi], axis=1), rng)
    dst = _complete_unitary(np.stack([plus, minus], axis=1), rng)
    return AttackModel(uf, dst @ src.conj().T, ancilla_dim=d, name="constraint_satisfying")


# -- batched evaluation and search -------------------------------------------


class _Evaluator:
    """Vectorized objective, constraints and exact gradients over many parameter sets."""

    def __init__(self, d: int):
        self.d = d
        self.n = n = 2 * d
        self.m = n * n
        self.basis = hermitian_basis(n)
        init = np.zeros(d, dtype=complex)
        init[0] = 1.0
        self.psi0 = np.kron(make_plus().vector, init)
        ops = [np.eye(2), sift_operator(0), sift_operator(1)]
        self.alice = np.array([np.kron(a, np.eye(d)) for a in ops])  # (3, n, n)

    def _unitaries(self, theta):
        h = np.einsum("...i,iab->...ab", theta, self.basis)
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)
        return u, w, v

    def forward(self, theta):
        """theta: (S, 2, m). Returns a dict of intermediate quantities."""
        u, w, v = self._unitaries(theta)
        uf, ur = u[:, 0], u[:, 1]
        phi = uf @ self.psi0  # (S, n)
        aphi = np.einsum("aij,sj->sai", self.alice, phi)  # (S, 3, n)
        psi = np.einsum("sij,saj->sai", ur, aphi)
        blocks = psi.reshape(psi.shape[0], 3, 2, self.d)
        minus = (blocks[:, 0, 0] - blocks[:, 0, 1]) * SQRT1_2
        e_c = np.sum(np.abs(minus) ** 2, axis=-1)
        w0, w1 = blocks[:, 1, 1], blocks[:, 2, 0]
        e_s = 0.5 * (np.sum(np.abs(w0) ** 2, axis=-1) + np.sum(np.abs(w1) ** 2, axis=-1))
        rho = np.einsum("skbe,skbf->skef", blocks[:, 1:], blocks[:, 1:].conj())
        lam, vec = np.linalg.eigh(rho[:, 0] - rho[:, 1])
        td = 0.5 * np.sum(np.abs(lam), axis=-1)
        return dict(
            u=u, w=w, v=v, phi=phi, aphi=aphi, psi=psi, blocks=blocks, minus=minus,
            e_c=e_c, e_s=e_s, lam=lam, vec=vec, td=td, w0=w0, w1=w1,
        )

    def _theta_grad(self, st, gamma):
        """Chain ``dL = Re sum_a <gamma_a, dpsi_a>`` back to the generator parameters."""
        ur = st["u"][:, 1]
        gr = np.einsum("sai,saj->sij", gamma, st["aphi"].conj())
        back = np.einsum("sji,saj->sai", ur.conj(), gamma)  # U_R^dagger gamma
        back = np.einsum("aji,saj->si", self.alice.conj(), back)  # A^dagger ...
        gf = back[:, :, None] * self.psi0.conj()[None, None, :]
        big = np.stack([gf, gr], axis=1)  # (S, 2, n, n)
        w, v = st["w"], st["v"]
        ew = np.exp(-1j * w)
        dw = w[..., :, None] - w[..., None, :]
        near = np.abs(dw) < 1e-9
        f = np.where(near, -1j * ew[..., :, None], (ew[..., :, None] - ew[..., None, :]) / np.where(near, 1.0, dw))
        vh = np.swapaxes(v.conj(), -1, -2)
        q = v @ ((vh @ big @ v) * f.conj()) @ vh
        return np.einsum("scab,iab->sci", q.conj(), self.basis).real

    def objective_grad(self, theta, epsilon, penalty):
        """Value and gradient of ``TD - penalty * (relu(e_c - eps) + relu(e_s - eps))``."""
        st = self.forward(theta)
        s = theta.shape[0]
        sign = np.sign(st["lam"])
        smat = (st["vec"] * sign[:, None, :]) @ np.swapaxes(st["vec"].conj(), -1, -2)
        gamma = np.zeros((s, 3, 2, self.d), dtype=complex)
        b = st["blocks"]
        gamma[:, 1] += b[:, 1] @ smat.conj()
        gamma[:, 2] -= b[:, 2] @ smat.conj()
        act_c = (st["e_c"] > epsilon).astype(float)[:, None]
        act_s = (st["e_s"] > epsilon).astype(float)[:, None]
        gamma[:, 0, 0] -= penalty * act_c * math.sqrt(2.0) * st["minus"]
        gamma[:, 0, 1] += penalty * act_c * math.sqrt(2.0) * st["minus"]
        gamma[:, 1, 1] -= penalty * act_s * st["w0"]
        gamma[:, 2, 0] -= penalty * act_s * st["w1"]
        value = st["td"] - penalty * (
            np.maximum(st["e_c"] - epsilon, 0.0) + np.maximum(st["e_s"] - epsilon, 0.0)
        )
        return value, self._theta_grad(st, gamma.reshape(s, 3, self.n)), st

    def residual_jacobian(self, theta):
        """Wrong-outcome amplitude residuals ``r`` (real, length 6d) and ``dr/dtheta``.

        ``e_c = |r_c|^2`` and ``e_s = |r_s|^2`` with ``r = (r_c, r_s)``.
        """
        st = self.forward(theta[None])
        d, n, m = self.d, self.n, self.m
        w, v = st["w"][0], st["v"][0]
        ew = np.exp(-1j * w)
        dw = w[:, :, None] - w[:, None, :]
        near = np.abs(dw) < 1e-9
        f = np.where(near, -1j * ew[:, :, None], (ew[:, :, None] - ew[:, None, :]) / np.where(near, 1.0, dw))
        vh = np.swapaxes(v.conj(), -1, -2)
        gt = np.einsum("cab,ibd,cde->ciae", vh, self.basis, v)
        du = np.einsum("cab,cibd,cde->ciae", v, gt * f[:, None], vh)  # (2, m, n, n)
        uf, ur = st["u"][0, 0], st["u"][0, 1]
        dphi_f = du[0] @ self.psi0  # (m, n)
        dpsi_f = np.einsum("ij,ajk,mk->mai", ur, self.alice, dphi_f)
        dpsi_r = np.einsum("mij,aj->mai", du[1], st["aphi"][0])
        dpsi = np.concatenate([dpsi_f, dpsi_r]).reshape(2 * m, 3, 2, d)

        def pack(p):
            minus = (p[..., 0, 0, :] - p[..., 0, 1, :]) * SQRT1_2
            c = np.concatenate([minus, p[..., 1, 1, :] * SQRT1_2, p[..., 2, 0, :] * SQRT1_2], axis=-1)
            return np.concatenate([c.real, c.imag], axis=-1)

        r = pack(st["blocks"][0])
        jac = pack(dpsi).T  # (6d, 2m)
        return r, jac, st


def _split(r, jac, d):
    """Row indices of the CTRL-X and SIFT-Z residual components."""
    idx = np.arange(6 * d)
    comp = idx % (3 * d)
    return comp < d, comp >= d


@dataclass
class OptimizerConfig:
    starts: int = 32
    iterations: int = 400
    learning_rate: float = 0.05
    penalty_start: float = 5.0
    penalty_end: float = 500.0
    init_scale: float = 1.0
    restore_iterations: int = 80
    seed: int = 0


@dataclass
class SearchResult:
    epsilon: float
    trace_distance: float
    holevo_bits: float
    e_ctrl_x: float
    e_sift_z: float
    theta: np.ndarray
    starts: int
    iterations: int
    feasible_starts: int
    start_index: int

    def attack(self, d: int) -> AttackModel:
        return attack_from_generator(self.theta, d)


def initial_parameters(config: OptimizerConfig, d: int) -> np.ndarray:
    """Start points, one independent seeded stream per start index."""
    m = (2 * d) ** 2
    return np.stack(
        [
            np.random.default_rng([config.seed, i]).normal(scale=config.init_scale, size=(2, m))
            for i in range(config.starts)
        ]
    )


def _ascend(ev: _Evaluator, theta: np.ndarray, epsilon: float, config: OptimizerConfig) -> np.ndarray:
    """Adam ascent on the penalized objective, all starts at once."""
    mom = np.zeros_like(theta)
    var = np.zeros_like(theta)
    b1, b2 = 0.9, 0.999
    steps = max(config.iterations, 1)
    for t in range(1, config.iterations + 1):
        frac = (t - 1) / max(steps - 1, 1)
        penalty = config.penalty_start * (config.penalty_end / config.penalty_start) ** frac
        lr = config.learning_rate * (0.02 + 0.98 * 0.5 * (1 + math.cos(math.pi * frac)))
        value, grad, _ = ev.objective_grad(theta, epsilon, penalty)
        if not np.all(np.isfinite(value)) or not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite objective during attack search")
        mom = b1 * mom + (1 - b1) * grad
        var = b2 * var + (1 - b2) * grad * grad
        theta = theta + lr * (mom / (1 - b1**t)) / (np.sqrt(var / (1 - b2**t)) + 1e-12)
    return theta


def _restore(ev: _Evaluator, theta: np.ndarray, epsilon: float, iterations: int) -> np.ndarray:
    """Project one parameter set onto ``max(e_c, e_s) <= epsilon``.

    At ``epsilon = 0`` this is Gauss-Newton on the wrong-outcome amplitudes;
    otherwise a minimum-norm Newton step on the violated error rates.
    """
    theta = theta.reshape(-1).copy()
    d = ev.d
    for _ in range(iterations):
        r, jac, st = ev.residual_jacobian(theta.reshape(2, -1))
        rows_c, rows_s = _split(r, jac, d)
        e_c, e_s = float(st["e_c"][0]), float(st["e_s"][0])
        if epsilon == 0.0:
            if r @ r < 1e-30:
                break
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        else:
            target = epsilon * (1.0 - 1e-9)
            rows, vals = [], []
            for mask, e in ((rows_c, e_c), (rows_s, e_s)):
                if e > target:
                    rows.append(2.0 * r[mask] @ jac[mask])
                    vals.append(e - target)
            if not rows:
                break
            g = np.array(rows)
            step = -g.T @ np.linalg.solve(g @ g.T + 1e-300 * np.eye(len(rows)), np.array(vals))
        theta = theta + step
    return theta.reshape(2, -1)


def max_info_at_error_budget(
    epsilon: float,
    d: int = 4,
    config: OptimizerConfig | None = None,
    extra_candidates=(),
) -> SearchResult:
    """Best Eve trace distance found with ``max(e_ctrl_x, e_sift_z) <= epsilon``.

    ``extra_candidates`` are parameter sets known to be feasible at a smaller
    budget; they are scored alongside the optimized starts.
    """
    config = config or OptimizerConfig()
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError(f"epsilon must be in [0, 0.5], got {epsilon}")
    if d < 2:
        raise ValueError("ancilla dimension must be >= 2")
    if config.starts < 1 or config.iterations < 0:
        raise ValueError("need at least one start and a non-negative iteration count")
    ev = _Evaluator(d)
    theta = _ascend(ev, initial_parameters(config, d), epsilon, config)
    candidates = [_restore(ev, t, epsilon, config.restore_iterations) for t in theta]
    candidates += [np.asarray(c, dtype=float).reshape(2, -1) for c in extra_candidates]
    best, feasible = None, 0
    for i, cand in enumerate(candidates):
        attack = attack_from_generator(cand, d)
        e_c, e_s = induced_error_rates(attack)
        if not (math.isfinite(e_c) and math.isfinite(e_s)):
            raise FloatingPointError("non-finite error rate during attack search")
        if max(e_c, e_s) > epsilon + FEASIBILITY_TOL:
            continue
        feasible += i < config.starts
        td, hol = eve_information(attack)
        if best is None or td > best.trace_distance:
            best = SearchResult(epsilon, td, hol, e_c, e_s, cand, config.starts, config.iterations, 0, i)
    if best is None:
        raise RuntimeError(f"no feasible attack found at epsilon={epsilon}")
    best.feasible_starts = feasible
    return best


def robustness_sweep(epsilons, d: int = 4, config: OptimizerConfig | None = None) -> list[SearchResult]:
    """Search every budget in ascending order, carrying the best attack upward.

    A point feasible at a smaller budget is feasible at every larger one, so
    the best-found curve is non-decreasing by construction.
    """
    results, carry = [], []
    for eps in sorted(float(e) for e in epsilons):
        res = max_info_at_error_budget(eps, d, config, extra_candidates=carry)
        results.append(res)
        carry = [res.theta]
    return results
