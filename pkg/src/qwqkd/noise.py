"""Single-qubit noise channels and their application to walk rounds.

Two channel families are provided:

* ``depolarizing(lam)`` with Kraus set {sqrt(1-3 lam/4) I, sqrt(lam/4) X,
  sqrt(lam/4) Y, sqrt(lam/4) Z}, equal to
  ``rho -> (1 - lam) rho + lam I/2`` on one qubit (lam in [0, 4/3]).
* ``amp_phase_damping(a, b, p_a)``: the eight operators K_ij = P_j A_i
  combining amplitude damping (decay probability ``a``, excited-state
  population ``p_a``) with phase damping (probability ``b``).  K_11 is
  identically zero and is kept in the set; the sampler skips it because its
  branch probability vanishes.

Channels act on pure states through Monte-Carlo trajectory unraveling
(`apply_trajectory`): operator K_k is selected with probability
``||K_k psi||^2`` and the state renormalized.  The ensemble average over
trajectories equals the density-matrix channel (`apply_channel_density`),
which serves as the correctness oracle at small register sizes.

Placement policies position the channel inside a protocol round:

* ``channel_once``   - one all-qubit layer between the sender's last
                       operation and the receiver's first (transmission).
* ``per_step``       - an all-qubit layer after state preparation, after
                       every forward walk step, and after every inverse step
                       (the trailing coin un-preparation folds into the last
                       inverse step).
* ``per_gate``       - a layer on exactly the qubits touched by each
                       elementary coin / preparation / shift application,
                       immediately after it.

``channel_once`` is the default: with strengths calibrated per threshold
scans it reproduces the single-qubit (P=1, t=1) limit exactly, whereas the
step- and gate-attached policies accumulate hundreds of layers at t ~ 1e3
and fully depolarize the walked register at any appreciable strength.  All
three remain selectable and are recorded in run metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import corestate
from .corestate import Outcome, PureState
from .errors import NumericalDegeneracyError, ValidationError
from .walkgraph import RegisterPlan, WalkKernel, WalkSpec

NOISE_KINDS = ("depolarizing", "amp_phase_damping")
PLACEMENTS = ("channel_once", "per_step", "per_gate")

DEPOLARIZING_LAMBDA_MAX = 4.0 / 3.0  # single-qubit bound 4^n / (4^n - 1)


@dataclass(frozen=True)
class KrausSet:
    """A complete set of 2x2 Kraus operators (sum K^dag K = I within 1e-12)."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=np.complex128) for k in self.operators)
        acc = np.zeros((2, 2), dtype=np.complex128)
        for k in ops:
            if k.shape != (2, 2):
                raise ValidationError("Kraus operators must be 2x2")
            acc += k.conj().T @ k
        if not np.allclose(acc, np.eye(2), atol=1e-12):
            raise ValidationError("incomplete Kraus set: sum K^dag K differs from I")
        object.__setattr__(self, "operators", ops)
        # With at most one nonzero per row, ||K psi||^2 has no coherence
        # cross terms and reduces to column weights against the qubit
        # populations; both built-in channels qualify.
        row_sparse = all((np.abs(k) > 0).sum(axis=1).max() <= 1 for k in ops)
        object.__setattr__(self, "row_sparse", row_sparse)
        col_w = np.array([[(np.abs(k[:, 0]) ** 2).sum(),
                           (np.abs(k[:, 1]) ** 2).sum()] for k in ops])
        object.__setattr__(self, "column_weights", col_w)

    def as_list(self) -> list[np.ndarray]:
        return [k.copy() for k in self.operators]


def depolarizing_kraus(lam: float) -> KrausSet:
    """Kraus set of the single-qubit depolarizing channel."""
    if not 0.0 <= lam <= DEPOLARIZING_LAMBDA_MAX + 1e-12:
        raise ValidationError(
            f"depolarizing strength {lam} outside [0, {DEPOLARIZING_LAMBDA_MAX}]"
        )
    eye = np.eye(2, dtype=np.complex128)
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    w = math.sqrt(lam / 4.0)
    return KrausSet(
        (math.sqrt(max(1.0 - 3.0 * lam / 4.0, 0.0)) * eye, w * x, w * y, w * z)
    )


def amp_phase_kraus(a: float, b: float, p_a: float = 0.0) -> KrausSet:
    """Kraus set of the combined amplitude-phase damping channel.

    All eight products K_ij = P_j A_i are returned, including the
    identically-zero K_11 (decay to |0> followed by phase damping supported
    on |1> only).
    """
    for name, v in (("a", a), ("b", b), ("p_a", p_a)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"damping parameter {name}={v} outside [0, 1]")
    amp = [
        math.sqrt(1 - p_a) * np.array([[1, 0], [0, math.sqrt(1 - a)]]),
        math.sqrt(1 - p_a) * np.array([[0, math.sqrt(a)], [0, 0]]),
        math.sqrt(p_a) * np.array([[math.sqrt(1 - a), 0], [0, 1]]),
        math.sqrt(p_a) * np.array([[0, 0], [math.sqrt(a), 0]]),
    ]
    phase = [
        np.array([[1, 0], [0, math.sqrt(1 - b)]]),
        np.array([[0, 0], [0, math.sqrt(b)]]),
    ]
    return KrausSet(tuple(p @ ai for ai in amp for p in phase))


@dataclass(frozen=True)
class NoiseModel:
    """A single-qubit channel plus its application policy.

    ``strength_scale`` multiplies lam (depolarizing) or (a, b) jointly
    (damping; p_a stays fixed) so threshold scans can sweep one knob.
    """

    kind: str
    lam: float = 0.0
    a: float = 0.0
    b: float = 0.0
    p_a: float = 0.0
    placement: str = "channel_once"
    strength_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.placement not in PLACEMENTS:
            raise ValidationError(f"unknown placement {self.placement!r}")
        if not 0.0 <= self.strength_scale <= 1.0:
            raise ValidationError("strength_scale must lie in [0, 1]")
        # Construct once to validate scaled parameters are in range.
        self.kraus()

    @classmethod
    def depolarizing(cls, lam: float = 1.0, placement: str = "channel_once",
                     strength_scale: float = 1.0) -> "NoiseModel":
        return cls(kind="depolarizing", lam=lam, placement=placement,
                   strength_scale=strength_scale)

    @classmethod
    def amp_phase(cls, a: float = 1.0, b: float = 1.0, p_a: float = 0.0,
                  placement: str = "channel_once", strength_scale: float = 1.0) -> "NoiseModel":
        return cls(kind="amp_phase_damping", a=a, b=b, p_a=p_a,
                   placement=placement, strength_scale=strength_scale)

    def with_scale(self, strength_scale: float) -> "NoiseModel":
        return replace(self, strength_scale=strength_scale)

    def kraus(self) -> KrausSet:
        """Kraus set at the scaled parameters."""
        s = self.strength_scale
        if self.kind == "depolarizing":
            return depolarizing_kraus(self.lam * s)
        return amp_phase_kraus(self.a * s, self.b * s, self.p_a)

    def describe(self) -> dict:
        d = {"kind": self.kind, "placement": self.placement,
             "strength_scale": self.strength_scale}
        if self.kind == "depolarizing":
            d["lam"] = self.lam
        else:
            d.update(a=self.a, b=self.b, p_a=self.p_a)
        return d


# ---------------------------------------------------------------------------
# Trajectory unraveling
# ---------------------------------------------------------------------------


def apply_trajectory(state: PureState, k: KrausSet, qubit: int,
                     rng: np.random.Generator) -> PureState:
    """Sample one Kraus branch on one qubit and renormalize."""
    out = state.copy()
    _apply_trajectory_raw(out.amplitudes, out.n_qubits, k, qubit, rng)
    return out


def _apply_trajectory_raw(amps: np.ndarray, n_qubits: int, k: KrausSet,
                          qubit: int, rng: np.random.Generator,
                          u: float | None = None) -> np.ndarray:
    low = 1 << qubit
    view = amps.reshape(-1, 2, low)
    weights = np.empty(len(k.operators))
    for i, op in enumerate(k.operators):
        b0 = op[0, 0] * view[:, 0, :] + op[0, 1] * view[:, 1, :]
        b1 = op[1, 0] * view[:, 0, :] + op[1, 1] * view[:, 1, :]
        weights[i] = np.vdot(b0, b0).real + np.vdot(b1, b1).real
    total = weights.sum()
    if total < 1e-15:
        raise NumericalDegeneracyError("all Kraus branch probabilities below 1e-15")
    if u is None:
        u = rng.random()
    choice = int(np.searchsorted(np.cumsum(weights / total), u, side="right"))
    choice = min(choice, len(k.operators) - 1)
    corestate._apply_u2_raw(amps, n_qubits, qubit, k.operators[choice])
    amps /= math.sqrt(weights[choice])
    return amps


def _apply_trajectory_batch(amps: np.ndarray, n_qubits: int, k: KrausSet,
                            qubit: int, rng: np.random.Generator | None,
                            u: np.ndarray | None = None) -> np.ndarray:
    """Vectorized trajectory sampling: each column is an independent shot.
    Branch-selection uniforms come from ``u`` (one per column) when given,
    so callers can keep per-column streams."""
    m = amps.shape[1]
    low = (1 << qubit) * m
    view = amps.reshape(-1, 2, low)
    if k.row_sparse:
        probs = amps.real**2 + amps.imag**2
        p1 = probs.reshape(-1, 2, 1 << qubit, m)[:, 1, :, :].sum(axis=(0, 1))
        p0 = probs.reshape(-1, 1 << qubit, m).sum(axis=(0, 1)) - p1
        weights = np.outer(k.column_weights[:, 0], p0) + np.outer(k.column_weights[:, 1], p1)
    else:
        weights = np.empty((len(k.operators), m))
        for i, op in enumerate(k.operators):
            b0 = op[0, 0] * view[:, 0, :] + op[0, 1] * view[:, 1, :]
            b1 = op[1, 0] * view[:, 0, :] + op[1, 1] * view[:, 1, :]
            w = (b0.real**2 + b0.imag**2 + b1.real**2 + b1.imag**2)
            weights[i] = w.reshape(-1, 1 << qubit, m).sum(axis=(0, 1))
    totals = weights.sum(axis=0)
    if np.any(totals < 1e-15):
        raise NumericalDegeneracyError("all Kraus branch probabilities below 1e-15")
    cdf = np.cumsum(weights / totals, axis=0)
    if u is None:
        u = rng.random(m)
    choices = (u[None, :] > cdf).sum(axis=0)
    choices = np.minimum(choices, len(k.operators) - 1)
    for i, op in enumerate(k.operators):
        mask = choices == i
        if not mask.any():
            continue
        cols = np.ascontiguousarray(amps[:, mask])
        corestate._apply_u2_raw(cols, n_qubits, qubit, op)
        amps[:, mask] = cols
    amps /= np.sqrt(weights[choices, np.arange(m)])
    return amps


def apply_layer_raw(amps: np.ndarray, n_qubits: int, k: KrausSet,
                    rng: np.random.Generator, qubits=None,
                    uniforms: np.ndarray | None = None) -> np.ndarray:
    """One noise layer: trajectory-sample the channel on each listed qubit
    (all qubits by default), in ascending order.  ``uniforms`` supplies the
    branch-selection draws (one per qubit) when the caller pre-draws them."""
    targets = list(range(n_qubits) if qubits is None else qubits)
    for j, q in enumerate(targets):
        u = None if uniforms is None else float(uniforms[j])
        _apply_trajectory_raw(amps, n_qubits, k, q, rng, u=u)
    return amps


# ---------------------------------------------------------------------------
# Noisy walk rounds (step-through reference semantics)
# ---------------------------------------------------------------------------


def _per_gate_sequence(kernel: WalkKernel, amps, k, rng, inverse=False):
    """One walk step with per-gate noise on the touched qubits."""
    spec, plan = kernel.spec, kernel.plan
    n = plan.n_qubits
    coin_qubits = list(range(plan.n_coin))
    if spec.topology == "hypercube_tensor":
        shift_touched = [[a, plan.n_coin + a] for a in range(spec.P)]
    else:
        shift_touched = [list(range(n))]

    def coin_gates(dagger):
        if spec.topology == "hypercube_grover":
            op = kernel.coin_op_dag if dagger else kernel.coin_op
            corestate._apply_coin_register_op_raw(amps, plan.n_coin, op)
            apply_layer_raw(amps, n, k, rng, coin_qubits)
        else:
            m = kernel.coin_op_dag if dagger else kernel.coin_op
            for q in coin_qubits:
                corestate._apply_u2_raw(amps, n, q, m)
                apply_layer_raw(amps, n, k, rng, [q])

    def f_gates(dagger):
        m = kernel.f_matrix_dag if dagger else kernel.f_matrix
        for q in coin_qubits:
            corestate._apply_u2_raw(amps, n, q, m)
            apply_layer_raw(amps, n, k, rng, [q])

    if not inverse:
        if spec.f_policy == "before_each_step":
            f_gates(False)
        coin_gates(False)
        amps = corestate._apply_perm_raw(amps, kernel.shift_gather)
        for touched in shift_touched:
            apply_layer_raw(amps, n, k, rng, touched)
    else:
        amps = corestate._apply_perm_raw(amps, kernel.unshift_gather)
        for touched in shift_touched:
            apply_layer_raw(amps, n, k, rng, touched)
        coin_gates(True)
        if spec.f_policy == "before_each_step":
            f_gates(True)
    return amps


def noisy_walk_round(spec: WalkSpec, plan: RegisterPlan, symbol: int,
                     noise: NoiseModel, rng: np.random.Generator) -> Outcome:
    """Execute prepare -> evolve -> invert -> sample with the channel applied
    according to the placement policy.  This is the walked-basis round
    (both parties using the walk); the protocol module composes the other
    basis combinations from the same pieces."""
    kernel = WalkKernel(spec, plan)
    k = noise.kraus()
    n = plan.n_qubits
    amps = kernel.prepare_raw(symbol)
    if noise.placement == "per_step":
        apply_layer_raw(amps, n, k, rng)
        for _ in range(spec.t):
            amps = kernel.step_raw(amps)
            apply_layer_raw(amps, n, k, rng)
        for i in range(spec.t):
            amps = kernel.unstep_raw(amps)
            if i == spec.t - 1:
                kernel.apply_f_raw(amps, dagger=True)
            apply_layer_raw(amps, n, k, rng)
        if spec.t == 0:
            kernel.apply_f_raw(amps, dagger=True)
    elif noise.placement == "per_gate":
        apply_layer_raw(amps, n, k, rng)
        for _ in range(spec.t):
            amps = _per_gate_sequence(kernel, amps, k, rng, inverse=False)
        for _ in range(spec.t):
            amps = _per_gate_sequence(kernel, amps, k, rng, inverse=True)
        kernel.apply_f_raw(amps, dagger=True)
    else:  # channel_once
        amps = kernel.evolve_raw(amps)
        apply_layer_raw(amps, n, k, rng)
        amps = kernel.invert_raw(amps)
    state = PureState(amps, plan.n_pos, plan.n_coin)
    return corestate.sample_outcome(state, rng)
