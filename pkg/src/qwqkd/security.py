"""Walk-basis overlap analysis: security parameter, sweeps, and key rate.

The security parameter ``c`` is the largest probability of any (prepared
symbol, readout) pair when a symbol is prepared, walked for t steps, and
measured.  Smaller ``c`` means a flatter outcome distribution and a better
asymptotic key rate ``r = log2(1/c) - H(A_z|B_z) - H(A_w|B_w)``.

Readout conventions follow the protocol alphabet: the circle reads the full
position(x)coin register (2P outcomes), the hypercubes read the
coin-marginalized position (2**P outcomes).  Both are overridable through
``alphabet=`` for convention-sensitivity studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .walkgraph import RegisterPlan, WalkKernel, WalkSpec, check_register_cap, plan_registers

ALPHABET_MODES = ("default", "full_register", "position_marginal")


@dataclass
class OverlapMatrix:
    """Row x holds the readout distribution of prepared-and-walked symbol x."""

    entries: np.ndarray
    alphabet_mode: str = "default"

    @property
    def alphabet_size(self) -> int:
        return self.entries.shape[0]


@dataclass
class CSweepResult:
    """c(t) across a step sweep, with the smallest minimizing t."""

    t_values: np.ndarray
    c_values: np.ndarray
    t_opt: int
    c_min: float


@dataclass(frozen=True)
class KeyRateReport:
    """Security parameter, conditional entropies, and the resulting rate."""

    c: float
    h_z: float
    h_w: float
    r: float

    @classmethod
    def from_entropies(cls, c: float, h_z: float, h_w: float) -> "KeyRateReport":
        return cls(c=c, h_z=h_z, h_w=h_w, r=key_rate(c, h_z, h_w))


def _resolve_alphabet(spec: WalkSpec, plan: RegisterPlan, mode: str) -> tuple[list[int], str]:
    """Return (prepared basis indices, readout kind) for an alphabet mode.

    Readout kind 'full' slices the valid full-register indices; 'position'
    marginalizes the coin register.
    """
    if mode not in ALPHABET_MODES:
        raise ValidationError(f"unknown alphabet mode {mode!r}")
    if mode == "default":
        mode = "full_register" if spec.topology == "circle" else "position_marginal"
    if mode == "full_register":
        if spec.topology == "circle":
            # Valid indices are exactly 0..2P-1 (position < P).
            return list(range(2 * spec.P)), "full"
        return list(range(plan.dim)), "full"
    if spec.topology == "circle":
        indices = [(x << plan.n_coin) for x in range(spec.P)]
        return indices, "position"
    return [(x << plan.n_coin) | plan.coin_init for x in range(1 << spec.P)], "position"


def _readout_rows(spec, plan, amps, readout) -> np.ndarray:
    """Readout distributions of a (dim, n_symbols) batch, one row per column."""
    probs = amps.real**2 + amps.imag**2
    if readout == "full":
        if spec.topology == "circle":
            probs = probs[: 2 * spec.P, :]
        return probs.T.copy()
    pos = probs.reshape(1 << plan.n_pos, 1 << plan.n_coin, -1).sum(axis=1)
    if spec.topology == "circle":
        pos = pos[: spec.P, :]
    return pos.T.copy()


def _prepare_index_batch(kernel: WalkKernel, indices) -> np.ndarray:
    amps = np.zeros((kernel.plan.dim, len(indices)), dtype=np.complex128)
    for col, idx in enumerate(indices):
        amps[idx, col] = 1.0
    return kernel.apply_f_raw(amps)


def overlap_matrix(spec: WalkSpec, alphabet: str = "default") -> OverlapMatrix:
    """Prepare every alphabet symbol, walk it for spec.t steps, and collect
    the readout distribution per symbol."""
    plan = plan_registers(spec)
    indices, readout = _resolve_alphabet(spec, plan, alphabet)
    check_register_cap(plan, alphabet=len(indices))
    kernel = WalkKernel(spec, plan)
    amps = _prepare_index_batch(kernel, indices)
    amps = kernel.evolve_raw(amps)
    return OverlapMatrix(_readout_rows(spec, plan, amps, readout), alphabet)


def security_parameter(m: OverlapMatrix) -> float:
    """Largest entry of the overlap matrix."""
    return float(m.entries.max())


def sweep_c(spec: WalkSpec, t_max: int, alphabet: str = "default") -> CSweepResult:
    """Record c(t) for every t in [1, t_max], evolving all alphabet states
    incrementally (one shared step per t).  Ties break toward the smallest t.
    """
    if t_max < 1:
        raise ValidationError("t_max must be >= 1")
    plan = plan_registers(spec)
    indices, readout = _resolve_alphabet(spec, plan, alphabet)
    check_register_cap(plan, alphabet=len(indices))
    kernel = WalkKernel(spec.with_t(1), plan)
    amps = _prepare_index_batch(kernel, indices)
    c_values = np.empty(t_max, dtype=np.float64)
    if readout == "full":
        hi = 2 * spec.P if spec.topology == "circle" else plan.dim
        for i in range(t_max):
            amps = kernel.step_raw(amps)
            probs = amps.real**2 + amps.imag**2
            c_values[i] = probs[:hi, :].max()
    else:
        n_coin_dim = 1 << plan.n_coin
        hi = spec.P if spec.topology == "circle" else (1 << plan.n_pos)
        for i in range(t_max):
            amps = kernel.step_raw(amps)
            probs = amps.real**2 + amps.imag**2
            pos = probs.reshape(-1, n_coin_dim, amps.shape[1]).sum(axis=1)
            c_values[i] = pos[:hi, :].max()
    t_values = np.arange(1, t_max + 1, dtype=np.int64)
    best = int(np.argmin(c_values))
    return CSweepResult(
        t_values=t_values,
        c_values=c_values,
        t_opt=int(t_values[best]),
        c_min=float(c_values[best]),
    )


def conditional_entropy(joint: np.ndarray) -> float:
    """H(A|B) = H(A,B) - H(B) in bits, with 0 log 0 = 0.

    ``joint[a, b]`` is the probability of (Alice symbol a, Bob outcome b);
    it must be non-negative and sum to 1 within 1e-9.
    """
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 2:
        raise ValidationError("joint distribution must be a 2-D matrix")
    if joint.min() < -1e-12:
        raise ValidationError("joint distribution has negative entries")
    total = joint.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"joint distribution sums to {total}, not 1 within 1e-9")
    nz = joint[joint > 0]
    h_ab = float(-(nz * np.log2(nz)).sum())
    pb = joint.sum(axis=0)
    nzb = pb[pb > 0]
    h_b = float(-(nzb * np.log2(nzb)).sum())
    return h_ab - h_b


def key_rate(c: float, h_z: float, h_w: float) -> float:
    """Asymptotic secret-key rate bound log2(1/c) - H_z - H_w, in bits per
    sifted symbol."""
    if not 0.0 < c <= 1.0:
        raise ValidationError(f"security parameter c={c} outside (0, 1]")
    if h_z < -1e-12 or h_w < -1e-12:
        raise ValidationError("conditional entropies must be non-negative")
    return float(np.log2(1.0 / c) - max(h_z, 0.0) - max(h_w, 0.0))
