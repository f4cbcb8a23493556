"""Topology-specific walk construction and evolution.

Three walk families share one register convention (position high bits, coin
low bits; see `corestate`):

``circle``
    P positions on a ring (P odd unless explicitly overridden), one coin
    qubit.  Each step rotates the coin, then moves the walker +1 (mod P) on
    coin 1 and -1 (mod P) on coin 0.  Positions >= P are dead slots that the
    shift never touches.

``hypercube_tensor``
    P position qubits and P coin qubits.  Each step applies the rotation
    coin to every coin qubit, then flips position bit a wherever coin bit a
    is 1 (a controlled flip per dimension; the flips act on disjoint bits and
    commute).

``hypercube_grover``
    P position qubits and ceil(log2 P) coin qubits holding a direction value
    a in [0, P).  Each step applies the Grover coin on the P-dimensional
    value subspace (values >= P ride along under an embedded identity), then
    flips position bit a for coin value a.

The protocol alphabet is the full position(x)coin space for the circle
(2P symbols, symbol = 2*position + coin) and the position values for the
hypercubes (2**P symbols, coin register starting at 0).

The preparation operator F acts on every coin qubit.  With
``f_policy='once_before_walk'`` it is applied only during state preparation;
with ``'before_each_step'`` it is additionally re-applied to the coin
register before every step, and inversion mirrors that ordering exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import corestate
from .coinops import CoinSpec, PRE_OPERATORS, grover_matrix, pre_operator_matrix, rotation_matrix
from .corestate import PureState
from .errors import ResourceCapError, ValidationError

TOPOLOGIES = ("circle", "hypercube_tensor", "hypercube_grover")
F_POLICIES = ("once_before_walk", "before_each_step")

HARD_QUBIT_CAP = 26
RECOMMENDED_QUBIT_CAP = 14
# dim * alphabet complex entries held by batched sweeps (128 MiB worth).
BATCH_ELEMENT_CAP = 1 << 23


@dataclass(frozen=True)
class WalkSpec:
    """Full configuration of one walk."""

    topology: str
    P: int
    t: int
    coin: CoinSpec = CoinSpec()
    F: str = "I"
    f_policy: str = "once_before_walk"
    allow_even_circle: bool = False

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValidationError(f"unknown topology {self.topology!r}")
        if self.P < 1:
            raise ValidationError("P must be positive")
        if self.t < 0:
            raise ValidationError("step count t must be non-negative")
        if self.F not in PRE_OPERATORS:
            raise ValidationError(f"unknown pre-operator {self.F!r}")
        if self.f_policy not in F_POLICIES:
            raise ValidationError(f"unknown f_policy {self.f_policy!r}")
        if self.topology == "circle" and self.P % 2 == 0 and not self.allow_even_circle:
            raise ValidationError(
                "circle topology requires odd P (set allow_even_circle to override)"
            )
        if self.topology == "hypercube_grover" and self.P < 2:
            raise ValidationError("hypercube_grover requires P >= 2")
        if self.topology == "hypercube_grover" and self.coin.flavor == "rotation":
            # The Grover topology owns its coin; angles would be ignored.
            object.__setattr__(self, "coin", CoinSpec(flavor="grover"))
        if self.topology != "hypercube_grover" and self.coin.flavor == "grover":
            raise ValidationError(
                f"{self.topology} uses the rotation coin; grover flavor applies "
                "to hypercube_grover only"
            )

    def with_t(self, t: int) -> "WalkSpec":
        return replace(self, t=t)


@dataclass(frozen=True)
class RegisterPlan:
    """Register sizing and the protocol symbol alphabet for one walk."""

    n_pos: int
    n_coin: int
    alphabet_size: int
    coin_init: int = 0

    @property
    def n_qubits(self) -> int:
        return self.n_pos + self.n_coin

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def plan_registers(spec: WalkSpec) -> RegisterPlan:
    """Derive the register plan for a walk spec."""
    if spec.topology == "circle":
        n_pos = 0 if spec.P == 1 else math.ceil(math.log2(spec.P))
        return RegisterPlan(n_pos=n_pos, n_coin=1, alphabet_size=2 * spec.P)
    if spec.topology == "hypercube_tensor":
        return RegisterPlan(n_pos=spec.P, n_coin=spec.P, alphabet_size=1 << spec.P)
    n_coin = math.ceil(math.log2(spec.P))
    return RegisterPlan(n_pos=spec.P, n_coin=n_coin, alphabet_size=1 << spec.P)


def check_register_cap(plan: RegisterPlan, alphabet: int | None = None):
    """Raise ResourceCapError for registers beyond the simulation caps."""
    if plan.n_qubits > HARD_QUBIT_CAP:
        raise ResourceCapError(
            f"register of {plan.n_qubits} qubits exceeds the hard cap of "
            f"{HARD_QUBIT_CAP} qubits ({RECOMMENDED_QUBIT_CAP} recommended)"
        )
    if alphabet is not None and plan.dim * alphabet > BATCH_ELEMENT_CAP:
        raise ResourceCapError(
            f"batched sweep needs {plan.dim * alphabet} complex amplitudes, "
            f"above the {BATCH_ELEMENT_CAP} element cap"
        )


def symbol_to_index(spec: WalkSpec, plan: RegisterPlan, symbol: int) -> int:
    """Full-register basis index encoding a protocol symbol (before F)."""
    if not 0 <= symbol < plan.alphabet_size:
        raise ValidationError(
            f"symbol {symbol} out of range for alphabet of {plan.alphabet_size}"
        )
    if spec.topology == "circle":
        position, coin = symbol >> 1, symbol & 1
        return (position << plan.n_coin) | coin
    return (symbol << plan.n_coin) | plan.coin_init


class WalkKernel:
    """Precomputed operators for one walk spec.

    Raw methods mutate C-contiguous complex128 arrays of shape (dim,) or
    (dim, batch); shift methods return the relocated array.  Instances are
    immutable after construction and safe to share across threads.
    """

    def __init__(self, spec: WalkSpec, plan: RegisterPlan | None = None):
        self.spec = spec
        self.plan = plan or plan_registers(spec)
        self.f_matrix = pre_operator_matrix(spec.F)
        self.f_matrix_dag = self.f_matrix.conj().T
        if spec.topology == "hypercube_grover":
            k = 1 << self.plan.n_coin
            emb = np.eye(k, dtype=np.complex128)
            emb[: spec.P, : spec.P] = grover_matrix(spec.P)
            self.coin_op = emb
        else:
            self.coin_op = rotation_matrix(spec.coin.phi, spec.coin.theta)
        self.coin_op_dag = self.coin_op.conj().T
        perm = self._shift_permutation()
        self.shift_gather = corestate.permutation_source(perm, self.plan.dim)
        self.unshift_gather = perm

    def _shift_permutation(self) -> np.ndarray:
        spec, plan = self.spec, self.plan
        dim = plan.dim
        idx = np.arange(dim, dtype=np.int64)
        pos = idx >> plan.n_coin
        coin = idx & ((1 << plan.n_coin) - 1)
        if spec.topology == "circle":
            new_pos = pos.copy()
            on_ring = pos < spec.P
            right = on_ring & (coin == 1)
            left = on_ring & (coin == 0)
            new_pos[right] = (pos[right] + 1) % spec.P
            new_pos[left] = (pos[left] - 1) % spec.P
        elif spec.topology == "hypercube_tensor":
            new_pos = pos ^ coin
        else:
            new_pos = pos.copy()
            moving = coin < spec.P
            new_pos[moving] = pos[moving] ^ (np.int64(1) << coin[moving])
        return (new_pos << plan.n_coin) | coin

    # -- raw array operations ------------------------------------------------

    def _coin_qubits(self):
        return range(self.plan.n_coin)

    def apply_f_raw(self, amps, dagger=False):
        m = self.f_matrix_dag if dagger else self.f_matrix
        for q in self._coin_qubits():
            corestate._apply_u2_raw(amps, self.plan.n_qubits, q, m)
        return amps

    def apply_coin_raw(self, amps, dagger=False):
        if self.spec.topology == "hypercube_grover":
            op = self.coin_op_dag if dagger else self.coin_op
            return corestate._apply_coin_register_op_raw(amps, self.plan.n_coin, op)
        m = self.coin_op_dag if dagger else self.coin_op
        for q in self._coin_qubits():
            corestate._apply_u2_raw(amps, self.plan.n_qubits, q, m)
        return amps

    def step_raw(self, amps):
        if self.spec.f_policy == "before_each_step":
            self.apply_f_raw(amps)
        self.apply_coin_raw(amps)
        return corestate._apply_perm_raw(amps, self.shift_gather)

    def unstep_raw(self, amps):
        amps = corestate._apply_perm_raw(amps, self.unshift_gather)
        self.apply_coin_raw(amps, dagger=True)
        if self.spec.f_policy == "before_each_step":
            self.apply_f_raw(amps, dagger=True)
        return amps

    def evolve_raw(self, amps, t=None):
        for _ in range(self.spec.t if t is None else t):
            amps = self.step_raw(amps)
        return amps

    def invert_raw(self, amps, t=None):
        for _ in range(self.spec.t if t is None else t):
            amps = self.unstep_raw(amps)
        return self.apply_f_raw(amps, dagger=True)

    def prepare_raw(self, symbol: int) -> np.ndarray:
        amps = np.zeros(self.plan.dim, dtype=np.complex128)
        amps[symbol_to_index(self.spec, self.plan, symbol)] = 1.0
        return self.apply_f_raw(amps)

    def prepare_alphabet_raw(self, symbols=None) -> np.ndarray:
        """(dim, n_symbols) batch with column s = prepared symbol s."""
        if symbols is None:
            symbols = range(self.plan.alphabet_size)
        symbols = list(symbols)
        amps = np.zeros((self.plan.dim, len(symbols)), dtype=np.complex128)
        for col, s in enumerate(symbols):
            amps[symbol_to_index(self.spec, self.plan, s), col] = 1.0
        return self.apply_f_raw(amps)

    def dense_pipeline(self, max_qubits: int = 12) -> np.ndarray:
        """Dense matrix of the full preparation pipeline: column i is the
        evolved state of full-register basis index i (F, then t steps under
        the configured policy)."""
        if self.plan.n_qubits > max_qubits:
            raise ResourceCapError(
                f"dense pipeline for {self.plan.n_qubits} qubits exceeds the "
                f"{max_qubits}-qubit cap"
            )
        amps = np.eye(self.plan.dim, dtype=np.complex128)
        self.apply_f_raw(amps)
        return self.evolve_raw(amps)


# ---------------------------------------------------------------------------
# PureState-level operations
# ---------------------------------------------------------------------------


def prepare_initial(spec: WalkSpec, plan: RegisterPlan, symbol: int) -> PureState:
    """Encode a protocol symbol and apply F to every coin qubit."""
    kernel = WalkKernel(spec, plan)
    return PureState(kernel.prepare_raw(symbol), plan.n_pos, plan.n_coin)


def step(spec: WalkSpec, plan: RegisterPlan, state: PureState) -> PureState:
    """One walk step: coin operation, then the conditional shift (preceded
    by F under the before_each_step policy)."""
    kernel = WalkKernel(spec, plan)
    return PureState(kernel.step_raw(state.amplitudes.copy()), plan.n_pos, plan.n_coin)


def evolve(spec: WalkSpec, plan: RegisterPlan, state: PureState, t: int | None = None) -> PureState:
    """Apply t walk steps (spec.t when t is None)."""
    kernel = WalkKernel(spec, plan)
    return PureState(kernel.evolve_raw(state.amplitudes.copy(), t), plan.n_pos, plan.n_coin)


def invert(spec: WalkSpec, plan: RegisterPlan, state: PureState, t: int | None = None) -> PureState:
    """Exact inverse of prepare+evolve: t repetitions of (inverse shift,
    adjoint coin), mirroring the f_policy, then F-dagger on the coin
    register."""
    kernel = WalkKernel(spec, plan)
    return PureState(kernel.invert_raw(state.amplitudes.copy(), t), plan.n_pos, plan.n_coin)


def position_distribution(
    spec: WalkSpec, plan: RegisterPlan, symbol: int, t_override: int | None = None
) -> np.ndarray:
    """Position-marginal outcome distribution after evolving one symbol."""
    kernel = WalkKernel(spec, plan)
    amps = kernel.prepare_raw(symbol)
    amps = kernel.evolve_raw(amps, t_override)
    state = PureState(amps, plan.n_pos, plan.n_coin)
    full = corestate.measure_distribution(state, "position_only")
    if spec.topology == "circle":
        return full[: spec.P]
    return full
