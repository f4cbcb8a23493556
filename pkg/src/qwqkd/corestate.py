"""Complex statevector and density-matrix engine.

Register layout
---------------
A register of ``n_pos`` position qubits and ``n_coin`` coin qubits is stored
as a single amplitude vector of length ``2**(n_pos + n_coin)``.  The position
register occupies the HIGH-order bits of the basis index and the coin
register the LOW-order bits::

    index = (position << n_coin) | coin

Within each register, bit ``a`` of the logical value lives on qubit ``a``
(bit 0 = least significant).  Globally, coin qubit ``a`` is qubit ``a`` and
position qubit ``a`` is qubit ``n_coin + a``.  All operators below use index
arithmetic on this layout; no ``2**n x 2**n`` matrices are materialized for
pure-state evolution.

Amplitudes are complex128 throughout: ~1.5e3 unitary steps accumulate
rounding around 1e-13, far below every tolerance used by callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QubitRangeError, ValidationError

UNITARITY_ATOL = 1e-10
KRAUS_ATOL = 1e-10


@dataclass
class PureState:
    """Pure state over the position (x) coin register.

    Plain value type: operations return fresh states and never share buffers,
    so instances may move freely between threads.
    """

    amplitudes: np.ndarray
    n_pos: int
    n_coin: int

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.dim,):
            raise ValidationError(
                f"amplitude vector has shape {self.amplitudes.shape}, "
                f"expected ({self.dim},) for {self.n_qubits} qubits"
            )

    @property
    def n_qubits(self) -> int:
        return self.n_pos + self.n_coin

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "PureState":
        return PureState(self.amplitudes.copy(), self.n_pos, self.n_coin)

    def split_index(self, index: int) -> tuple[int, int]:
        """Decompose a basis index into (position, coin)."""
        return index >> self.n_coin, index & ((1 << self.n_coin) - 1)


@dataclass
class DensityState:
    """Density matrix over ``n`` qubits.  Verification scale only (n <= 8)."""

    matrix: np.ndarray
    n: int

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        dim = 1 << self.n
        if self.matrix.shape != (dim, dim):
            raise ValidationError(
                f"density matrix has shape {self.matrix.shape}, expected ({dim}, {dim})"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


@dataclass(frozen=True)
class Outcome:
    """A computational-basis readout of the full register."""

    position: int
    coin: int
    full_index: int


def basis_state(n_pos: int, n_coin: int, index: int) -> PureState:
    """State with amplitude 1 at the given full-register basis index."""
    dim = 1 << (n_pos + n_coin)
    if not 0 <= index < dim:
        raise ValidationError(f"basis index {index} out of range for dim {dim}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return PureState(amps, n_pos, n_coin)


def is_unitary(u: np.ndarray, atol: float = UNITARITY_ATOL) -> bool:
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    eye = np.eye(u.shape[0])
    return bool(np.allclose(u.conj().T @ u, eye, atol=atol))


# ---------------------------------------------------------------------------
# Raw kernels.  ``amps`` is a C-contiguous complex128 array of shape (dim,)
# or (dim, batch); column b of a batched array is an independent state.
# The (dim, batch) case folds into the same reshape because the batch axis
# is contiguous with the low qubit block.
# ---------------------------------------------------------------------------


def _apply_u2_raw(amps: np.ndarray, n_qubits: int, qubit: int, u: np.ndarray) -> np.ndarray:
    """Apply a 2x2 operator to one qubit, in place.  Returns ``amps``."""
    batch = 1 if amps.ndim == 1 else amps.shape[1]
    low = (1 << qubit) * batch
    view = amps.reshape(-1, 2, low)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
    view[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1
    return amps

def _apply_coin_register_op_raw(amps: np.ndarray, n_coin: int, op: np.ndarray) -> np.ndarray:
    """Apply a dense operator on the whole coin register (the low ``n_coin``
    qubits), in place."""
    batch = 1 if amps.ndim == 1 else amps.shape[1]
    k = 1 << n_coin
    view = amps.reshape(-1, k, batch)
    np.einsum("ij,ajb->aib", op, view.copy(), out=view)
    return amps


def _apply_perm_raw(amps: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Relocate amplitudes by a precomputed gather index (``source[j]`` is the
    old index whose amplitude lands at ``j``).  Allocates the output."""
    return np.ascontiguousarray(amps[source])


def _probabilities_raw(amps: np.ndarray) -> np.ndarray:
    return (amps.real**2 + amps.imag**2)


# ---------------------------------------------------------------------------
# Public operations on PureState
# ---------------------------------------------------------------------------


def apply_single_qubit(state: PureState, qubit: int, u: np.ndarray) -> PureState:
    """Apply a single-qubit unitary to the given global qubit index.

    Raises ``ValidationError`` for a non-unitary matrix and
    ``QubitRangeError`` for an out-of-range qubit.
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2):
        raise ValidationError(f"expected a 2x2 matrix, got shape {u.shape}")
    if not is_unitary(u):
        raise ValidationError("matrix is not unitary within 1e-10")
    if not 0 <= qubit < state.n_qubits:
        raise QubitRangeError(
            f"qubit {qubit} out of range for a {state.n_qubits}-qubit register"
        )
    out = state.copy()
    _apply_u2_raw(out.amplitudes, out.n_qubits, qubit, u)
    return out


def permutation_source(perm: np.ndarray, dim: int) -> np.ndarray:
    """Validate a permutation (``i -> perm[i]``) and return its gather form.

    ``perm`` must be a bijection on ``range(dim)``; a partial mapping is
    expressed by listing the identity on untouched indices.
    """
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (dim,):
        raise ValidationError(f"permutation has shape {perm.shape}, expected ({dim},)")
    source = np.empty(dim, dtype=np.int64)
    seen = np.zeros(dim, dtype=bool)
    if perm.min() < 0 or perm.max() >= dim:
        raise ValidationError("permutation maps outside the index range")
    seen[perm] = True
    if not seen.all():
        raise ValidationError("mapping is not a bijection on the index set")
    source[perm] = np.arange(dim, dtype=np.int64)
    return source


def apply_permutation(state: PureState, perm: np.ndarray) -> PureState:
    """Relabel basis states: amplitude at ``perm[i]`` equals old amplitude
    at ``i``.  Lossless; the norm is preserved exactly."""
    source = permutation_source(perm, state.dim)
    return PureState(_apply_perm_raw(state.amplitudes, source), state.n_pos, state.n_coin)


def measure_distribution(state: PureState, marginal: str = "full") -> np.ndarray:
    """Computational-basis outcome probabilities.

    ``marginal='full'`` returns one probability per basis index;
    ``'position_only'`` sums over the coin register and returns one entry per
    position value.
    """
    norm = state.norm()
    if abs(norm - 1.0) > 1e-8:
        raise ValidationError(f"state norm {norm} is not 1 within 1e-8")
    probs = _probabilities_raw(state.amplitudes)
    if marginal == "full":
        return probs
    if marginal == "position_only":
        return probs.reshape(1 << state.n_pos, 1 << state.n_coin).sum(axis=1)
    raise ValidationError(f"unknown marginal {marginal!r}")


def sample_outcome(state: PureState, rng: np.random.Generator, marginal: str = "full") -> Outcome:
    """Draw one outcome from ``measure_distribution``.

    The full register is always sampled (its position marginal has exactly
    the ``position_only`` law), so the returned Outcome carries position,
    coin, and full index regardless of ``marginal``.  Deterministic given
    (state, generator state).
    """
    if marginal not in ("full", "position_only"):
        raise ValidationError(f"unknown marginal {marginal!r}")
    probs = measure_distribution(state, "full")
    index = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    index = min(index, state.dim - 1)
    position, coin = state.split_index(index)
    return Outcome(position=position, coin=coin, full_index=index)


# ---------------------------------------------------------------------------
# Density-matrix channel application (verification scale)
# ---------------------------------------------------------------------------


def _check_kraus_complete(kraus: list[np.ndarray], atol: float = KRAUS_ATOL):
    acc = np.zeros((2, 2), dtype=np.complex128)
    for k in kraus:
        k = np.asarray(k, dtype=np.complex128)
        if k.shape != (2, 2):
            raise ValidationError("Kraus operators must be 2x2")
        acc += k.conj().T @ k
    if not np.allclose(acc, np.eye(2), atol=atol):
        raise ValidationError("Kraus set is not complete: sum K^dag K != I")


def apply_channel_density(rho: DensityState, kraus: list[np.ndarray], qubit: int) -> DensityState:
    """Apply a single-qubit Kraus channel to one qubit of a density matrix:
    rho -> sum_k (K_k (x) I) rho (K_k (x) I)^dag.  Trace preserving for a
    complete Kraus set."""
    if not 0 <= qubit < rho.n:
        raise QubitRangeError(f"qubit {qubit} out of range for {rho.n} qubits")
    _check_kraus_complete(kraus)
    dim = rho.dim
    low = 1 << qubit
    out = np.zeros((dim, dim), dtype=np.complex128)
    for k in kraus:
        k = np.asarray(k, dtype=np.complex128)
        # Left multiply on the row index, right multiply on the column index.
        left = rho.matrix.reshape(-1, 2, low * dim)
        tmp = np.einsum("ij,ajb->aib", k, left).reshape(dim, dim)
        right = tmp.reshape(dim, -1, 2, low)
        out += np.einsum("ij,bajc->baic", k.conj(), right).reshape(dim, dim)
    return DensityState(out, rho.n)


def pure_to_density(state: PureState) -> DensityState:
    amps = state.amplitudes
    return DensityState(np.outer(amps, amps.conj()), state.n_qubits)


def density_distribution(rho: DensityState, n_coin: int = 0, marginal: str = "full") -> np.ndarray:
    """Diagonal of a density matrix as outcome probabilities, optionally
    marginalized over the low ``n_coin`` qubits."""
    probs = np.real(np.diag(rho.matrix)).copy()
    probs[probs < 0] = 0.0
    if marginal == "position_only":
        return probs.reshape(-1, 1 << n_coin).sum(axis=1)
    return probs
