"""Independent dense-matrix reference for walk evolution.

Everything here is built from explicit projector sums and Kronecker
products, deliberately avoiding the package's index-arithmetic kernels, so
the two construction paths can disagree when either is wrong.

Register convention matches the package: full index = (position << n_coin)
| coin, qubit a of a register carries bit a of its value, so in a Kronecker
chain the position factor is leftmost and higher coin qubits sit left of
lower ones.
"""

import numpy as np

KET = [np.array([[1.0], [0.0]], dtype=complex), np.array([[0.0], [1.0]], dtype=complex)]
PROJ = [k @ k.conj().T for k in KET]
X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def rotation(phi, theta):
    return np.array(
        [
            [np.exp(1j * phi) * np.cos(theta), np.exp(1j * phi) * np.sin(theta)],
            [-np.exp(-1j * phi) * np.sin(theta), np.exp(-1j * phi) * np.cos(theta)],
        ]
    )


def pre_operator(kind):
    if kind == "I":
        return I2.copy()
    if kind == "Xtilde":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    return np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2)


def grover(n):
    return 2.0 / n * np.ones((n, n)) - np.eye(n)


def kron_chain(factors):
    out = np.array([[1.0]], dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def single_qubit_on(n_qubits, qubit, u):
    """u acting on one qubit of an n-qubit register (qubit 0 = LSB)."""
    factors = [I2] * n_qubits
    factors[n_qubits - 1 - qubit] = u  # leftmost factor = highest qubit
    return kron_chain(factors)


def circle_shift(P, n_pos):
    """Projector-sum shift: coin 1 moves +1 (mod P), coin 0 moves -1."""
    dim_pos = 1 << n_pos
    up = np.zeros((dim_pos, dim_pos), dtype=complex)
    down = np.zeros((dim_pos, dim_pos), dtype=complex)
    for x in range(P):
        up[(x + 1) % P, x] = 1.0
        down[(x - 1) % P, x] = 1.0
    for x in range(P, dim_pos):
        up[x, x] = 1.0
        down[x, x] = 1.0
    return np.kron(up, PROJ[1]) + np.kron(down, PROJ[0])


def flip_bit(n_pos, a):
    """X on position bit a as a Kronecker chain over position qubits."""
    factors = [I2] * n_pos
    factors[n_pos - 1 - a] = X
    return kron_chain(factors)


def tensor_shift(P):
    """Product over dimensions of (|1><1|_coin_a (x) X_pos_a + |0><0| (x) I)."""
    dim = 1 << (2 * P)
    out = np.eye(dim, dtype=complex)
    for a in range(P):
        on = np.kron(flip_bit(P, a), single_qubit_on(P, a, PROJ[1]))
        off = np.kron(np.eye(1 << P, dtype=complex), single_qubit_on(P, a, PROJ[0]))
        out = (on + off) @ out
    return out


def grover_shift(P, n_coin):
    """Sum over coin values: |a><a| (x) flip position bit a; identity on
    coin values >= P."""
    dim_c = 1 << n_coin
    dim_p = 1 << P
    out = np.zeros((dim_p * dim_c, dim_p * dim_c), dtype=complex)
    for a in range(dim_c):
        proj = np.zeros((dim_c, dim_c), dtype=complex)
        proj[a, a] = 1.0
        mover = flip_bit(P, a) if a < P else np.eye(dim_p, dtype=complex)
        out += np.kron(mover, proj)
    return out


def coin_on_register(n_pos, n_coin, coin_matrix):
    return np.kron(np.eye(1 << n_pos, dtype=complex), coin_matrix)


def f_on_register(n_pos, n_coin, kind):
    f = pre_operator(kind)
    return coin_on_register(n_pos, n_coin, kron_chain([f] * n_coin))


def step_unitary(topology, P, phi, theta, n_pos, n_coin):
    if topology == "circle":
        coin = coin_on_register(n_pos, 1, rotation(phi, theta))
        return circle_shift(P, n_pos) @ coin
    if topology == "hypercube_tensor":
        coin = coin_on_register(P, P, kron_chain([rotation(phi, theta)] * P))
        return tensor_shift(P) @ coin
    emb = np.eye(1 << n_coin, dtype=complex)
    emb[:P, :P] = grover(P)
    coin = coin_on_register(P, n_coin, emb)
    return grover_shift(P, n_coin) @ coin


def pipeline_unitary(topology, P, t, phi, theta, f_kind, f_policy, n_pos, n_coin):
    """Dense matrix of the full preparation pipeline U_eff (I (x) F)."""
    u = step_unitary(topology, P, phi, theta, n_pos, n_coin)
    f_full = f_on_register(n_pos, n_coin, f_kind)
    if f_policy == "before_each_step":
        step = u @ f_full
    else:
        step = u
    out = f_full.copy()
    for _ in range(t):
        out = step @ out
    return out
