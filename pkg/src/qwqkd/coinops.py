"""Coin and pre-walk operator construction.

Three operator families drive the walks: the generic two-level rotation
``rotation_matrix(phi, theta)``, the pre-walk coin preparations
``I / Xtilde / Y`` (``Xtilde`` is the Hadamard; ``Y`` is the displayed
matrix (1/sqrt2) [[1, 1], [i, -i]], i.e. a Hadamard followed by a phase
gate), and the n-dimensional Grover diffusion coin ``(2/n) J - I``.

Naming note: ``Xtilde`` and ``Y`` are coin-preparation operators, not the
Pauli matrices of the same letters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

PRE_OPERATORS = ("I", "Xtilde", "Y")
COIN_FLAVORS = ("rotation", "grover")


@dataclass(frozen=True)
class CoinSpec:
    """Coin choice for one walk.

    ``flavor='rotation'`` uses ``rotation_matrix(phi, theta)``;
    ``flavor='grover'`` ignores the angles and uses the Grover coin sized by
    the walk topology.
    """

    flavor: str = "rotation"
    phi: float = 0.0
    theta: float = math.pi / 4

    def __post_init__(self):
        if self.flavor not in COIN_FLAVORS:
            raise ValidationError(f"unknown coin flavor {self.flavor!r}")
        if not (math.isfinite(self.phi) and math.isfinite(self.theta)):
            raise ValidationError("coin angles must be finite")


def rotation_matrix(phi: float, theta: float) -> np.ndarray:
    """Generic coin rotation::

        [[ e^{i phi} cos(theta),  e^{i phi} sin(theta)],
         [-e^{-i phi} sin(theta), e^{-i phi} cos(theta)]]

    Unitary for all finite angles; reduces to the identity at (0, 0).
    """
    if not (math.isfinite(phi) and math.isfinite(theta)):
        raise ValidationError("angles must be finite")
    ep = np.exp(1j * phi)
    em = np.exp(-1j * phi)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[ep * c, ep * s], [-em * s, em * c]], dtype=np.complex128)


def pre_operator_matrix(kind: str) -> np.ndarray:
    """Matrix of a coin-preparation operator ``I``, ``Xtilde`` or ``Y``."""
    if kind == "I":
        return np.eye(2, dtype=np.complex128)
    if kind == "Xtilde":
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
    if kind == "Y":
        return np.array([[1, 1], [1j, -1j]], dtype=np.complex128) / math.sqrt(2)
    raise ValidationError(f"unknown pre-operator {kind!r}")


def grover_matrix(n: int) -> np.ndarray:
    """Grover diffusion coin (2/n) J_n - I_n.

    Real, symmetric, an involution, and row sums equal 1 exactly.
    """
    if n < 2:
        raise ValidationError(f"Grover coin needs dimension >= 2, got {n}")
    g = np.full((n, n), 2.0 / n)
    np.fill_diagonal(g, 2.0 / n - 1.0)
    return g
