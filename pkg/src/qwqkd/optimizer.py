"""Grid search over coin preparation and rotation angles to minimize c.

The grid is exhaustive over F in {I, Xtilde, Y} and angles phi, theta drawn
from multiples of pi/10 (k = 0..10 by default; a reduced k-subset gives a
smoke grid).  Every grid point runs an incremental c(t) sweep; results sort
by (c_min, t_opt, F, k_phi, k_theta) so re-runs are bit-identical.  Sweeps
are cached by (topology, P, F, k_phi, k_theta, t_max) so chained threshold
studies reuse them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import security
from .coinops import CoinSpec, PRE_OPERATORS
from .errors import ValidationError
from .noise import NoiseModel
from .protocol import ProtocolConfig, ThresholdResult, find_threshold
from .walkgraph import WalkSpec

DEFAULT_KS = tuple(range(11))


@dataclass(frozen=True)
class GridSpec:
    """Search space for one topology/P."""

    topology: str
    P: int
    F_choices: tuple = PRE_OPERATORS
    ks: tuple = DEFAULT_KS
    t_max: int = 2000

    def __post_init__(self):
        if not self.F_choices:
            raise ValidationError("F_choices must be non-empty")
        for f in self.F_choices:
            if f not in PRE_OPERATORS:
                raise ValidationError(f"unknown pre-operator {f!r}")
        if not self.ks:
            raise ValidationError("angle grid must be non-empty")
        if any(not 0 <= k <= 10 for k in self.ks):
            raise ValidationError("angle grid indices must lie in 0..10")
        if self.t_max < 1:
            raise ValidationError("t_max must be >= 1")

    def points(self):
        for f in self.F_choices:
            for k_phi in self.ks:
                for k_theta in self.ks:
                    yield (f, k_phi, k_theta)


@dataclass(frozen=True)
class GridEntry:
    F: str
    k_phi: int
    k_theta: int
    c_min: float
    t_opt: int

    @property
    def phi(self) -> float:
        return self.k_phi * math.pi / 10.0

    @property
    def theta(self) -> float:
        return self.k_theta * math.pi / 10.0


@dataclass
class GridResult:
    """Grid entries sorted ascending by (c_min, t_opt, F, k_phi, k_theta)."""

    spec: GridSpec
    table: list

    @property
    def best(self) -> GridEntry:
        return self.table[0]


def _walk_for_point(g: GridSpec, f: str, k_phi: int, k_theta: int) -> WalkSpec:
    coin = CoinSpec(phi=k_phi * math.pi / 10.0, theta=k_theta * math.pi / 10.0)
    return WalkSpec(topology=g.topology, P=g.P, t=1, coin=coin, F=f)


def _evaluate_point(args):
    g, point = args
    f, k_phi, k_theta = point
    res = security.sweep_c(_walk_for_point(g, f, k_phi, k_theta), g.t_max)
    return GridEntry(F=f, k_phi=k_phi, k_theta=k_theta,
                     c_min=res.c_min, t_opt=res.t_opt)


def grid_search(g: GridSpec, workers: int = 1, cache: dict | None = None) -> GridResult:
    """Sweep every grid point and rank by minimal c.

    ``cache`` maps (topology, P, F, k_phi, k_theta, t_max) -> GridEntry and
    is updated in place when provided.
    """
    points = list(g.points())
    entries: list[GridEntry | None] = [None] * len(points)
    todo = []
    for i, point in enumerate(points):
        key = (g.topology, g.P, *point, g.t_max)
        if cache is not None and key in cache:
            entries[i] = cache[key]
        else:
            todo.append((i, point))
    if todo:
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_evaluate_point, [(g, p) for _, p in todo]))
        else:
            results = [_evaluate_point((g, p)) for _, p in todo]
        for (i, point), entry in zip(todo, results):
            entries[i] = entry
            if cache is not None:
                cache[(g.topology, g.P, *point, g.t_max)] = entry
    order = sorted(entries, key=lambda e: (e.c_min, e.t_opt, e.F, e.k_phi, e.k_theta))
    return GridResult(spec=g, table=order)


def optimized_threshold(g: GridSpec, noise: NoiseModel, N: int = 10_000,
                        seed: int = 1, sample_fraction: float = 0.5,
                        tolerance: float = 0.01, workers: int = 1,
                        cache: dict | None = None) -> tuple[GridResult, ThresholdResult]:
    """Grid-search for minimal c, then locate the tolerated-disturbance
    threshold at the best setting."""
    grid = grid_search(g, workers=workers, cache=cache)
    best = grid.best
    walk = replace(_walk_for_point(g, best.F, best.k_phi, best.k_theta), t=best.t_opt)
    cfg = ProtocolConfig(walk=walk, N=N, noise=noise, seed=seed,
                         sample_fraction=sample_fraction)
    thr = find_threshold(cfg, tolerance=tolerance, workers=workers)
    return grid, thr
