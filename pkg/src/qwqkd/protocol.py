"""End-to-end Monte-Carlo execution of the one-way protocol.

Each iteration draws (w_A, i_A, w_B): the sender transmits the bare basis
state |i_A> on w_A = 0 or the walked state U^t (I (x) F)|i_A> on w_A = 1;
the receiver measures directly on w_B = 0 or undoes the walk (including the
coin un-preparation) before measuring on w_B = 1.  Rounds with w_A = w_B are
sifted; a seeded cut-and-choose subset of them feeds the disturbance
estimates Q_z / Q_w and the conditional entropies entering the key rate;
the remainder forms the raw key.

Randomness is a counter-based Philox stream per iteration, keyed
(seed, iteration index), so results are bit-identical for a given
(config, seed) regardless of execution order or worker count.  Within an
iteration the draw order is fixed: w_A, i_A, w_B, one uniform per noise
branch selection, one measurement uniform, and one estimation-split uniform
for sifted rounds.

Receiver readout is never post-selected: on w_B = 1 the position register is
read regardless of any residual coin value.  For the circle the outcome
domain is the full register (noise can push the position off the ring, which
always counts as a symbol error); for the hypercubes it is the position
value.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import noise as noisemod, security
from .errors import StatisticalInsufficiencyError, ValidationError
from .noise import NoiseModel
from .security import KeyRateReport
from .walkgraph import RegisterPlan, WalkKernel, WalkSpec, plan_registers, symbol_to_index

_BLOCK = 512


@dataclass(frozen=True)
class ProtocolConfig:
    """Configuration of one protocol run."""

    walk: WalkSpec
    N: int = 10_000
    noise: NoiseModel | None = None
    sample_fraction: float = 0.5
    seed: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("iteration count N must be >= 1")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValidationError("sample_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class IterationRecord:
    w_a: int
    w_b: int
    i_a: int
    j_b: int
    sifted: bool
    estimation_round: bool


@dataclass
class JointDistribution:
    """Alice-symbol x Bob-outcome counts for one basis.

    Bob's axis covers the full readout domain, which for the circle includes
    off-ring register values reachable only under noise; the first
    ``alphabet`` columns align with Alice's symbols.
    """

    basis: str
    counts: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            raise StatisticalInsufficiencyError(f"no samples in basis {self.basis}")
        return self.counts / total

    @property
    def qer(self) -> float:
        """1 - trace of the normalized diagonal (symbol-agreement part)."""
        n = self.normalized
        k = min(n.shape)
        return float(1.0 - np.trace(n[:k, :k]))


@dataclass
class ProtocolResult:
    sifted_count: int
    q_z: float
    q_w: float
    joint_z: JointDistribution
    joint_w: JointDistribution
    raw_key_a: list
    raw_key_b: list
    keyrate: KeyRateReport
    metadata: dict = field(default_factory=dict)


@dataclass
class ThresholdResult:
    """Bisection result for the maximally tolerated disturbance."""

    strength_star: float
    q_at_threshold: float
    r_bracket: tuple
    iterations_used: int
    no_threshold: bool = False
    warnings: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def iteration_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one iteration: Philox keyed (seed, index)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class ProtocolEngine:
    """Precomputed state shared by all iterations of one config.

    With no noise or ``channel_once`` placement the walk enters only through
    the dense pipeline matrix, so a round costs one gather, one noise layer,
    and (on w_B = 1) one mat-vec.  Step-attached placements fall back to
    step-through evolution and cost O(t) per walked round.
    """

    def __init__(self, cfg: ProtocolConfig):
        self.cfg = cfg
        self.spec = cfg.walk
        self.plan = plan_registers(cfg.walk)
        self.kernel = WalkKernel(self.spec, self.plan)
        self.alphabet = self.plan.alphabet_size
        self.symbol_index = np.array(
            [symbol_to_index(self.spec, self.plan, s) for s in range(self.alphabet)]
        )
        if self.spec.topology == "circle":
            self.bob_domain = self.plan.dim
        else:
            self.bob_domain = 1 << self.plan.n_pos
        self.kraus = cfg.noise.kraus() if cfg.noise is not None else None
        self.fast = cfg.noise is None or cfg.noise.placement == "channel_once"
        if self.fast:
            self.pipeline = self.kernel.dense_pipeline()
            self.pipeline_dag = np.ascontiguousarray(self.pipeline.conj().T)
        self._c_noiseless = None

    @property
    def c_noiseless(self) -> float:
        if self._c_noiseless is None:
            self._c_noiseless = security.security_parameter(
                security.overlap_matrix(self.spec)
            )
        return self._c_noiseless

    def outcome_symbol(self, full_index: int) -> int:
        if self.spec.topology == "circle":
            return full_index
        return full_index >> self.plan.n_coin

    # -- single-iteration paths -------------------------------------------

    def _draw_choices(self, rng):
        w_a = int(rng.integers(0, 2))
        i_a = int(rng.integers(0, self.alphabet))
        w_b = int(rng.integers(0, 2))
        return w_a, i_a, w_b

    def _sent_state(self, w_a: int, i_a: int) -> np.ndarray:
        idx = self.symbol_index[i_a]
        if w_a:
            return self.pipeline[:, idx].copy()
        amps = np.zeros(self.plan.dim, dtype=np.complex128)
        amps[idx] = 1.0
        return amps

    def _transmit_slow(self, w_a: int, i_a: int, w_b: int, rng) -> np.ndarray:
        spec, kernel, k = self.spec, self.kernel, self.kraus
        n = self.plan.n_qubits
        idx = self.symbol_index[i_a]
        amps = np.zeros(self.plan.dim, dtype=np.complex128)
        amps[idx] = 1.0
        if w_a:
            kernel.apply_f_raw(amps)
        noisemod.apply_layer_raw(amps, n, k, rng)
        if w_a:
            if self.cfg.noise.placement == "per_step":
                for _ in range(spec.t):
                    amps = kernel.step_raw(amps)
                    noisemod.apply_layer_raw(amps, n, k, rng)
            else:
                for _ in range(spec.t):
                    amps = noisemod._per_gate_sequence(kernel, amps, k, rng)
        if w_b:
            if self.cfg.noise.placement == "per_step":
                for i in range(spec.t):
                    amps = kernel.unstep_raw(amps)
                    if i == spec.t - 1:
                        kernel.apply_f_raw(amps, dagger=True)
                    noisemod.apply_layer_raw(amps, n, k, rng)
                if spec.t == 0:
                    kernel.apply_f_raw(amps, dagger=True)
            else:
                for _ in range(spec.t):
                    amps = noisemod._per_gate_sequence(kernel, amps, k, rng, inverse=True)
                kernel.apply_f_raw(amps, dagger=True)
        return amps

    def run_index(self, index: int) -> IterationRecord:
        """Execute one iteration on its derived stream."""
        rng = iteration_rng(self.cfg.seed, index)
        w_a, i_a, w_b = self._draw_choices(rng)
        if self.fast:
            amps = self._sent_state(w_a, i_a)
            if self.kraus is not None:
                uniforms = rng.random(self.plan.n_qubits)
                noisemod.apply_layer_raw(amps, self.plan.n_qubits, self.kraus,
                                         rng, uniforms=uniforms)
            if w_b:
                amps = self.pipeline_dag @ amps
        else:
            amps = self._transmit_slow(w_a, i_a, w_b, rng)
        probs = amps.real**2 + amps.imag**2
        total = probs.sum()
        u = rng.random()
        full = int(np.searchsorted(np.cumsum(probs), u * total, side="right"))
        full = min(full, self.plan.dim - 1)
        j_b = self.outcome_symbol(full)
        sifted = w_a == w_b
        estimation = bool(sifted and rng.random() < self.cfg.sample_fraction)
        return IterationRecord(w_a=w_a, w_b=w_b, i_a=i_a, j_b=j_b,
                               sifted=sifted, estimation_round=estimation)


def run_iteration(cfg: ProtocolConfig, index: int = 0,
                  engine: ProtocolEngine | None = None) -> IterationRecord:
    """Run a single protocol iteration on its derived random stream."""
    if engine is None:
        engine = ProtocolEngine(cfg)
    return engine.run_index(index)


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------


@dataclass
class _Partial:
    counts_z: np.ndarray
    counts_w: np.ndarray
    sifted: int = 0
    key_pairs: list = field(default_factory=list)

    def merge(self, other: "_Partial"):
        self.counts_z += other.counts_z
        self.counts_w += other.counts_w
        self.sifted += other.sifted
        self.key_pairs.extend(other.key_pairs)


def _run_range(engine: ProtocolEngine, start: int, stop: int) -> _Partial:
    part = _Partial(
        counts_z=np.zeros((engine.alphabet, engine.bob_domain), dtype=np.int64),
        counts_w=np.zeros((engine.alphabet, engine.bob_domain), dtype=np.int64),
    )
    if engine.fast:
        _run_range_fast(engine, start, stop, part)
        return part
    for index in range(start, stop):
        rec = engine.run_index(index)
        _tally(part, rec)
    return part


def _tally(part: _Partial, rec: IterationRecord):
    if not rec.sifted:
        return
    part.sifted += 1
    if rec.estimation_round:
        counts = part.counts_z if rec.w_a == 0 else part.counts_w
        counts[rec.i_a, rec.j_b] += 1
    else:
        part.key_pairs.append((rec.i_a, rec.j_b))


def _run_range_fast(engine: ProtocolEngine, start: int, stop: int, part: _Partial):
    """Vectorized fast path: per-iteration draws stay on their own streams,
    while the receiver-side inversions of a block share one matrix product."""
    dim = engine.plan.dim
    n_qubits = engine.plan.n_qubits
    cfg = engine.cfg
    for block_start in range(start, stop, _BLOCK):
        block = range(block_start, min(block_start + _BLOCK, stop))
        cols = np.zeros((dim, len(block)), dtype=np.complex128)
        u_noise = np.empty((len(block), n_qubits)) if engine.kraus else None
        meta = []
        for k, index in enumerate(block):
            rng = iteration_rng(cfg.seed, index)
            w_a, i_a, w_b = engine._draw_choices(rng)
            cols[:, k] = engine._sent_state(w_a, i_a)
            if engine.kraus is not None:
                u_noise[k] = rng.random(n_qubits)
            u_meas = rng.random()
            sifted = w_a == w_b
            u_est = rng.random() if sifted else 0.0
            meta.append((w_a, i_a, w_b, u_meas, sifted, u_est))
        if engine.kraus is not None:
            for q in range(n_qubits):
                noisemod._apply_trajectory_batch(cols, n_qubits, engine.kraus,
                                                 q, None, u=u_noise[:, q])
        invert_mask = np.array([m[2] == 1 for m in meta])
        if invert_mask.any():
            cols[:, invert_mask] = engine.pipeline_dag @ cols[:, invert_mask]
        probs = cols.real**2 + cols.imag**2
        cdf = np.cumsum(probs, axis=0)
        for k, (w_a, i_a, w_b, u_meas, sifted, u_est) in enumerate(meta):
            full = int(np.searchsorted(cdf[:, k], u_meas * cdf[-1, k], side="right"))
            full = min(full, dim - 1)
            rec = IterationRecord(
                w_a=w_a, w_b=w_b, i_a=i_a, j_b=engine.outcome_symbol(full),
                sifted=sifted,
                estimation_round=bool(sifted and u_est < cfg.sample_fraction),
            )
            _tally(part, rec)


_WORKER_ENGINE: ProtocolEngine | None = None


def _worker_init(cfg: ProtocolConfig):
    global _WORKER_ENGINE
    _WORKER_ENGINE = ProtocolEngine(cfg)


def _worker_run(bounds):
    return _run_range(_WORKER_ENGINE, *bounds)


def run_protocol(cfg: ProtocolConfig, workers: int = 1) -> ProtocolResult:
    """Run N iterations and assemble disturbance, entropy, and key-rate
    statistics from the estimation subset.

    Raises StatisticalInsufficiencyError when either basis collects fewer
    than 10 estimation rounds.
    """
    engine = ProtocolEngine(cfg)
    if workers > 1 and cfg.N >= 4 * _BLOCK:
        chunk = max(_BLOCK, math.ceil(cfg.N / workers))
        bounds = [(s, min(s + chunk, cfg.N)) for s in range(0, cfg.N, chunk)]
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(cfg,)) as pool:
            partials = list(pool.map(_worker_run, bounds))
        part = partials[0]
        for extra in partials[1:]:
            part.merge(extra)
    else:
        part = _run_range(engine, 0, cfg.N)

    nz, nw = int(part.counts_z.sum()), int(part.counts_w.sum())
    if nz < 10 or nw < 10:
        raise StatisticalInsufficiencyError(
            f"estimation rounds too few (z basis {nz}, walked basis {nw}; need >= 10 each)"
        )
    joint_z = JointDistribution("z", part.counts_z)
    joint_w = JointDistribution("w", part.counts_w)
    h_z = security.conditional_entropy(joint_z.normalized)
    h_w = security.conditional_entropy(joint_w.normalized)
    keyrate = KeyRateReport.from_entropies(engine.c_noiseless, h_z, h_w)
    raw_a = [a for a, _ in part.key_pairs]
    raw_b = [b for _, b in part.key_pairs]
    meta = {
        "N": cfg.N,
        "seed": cfg.seed,
        "sample_fraction": cfg.sample_fraction,
        "estimation_rounds_z": nz,
        "estimation_rounds_w": nw,
        "noise": cfg.noise.describe() if cfg.noise else None,
    }
    return ProtocolResult(
        sifted_count=part.sifted,
        q_z=joint_z.qer,
        q_w=joint_w.qer,
        joint_z=joint_z,
        joint_w=joint_w,
        raw_key_a=raw_a,
        raw_key_b=raw_b,
        keyrate=keyrate,
        metadata=meta,
    )


def find_threshold(cfg: ProtocolConfig, tolerance: float = 0.01,
                   workers: int = 1, final_n_factor: int = 4,
                   monotonicity_slack: float = 0.05) -> ThresholdResult:
    """Bisect the noise strength_scale for the r = 0 crossing and report the
    z-basis disturbance there.

    Probes run at cfg.N iterations with a common master seed across probes
    (common random numbers); the disturbance at the located threshold is
    re-estimated at ``final_n_factor * N`` iterations for a tighter readout.
    A ``no_threshold`` result is returned when r stays positive at full
    strength.  Probes that increase r with strength beyond
    ``monotonicity_slack`` bits attach a diagnostic warning.
    """
    if cfg.noise is None:
        raise ValidationError("find_threshold needs a noise model in the config")
    if not 0 < tolerance < 1:
        raise ValidationError("tolerance must lie in (0, 1)")
    engine_probe = ProtocolEngine(replace(cfg, noise=cfg.noise.with_scale(0.0)))
    c = engine_probe.c_noiseless
    if c >= 1.0 - 1e-12:
        raise ValidationError(
            f"noiseless security parameter c={c} leaves no positive key rate"
        )
    iterations = 0
    probes = []

    def probe(s: float, n_factor: int = 1):
        nonlocal iterations
        run_cfg = replace(cfg, noise=cfg.noise.with_scale(s), N=cfg.N * n_factor)
        res = run_protocol(run_cfg, workers=workers)
        iterations += run_cfg.N
        probes.append({"strength": s, "r": res.keyrate.r, "q_z": res.q_z})
        return res

    res_hi = probe(1.0)
    meta = {"noise": cfg.noise.describe(), "walk_t": cfg.walk.t,
            "c_noiseless": c, "tolerance": tolerance}
    if res_hi.keyrate.r > 0:
        return ThresholdResult(
            strength_star=1.0, q_at_threshold=res_hi.q_z,
            r_bracket=(res_hi.keyrate.r, float(np.log2(1.0 / c))),
            iterations_used=iterations, no_threshold=True,
            probes=probes, metadata=meta,
        )
    lo, hi = 0.0, 1.0
    r_lo, r_hi = float(np.log2(1.0 / c)), res_hi.keyrate.r
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        r_mid = probe(mid).keyrate.r
        if r_mid > 0:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    star = 0.5 * (lo + hi)
    final = probe(star, n_factor=final_n_factor)
    warnings = []
    ordered = sorted(probes, key=lambda p: p["strength"])
    for a, b in zip(ordered, ordered[1:]):
        if b["r"] > a["r"] + monotonicity_slack:
            warnings.append(
                "non-monotone rate beyond Monte-Carlo slack: "
                f"r({a['strength']:.4f})={a['r']:.4f} < r({b['strength']:.4f})={b['r']:.4f}"
            )
    return ThresholdResult(
        strength_star=star, q_at_threshold=final.q_z,
        r_bracket=(r_hi, r_lo), iterations_used=iterations,
        warnings=warnings, probes=probes, metadata=meta,
    )
