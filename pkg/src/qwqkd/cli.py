"""Command-line front end.

Commands
--------
walk-dist   position distribution of one evolved symbol (CSV)
sweep-c     c(t) sweep for one P (CSV) or a P-list summary (CSV)
protocol    one Monte-Carlo protocol run (JSON)
threshold   tolerated-disturbance search (JSON; CSV across a P-list)
optimize    coin-parameter grid search (CSV), optionally chained threshold
rerun       re-execute a command from its manifest

Every command writes a ``<out>.manifest.json`` sidecar holding the fully
resolved configuration, the seed, the tool version, and the wall-clock
duration; result files contain no timing, so re-running a manifest
reproduces them byte-identically.

Angles are accepted only as rational multiples of pi (``0.3pi``, ``pi/4``,
``3pi/10``, ``0``) to keep manifests drift-free.  A ``--config`` file with
``key = value`` lines (long option names) supplies defaults; explicit flags
override it.  Exit codes: 0 ok, 2 usage/validation, 3 statistical
insufficiency, 4 resource cap.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from pathlib import Path

from . import __version__, security
from .coinops import CoinSpec
from .errors import ResourceCapError, StatisticalInsufficiencyError, ValidationError
from .noise import NoiseModel
from .optimizer import GridSpec, grid_search
from .protocol import ProtocolConfig, find_threshold, run_protocol
from .walkgraph import WalkSpec, plan_registers, position_distribution

_ANGLE_RE = re.compile(r"^(-?)(?:(\d+(?:\.\d+)?)\s*)?pi(?:/(\d+(?:\.\d+)?))?$")


def parse_angle(text: str) -> float:
    """Parse an angle given as a rational multiple of pi ('0.3pi', 'pi/4',
    '3pi/10', '0')."""
    s = text.strip().lower().replace(" ", "")
    if s in ("0", "-0", "0.0"):
        return 0.0
    m = _ANGLE_RE.match(s)
    if not m:
        raise ValidationError(
            f"angle {text!r} must be a rational multiple of pi, e.g. 0.3pi or pi/4"
        )
    sign = -1.0 if m.group(1) else 1.0
    num = float(m.group(2)) if m.group(2) else 1.0
    den = float(m.group(3)) if m.group(3) else 1.0
    return sign * num * math.pi / den


def fnum(x) -> str:
    """12-significant-digit decimal rendering used in every CSV."""
    return format(float(x), ".12g")


def write_csv(path: Path, header: list, rows, footer: str | None = None):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fnum(v) if isinstance(v, float) else str(v) for v in row))
    if footer is not None:
        lines.append(footer)
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def write_json(path: Path, payload: dict):
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n",
        encoding="ascii", newline="\n",
    )


def write_manifest(out_prefix: Path, command: str, flags: dict, seed: int,
                   outputs: list, started: float):
    manifest = {
        "command": command,
        "config": {k: str(v) for k, v in sorted(flags.items())},
        "duration_s": round(time.monotonic() - started, 3),
        "outputs": [str(p.name) for p in outputs],
        "seed": seed,
        "version": __version__,
    }
    write_json(Path(str(out_prefix) + ".manifest.json"), manifest)


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

TOPOLOGY_FLAGS = {
    "circle": "circle",
    "hypercube-tensor": "hypercube_tensor",
    "hypercube-grover": "hypercube_grover",
}


def _add_walk_args(p: argparse.ArgumentParser, with_t=True):
    p.add_argument("--topology", required=True, choices=sorted(TOPOLOGY_FLAGS))
    p.add_argument("-P", type=int, required=True, help="positions (circle) or dimension (hypercube)")
    if with_t:
        p.add_argument("-t", type=int, default=1, help="walk steps")
    p.add_argument("--phi", default="0", help="coin phase angle (multiple of pi)")
    p.add_argument("--theta", default="pi/4", help="coin rotation angle (multiple of pi)")
    p.add_argument("--f", default="I", choices=["I", "Xtilde", "Y"], dest="f_op",
                   help="coin preparation operator")
    p.add_argument("--f-policy", default="once_before_walk",
                   choices=["once_before_walk", "before_each_step"])
    p.add_argument("--allow-even-circle", action="store_true")


def _add_noise_args(p: argparse.ArgumentParser):
    p.add_argument("--noise", default="none",
                   choices=["none", "depolarizing", "amp-phase"])
    p.add_argument("--lam", type=float, default=1.0, help="depolarizing strength")
    p.add_argument("--a", type=float, default=1.0, help="amplitude damping probability")
    p.add_argument("--b", type=float, default=1.0, help="phase damping probability")
    p.add_argument("--p-a", type=float, default=0.0, help="excited-state population")
    p.add_argument("--placement", default="channel_once",
                   choices=["channel_once", "per_step", "per_gate"])
    p.add_argument("--strength", type=float, default=1.0,
                   help="strength_scale multiplying the channel parameters")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get("QWQKD_WORKERS", "1")))
    p.add_argument("--out", default=None, help="output path prefix")
    p.add_argument("--config", default=None, help="key = value defaults file")


def _walk_from_args(args, t=None) -> WalkSpec:
    coin = CoinSpec(phi=parse_angle(args.phi), theta=parse_angle(args.theta))
    return WalkSpec(
        topology=TOPOLOGY_FLAGS[args.topology],
        P=args.P,
        t=args.t if t is None else t,
        coin=coin,
        F=args.f_op,
        f_policy=args.f_policy,
        allow_even_circle=args.allow_even_circle,
    )


def _noise_from_args(args) -> NoiseModel | None:
    if args.noise == "none":
        return None
    if args.noise == "depolarizing":
        return NoiseModel(kind="depolarizing", lam=args.lam,
                          placement=args.placement, strength_scale=args.strength)
    return NoiseModel(kind="amp_phase_damping", a=args.a, b=args.b, p_a=args.p_a,
                      placement=args.placement, strength_scale=args.strength)


def _flags_dict(args, names) -> dict:
    out = {}
    for name in names:
        attr = FLAG_ATTR.get(name, name.replace("-", "_"))
        val = getattr(args, attr)
        if val is None or val is False:
            continue
        out[name] = val
    return out


def _out_prefix(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def _parse_p_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad P list {text!r}") from exc
    if not values:
        raise ValidationError("empty P list")
    return values


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

WALK_FLAG_NAMES = ["topology", "P", "t", "phi", "theta", "f", "f-policy",
                   "allow-even-circle"]
FLAG_ATTR = {"f": "f_op"}
NOISE_FLAG_NAMES = ["noise", "lam", "a", "b", "p-a", "placement", "strength"]


def cmd_walk_dist(args) -> int:
    started = time.monotonic()
    spec = _walk_from_args(args)
    plan = plan_registers(spec)
    dist = position_distribution(spec, plan, args.symbol)
    out = _out_prefix(args, "walk_dist")
    csv_path = Path(str(out) + ".csv")
    write_csv(csv_path, ["position", "probability"],
              [(i, float(p)) for i, p in enumerate(dist)])
    flags = _flags_dict(args, WALK_FLAG_NAMES) | {"symbol": args.symbol}
    write_manifest(out, "walk-dist", flags, args.seed, [csv_path], started)
    return 0


def cmd_sweep_c(args) -> int:
    started = time.monotonic()
    out = _out_prefix(args, "sweep_c")
    outputs = []
    if args.p_list:
        rows = []
        for P in _parse_p_list(args.p_list):
            spec = _walk_from_args(replace_namespace(args, P=P), t=1)
            res = security.sweep_c(spec, args.t_max, alphabet=args.alphabet)
            rows.append((P, float(res.c_min), res.t_opt))
        csv_path = Path(str(out) + ".csv")
        write_csv(csv_path, ["P", "c_min", "t_opt"], rows)
        outputs.append(csv_path)
    else:
        spec = _walk_from_args(args, t=1)
        res = security.sweep_c(spec, args.t_max, alphabet=args.alphabet)
        csv_path = Path(str(out) + ".csv")
        write_csv(csv_path, ["t", "c"],
                  [(int(t), float(c)) for t, c in zip(res.t_values, res.c_values)],
                  footer=f"# t_opt={res.t_opt},c_min={fnum(res.c_min)}")
        outputs.append(csv_path)
    flags = _flags_dict(args, [n for n in WALK_FLAG_NAMES if n != "t"])
    flags |= _flags_dict(args, ["t-max", "alphabet", "p-list"])
    write_manifest(out, "sweep-c", flags, args.seed, outputs, started)
    return 0


def replace_namespace(args, **kw):
    ns = argparse.Namespace(**vars(args))
    for k, v in kw.items():
        setattr(ns, k, v)
    return ns


def _protocol_config(args) -> ProtocolConfig:
    return ProtocolConfig(
        walk=_walk_from_args(args),
        N=args.N,
        noise=_noise_from_args(args),
        sample_fraction=args.sample_fraction,
        seed=args.seed,
    )


def cmd_protocol(args) -> int:
    started = time.monotonic()
    cfg = _protocol_config(args)
    res = run_protocol(cfg, workers=args.workers)
    out = _out_prefix(args, "protocol")
    payload = {
        "q_z": res.q_z,
        "q_w": res.q_w,
        "r": res.keyrate.r,
        "c": res.keyrate.c,
        "h_z": res.keyrate.h_z,
        "h_w": res.keyrate.h_w,
        "sifted_count": res.sifted_count,
        "key_length": len(res.raw_key_a),
        "keys_match": res.raw_key_a == res.raw_key_b,
        "settings": res.metadata,
    }
    json_path = Path(str(out) + ".json")
    write_json(json_path, payload)
    flags = _flags_dict(args, WALK_FLAG_NAMES + NOISE_FLAG_NAMES + ["N", "sample-fraction"])
    write_manifest(out, "protocol", flags, args.seed, [json_path], started)
    return 0


def _threshold_payload(thr) -> dict:
    return {
        "q_at_threshold": thr.q_at_threshold,
        "strength_star": thr.strength_star,
        "r_bracket": list(thr.r_bracket),
        "iterations_used": thr.iterations_used,
        "no_threshold": thr.no_threshold,
        "warnings": thr.warnings,
        "probes": thr.probes,
        "settings": thr.metadata,
    }


def cmd_threshold(args) -> int:
    started = time.monotonic()
    if args.noise == "none":
        raise ValidationError("threshold search needs --noise depolarizing|amp-phase")
    out = _out_prefix(args, "threshold")
    outputs = []
    if args.p_list:
        rows = []
        for P in _parse_p_list(args.p_list):
            sub = replace_namespace(args, P=P)
            if args.t_from_sweep:
                sweep = security.sweep_c(_walk_from_args(sub, t=1), args.t_max)
                sub = replace_namespace(sub, t=sweep.t_opt)
            thr = find_threshold(_protocol_config(sub), tolerance=args.tolerance,
                                 workers=args.workers,
                                 final_n_factor=args.final_n_factor)
            rows.append((P, float(thr.q_at_threshold), float(thr.strength_star),
                         float(thr.r_bracket[0]), float(thr.r_bracket[1])))
        csv_path = Path(str(out) + ".csv")
        write_csv(csv_path, ["P", "q_at_threshold", "strength_star", "r_low", "r_high"], rows)
        outputs.append(csv_path)
    else:
        sub = args
        if args.t_from_sweep:
            sweep = security.sweep_c(_walk_from_args(args, t=1), args.t_max)
            sub = replace_namespace(args, t=sweep.t_opt)
        thr = find_threshold(_protocol_config(sub), tolerance=args.tolerance,
                             workers=args.workers, final_n_factor=args.final_n_factor)
        json_path = Path(str(out) + ".json")
        write_json(json_path, _threshold_payload(thr))
        outputs.append(json_path)
    flags = _flags_dict(args, WALK_FLAG_NAMES + NOISE_FLAG_NAMES +
                        ["N", "sample-fraction", "tolerance", "final-n-factor",
                         "p-list", "t-from-sweep", "t-max"])
    write_manifest(out, "threshold", flags, args.seed, outputs, started)
    return 0


def cmd_optimize(args) -> int:
    started = time.monotonic()
    ks = tuple(int(k) for k in args.ks.split(",")) if args.ks else tuple(range(11))
    f_choices = tuple(args.f_choices.split(",")) if args.f_choices else ("I", "Xtilde", "Y")
    g = GridSpec(topology=TOPOLOGY_FLAGS[args.topology], P=args.P,
                 F_choices=f_choices, ks=ks, t_max=args.t_max)
    grid = grid_search(g, workers=args.workers)
    out = _out_prefix(args, "optimize")
    csv_path = Path(str(out) + ".csv")
    rows = [(e.F, fnum(e.k_phi / 10.0), fnum(e.k_theta / 10.0), float(e.c_min), e.t_opt)
            for e in grid.table]
    write_csv(csv_path, ["F", "phi_over_pi", "theta_over_pi", "c_min", "t_opt"], rows)
    outputs = [csv_path]
    if args.with_threshold:
        if args.noise == "none":
            raise ValidationError("--with-threshold needs --noise depolarizing|amp-phase")
        best = grid.best
        walk = WalkSpec(topology=g.topology, P=g.P, t=best.t_opt,
                        coin=CoinSpec(phi=best.phi, theta=best.theta), F=best.F)
        cfg = ProtocolConfig(walk=walk, N=args.N, noise=_noise_from_args(args),
                             sample_fraction=args.sample_fraction, seed=args.seed)
        thr = find_threshold(cfg, tolerance=args.tolerance, workers=args.workers,
                             final_n_factor=args.final_n_factor)
        thr_path = Path(str(out) + ".threshold.json")
        write_json(thr_path, _threshold_payload(thr))
        outputs.append(thr_path)
    flags = _flags_dict(args, ["topology", "P", "t-max", "ks", "f-choices",
                               "with-threshold", "N", "sample-fraction",
                               "tolerance", "final-n-factor"] + NOISE_FLAG_NAMES)
    write_manifest(out, "optimize", flags, args.seed, outputs, started)
    return 0


def cmd_rerun(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    argv = [manifest["command"]]
    for key, val in manifest["config"].items():
        if val == "True":
            argv.append(f"--{key}")
        elif key == "P":
            argv.extend(["-P", val])
        elif key == "t":
            argv.extend(["-t", val])
        elif key == "N":
            argv.extend(["-N", val])
        elif key == "symbol":
            argv.extend(["--symbol", val])
        else:
            argv.append(f"--{key}={val}")
    argv.extend(["--seed", str(manifest["seed"])])
    if args.out:
        argv.extend(["--out", args.out])
    return main(argv)


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwqkd",
        description="Quantum-walk one-way QKD simulator and analysis toolkit",
    )
    parser.add_argument("--version", action="version", version=f"qwqkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("walk-dist", help="position distribution after a walk")
    _add_walk_args(p)
    p.add_argument("--symbol", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_walk_dist)

    p = sub.add_parser("sweep-c", help="security-parameter sweep over t")
    _add_walk_args(p, with_t=False)
    p.add_argument("--t-max", type=int, default=2000)
    p.add_argument("--alphabet", default="default",
                   choices=["default", "full_register", "position_marginal"])
    p.add_argument("--p-list", default=None,
                   help="comma-separated P values; emits a P,c_min,t_opt summary")
    _add_common(p)
    p.set_defaults(func=cmd_sweep_c, t=1)

    p = sub.add_parser("protocol", help="Monte-Carlo protocol run")
    _add_walk_args(p)
    _add_noise_args(p)
    p.add_argument("-N", type=int, default=10_000)
    p.add_argument("--sample-fraction", type=float, default=0.5)
    _add_common(p)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("threshold", help="maximally tolerated disturbance search")
    _add_walk_args(p)
    _add_noise_args(p)
    p.add_argument("-N", type=int, default=10_000)
    p.add_argument("--sample-fraction", type=float, default=0.5)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--final-n-factor", type=int, default=4)
    p.add_argument("--p-list", default=None,
                   help="comma-separated P values; emits a CSV summary")
    p.add_argument("--t-from-sweep", action="store_true",
                   help="pick t per P from a c(t) sweep instead of -t")
    p.add_argument("--t-max", type=int, default=2000,
                   help="sweep ceiling used with --t-from-sweep")
    _add_common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("optimize", help="coin-parameter grid search")
    p.add_argument("--topology", required=True, choices=sorted(TOPOLOGY_FLAGS))
    p.add_argument("-P", type=int, required=True)
    p.add_argument("--t-max", type=int, default=2000)
    p.add_argument("--ks", default=None,
                   help="comma-separated k indices of the k*pi/10 angle grid")
    p.add_argument("--f-choices", default=None, help="comma-separated subset of I,Xtilde,Y")
    p.add_argument("--with-threshold", action="store_true")
    _add_noise_args(p)
    p.add_argument("-N", type=int, default=10_000)
    p.add_argument("--sample-fraction", type=float, default=0.5)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--final-n-factor", type=int, default=4)
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("rerun", help="re-execute a command from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="new output prefix")
    p.set_defaults(func=cmd_rerun)

    return parser


def _expand_config(argv: list) -> list:
    """Insert key=value file entries as flags right after the subcommand;
    explicit flags appear later in argv, so they win."""
    if "--config" not in " ".join(argv):
        return argv
    out = list(argv)
    path = None
    for i, tok in enumerate(out):
        if tok == "--config" and i + 1 < len(out):
            path = out[i + 1]
            break
        if tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            break
    if path is None:
        return argv
    extra = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"bad config line {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if val == "true":
            extra.append(f"--{key}")
        elif key in ("P", "t", "N"):
            extra.extend([f"-{key}", val])
        else:
            extra.append(f"--{key}={val}")
    return [out[0]] + extra + out[1:]


def main(argv: list | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StatisticalInsufficiencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
