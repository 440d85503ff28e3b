"""Command line interface.

Four subcommands over one config mechanism:

  classify   exponent report and regime verdict (no simulation)
  constants  renormalization constants over a cutoff ladder
  detect     the full ensemble detection experiment
  besov      block-norm regularity estimation on ensemble fields

--config takes a preset name or a path to a JSON file with the same
schema; repeatable --set key.path=value overrides single entries (values
are parsed as JSON when possible, kept as strings otherwise).

Every output file embeds a manifest hash: a digest of the resolved
config, seed, command, and package version.  Wall-clock data lives only
in manifest.json's "timing" section, so all other bytes are reproducible
run to run and across worker counts.

Exit codes for detect: 0 when the final separation reaches the
threshold, 2 when the run was valid but inconclusive, 3 when the model
is outside the detector's scope (wrong regime, or not simulable).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from copy import deepcopy
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .besov import default_fit_blocks, estimate_regularity, lacunary_field
from .dynamics import SimConfig, simulate_ensemble
from .detector import choose_detector_spec, run_experiment
from .fourier import SpectralField
from .model import ModelParams
from .presets import PRESETS, preset_config
from .renorm import (
    classify_regime,
    divergence_rate,
    exponent_report,
    growth_rate_fit,
    renorm_constants,
)

DEFAULTS = {
    "model": {},
    "sim": {
        "N": 4096,
        "dt": 0.01,
        "t_burn": None,
        "u_time": 1.0,
        "scheme": "heun",
        "blowup_threshold": 1e6,
        "grid_size": None,
    },
    "detector": {
        "epsilon": 0.05,
        "N_grid": [64, 128, 256, 512, 1024, 2048, 4096],
        "replicas": 200,
        "threshold": 5.0,
    },
    "constants": {
        "N_values": [4, 8, 16, 32],
        "alpha": None,
        "method": "auto",
        "crosscheck": False,
    },
    "besov": {
        "replicas": 100,
        "N": 1024,
        "field": "z",
        "alpha": 0.3,
        "p": "inf",
        "fit_min": None,
        "fit_max": None,
    },
}


# ---------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------


def _merge(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def _apply_override(cfg: dict, item: str) -> None:
    key, sep, raw = item.partition("=")
    if not sep:
        raise ValueError(f"--set expects key.path=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ValueError(f"--set path {key!r} descends into a non-dict")
    node[parts[-1]] = value


def resolve_config(source: str, overrides) -> dict:
    cfg = deepcopy(DEFAULTS)
    if source in PRESETS:
        _merge(cfg, preset_config(source))
    else:
        path = Path(source)
        if not path.exists():
            raise ValueError(
                f"--config {source!r} is neither a preset "
                f"({', '.join(sorted(PRESETS))}) nor a file"
            )
        _merge(cfg, json.loads(path.read_text()))
    for item in overrides or []:
        _apply_override(cfg, item)
    return cfg


def _model_from(cfg: dict) -> ModelParams:
    model = cfg.get("model") or {}
    if not model:
        raise ValueError("config has no model section; start from a preset")
    return ModelParams.from_dict(model)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def manifest_hash(command: str, cfg: dict, seed: int) -> str:
    digest_input = canonical_json(
        {"command": command, "config": cfg, "seed": seed, "version": __version__}
    )
    return hashlib.sha256(digest_input.encode("utf-8")).hexdigest()


class OutputWriter:
    """Collects output files, then writes them (plus the manifest) at
    once; printing works with or without an output directory."""

    def __init__(self, command: str, cfg: dict, seed: int, workers: int, out):
        self.command = command
        self.cfg = cfg
        self.seed = seed
        self.workers = workers
        self.out = Path(out) if out else None
        self.hash = manifest_hash(command, cfg, seed)
        self.started = datetime.now(timezone.utc).isoformat()
        self.t0 = time.monotonic()
        self.files = {}

    def add_json(self, name: str, payload: dict) -> None:
        payload = dict(payload)
        payload["manifest_hash"] = self.hash
        self.files[name] = json.dumps(
            _jsonable(payload), sort_keys=True, indent=2
        ) + "\n"

    def add_csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(list(header) + ["manifest_hash"])
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row] + [self.hash])
        self.files[name] = buf.getvalue()

    def flush(self) -> None:
        if self.out is None:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (self.out / name).write_text(text, encoding="utf-8")
        manifest = {
            "command": self.command,
            "config": _jsonable(self.cfg),
            "seed": self.seed,
            "version": __version__,
            "manifest_hash": self.hash,
            "timing": {
                "started_utc": self.started,
                "runtime_ms": round(1000.0 * (time.monotonic() - self.t0), 3),
                "workers": self.workers,
            },
        }
        (self.out / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


# ---------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------


def cmd_classify(args, cfg: dict, writer: OutputWriter) -> int:
    params = _model_from(cfg)
    verdict = classify_regime(params)
    rep = verdict.report
    payload = {
        "regime": verdict.regime.value,
        "simulable": params.simulable,
        "exponents": {
            "A": rep.A,
            "alpha0": rep.alpha0,
            "delta_slope": rep.delta_slope,
            "delta_intercept": rep.delta_intercept,
            "w43_ok": list(rep.w43_ok),
            "subcritical_first": rep.subcritical_first,
            "subcritical_second": rep.subcritical_second,
            "singular_condition": rep.singular_condition,
        },
    }
    writer.add_json("classify.json", payload)
    print(f"regime: {verdict.regime.value}")
    print(
        f"A = {rep.A:.6g}, alpha0 = {rep.alpha0:.6g}, "
        f"delta(alpha) = {rep.delta_slope:.6g} alpha + {rep.delta_intercept:.6g}"
    )
    print(f"singular condition: {rep.singular_condition}; simulable: {params.simulable}")
    return 0


def cmd_constants(args, cfg: dict, writer: OutputWriter) -> int:
    params = _model_from(cfg)
    section = cfg["constants"]
    alpha = section["alpha"]
    if alpha is None:
        alpha = exponent_report(params).alpha0
    alpha = float(alpha)
    N_values = [int(N) for N in section["N_values"]]
    rows = []
    crosscheck = bool(section["crosscheck"])
    max_discrepancy = 0.0
    for N in N_values:
        cs = renorm_constants(params, N, alpha, method=section["method"])
        rows.append((N, alpha, cs.c1, cs.c2, cs.method))
        print(f"N={N:>6d}  c1={cs.c1!r}  c2={cs.c2!r}  [{cs.method}]")
        if crosscheck:
            brute = renorm_constants(params, N, alpha, method="brute")
            fast = renorm_constants(params, N, alpha, method="quadrature-convolution")
            rel = abs(brute.c2 - fast.c2) / max(abs(brute.c2), 1e-300)
            max_discrepancy = max(max_discrepancy, rel)
    if crosscheck:
        print(f"max relative c2 discrepancy (brute vs quadrature): {max_discrepancy:.3e}")
    delta = divergence_rate(params, alpha)
    fit = None
    if len(rows) >= 4:
        try:
            g = growth_rate_fit(N_values, [r[3] for r in rows], max(delta, 0.0))
            fit = {
                "mode": g.mode,
                "slope": g.slope,
                "intercept": g.intercept,
                "target": g.target,
                "rel_deviation": g.rel_deviation,
                "r_squared": g.r_squared,
            }
        except ValueError:
            fit = None
    writer.add_csv("constants.csv", ["N", "alpha", "c1", "c2", "method"], rows)
    writer.add_json(
        "constants.json",
        {
            "alpha": alpha,
            "delta": delta,
            "rows": [
                {"N": r[0], "c1": r[2], "c2": r[3], "method": r[4]} for r in rows
            ],
            "fit": fit,
            "crosscheck_max_rel": max_discrepancy if crosscheck else None,
        },
    )
    return 0


def cmd_detect(args, cfg: dict, writer: OutputWriter) -> int:
    params = _model_from(cfg)
    if not params.simulable:
        print("model is not simulable at this scale; detect refused", file=sys.stderr)
        return 3
    det = cfg["detector"]
    try:
        spec = choose_detector_spec(
            params, epsilon=float(det["epsilon"]), N_grid=det["N_grid"]
        )
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 3

    sim_section = cfg["sim"]
    N_sim = max(int(sim_section["N"]), max(spec.N_grid))
    sim = SimConfig(
        params=params,
        N=N_sim,
        dt=float(sim_section["dt"]),
        t_burn=sim_section["t_burn"],
        u_time=float(sim_section["u_time"]),
        master_seed=int(args.seed),
        scheme=sim_section["scheme"],
        blowup_threshold=float(sim_section["blowup_threshold"]),
        grid_size=sim_section["grid_size"],
    )
    replicas = int(det["replicas"])
    null = getattr(args, "null", None)

    ens = simulate_ensemble(
        sim,
        replicas,
        compute_u=True,
        forcing="zero" if null == "zero" else "wick",
        workers=args.workers,
    )
    u_coeffs = ens.u_coeffs
    if null == "independent":
        twin = SimConfig(
            params=params,
            N=N_sim,
            dt=sim.dt,
            t_burn=sim.t_burn,
            u_time=sim.u_time,
            master_seed=int(args.seed) + 1,
            scheme=sim.scheme,
            blowup_threshold=sim.blowup_threshold,
            grid_size=sim.grid_size,
        )
        ens2 = simulate_ensemble(
            twin, replicas, compute_u=False, workers=args.workers
        )
        u_coeffs = ens2.z_coeffs

    result = run_experiment(spec, ens.z_coeffs, ens.lattice, u_coeffs=u_coeffs)
    z_t, u_t = result.trace("Z"), result.trace("u")
    threshold = float(det["threshold"])

    payload = {
        "spec": {
            "alpha": spec.alpha,
            "gamma": spec.gamma,
            "normalization": spec.normalization,
            "N_grid": list(spec.N_grid),
            "epsilon": spec.epsilon,
        },
        "null": null,
        "replicas": replicas,
        "sim": {"N": N_sim, "dt": sim.dt, "u_time": sim.u_time, "scheme": sim.scheme},
        "constants": [
            {"N": c.N, "c1": c.c1, "c2": c.c2, "method": c.method}
            for c in result.constants
        ],
        "traces": {
            label: {
                "median_abs": t.median_abs,
                "iqr_abs": t.iqr_abs,
                "median_signed": t.median_signed,
                "strictly_increasing": t.strictly_increasing,
                "strictly_decreasing": t.strictly_decreasing,
                "trend": {
                    "direction": t.trend.direction,
                    "s": t.trend.s,
                    "p_value": t.trend.p_value,
                },
            }
            for label, t in result.traces.items()
        },
        "separation": result.separation,
        "threshold": threshold,
    }
    writer.add_json("detect.json", payload)
    writer.add_csv(
        "detect.csv",
        ["N", "c1", "c2", "median_abs_Z", "iqr_Z", "median_abs_u", "iqr_u"],
        [
            (
                N,
                result.constants[i].c1,
                result.constants[i].c2,
                float(z_t.median_abs[i]),
                float(z_t.iqr_abs[i]),
                float(u_t.median_abs[i]),
                float(u_t.iqr_abs[i]),
            )
            for i, N in enumerate(spec.N_grid)
        ],
    )
    for i, N in enumerate(spec.N_grid):
        print(
            f"N={N:>6d}  |Z~| median={z_t.median_abs[i]:.6g}  "
            f"|u~| median={u_t.median_abs[i]:.6g}"
        )
    sep = result.separation
    verdict = "detected" if sep is not None and sep >= threshold else "inconclusive"
    print(f"separation at N={spec.N_grid[-1]}: {sep:.4g} (threshold {threshold:g}) -> {verdict}")
    return 0 if verdict == "detected" else 2


def cmd_besov(args, cfg: dict, writer: OutputWriter) -> int:
    params = _model_from(cfg)
    section = cfg["besov"]
    field = section["field"]
    if field not in ("z", "y", "u", "synthetic"):
        raise ValueError(f"besov field must be z, y, u, or synthetic, got {field!r}")
    if field in ("y", "u") and not params.simulable:
        print("model is not simulable at this scale", file=sys.stderr)
        return 3
    N = int(section["N"])
    if field == "synthetic":
        samples = [lacunary_field(float(section["alpha"]), N)]
    else:
        sim_section = cfg["sim"]
        sim = SimConfig(
            params=params,
            N=N,
            dt=float(sim_section["dt"]),
            t_burn=sim_section["t_burn"],
            u_time=float(sim_section["u_time"]),
            master_seed=int(args.seed),
            scheme=sim_section["scheme"],
            blowup_threshold=float(sim_section["blowup_threshold"]),
            grid_size=sim_section["grid_size"],
        )
        ens = simulate_ensemble(
            sim,
            int(section["replicas"]),
            compute_u=(field == "u"),
            compute_y=(field == "y"),
            workers=args.workers,
        )
        coeffs = {"z": ens.z_coeffs, "y": ens.y_coeffs, "u": ens.u_coeffs}[field]
        samples = [SpectralField(ens.lattice, row) for row in coeffs]

    blocks = default_fit_blocks(N)
    lo = section["fit_min"]
    hi = section["fit_max"]
    if lo is not None or hi is not None:
        blocks = tuple(
            m
            for m in blocks
            if (lo is None or m >= int(lo)) and (hi is None or m <= int(hi))
        )
    p_raw = section["p"]
    p = math.inf if p_raw in (None, "inf") else float(p_raw)
    fit = estimate_regularity(samples, fit_range=blocks, p=p)

    report = exponent_report(params)
    reference = {
        "z": 0.5 * (params.sigma - params.d),
        "y": report.A - params.n0 + params.sigma,
    }
    if field == "synthetic":
        reference["synthetic"] = float(section["alpha"])
    payload = {
        "field": field,
        "N": N,
        "replicas": len(samples),
        "alpha_hat": fit.alpha_hat,
        "band_90": [fit.band_lo, fit.band_hi],
        "fit_blocks": list(fit.fit_blocks),
        "block_means": fit.block_means,
        "reference_exponents": reference,
    }
    writer.add_json("besov.json", payload)
    print(
        f"field {field}: alpha_hat = {fit.alpha_hat:.4f} "
        f"(90% band [{fit.band_lo:.4f}, {fit.band_hi:.4f}]) over blocks {list(fit.fit_blocks)}"
    )
    return 0


# ---------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wickstat",
        description="Spectral simulation and singularity detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="preset name or JSON path")
        p.add_argument(
            "--set",
            action="append",
            dest="overrides",
            metavar="KEY=VALUE",
            help="override a config entry (dotted path, JSON value)",
        )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument(
            "--workers",
            type=int,
            default=None,
            help="process count (default: WICKSTAT_WORKERS or 1)",
        )
        p.add_argument("--out", default=None, help="directory for output files")

    p = sub.add_parser("classify", help="regime and exponents")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("constants", help="renormalization constants")
    common(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("detect", help="ensemble detection experiment")
    common(p)
    p.add_argument(
        "--null",
        choices=["zero", "independent"],
        default=None,
        help="run a null experiment instead of the nonlinear dynamics",
    )
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("besov", help="regularity estimation")
    common(p)
    p.set_defaults(func=cmd_besov)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is None:
        args.workers = int(os.environ.get("WICKSTAT_WORKERS", "1"))
    try:
        cfg = resolve_config(args.config, args.overrides)
        writer = OutputWriter(args.command, cfg, args.seed, args.workers, args.out)
        code = args.func(args, cfg, writer)
        writer.flush()
        return code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
