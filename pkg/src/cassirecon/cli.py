"""Command-line surface: synth, simulate, reconstruct, evaluate, ablate, report.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical abort,
5 external-prior failure. Flags override config fields, which override
built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import fileio
from .bands import make_plan
from .config import RunConfig, apply_overrides, config_from_dict
from .core import CodedMask, Measurement
from .exceptions import (
    CassiReconError,
    ConfigError,
    DegeneratePixelError,
    DimensionMismatchError,
    ExternalPriorError,
    FormatError,
    MetricError,
    NumericalAbortError,
)
from .metrics import Region, evaluate_cubes
from .operator import CassiOperator, random_mask
from .priors import ExternalPrior, GaussianShrinkPrior, IdentityPrior, OraclePrior
from .report import (
    read_ablation_table,
    render_ablation,
    render_spectra,
    render_trace,
    write_ablation_table,
)
from .schedule import linear_schedule
from .solver import Trace, run_sampler
from .synthetic import smooth_cube

ABLATION_AXES = {
    "tStart": "t_start",
    "steps": "step_count",
    "lambda": "lam",
    "zeta": "zeta",
    "sc": "guidance_scale",
    "planKind": "plan_kind",
    "accelerate": "accelerate",
}


def _load_run_config(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {args.config}")
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
    doc = apply_overrides(doc, getattr(args, "set", None) or [])
    return config_from_dict(doc)


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"missing {what}: set it in the config or pass the flag")
    return value


def _parse_region(text: str | None) -> Region | None:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"region must be 'top,left,height,width', got {text!r}")
    try:
        top, left, height, width = (int(p) for p in parts)
        return Region(top, left, height, width)
    except ValueError as exc:
        raise ConfigError(f"bad region {text!r}: {exc}") from exc


def _load_mask(cfg: RunConfig, height: int, width: int) -> CodedMask:
    mc = cfg.operator.mask
    if mc.source == "file":
        return fileio.read_mask(_require(mc.path, "operator.mask.path"))
    if mc.source == "random":
        return random_mask(height, width, mc.seed, mc.density)
    raise ConfigError(f"unknown mask source {mc.source!r} (expected 'random' or 'file')")


def _build_prior(cfg: RunConfig, bands: int, wavelengths: np.ndarray):
    pc = cfg.prior
    if pc.kind == "identity":
        return IdentityPrior()
    if pc.kind == "gaussianShrink":
        return GaussianShrinkPrior(pc.strength)
    if pc.kind == "oracle":
        truth = fileio.read_cube(_require(pc.truth, "prior.truth path"))
        plan = make_plan(
            cfg.solver.plan_kind, bands, wavelengths, cfg.solver.anchors, cfg.solver.cutoff_nm
        )
        return OraclePrior(truth, plan)
    if pc.kind == "external":
        endpoint = _require(pc.endpoint, "prior.endpoint")
        prior = ExternalPrior(
            endpoint,
            steps=cfg.schedule.steps,
            beta_start=cfg.schedule.beta_start,
            beta_end=cfg.schedule.beta_end,
            max_concurrent=pc.max_concurrent,
        )
        prior.connect()
        return prior
    raise ConfigError(f"unknown prior kind {pc.kind!r}")


def _derive_bands(cfg: RunConfig, meas: Measurement, mask: CodedMask) -> int:
    if meas.height != mask.height:
        raise ConfigError(
            f"measurement height {meas.height} does not match mask height {mask.height}"
        )
    d = meas.shift_step
    if d == 0:
        if meas.width != mask.width:
            raise ConfigError(
                f"shift step 0 requires equal widths, got {meas.width} vs {mask.width}"
            )
        return cfg.operator.bands
    span = meas.width - mask.width
    if span < 0 or span % d != 0:
        raise ConfigError(
            f"measurement width {meas.width} is not mask width {mask.width} + d*(B-1) for d={d}"
        )
    return span // d + 1


def cmd_synth(args) -> int:
    cube = smooth_cube(
        args.height, args.width, args.bands, seed=args.seed, bumps=args.bumps
    )
    fileio.write_cube(cube, args.out)
    print(f"wrote {args.out} ({args.height}x{args.width}x{args.bands})")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    cube_path = args.cube or _require(cfg.paths.cube, "paths.cube")
    meas_path = args.out_meas or _require(cfg.paths.measurement, "paths.measurement")
    mask_path = args.out_mask or _require(cfg.paths.mask, "paths.mask")

    cube = fileio.read_cube(cube_path)
    mask = _load_mask(cfg, cube.height, cube.width)
    op = CassiOperator(mask, cfg.operator.shift_step, cube.bands)
    meas = op.simulate(cube, cfg.solver.sigma_n, cfg.solver.seed)
    fileio.write_measurement(meas, meas_path)
    fileio.write_mask(mask, mask_path)
    print(
        f"wrote {meas_path} ({meas.height}x{meas.width}, d={meas.shift_step}, "
        f"sigma_n={meas.noise_sigma}) and {mask_path}"
    )
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _load_run_config(args)
    meas_path = args.meas or _require(cfg.paths.measurement, "paths.measurement")
    mask_path = args.mask or _require(cfg.paths.mask, "paths.mask")
    out_path = args.out or _require(cfg.paths.output, "paths.output")
    trace_path = args.trace or cfg.paths.trace or (str(out_path) + ".trace.jsonl")

    meas = fileio.read_measurement(meas_path)
    mask = fileio.read_mask(mask_path)
    bands = _derive_bands(cfg, meas, mask)
    op = CassiOperator(mask, meas.shift_step, bands)
    wavelengths = cfg.wavelengths.resolve(bands)
    sched = linear_schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end)

    solver_cfg = cfg.solver
    if solver_cfg.sigma_n == 0.0 and meas.noise_sigma > 0.0:
        solver_cfg = dataclasses.replace(solver_cfg, sigma_n=meas.noise_sigma)

    reference = None
    ref_path = args.ref or cfg.paths.cube
    if ref_path and Path(ref_path).exists():
        reference = fileio.read_cube(ref_path)

    prior = _build_prior(cfg, bands, wavelengths)
    try:
        recon, trace = run_sampler(
            solver_cfg, sched, op, meas, prior, reference=reference, wavelengths=wavelengths
        )
    finally:
        prior.close()

    fileio.write_cube(recon, out_path)
    trace.write_jsonl(trace_path)
    last = trace.records[-1] if trace.records else None
    tail = f", final residual {last.residual:.6g}" if last else ""
    print(f"wrote {out_path} and {trace_path}{tail}")
    return 0


def cmd_evaluate(args) -> int:
    recon = fileio.read_cube(args.recon)
    ref = fileio.read_cube(args.ref)
    region = _parse_region(args.region)
    report = evaluate_cubes(recon, ref, peak=args.peak, region=region)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    if args.axis not in ABLATION_AXES:
        raise ConfigError(
            f"unknown ablation axis {args.axis!r} (expected one of {sorted(ABLATION_AXES)})"
        )
    field = ABLATION_AXES[args.axis]
    values = [yaml.safe_load(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("no sweep values given")

    truth = fileio.read_cube(_require(cfg.paths.cube, "paths.cube"))
    mask = _load_mask(cfg, truth.height, truth.width)
    op = CassiOperator(mask, cfg.operator.shift_step, truth.bands)
    meas = op.simulate(truth, cfg.solver.sigma_n, cfg.solver.seed)
    sched = linear_schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end)
    wavelengths = cfg.wavelengths.resolve(truth.bands)
    trace_dir = Path(args.trace_dir) if args.trace_dir else None

    rows = []
    for value in values:
        row = {"value": value}
        try:
            solver_cfg = dataclasses.replace(cfg.solver, **{field: value})
            prior = _build_prior(cfg, truth.bands, wavelengths)
            try:
                t0 = time.perf_counter()
                recon, trace = run_sampler(
                    solver_cfg, sched, op, meas, prior,
                    reference=truth, wavelengths=wavelengths,
                )
                row["seconds"] = time.perf_counter() - t0
            finally:
                prior.close()
            scored = evaluate_cubes(recon, truth, peak=cfg.metrics.peak)
            row["psnr"] = scored.mean_psnr
            row["ssim"] = scored.mean_ssim
            if trace_dir is not None:
                trace_dir.mkdir(parents=True, exist_ok=True)
                trace.write_jsonl(trace_dir / f"{args.axis}_{value}.trace.jsonl")
        except (CassiReconError, ValueError) as exc:
            row["error"] = str(exc)
        rows.append(row)

    write_ablation_table(rows, args.out)
    print(f"axis={args.axis}")
    print("value\tpsnr\tssim\tseconds\terror")
    for row in rows:
        print(
            f"{row['value']}\t"
            f"{row.get('psnr', float('nan')) if row.get('psnr') is not None else ''}\t"
            f"{row.get('ssim', '') if row.get('ssim') is not None else ''}\t"
            f"{row.get('seconds', '') if row.get('seconds') is not None else ''}\t"
            f"{row.get('error', '')}"
        )
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if args.trace:
        trace = Trace.read_jsonl(args.trace)
        written += render_trace(trace, out_dir)
    if args.recon or args.ref:
        if not (args.recon and args.ref and args.region):
            raise ConfigError("spectra rendering needs --recon, --ref and --region together")
        recon = fileio.read_cube(args.recon)
        ref = fileio.read_cube(args.ref)
        paths, r = render_spectra(recon, ref, _parse_region(args.region), out_dir)
        written += paths
        print(f"spectral curve correlation r = {r:.6f}")
    if args.ablation:
        rows = read_ablation_table(args.ablation)
        written += render_ablation(rows, out_dir)
    if not written:
        raise ConfigError("nothing to report: pass --trace, --recon/--ref/--region, or --ablation")
    for p in written:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cassirecon",
        description="Snapshot spectral imaging: simulate coded measurements and "
        "reconstruct cubes with plug-and-play diffusion priors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic smooth spectral cube")
    p.add_argument("--out", required=True)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bumps", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument(
            "--set", action="append", metavar="KEY.PATH=VALUE",
            help="override a config field (repeatable)",
        )

    p = sub.add_parser("simulate", help="apply the sensing operator and write measurement + mask")
    common(p)
    p.add_argument("--cube", help="input cube (overrides paths.cube)")
    p.add_argument("--out-meas", help="output measurement (overrides paths.measurement)")
    p.add_argument("--out-mask", help="output mask (overrides paths.mask)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a cube from measurement + mask")
    common(p)
    p.add_argument("--meas", help="input measurement (overrides paths.measurement)")
    p.add_argument("--mask", help="input mask (overrides paths.mask)")
    p.add_argument("--out", help="output cube (overrides paths.output)")
    p.add_argument("--trace", help="output trace JSONL (overrides paths.trace)")
    p.add_argument("--ref", help="reference cube for per-step PSNR in the trace")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="PSNR/SSIM (and spectral correlation) of two cubes")
    p.add_argument("--recon", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--region", help="top,left,height,width for spectral correlation")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep one solver axis and tabulate quality")
    common(p)
    p.add_argument("--axis", required=True, help=f"one of {sorted(ABLATION_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.add_argument("--out", required=True, help="output TSV table")
    p.add_argument("--trace-dir", help="also write one trace per sweep value")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render figures and tables from run artifacts")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", help="trace JSONL from a reconstruction")
    p.add_argument("--recon", help="reconstructed cube for spectral curves")
    p.add_argument("--ref", help="reference cube for spectral curves")
    p.add_argument("--region", help="top,left,height,width region for spectral curves")
    p.add_argument("--ablation", help="ablation TSV to plot")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExternalPriorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (NumericalAbortError, DegeneratePixelError, MetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CassiReconError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
