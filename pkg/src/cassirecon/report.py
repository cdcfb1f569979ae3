"""Render run artifacts to figures (PNG) and delimited tables (CSV/TSV).

Figures carry fixed PNG metadata so repeated renders of the same inputs are
byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import SpectralCube
from .metrics import Region, band_curve, spectral_curve_correlation
from .solver import Trace

PNG_METADATA = {"Software": "cassirecon", "Creation Time": ""}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, metadata=PNG_METADATA)
    plt.close(fig)


def render_trace(trace: Trace, out_dir, stem: str = "trace") -> list[Path]:
    """Residual (and PSNR, when present) against step index, plus the raw table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    table = out_dir / f"{stem}.csv"
    with table.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "rho", "residual", "psnr"])
        for r in trace.records:
            writer.writerow([r.step, r.t, f"{r.rho:.12g}", f"{r.residual:.12g}",
                             "" if r.psnr is None else f"{r.psnr:.12g}"])
    written.append(table)

    steps = [r.step for r in trace.records]
    residuals = [r.residual for r in trace.records]
    psnrs = [r.psnr for r in trace.records]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, residuals, marker="o", markersize=3)
    ax.set_xlabel("step")
    ax.set_ylabel("data residual ||y - Phi x||")
    if min(residuals, default=0) > 0:
        ax.set_yscale("log")
    ax.set_title(f"{trace.header.get('kind', 'run')} residual")
    fig.tight_layout()
    fig_path = out_dir / f"{stem}_residual.png"
    _save(fig, fig_path)
    written.append(fig_path)

    if any(p is not None for p in psnrs):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(steps, [p if p is not None else np.nan for p in psnrs], marker="o", markersize=3)
        ax.set_xlabel("step")
        ax.set_ylabel("PSNR (dB)")
        ax.set_title("per-step reconstruction quality")
        fig.tight_layout()
        fig_path = out_dir / f"{stem}_psnr.png"
        _save(fig, fig_path)
        written.append(fig_path)
    return written


def render_spectra(
    recon: SpectralCube, ref: SpectralCube, region: Region, out_dir, stem: str = "spectra"
) -> tuple[list[Path], float]:
    """Region-mean spectral curves of both cubes, with their Pearson correlation."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_recon = band_curve(recon, region)
    curve_ref = band_curve(ref, region)
    r = spectral_curve_correlation(recon, ref, region)
    written = []

    table = out_dir / f"{stem}.csv"
    with table.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["band", "wavelength_nm", "recon", "reference"])
        for b in range(recon.bands):
            writer.writerow(
                [b, f"{recon.wavelengths[b]:.6g}", f"{curve_recon[b]:.12g}", f"{curve_ref[b]:.12g}"]
            )
    written.append(table)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ref.wavelengths, curve_ref, label="reference", linewidth=2)
    ax.plot(recon.wavelengths, curve_recon, label="reconstruction", linestyle="--")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("region mean intensity")
    ax.set_title(f"spectral density curves (r = {r:.4f})")
    ax.legend()
    fig.tight_layout()
    fig_path = out_dir / f"{stem}.png"
    _save(fig, fig_path)
    written.append(fig_path)
    return written, r


def write_ablation_table(rows: list[dict], path) -> None:
    """TSV with one row per sweep value: value, psnr, ssim, seconds, error."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["value", "psnr", "ssim", "seconds", "error"])
        for row in rows:
            writer.writerow(
                [
                    row["value"],
                    "" if row.get("psnr") is None else f"{row['psnr']:.4f}",
                    "" if row.get("ssim") is None else f"{row['ssim']:.6f}",
                    "" if row.get("seconds") is None else f"{row['seconds']:.3f}",
                    row.get("error", ""),
                ]
            )


def read_ablation_table(path) -> list[dict]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh, delimiter="\t"):
            rows.append(
                {
                    "value": rec["value"],
                    "psnr": float(rec["psnr"]) if rec["psnr"] else None,
                    "ssim": float(rec["ssim"]) if rec["ssim"] else None,
                    "seconds": float(rec["seconds"]) if rec["seconds"] else None,
                    "error": rec.get("error", ""),
                }
            )
    return rows


def render_ablation(rows: list[dict], out_dir, stem: str = "ablation") -> list[Path]:
    """PSNR/SSIM against the sweep value; failed cells are skipped."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = [r for r in rows if r.get("psnr") is not None]
    written = []

    fig, ax1 = plt.subplots(figsize=(6, 4))
    labels = [str(r["value"]) for r in ok]
    xs = np.arange(len(ok))
    ax1.plot(xs, [r["psnr"] for r in ok], marker="o", color="tab:blue", label="PSNR")
    ax1.set_ylabel("PSNR (dB)", color="tab:blue")
    ax1.set_xticks(xs, labels)
    ax1.set_xlabel("sweep value")
    if any(r.get("ssim") is not None for r in ok):
        ax2 = ax1.twinx()
        ax2.plot(xs, [r["ssim"] for r in ok], marker="s", color="tab:red", label="SSIM")
        ax2.set_ylabel("SSIM", color="tab:red")
    fig.tight_layout()
    fig_path = out_dir / f"{stem}.png"
    _save(fig, fig_path)
    written.append(fig_path)
    return written
