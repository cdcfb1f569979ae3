"""Drivers for exercising the out-of-process score server from the client side.

Shared by the conformance tests and the acceptance gate. The 32-bit wire is
the agreed precision boundary: equivalence checks feed float32-exact images
and use timesteps where scores are O(1), so the float32 response truncation
stays below the 1e-6 tolerance.
"""

from __future__ import annotations

import struct
import subprocess
from pathlib import Path

import numpy as np

from cassirecon import ExternalPrior, GaussianShrinkPrior, PriorRequest, linear_schedule
from cassirecon.core import TriImage
from cassirecon.protocol import pack_handshake, pack_request, read_exact

SCHED = linear_schedule()


def stdio_endpoint(sidecar: Path, mode: str) -> str:
    return f"cmd:node {sidecar} --mode {mode}"


def f32_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Random tri-image that is exactly representable on the 32-bit wire."""
    return rng.random((3, height, width)).astype(np.float32).astype(np.float64)


def identity_answers_zero_tensors(sidecar: Path, requests: int = 100) -> bool:
    rng = np.random.default_rng(0)
    with ExternalPrior(stdio_endpoint(sidecar, "identity"), SCHED.steps, 1e-4, 0.02) as prior:
        for _ in range(requests):
            t = int(rng.integers(1, SCHED.steps + 1))
            h = int(rng.integers(1, 9))
            w = int(rng.integers(1, 9))
            req = PriorRequest(TriImage(f32_image(rng, h, w)), t, SCHED.sigma_bar(t))
            score = prior.score(req)
            if score.data.shape != (3, h, w) or (score.data != 0).any():
                return False
    return True


def shrink_matches_in_process_prior(sidecar: Path, strength: float = 0.8) -> float:
    local = GaussianShrinkPrior(strength)
    rng = np.random.default_rng(1)
    worst = 0.0
    endpoint = stdio_endpoint(sidecar, f"gaussianShrink={strength}")
    with ExternalPrior(endpoint, SCHED.steps, 1e-4, 0.02) as prior:
        for t in (200, 400, 700, 1000):
            req = PriorRequest(TriImage(f32_image(rng, 12, 9)), t, SCHED.sigma_bar(t))
            remote = prior.score(req).data
            want = local.score(req).data
            worst = max(worst, float(np.abs(remote - want).max()))
    return worst


def malformed_frame_yields_error_and_survives(sidecar: Path) -> bool:
    proc = subprocess.Popen(
        ["node", str(sidecar), "--mode", "identity"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
    )
    try:
        proc.stdin.write(pack_handshake(SCHED.steps, 1e-4, 0.02))
        proc.stdin.flush()
        if read_exact(proc.stdout.read, 4) != b"ACK1":
            return False
        proc.stdin.write(b"JUNK")  # frame-aligned garbage
        image = np.zeros((3, 2, 2))
        proc.stdin.write(pack_request(5, image))
        proc.stdin.flush()
        if read_exact(proc.stdout.read, 4) != b"ERR1":
            return False
        (length,) = struct.unpack("<I", read_exact(proc.stdout.read, 4))
        read_exact(proc.stdout.read, length)
        if read_exact(proc.stdout.read, 4) != b"RSP1":
            return False
        read_exact(proc.stdout.read, 16 + image.size * 4)
        proc.stdin.close()
        return proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
