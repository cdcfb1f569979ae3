"""Score-function priors plugged into the sampler.

A prior maps a noisy tri-image at timestep t to the score s(x_t, t); the
clean-image estimate is the derived convenience ``denoise``. Built-in priors
are stateless with respect to requests and derive alpha_bar from the noise
level carried in the request (alpha_bar = 1 / (1 + sigma_bar^2)), so band
triples may be denoised in any order. The external prior speaks the binary
frame protocol over a child process's stdio or a local TCP socket.
"""

from __future__ import annotations

import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from . import protocol
from .bands import BandPlan, extract
from .core import SpectralCube, TriImage
from .exceptions import DimensionMismatchError, ExternalPriorError


@dataclass(frozen=True)
class PriorRequest:
    """One denoising query: the noisy tri-image, its timestep, and the matching
    noise level sigma_bar_t (redundant so stateless priors need no schedule).
    ``band`` identifies which cube band the tri-image was extracted for; priors
    that do not care may ignore it."""

    image: TriImage
    timestep: int
    noise_level: float
    band: int | None = None

    def __post_init__(self):
        if self.timestep < 1:
            raise ValueError(f"timestep must be >= 1, got {self.timestep}")
        if not np.isfinite(self.noise_level) or self.noise_level <= 0:
            raise ValueError(f"noise_level must be finite and > 0, got {self.noise_level}")

    def alpha_bar(self) -> float:
        return 1.0 / (1.0 + self.noise_level**2)


class IdentityPrior:
    """Zero score: predict-clean then reduces to x_t / sqrt(alpha_bar)."""

    def score(self, req: PriorRequest) -> TriImage:
        return TriImage(np.zeros_like(req.image.data))

    def close(self) -> None:
        pass


class GaussianShrinkPrior:
    """Smoothness score (blur(x) - x) / (1 - alpha_bar) from a fixed separable
    3-tap blur. The per-axis kernel is [s/4, 1 - s/2, s/4] (the classic
    [1/4, 1/2, 1/4] at strength 1) applied along rows then columns with edge
    replication."""

    def __init__(self, strength: float = 1.0):
        if strength <= 0:
            raise ValueError(f"strength must be > 0, got {strength}")
        self.strength = float(strength)

    def _blur(self, x: np.ndarray) -> np.ndarray:
        s = self.strength
        kernel = np.array([s / 4.0, 1.0 - s / 2.0, s / 4.0])
        out = correlate1d(x, kernel, axis=-2, mode="nearest")
        return correlate1d(out, kernel, axis=-1, mode="nearest")

    def score(self, req: PriorRequest) -> TriImage:
        x = req.image.data
        return TriImage((self._blur(x) - x) / (1.0 - req.alpha_bar()))

    def close(self) -> None:
        pass


class OraclePrior:
    """Exact score of the Gaussian-corrupted ground truth:
    s = (sqrt(alpha_bar) * x_true - x_t) / (1 - alpha_bar), so predict-clean
    recovers the truth for any x_t.

    Construct from a single TriImage, or from a full cube plus the band plan
    used by the solver; the cube form answers per-band requests via
    ``req.band``.
    """

    def __init__(self, truth: TriImage | SpectralCube, plan: BandPlan | None = None):
        if isinstance(truth, SpectralCube):
            if plan is None:
                raise ValueError("cube-valued oracle requires the band plan")
            self._triples = [extract(plan, truth, i) for i in range(truth.bands)]
            self._single = None
        else:
            self._triples = None
            self._single = truth

    def _truth_for(self, req: PriorRequest) -> TriImage:
        if self._single is not None:
            return self._single
        if req.band is None:
            raise ValueError("cube-valued oracle needs req.band to select the true triple")
        return self._triples[req.band]

    def score(self, req: PriorRequest) -> TriImage:
        truth = self._truth_for(req)
        if truth.data.shape != req.image.data.shape:
            raise DimensionMismatchError(
                f"oracle truth shape {truth.data.shape} vs request {req.image.data.shape}"
            )
        ab = req.alpha_bar()
        return TriImage((np.sqrt(ab) * truth.data - req.image.data) / (1.0 - ab))

    def close(self) -> None:
        pass


def denoise(prior, req: PriorRequest) -> TriImage:
    """Clean-image estimate (1/sqrt(ab)) * (x_t + (1 - ab) * score)."""
    s = prior.score(req)
    ab = req.alpha_bar()
    return TriImage((req.image.data + (1.0 - ab) * s.data) / np.sqrt(ab))


class _StdioConnection:
    """One child process; a single request in flight at a time."""

    def __init__(self, command: str):
        self._proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def send(self, data: bytes) -> None:
        self._proc.stdin.write(data)
        self._proc.stdin.flush()

    def read(self, n: int) -> bytes:
        return self._proc.stdout.read(n)

    def close(self) -> None:
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        self._proc.wait(timeout=10)


class _SocketConnection:
    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port), timeout=60)

    def send(self, data: bytes) -> None:
        self._sock.sendall(data)

    def read(self, n: int) -> bytes:
        return self._sock.recv(n)

    def close(self) -> None:
        self._sock.close()


def _open_connection(endpoint: str):
    if endpoint.startswith("cmd:"):
        return _StdioConnection(endpoint[len("cmd:") :])
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[len("tcp:") :].rpartition(":")
        if not host or not port.isdigit():
            raise ExternalPriorError(f"malformed tcp endpoint {endpoint!r}")
        return _SocketConnection(host, int(port))
    raise ExternalPriorError(
        f"unknown endpoint scheme in {endpoint!r} (expected cmd:... or tcp:host:port)"
    )


class ExternalPrior:
    """Client for an out-of-process score server.

    Each underlying connection is serialized; set ``max_concurrent`` > 1 to
    open a pool so per-band requests can overlap. Connections are opened lazily
    and handshaken with the schedule parameters before the first request.
    """

    def __init__(
        self,
        endpoint: str,
        steps: int,
        beta_start: float,
        beta_end: float,
        max_concurrent: int = 1,
    ):
        if max_concurrent < 1:
            raise ValueError(f"max_concurrent must be >= 1, got {max_concurrent}")
        self.endpoint = endpoint
        self._handshake = protocol.pack_handshake(steps, beta_start, beta_end)
        self.max_concurrent = max_concurrent
        self._pool: list = []
        self._lock = threading.Lock()

    def _acquire(self):
        with self._lock:
            if self._pool:
                return self._pool.pop()
        try:
            conn = _open_connection(self.endpoint)
        except ExternalPriorError:
            raise
        except Exception as exc:
            raise ExternalPriorError(
                f"cannot reach score server at {self.endpoint!r}: {exc}"
            ) from exc
        try:
            conn.send(self._handshake)
            protocol.read_ack(conn.read)
        except ExternalPriorError:
            conn.close()
            raise
        except Exception as exc:
            conn.close()
            raise ExternalPriorError(
                f"handshake with {self.endpoint!r} failed: {exc}"
            ) from exc
        return conn

    def _release(self, conn) -> None:
        with self._lock:
            if len(self._pool) < self.max_concurrent:
                self._pool.append(conn)
                return
        conn.close()

    def connect(self) -> None:
        """Open and handshake one connection eagerly (fail fast before solving)."""
        self._release(self._acquire())

    def score(self, req: PriorRequest) -> TriImage:
        conn = self._acquire()
        try:
            conn.send(protocol.pack_request(req.timestep, req.image.data))
            _, score = protocol.read_response(conn.read)
        except ExternalPriorError as exc:
            conn.close()
            raise ExternalPriorError(f"{exc} (timestep {req.timestep})") from exc
        except Exception as exc:
            conn.close()
            raise ExternalPriorError(
                f"score server failure at timestep {req.timestep}: {exc}"
            ) from exc
        self._release(conn)
        if score.shape != req.image.data.shape:
            raise ExternalPriorError(
                f"score server returned shape {score.shape} for request "
                f"{req.image.data.shape} (timestep {req.timestep})"
            )
        return TriImage(score)

    def close(self) -> None:
        with self._lock:
            pool, self._pool = self._pool, []
        for conn in pool:
            conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
