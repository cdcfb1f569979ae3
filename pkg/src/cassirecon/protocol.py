"""Binary framing for the external score-server connection.

All integers are u32 little-endian, floats are IEEE-754 little-endian.
Frames:

  handshake   "DNS1" | u32 T | f64 beta_start | f64 beta_end      (client -> server)
  ack         "ACK1"                                              (server -> client)
  request     "REQ1" | u32 t | u32 H | u32 W | u32 C=3 | H*W*C f32 (channel-major)
  response    "RSP1" | u32 t | u32 H | u32 W | u32 C   | payload = score tensor
  error       "ERR1" | u32 byte_length | UTF-8 message

The payload order matches the tri-image memory layout: channel-major, then
row-major within a channel.
"""

from __future__ import annotations

import struct
from typing import Callable

import numpy as np

from .exceptions import ExternalPriorError

MAGIC_HANDSHAKE = b"DNS1"
MAGIC_ACK = b"ACK1"
MAGIC_REQUEST = b"REQ1"
MAGIC_RESPONSE = b"RSP1"
MAGIC_ERROR = b"ERR1"

_HEADER = struct.Struct("<IIII")  # t, H, W, C
_HANDSHAKE_BODY = struct.Struct("<Idd")  # T, beta_start, beta_end


def pack_handshake(steps: int, beta_start: float, beta_end: float) -> bytes:
    return MAGIC_HANDSHAKE + _HANDSHAKE_BODY.pack(steps, beta_start, beta_end)


def pack_request(t: int, image: np.ndarray) -> bytes:
    """image: (3, H, W) array; payload is written as little-endian float32."""
    c, h, w = image.shape
    payload = np.ascontiguousarray(image, dtype="<f4").tobytes()
    return MAGIC_REQUEST + _HEADER.pack(t, h, w, c) + payload


def pack_response(t: int, score: np.ndarray) -> bytes:
    c, h, w = score.shape
    payload = np.ascontiguousarray(score, dtype="<f4").tobytes()
    return MAGIC_RESPONSE + _HEADER.pack(t, h, w, c) + payload


def pack_error(message: str) -> bytes:
    body = message.encode("utf-8")
    return MAGIC_ERROR + struct.pack("<I", len(body)) + body


def read_exact(read: Callable[[int], bytes], n: int) -> bytes:
    """Read exactly n bytes from a stream-like read callable; raise on EOF."""
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = read(remaining)
        if not chunk:
            raise ExternalPriorError(
                f"stream closed mid-frame ({n - remaining} of {n} bytes read)"
            )
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_response(read: Callable[[int], bytes]) -> tuple[int, np.ndarray]:
    """Read one RSP1 frame; an ERR1 frame is raised as ExternalPriorError."""
    magic = read_exact(read, 4)
    if magic == MAGIC_ERROR:
        (length,) = struct.unpack("<I", read_exact(read, 4))
        message = read_exact(read, length).decode("utf-8", errors="replace")
        raise ExternalPriorError(f"score server error: {message}")
    if magic != MAGIC_RESPONSE:
        raise ExternalPriorError(f"unexpected frame magic {magic!r} (wanted RSP1)")
    t, h, w, c = _HEADER.unpack(read_exact(read, _HEADER.size))
    payload = read_exact(read, h * w * c * 4)
    score = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(c, h, w)
    return t, score


def read_ack(read: Callable[[int], bytes]) -> None:
    magic = read_exact(read, 4)
    if magic != MAGIC_ACK:
        raise ExternalPriorError(f"handshake rejected: got {magic!r} instead of ACK1")
