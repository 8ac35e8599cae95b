"""Binary PGM (P5) frame I/O.

Frames serialize as 8-bit or 16-bit big-endian P5 with intensities mapped
linearly from [0, 1]; 16-bit is the default so sub-threshold structure
survives quantization.
"""

from __future__ import annotations

import numpy as np

from .channel import Frame
from .errors import PgmError


def write_pgm(frame: Frame, path, bits: int = 16) -> None:
    if bits not in (8, 16):
        raise PgmError("bits must be 8 or 16")
    maxval = 255 if bits == 8 else 65535
    data = np.clip(frame.data, 0.0, 1.0)
    ints = np.floor(data * maxval + 0.5).astype(np.uint16)
    header = f"P5\n{frame.width} {frame.height}\n{maxval}\n".encode("ascii")
    if bits == 8:
        payload = ints.astype(np.uint8).tobytes()
    else:
        payload = ints.astype(">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def _read_tokens(raw: bytes, count: int):
    """Yield `count` whitespace-separated header tokens, skipping comments.

    Returns (tokens, offset_of_first_payload_byte).
    """
    tokens = []
    i = 0
    n = len(raw)
    while len(tokens) < count:
        while i < n and raw[i : i + 1].isspace():
            i += 1
        if i < n and raw[i : i + 1] == b"#":
            while i < n and raw[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not raw[i : i + 1].isspace():
            i += 1
        if start == i:
            raise PgmError("truncated PGM header")
        tokens.append(raw[start:i])
    # exactly one whitespace byte separates the header from the payload
    if i >= n:
        raise PgmError("missing PGM payload")
    i += 1
    return tokens, i


def read_pgm(path) -> Frame:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise PgmError("not a binary PGM (P5) file")
    tokens, offset = _read_tokens(raw[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmError(f"bad PGM header: {exc}") from None
    offset += 2  # the P5 magic
    if width <= 0 or height <= 0:
        raise PgmError("non-positive PGM dimensions")
    if maxval <= 0 or maxval > 65535:
        raise PgmError(f"unsupported maxval {maxval}")
    count = width * height
    payload = raw[offset:]
    if maxval < 256:
        if len(payload) < count:
            raise PgmError("PGM payload shorter than header promises")
        ints = np.frombuffer(payload[:count], dtype=np.uint8)
    else:
        if len(payload) < 2 * count:
            raise PgmError("PGM payload shorter than header promises")
        ints = np.frombuffer(payload[: 2 * count], dtype=">u2")
    data = ints.astype(np.float64).reshape(height, width) / float(maxval)
    return Frame(data)
