"""Bit-exact raster file I/O: grayscale PFM for floats, binary PGM for masks.

PFM (Portable Float Map), grayscale variant:

    Pf\\n<width> <height>\\n<scale>\\n

followed by width*height 32-bit floats, rows stored bottom-to-top. A negative
scale marks little-endian payloads; the writer always emits scale -1.0. Round
trips are value-exact for every float32 bit pattern, NaN payloads included
(the payload never passes through arithmetic).

Masks are stored as binary PGM (P5), maxval 255, valid = 255, invalid = 0.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .raster import Mask, ScalarImage


class FormatError(ValueError):
    """Malformed or unsupported raster file."""


def write_pfm(image: ScalarImage, path) -> None:
    data = image.data
    if data.dtype != np.float32:
        data = data.astype(np.float32)
    data = data.astype("<f4", copy=False)
    header = f"Pf\n{image.width} {image.height}\n-1.0\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.flipud(data).tobytes())


def read_pfm(path) -> ScalarImage:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic == b"PF":
            raise FormatError(f"{path}: color PFM not supported (grayscale only)")
        if magic != b"Pf":
            raise FormatError(f"{path}: not a PFM file (magic {magic!r})")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise FormatError(f"{path}: malformed dimensions line")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise FormatError(f"{path}: malformed dimensions line") from exc
        if width < 1 or height < 1:
            raise FormatError(f"{path}: invalid dimensions {width}x{height}")
        try:
            scale = float(fh.readline())
        except ValueError as exc:
            raise FormatError(f"{path}: malformed scale line") from exc
        if scale == 0:
            raise FormatError(f"{path}: zero scale")
        dtype = "<f4" if scale < 0 else ">f4"
        payload = fh.read(width * height * 4)
        if len(payload) != width * height * 4:
            raise FormatError(
                f"{path}: truncated payload ({len(payload)} of "
                f"{width * height * 4} bytes)"
            )
    rows = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return ScalarImage(np.flipud(rows).astype(np.float32, copy=True))


def write_mask_pgm(mask: Mask, path) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = np.where(mask.valid, 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_mask_pgm(path) -> Mask:
    path = Path(path)
    raw = path.read_bytes()
    # Header is three whitespace-separated tokens after the magic.
    if not raw.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (magic {raw[:2]!r})")
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: mask PGM requires maxval 255, got {maxval}")
    payload = raw[pos : pos + width * height]
    if len(payload) != width * height:
        raise FormatError(
            f"{path}: truncated payload ({len(payload)} of {width * height} bytes)"
        )
    values = np.frombuffer(payload, dtype=np.uint8)
    if np.any((values != 0) & (values != 255)):
        raise FormatError(f"{path}: mask bytes must be 0 or 255")
    return Mask((values == 255).reshape(height, width))
