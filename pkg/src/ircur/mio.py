"""Matrix and frame-sequence I/O.

Two matrix formats: a binary format (magic "IRCM", little-endian 32-bit
row and column counts, then rows*cols little-endian float64 values in
column-major order) whose round trip is bit-exact, and CSV (one matrix
row per line, 17-significant-digit floats) whose round trip is
value-exact.  Image frames use binary PGM (P5, maxval 255).
"""

from __future__ import annotations

import re
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matcore import Matrix

BIN_MAGIC = b"IRCM"
_BIN_HEADER = struct.Struct("<4sii")


class FormatError(ValueError):
    """Raised for malformed matrix or frame files.

    ``offset`` is the byte offset of the problem when it is known
    (binary formats), else None.
    """

    def __init__(self, message: str, path=None, offset: int | None = None):
        loc = f"{path}: " if path is not None else ""
        at = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(f"{loc}{message}{at}")
        self.path = path
        self.offset = offset


@dataclass
class MatrixFile:
    """A matrix file path with its format ("bin" or "csv")."""

    path: Path
    format: str

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        if self.format not in ("bin", "csv"):
            raise ValueError(f"format must be 'bin' or 'csv', got {self.format!r}")


def _sniff_format(path: Path) -> str:
    if path.suffix.lower() == ".csv":
        return "csv"
    if path.suffix.lower() == ".bin":
        return "bin"
    try:
        with open(path, "rb") as fh:
            return "bin" if fh.read(4) == BIN_MAGIC else "csv"
    except OSError:
        return "bin"


def write_matrix(M: Matrix, path, fmt: str | None = None) -> MatrixFile:
    """Write M to ``path`` as BIN (default) or CSV."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("only 2-D matrices can be written")
    if fmt == "csv":
        np.savetxt(path, M, delimiter=",", fmt="%.17g")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(BIN_MAGIC, M.shape[0], M.shape[1]))
            fh.write(np.asarray(M, dtype="<f8").tobytes(order="F"))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return MatrixFile(path, fmt)


def read_matrix(path, fmt: str | None = None) -> Matrix:
    """Read a matrix written by :func:`write_matrix`.

    Bad magic, truncated payloads, and non-finite values raise
    FormatError (with the byte offset for binary files).
    """
    path = Path(path)
    fmt = fmt or _sniff_format(path)
    if fmt == "bin":
        return _read_bin(path)
    if fmt == "csv":
        return _read_csv(path)
    raise ValueError(f"unknown format {fmt!r}")


def _read_bin(path: Path) -> Matrix:
    data = path.read_bytes()
    if len(data) < _BIN_HEADER.size:
        raise FormatError("truncated header", path=path, offset=len(data))
    magic, rows, cols = _BIN_HEADER.unpack_from(data)
    if magic != BIN_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path=path, offset=0)
    if rows < 0 or cols < 0:
        raise FormatError(f"negative dimensions {rows}x{cols}", path=path, offset=4)
    expected = _BIN_HEADER.size + 8 * rows * cols
    if len(data) < expected:
        raise FormatError(
            f"truncated payload, expected {expected} bytes", path=path, offset=len(data)
        )
    if len(data) > expected:
        raise FormatError("trailing bytes after payload", path=path, offset=expected)
    flat = np.frombuffer(data, dtype="<f8", offset=_BIN_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise FormatError(
            "non-finite value", path=path, offset=_BIN_HEADER.size + 8 * int(bad[0])
        )
    return flat.reshape((rows, cols), order="F").copy(order="F")


def _read_csv(path: Path) -> Matrix:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty input warns before we raise
            M = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (ValueError, OSError) as exc:
        raise FormatError(f"unreadable CSV: {exc}", path=path) from exc
    if M.size == 0:
        raise FormatError("empty CSV", path=path)
    if not np.isfinite(M).all():
        raise FormatError("non-finite value", path=path)
    return np.asfortranarray(M)


@dataclass
class FrameSequence:
    """A stack of same-sized 8-bit grayscale frames, shape (frames, height, width)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3:
            raise ValueError("pixels must have shape (frames, height, width)")

    @property
    def frame_count(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


def frames_to_matrix(seq: FrameSequence) -> Matrix:
    """Stack vectorized frames as columns.

    Pixel (x, y) of frame t (x across the width, y down the height) maps
    to row y + x * height, column t: each frame is flattened
    column-by-column.
    """
    if seq.frame_count == 0:
        raise ValueError("empty frame sequence")
    f, h, w = seq.pixels.shape
    return np.asfortranarray(
        seq.pixels.transpose(1, 2, 0).reshape((h * w, f), order="F").astype(np.float64)
    )


def matrix_to_frames(M: Matrix, width: int, height: int) -> FrameSequence:
    """Inverse of :func:`frames_to_matrix`; values are rounded to the
    nearest integer and clamped to [0, 255]."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != width * height:
        raise ValueError(
            f"matrix with {M.shape[0]} rows does not match {width}x{height} frames"
        )
    vals = np.clip(np.rint(M), 0, 255).astype(np.uint8)
    pixels = vals.reshape((height, width, M.shape[1]), order="F").transpose(2, 0, 1)
    return FrameSequence(pixels.copy())


def write_pgm(frame: np.ndarray, path) -> None:
    """Write one (height, width) uint8 frame as binary PGM (P5, maxval 255)."""
    frame = np.asarray(frame, dtype=np.uint8)
    if frame.ndim != 2:
        raise ValueError("a PGM frame must be 2-D")
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(frame.tobytes(order="C"))


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) frame; comments and maxval <= 255 supported."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM (missing P5)", path=path, offset=0)
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        m = re.match(rb"\d+", data[pos:])
        if not m:
            raise FormatError("malformed PGM header", path=path, offset=pos)
        fields.append(int(m.group()))
        pos += m.end()
    w, h, maxval = fields
    if maxval > 255 or maxval < 1:
        raise FormatError(f"unsupported maxval {maxval}", path=path, offset=pos)
    pos += 1  # single whitespace byte after maxval
    if len(data) - pos < w * h:
        raise FormatError("truncated pixel data", path=path, offset=len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return pixels.reshape((h, w)).copy()


def write_frame_dir(seq: FrameSequence, directory, prefix: str = "frame") -> list[Path]:
    """Write every frame as ``<prefix>_<index>.pgm`` inside ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(seq.frame_count):
        p = directory / f"{prefix}_{t:05d}.pgm"
        write_pgm(seq.pixels[t], p)
        paths.append(p)
    return paths


def read_frame_dir(directory) -> FrameSequence:
    """Read all ``*.pgm`` files in a directory (sorted by name) as one sequence."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise FormatError("no .pgm frames found", path=directory)
    frames = [read_pgm(p) for p in paths]
    shape = frames[0].shape
    for p, fr in zip(paths, frames):
        if fr.shape != shape:
            raise FormatError(
                f"frame size {fr.shape[1]}x{fr.shape[0]} differs from first frame "
                f"{shape[1]}x{shape[0]}",
                path=p,
            )
    return FrameSequence(np.stack(frames))
