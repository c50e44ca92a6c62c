"""Readers and writers for events, frames, tensors, configs and manifests.

Every writer goes through :func:`atomic_write`, so an interrupted run never
leaves a truncated file behind.
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
import warnings
from dataclasses import dataclass, fields
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .errors import (
    BoundsError,
    ConfigError,
    ConfigRangeWarning,
    FormatError,
    LengthError,
    OrderingError,
    ParameterError,
    ParseError,
)
from .events import STACKED, TERNARY, EventFrameTensor, EventStream
from .sensing import HighResTensor
from .solver import SolverConfig


def atomic_write(path, data) -> Path:
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# ---------------------------------------------------------------- event text

_SECONDS = re.compile(r"(\d+(\.\d*)?|\.\d+)\Z")
_INT = re.compile(r"[+-]?\d+\Z")
_SENSOR = re.compile(r"#\s*sensor\s+(\d+)\s+(\d+)\s*\Z")
_MICRO = Decimal("0.000001")


def format_timestamp(t: int) -> str:
    """Integer microseconds as decimal seconds with six places."""
    return f"{t // 1_000_000}.{t % 1_000_000:06d}"


def parse_event_lines(lines, width=None, height=None) -> EventStream:
    """Parse ``t x y p`` lines (seconds, column, row, 0/1 polarity).

    A ``# sensor W H`` comment fixes the sensor size unless given explicitly;
    otherwise the size is inferred from the largest coordinates.
    """
    xs, ys, ts, ps = [], [], [], []
    last_t = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _SENSOR.match(line)
            if m and width is None and height is None:
                width, height = int(m.group(1)), int(m.group(2))
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields 't x y p', got {len(parts)}", lineno)
        ts_s, x_s, y_s, p_s = parts
        if not _SECONDS.match(ts_s):
            raise ParseError(f"timestamp {ts_s!r} is not a non-negative decimal", lineno, "t")
        t = int((Decimal(ts_s) / _MICRO).quantize(Decimal(1), rounding=ROUND_HALF_UP))
        for name, s in (("x", x_s), ("y", y_s)):
            if not _INT.match(s):
                raise ParseError(f"{name} coordinate {s!r} is not an integer", lineno, name)
        x, y = int(x_s), int(y_s)
        if p_s not in ("0", "1"):
            raise ParseError(f"polarity {p_s!r} must be 0 or 1", lineno, "polarity")
        if x < 0 or (width is not None and x >= width):
            raise BoundsError(f"x = {x} outside sensor width {width}", lineno, "x")
        if y < 0 or (height is not None and y >= height):
            raise BoundsError(f"y = {y} outside sensor height {height}", lineno, "y")
        if last_t is not None and t < last_t:
            raise OrderingError(f"timestamp {ts_s} is earlier than the previous event", lineno)
        last_t = t
        xs.append(x)
        ys.append(y)
        ts.append(t)
        ps.append(1 if p_s == "1" else -1)
    if width is None:
        width = max(xs) + 1 if xs else 1
    if height is None:
        height = max(ys) + 1 if ys else 1
    return EventStream(width, height, xs, ys, ts, ps)


def parse_event_text(path, width=None, height=None) -> EventStream:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_event_lines(fh, width, height)


def format_event_text(stream: EventStream) -> str:
    out = [f"# sensor {stream.width} {stream.height}\n"]
    for t, x, y, p in zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist()):
        out.append(f"{format_timestamp(t)} {x} {y} {1 if p > 0 else 0}\n")
    return "".join(out)


def write_event_text(stream: EventStream, path) -> Path:
    return atomic_write(path, format_event_text(stream))


# ---------------------------------------------------------------- PGM

def _pgm_header(data: bytes):
    """Return ``(magic, width, height, maxval, offset)`` of a PNM header."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < 4:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(data[start:pos])
        if tokens[0] != b"P5":
            raise FormatError(f"unsupported PNM magic {tokens[0]!r}; only binary grayscale P5 is read")
    if pos >= n or not data[pos:pos + 1].isspace():
        raise FormatError("PGM header must end with a single whitespace byte")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("PGM header fields must be integers") from None
    return tokens[0], width, height, maxval, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    _, width, height, maxval, off = _pgm_header(data)
    if maxval != 255:
        raise FormatError(f"PGM maxval {maxval} unsupported; expected 255")
    if width < 1 or height < 1:
        raise FormatError(f"PGM size {width}x{height} is empty")
    need = width * height
    if len(data) - off != need:
        raise LengthError(f"PGM raster has {len(data) - off} bytes, header needs {need}")
    raster = np.frombuffer(data, dtype=np.uint8, count=need, offset=off)
    return raster.reshape(height, width) / 255.0


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM as intensities ``v / 255``."""
    return decode_pgm(Path(path).read_bytes())


def quantize(frame) -> np.ndarray:
    """Round-half-up ``v * 255`` clamped to ``[0, 255]``."""
    v = np.asarray(frame, dtype=np.float64)
    return np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)


def encode_pgm(frame) -> bytes:
    q = quantize(frame)
    if q.ndim != 2:
        raise FormatError(f"PGM frames must be 2-D, got shape {q.shape}")
    return b"P5\n%d %d\n255\n" % (q.shape[1], q.shape[0]) + q.tobytes()


def write_pgm(frame, path) -> Path:
    return atomic_write(path, encode_pgm(frame))


def read_pgm_sequence(directory) -> np.ndarray:
    """All ``*.pgm`` files of a directory in name order, stacked ``(d, h, w)``."""
    files = sorted(Path(directory).glob("*.pgm"))
    if not files:
        return np.zeros((0, 0, 0))
    frames = [read_pgm(f) for f in files]
    if len({f.shape for f in frames}) != 1:
        raise FormatError(f"frames in {directory} have different sizes")
    return np.stack(frames)


# ---------------------------------------------------------------- tensor container

MAGIC = b"EVFT"
TENSOR_VERSION = 1
EVENT_VERSION = 2
_HEADER = struct.Struct("<4sHIII")
_MODE_CODES = {TERNARY: 0, STACKED: 1}


def _encode_container(version, array, trailer=b"") -> bytes:
    d, h, w = array.shape
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, version, h, w, d) + payload + trailer


def _decode_container(data: bytes, version):
    if len(data) < _HEADER.size:
        raise LengthError(f"container is {len(data)} bytes, shorter than its {_HEADER.size}-byte header")
    magic, ver, h, w, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if ver != version:
        raise FormatError(f"container version {ver}, expected {version}")
    if h == 0 or w == 0 or d == 0:
        raise FormatError(f"header declares an empty tensor (h={h}, w={w}, d={d})")
    nbytes = 4 * h * w * d
    if len(data) < _HEADER.size + nbytes:
        raise LengthError(f"payload has {len(data) - _HEADER.size} bytes, header needs {nbytes}")
    arr = np.frombuffer(data, dtype="<f4", count=h * w * d, offset=_HEADER.size)
    return arr.reshape(d, h, w).astype(np.float64), data[_HEADER.size + nbytes:]


def encode_tensor(H) -> bytes:
    return _encode_container(TENSOR_VERSION, np.asarray(getattr(H, "data", H)))


def decode_tensor(data: bytes, frame_period=1000) -> HighResTensor:
    arr, rest = _decode_container(data, TENSOR_VERSION)
    if rest:
        raise LengthError(f"{len(rest)} unexpected bytes after the payload")
    return HighResTensor(arr, frame_period)


def write_tensor(H, path) -> Path:
    """Write ``H`` as ``EVFT`` version 1: header then float32 samples, frame-major."""
    return atomic_write(path, encode_tensor(H))


def read_tensor(path, frame_period=1000) -> HighResTensor:
    return decode_tensor(Path(path).read_bytes(), frame_period)


def encode_event_tensor(frames: EventFrameTensor) -> bytes:
    trailer = struct.pack(f"<I{frames.num_frames}I", _MODE_CODES[frames.mode], *frames.grouping)
    return _encode_container(EVENT_VERSION, frames.frames, trailer)


def decode_event_tensor(data: bytes) -> EventFrameTensor:
    arr, rest = _decode_container(data, EVENT_VERSION)
    d = arr.shape[0]
    if len(rest) != 4 * (d + 1):
        raise LengthError(f"event trailer has {len(rest)} bytes, expected {4 * (d + 1)}")
    mode_code, *grouping = struct.unpack(f"<I{d}I", rest)
    modes = {v: k for k, v in _MODE_CODES.items()}
    if mode_code not in modes:
        raise FormatError(f"unknown event frame mode code {mode_code}")
    if not np.all(arr == np.round(arr)):
        raise FormatError("event frames must hold integers")
    dtype = np.int8 if modes[mode_code] == TERNARY else np.int32
    try:
        return EventFrameTensor(arr.astype(dtype), modes[mode_code], tuple(grouping)).validate()
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_event_tensor(frames: EventFrameTensor, path) -> Path:
    """Write event frames as ``EVFT`` version 2 (payload plus mode/grouping trailer)."""
    return atomic_write(path, encode_event_tensor(frames))


def read_event_tensor(path) -> EventFrameTensor:
    return decode_event_tensor(Path(path).read_bytes())


# ---------------------------------------------------------------- config

_CONFIG_FIELDS = {f.name: f for f in fields(SolverConfig)}
_INT_FIELDS = {"lr_drop_every", "epochs"}


def _key_values(lines, error):
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise error(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        yield lineno, key, value


def parse_config(text: str) -> SolverConfig:
    values = {}
    for lineno, key, value in _key_values(text.splitlines(), ConfigError):
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            values[key] = int(value) if key in _INT_FIELDS else float(value)
        except ValueError:
            raise ConfigError(f"cannot parse {value!r} as a number for {key}", lineno) from None
    try:
        cfg = SolverConfig(**values)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    for name, v, (lo, hi) in cfg.out_of_range():
        if name in values:
            warnings.warn(f"{name} = {v} is outside the recommended range ({lo}, {hi})",
                          ConfigRangeWarning, stacklevel=3)
    return cfg


def load_config(path) -> SolverConfig:
    """Read ``key = value`` lines; missing keys take their defaults.

    Values outside the recommended ranges are accepted with a
    :class:`ConfigRangeWarning`.
    """
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: SolverConfig) -> str:
    return "".join(f"{name} = {getattr(cfg, name)!r}\n" for name in _CONFIG_FIELDS)


def write_config(cfg: SolverConfig, path) -> Path:
    return atomic_write(path, format_config(cfg))


# ---------------------------------------------------------------- manifest

@dataclass
class DatasetManifest:
    sensor_width: int
    sensor_height: int
    event_file: str
    frame_files: list
    frame_timestamps: list  # microseconds

    def __post_init__(self):
        if len(self.frame_files) != len(self.frame_timestamps):
            raise ParseError("frame_files and frame_timestamps differ in length")
        if any(b <= a for a, b in zip(self.frame_timestamps, self.frame_timestamps[1:])):
            raise OrderingError("frame timestamps must be strictly increasing")


def parse_manifest(text: str) -> DatasetManifest:
    header, files, stamps = {}, [], []
    in_frames = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[frames]":
            in_frames = True
            continue
        if in_frames:
            parts = line.split()
            if len(parts) != 2 or not _INT.match(parts[1]) or int(parts[1]) < 0:
                raise ParseError(f"expected 'path timestamp_us', got {line!r}", lineno)
            files.append(parts[0])
            stamps.append(int(parts[1]))
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ("sensor_width", "sensor_height", "event_file"):
            raise ParseError(f"unknown manifest key {key!r}", lineno, key)
        header[key] = value
    missing = {"sensor_width", "sensor_height", "event_file"} - header.keys()
    if missing:
        raise ParseError(f"manifest is missing {sorted(missing)}")
    try:
        w, h = int(header["sensor_width"]), int(header["sensor_height"])
    except ValueError:
        raise ParseError("sensor size must be integers") from None
    return DatasetManifest(w, h, header["event_file"], files, stamps)


def format_manifest(m: DatasetManifest) -> str:
    lines = [f"sensor_width = {m.sensor_width}", f"sensor_height = {m.sensor_height}",
             f"event_file = {m.event_file}", "[frames]"]
    lines += [f"{f} {t}" for f, t in zip(m.frame_files, m.frame_timestamps)]
    return "\n".join(lines) + "\n"


def read_manifest(path) -> DatasetManifest:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))


def write_manifest(m: DatasetManifest, path) -> Path:
    return atomic_write(path, format_manifest(m))
