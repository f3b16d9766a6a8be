"""Scene ingestion, preprocessing and synthetic data.

The HSIC container (v1, little-endian) is the toolkit's on-disk format:

    magic "HSIC" | version u8 = 1 | flags u8 (bit 0: labels present)
    h u32 | w u32 | d u32
    h*w*d float32 values, row-major (h outer, w middle, d inner)
    h*w uint16 labels, row-major (only when flagged; 0 = unlabeled)

No padding, no checksum. Flattening keeps exactly the labeled pixels in
row-major scan order and min-max normalizes each band over those pixels;
the normalization scope is a known reproduction variable.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError, ParameterError

MAGIC = b"HSIC"
VERSION = 1
_FLAG_LABELS = 0x01
_HEADER = struct.Struct("<4sBBIII")

# 1-based inclusive water-absorption exclusions per scene; an open end means
# "through the last band", which makes the Indian Pines recipe yield 200 bands
# for both the 220-band and 224-band distributions.
SCENE_RECIPES: dict[str, tuple] = {
    "indian_pines": ((104, 108), (150, 163), (220, None)),
    "salinas": ((108, 112), (154, 167), (224, None)),
    "paviau": (),
    "ksc": (),
}


@dataclass
class HsiCube:
    """Raw 3-D scene: float32 values (h, w, d), optional uint16 labels (h, w)."""

    values: np.ndarray
    labels: np.ndarray | None = None
    band_map: np.ndarray | None = None  # original band index per current band

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 3:
            raise ParameterError(f"cube values must be 3-D, got shape {self.values.shape}")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
            if self.labels.shape != self.values.shape[:2]:
                raise ParameterError(
                    f"label shape {self.labels.shape} does not match spatial "
                    f"shape {self.values.shape[:2]}"
                )
        if self.band_map is not None:
            self.band_map = np.asarray(self.band_map, dtype=np.int64)
            if self.band_map.shape != (self.values.shape[2],):
                raise ParameterError("band_map length must equal the band count")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class HsiMatrix:
    """Flattened labeled pixels: float64 values (n, d) in [0, 1], labels >= 1."""

    values: np.ndarray
    labels: np.ndarray
    band_map: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.band_map = np.asarray(self.band_map, dtype=np.int64)
        if self.values.ndim != 2:
            raise ParameterError(f"matrix must be 2-D, got shape {self.values.shape}")
        if self.labels.shape != (self.values.shape[0],):
            raise ParameterError(
                f"{self.labels.shape[0]} labels for {self.values.shape[0]} rows"
            )
        if self.band_map.shape != (self.values.shape[1],):
            raise ParameterError("band_map length must equal the band count")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class SplitSpec:
    """Train/test split policy for evaluation runs."""

    train_fraction: float = 0.1
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ParameterError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def hsic_bytes(cube: HsiCube) -> bytes:
    """Serialize a cube to HSIC v1 bytes."""
    h, w, d = cube.values.shape
    if min(h, w, d) < 1:
        raise ParameterError(f"cube dimensions must be positive, got {(h, w, d)}")
    flags = _FLAG_LABELS if cube.labels is not None else 0
    parts = [_HEADER.pack(MAGIC, VERSION, flags, h, w, d), cube.values.tobytes()]
    if cube.labels is not None:
        parts.append(cube.labels.tobytes())
    return b"".join(parts)


def write_hsic(cube: HsiCube, path) -> None:
    atomic_write_bytes(path, hsic_bytes(cube))


def cube_from_bytes(data: bytes) -> HsiCube:
    if len(data) < _HEADER.size:
        raise FormatError(
            f"truncated header: got {len(data)} of {_HEADER.size} bytes", offset=len(data)
        )
    magic, version, flags, h, w, d = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if flags & ~_FLAG_LABELS:
        raise FormatError(f"unsupported flags 0x{flags:02x}", offset=5)
    for off, name, dim in ((6, "h", h), (10, "w", w), (14, "d", d)):
        if dim == 0:
            raise FormatError(f"zero dimension {name}", offset=off)
    values_len = 4 * h * w * d
    labels_len = 2 * h * w if flags & _FLAG_LABELS else 0
    expected = _HEADER.size + values_len + labels_len
    if len(data) < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, got {len(data)}",
            offset=len(data),
        )
    if len(data) > expected:
        raise FormatError("trailing data after payload", offset=expected)
    values = np.frombuffer(data, dtype="<f4", count=h * w * d, offset=_HEADER.size)
    values = values.reshape(h, w, d).copy()
    labels = None
    if flags & _FLAG_LABELS:
        labels = np.frombuffer(
            data, dtype="<u2", count=h * w, offset=_HEADER.size + values_len
        ).reshape(h, w).copy()
    return HsiCube(values, labels)


def read_hsic(path) -> HsiCube:
    with open(path, "rb") as fh:
        return cube_from_bytes(fh.read())


def _normalize_ranges(excluded, d: int) -> np.ndarray:
    """Expand 1-based inclusive ranges (int, (lo, hi) or (lo, None)) to a 0-based mask."""
    drop = np.zeros(d, dtype=bool)
    for item in excluded:
        if isinstance(item, int):
            lo, hi = item, item
        else:
            lo, hi = item
            if hi is None:
                hi = d
        if not (1 <= lo <= hi <= d):
            raise ParameterError(
                f"exclusion range [{lo}-{hi}] out of bounds for {d} bands"
            )
        drop[lo - 1 : hi] = True
    return drop


def remove_bands(cube: HsiCube, excluded) -> HsiCube:
    """Delete the given 1-based inclusive band ranges, recording the band map."""
    d = cube.values.shape[2]
    drop = _normalize_ranges(excluded, d)
    keep = np.flatnonzero(~drop)
    base = cube.band_map if cube.band_map is not None else np.arange(d, dtype=np.int64)
    return HsiCube(cube.values[:, :, keep], cube.labels, base[keep])


def flatten_labeled(cube: HsiCube) -> HsiMatrix:
    """Rows are the labeled pixels in row-major scan order, min-max scaled per band."""
    if cube.labels is None:
        raise DataError("cube carries no labels")
    h, w, d = cube.values.shape
    flat_labels = cube.labels.reshape(-1)
    mask = flat_labels > 0
    if not mask.any():
        raise DataError("no labeled pixels in cube")
    rows = cube.values.reshape(h * w, d)[mask].astype(np.float64)
    mn = rows.min(axis=0)
    span = rows.max(axis=0) - mn
    constant = span == 0
    span[constant] = 1.0
    rows = (rows - mn) / span
    rows[:, constant] = 0.0  # constant bands map to 0 by convention
    band_map = cube.band_map if cube.band_map is not None else np.arange(d, dtype=np.int64)
    return HsiMatrix(rows, flat_labels[mask].astype(np.int64), band_map)


def split(matrix: HsiMatrix, spec: SplitSpec):
    """Disjoint, exhaustive (train, test) index arrays, deterministic in the seed."""
    rng = np.random.default_rng(spec.seed)
    n = matrix.n

    def take(count: int, pool: np.ndarray):
        perm = rng.permutation(pool)
        return perm[:count], perm[count:]

    if spec.stratified:
        train_parts, test_parts = [], []
        for cls in np.unique(matrix.labels):
            pool = np.flatnonzero(matrix.labels == cls)
            if pool.size < 2:
                raise DataError(
                    f"class {int(cls)} has only {pool.size} sample(s); cannot stratify"
                )
            want = int(math.floor(spec.train_fraction * pool.size + 0.5))
            want = min(max(want, 1), pool.size - 1)
            tr, te = take(want, pool)
            train_parts.append(tr)
            test_parts.append(te)
        train = np.concatenate(train_parts)
        test = np.concatenate(test_parts)
    else:
        want = int(math.floor(spec.train_fraction * n + 0.5))
        want = min(max(want, 1), n - 1)
        train, test = take(want, np.arange(n))
    return np.sort(train), np.sort(test)


def _smooth_signal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random low-frequency sinusoid mixture over the sample index, scaled to [0, 1]."""
    t = np.arange(n) / n
    sig = np.zeros(n)
    for _ in range(3):
        freq = rng.uniform(0.5, 4.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(0.5, 1.0)
        sig += amp * np.sin(2.0 * math.pi * freq * t + phase)
    sig -= sig.min()
    peak = sig.max()
    if peak > 0:
        sig /= peak
    return sig


def synth_scene(d: int, k_informative: int, n: int, noise_sigma: float, seed: int):
    """Scene with planted informative bands; returns (HsiMatrix, planted indices).

    The k informative bands are independent smooth signals; every other band is
    a positive mixture of at most two of them plus Gaussian noise. Labels are
    quartile bins of a random mixture of the informative signals.
    """
    if not (1 <= k_informative < d):
        raise ParameterError(
            f"need 1 <= k_informative < d, got k={k_informative}, d={d}"
        )
    if n < 8:
        raise ParameterError(f"need at least 8 samples, got {n}")
    if noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    rng = np.random.default_rng(seed)
    planted = np.sort(rng.choice(d, size=k_informative, replace=False))
    sources = np.column_stack([_smooth_signal(rng, n) for _ in range(k_informative)])

    mix_coef = rng.normal(0.0, 1.0, size=k_informative)
    score = sources @ mix_coef
    edges = np.quantile(score, [0.25, 0.5, 0.75])
    labels = 1 + np.searchsorted(edges, score)

    values = np.empty((n, d))
    values[:, planted] = sources
    planted_set = set(int(j) for j in planted)
    for band in range(d):
        if band in planted_set:
            continue
        q = int(rng.integers(1, 3))
        chosen = rng.choice(k_informative, size=q, replace=False)
        weights = rng.uniform(0.2, 1.0, size=q)
        weights /= weights.sum()
        col = sources[:, chosen] @ weights
        if noise_sigma > 0:
            col = col + rng.normal(0.0, noise_sigma, size=n)
        values[:, band] = col

    mn = values.min(axis=0)
    span = values.max(axis=0) - mn
    span[span == 0] = 1.0
    values = (values - mn) / span
    matrix = HsiMatrix(values, labels, np.arange(d, dtype=np.int64))
    return matrix, planted.astype(np.int64)


def matrix_to_cube(matrix: HsiMatrix) -> HsiCube:
    """Reshape flattened samples onto the most square grid that tiles n exactly."""
    n, d = matrix.values.shape
    h = 1
    for cand in range(int(math.isqrt(n)), 0, -1):
        if n % cand == 0:
            h = cand
            break
    w = n // h
    values = matrix.values.reshape(h, w, d).astype(np.float32)
    labels = matrix.labels.reshape(h, w).astype(np.uint16)
    return HsiCube(values, labels)
