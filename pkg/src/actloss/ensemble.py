"""Gaussian measurement ensembles for real systems of quadratic equations.

An instance of the problem is a ground-truth vector x in R^n, m sensing
vectors a_1..a_m stacked as the rows of A, and the measurements
y_k = (a_k^T x)^2.  Instances are generated from a seeded counter-based
RNG so that every downstream experiment is reproducible from (seed,
stream_id) alone, and can be persisted to a small self-describing binary
file (plus a plain-text variant for debugging).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EnsembleFormatError",
    "EnsembleValidationError",
    "MeasurementEnsemble",
    "RngSpec",
    "generate",
    "load",
    "mean_energy_check",
    "save",
]

# Binary file layout: header below, then A (m*n), x (n), y (m) as
# little-endian float64 in row-major order.
_MAGIC = b"GQE1"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQqq")  # magic, version, n, m, seed, stream_id
_TEXT_MAGIC = "gqe-text"

# load() recomputes y from A and x and rejects deviations above this.
_Y_CONSISTENCY_RTOL = 1e-9


class EnsembleFormatError(ValueError):
    """Malformed ensemble file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EnsembleValidationError(ValueError):
    """Structurally valid file whose contents violate an ensemble invariant."""


@dataclass(frozen=True)
class RngSpec:
    """Seed plus substream id for the counter-based generator.

    The same (seed, stream_id) pair reproduces the same Gaussian sequence
    within this implementation; distinct stream_ids give statistically
    independent streams, so trials can be keyed by (master seed, trial
    index) without ever perturbing each other.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.seed % (1 << 64), self.stream_id % (1 << 64)], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class MeasurementEnsemble:
    """One problem instance: y_k = (a_k^T x)^2 for k = 1..m.

    Immutable after construction (arrays are locked) and therefore safe to
    share across threads.  ``y1_over_m`` caches the mean measurement
    ``mean(y)``, the data-driven energy scale used by the activated loss
    and by the solver's stepsize normalization.
    """

    n: int
    m: int
    A: np.ndarray
    x: np.ndarray
    y: np.ndarray
    seed: int = 0
    stream_id: int = 0
    y1_over_m: float = field(init=False)

    def __post_init__(self):
        A = np.ascontiguousarray(self.A, dtype=np.float64)
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if A.shape != (self.m, self.n):
            raise ValueError(f"A must be {self.m}x{self.n}, got {A.shape}")
        if x.shape != (self.n,):
            raise ValueError(f"x must have length {self.n}, got {x.shape}")
        if y.shape != (self.m,):
            raise ValueError(f"y must have length {self.m}, got {y.shape}")
        if not np.linalg.norm(x) > 0:
            raise ValueError("ground-truth vector x must be nonzero")
        if np.min(y) < 0:
            raise ValueError("measurements must be nonnegative")
        for arr in (A, x, y):
            arr.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y1_over_m", float(np.mean(y)))

    @property
    def x_norm(self) -> float:
        return float(np.linalg.norm(self.x))


def generate(
    n: int,
    m: int,
    seed: int,
    x_mode: str = "gaussian",
    x: np.ndarray | None = None,
    stream_id: int = 0,
) -> MeasurementEnsemble:
    """Draw a fresh instance with i.i.d. standard Gaussian rows of A.

    ``x_mode`` selects the ground truth: "gaussian" draws x ~ N(0, I_n)
    from the same stream (before A, so the layout is reproducible),
    "ones" uses the all-ones vector, and "given" takes the ``x`` argument
    verbatim.  Deterministic for fixed (n, m, seed, stream_id, x_mode).
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    rng = RngSpec(seed, stream_id).generator()
    if x_mode == "gaussian":
        if x is not None:
            raise ValueError("x is only accepted with x_mode='given'")
        x_vec = rng.standard_normal(n)
    elif x_mode == "ones":
        if x is not None:
            raise ValueError("x is only accepted with x_mode='given'")
        x_vec = np.ones(n)
    elif x_mode == "given":
        if x is None:
            raise ValueError("x_mode='given' requires an x vector")
        x_vec = np.asarray(x, dtype=np.float64)
        if x_vec.shape != (n,):
            raise ValueError(f"x must have length {n}, got {x_vec.shape}")
        if not np.linalg.norm(x_vec) > 0:
            raise ValueError("ground-truth vector x must be nonzero")
    else:
        raise ValueError(f"unknown x_mode {x_mode!r}")
    A = rng.standard_normal((m, n))
    y = (A @ x_vec) ** 2
    return MeasurementEnsemble(
        n=n, m=m, A=A, x=x_vec, y=y, seed=seed, stream_id=stream_id
    )


def mean_energy_check(ensemble: MeasurementEnsemble) -> dict:
    """Ratio of the mean measurement to the signal energy ||x||^2.

    For Gaussian sensing vectors the ratio concentrates around 1; values
    inside [1/2, 2] are the normal operating regime the activated loss
    relies on.  Scaling x leaves the ratio unchanged.
    """
    ratio = ensemble.y1_over_m / float(ensemble.x @ ensemble.x)
    return {"ratio": ratio, "in_bounds": bool(0.5 <= ratio <= 2.0)}


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save(ensemble: MeasurementEnsemble, path, text: bool = False) -> None:
    """Write an ensemble to ``path``; binary by default, text if requested.

    Binary round-trips bit-for-bit; the text variant stores shortest
    round-tripping decimal literals, which also reproduce float64 exactly.
    """
    if text:
        _save_text(ensemble, path)
        return
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC,
                _VERSION,
                ensemble.n,
                ensemble.m,
                ensemble.seed,
                ensemble.stream_id,
            )
        )
        fh.write(ensemble.A.astype("<f8").tobytes())
        fh.write(ensemble.x.astype("<f8").tobytes())
        fh.write(ensemble.y.astype("<f8").tobytes())


def load(path) -> MeasurementEnsemble:
    """Read an ensemble written by :func:`save` (either format).

    Raises :class:`EnsembleFormatError` with a byte offset on malformed
    input and :class:`EnsembleValidationError` when the stored y is
    inconsistent with A and x beyond 1e-9 relative.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[: len(_MAGIC)] == _MAGIC:
        ensemble = _parse_binary(buf)
    elif buf[: len(_TEXT_MAGIC)] == _TEXT_MAGIC.encode():
        ensemble = _parse_text(buf)
    else:
        raise EnsembleFormatError("unrecognized ensemble file magic", 0)
    _validate_measurements(ensemble)
    return ensemble


def _parse_binary(buf: bytes) -> MeasurementEnsemble:
    if len(buf) < _HEADER.size:
        raise EnsembleFormatError("truncated header", len(buf))
    magic, version, n, m, seed, stream_id = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise EnsembleFormatError("bad magic", 0)
    if version != _VERSION:
        raise EnsembleFormatError(f"unsupported version {version}", 4)
    if n < 1 or m < 1:
        raise EnsembleFormatError(f"invalid dimensions n={n}, m={m}", 8)
    expected = _HEADER.size + 8 * (m * n + n + m)
    if len(buf) != expected:
        raise EnsembleFormatError(
            f"payload size mismatch: expected {expected} bytes, got {len(buf)}",
            min(len(buf), expected),
        )
    off = _HEADER.size
    A = np.frombuffer(buf, "<f8", count=m * n, offset=off).reshape(m, n).copy()
    off += 8 * m * n
    x = np.frombuffer(buf, "<f8", count=n, offset=off).copy()
    off += 8 * n
    y = np.frombuffer(buf, "<f8", count=m, offset=off).copy()
    return MeasurementEnsemble(n=n, m=m, A=A, x=x, y=y, seed=seed, stream_id=stream_id)


def _save_text(ensemble: MeasurementEnsemble, path) -> None:
    lines = [
        f"{_TEXT_MAGIC} {_VERSION}",
        f"n {ensemble.n}",
        f"m {ensemble.m}",
        f"seed {ensemble.seed}",
        f"stream {ensemble.stream_id}",
        "A",
    ]
    lines += [" ".join(repr(float(v)) for v in row) for row in ensemble.A]
    lines.append("x")
    lines.append(" ".join(repr(float(v)) for v in ensemble.x))
    lines.append("y")
    lines.append(" ".join(repr(float(v)) for v in ensemble.y))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_text(buf: bytes) -> MeasurementEnsemble:
    text = buf.decode("utf-8", errors="replace")
    lines = text.splitlines()
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line.encode("utf-8", errors="replace")) + 1

    def fail(i: int, msg: str):
        raise EnsembleFormatError(msg, offsets[i] if i < len(offsets) else len(buf))

    def expect_kv(i: int, key: str) -> int:
        if i >= len(lines):
            fail(i, f"missing '{key}' line")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != key:
            fail(i, f"expected '{key} <int>' line")
        try:
            return int(parts[1])
        except ValueError:
            fail(i, f"non-integer value for '{key}'")

    if not lines or lines[0].split() != [_TEXT_MAGIC, str(_VERSION)]:
        fail(0, "bad text header")
    n = expect_kv(1, "n")
    m = expect_kv(2, "m")
    seed = expect_kv(3, "seed")
    stream_id = expect_kv(4, "stream")
    if n < 1 or m < 1:
        fail(1, f"invalid dimensions n={n}, m={m}")

    def read_block(i: int, marker: str, rows: int, cols: int):
        if i >= len(lines) or lines[i].strip() != marker:
            fail(i, f"expected '{marker}' marker")
        block = np.empty((rows, cols))
        for r in range(rows):
            j = i + 1 + r
            if j >= len(lines):
                fail(j, f"truncated '{marker}' block")
            vals = lines[j].split()
            if len(vals) != cols:
                fail(j, f"expected {cols} values in '{marker}' row, got {len(vals)}")
            try:
                block[r] = [float(v) for v in vals]
            except ValueError:
                fail(j, f"non-numeric value in '{marker}' block")
        return block, i + 1 + rows

    A, i = read_block(5, "A", m, n)
    xblk, i = read_block(i, "x", 1, n)
    yblk, i = read_block(i, "y", 1, m)
    return MeasurementEnsemble(
        n=n, m=m, A=A, x=xblk[0], y=yblk[0], seed=seed, stream_id=stream_id
    )


def _validate_measurements(ensemble: MeasurementEnsemble) -> None:
    expected = (ensemble.A @ ensemble.x) ** 2
    denom = np.maximum(expected, np.finfo(np.float64).tiny)
    rel = np.abs(ensemble.y - expected) / denom
    worst = int(np.argmax(rel))
    if rel[worst] > _Y_CONSISTENCY_RTOL:
        raise EnsembleValidationError(
            f"stored y[{worst}]={ensemble.y[worst]!r} deviates from (A@x)^2="
            f"{expected[worst]!r} by {rel[worst]:.3e} relative "
            f"(tolerance {_Y_CONSISTENCY_RTOL:g})"
        )
