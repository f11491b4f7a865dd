"""Dyadic tree-indexed coefficient sequences truncated at a finite scale.

Coefficients live in one flat complex array in heap order: node ``(j, k)``
sits at offset ``2**j - 1 + k``.  Scale ``j`` is a contiguous view.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from snu.profile import Profile

MAGIC = b"SNU1"
MAX_SCALE = 24

__all__ = [
    "FormatError",
    "MagicError",
    "ScaleLengthError",
    "TreeSequence",
    "TruncationError",
    "disjoint_sum",
    "disjoint_translates",
    "linear_combine",
    "random_sequence",
    "read_sequence",
    "scale_rng",
    "spike_sequence",
    "staircase_sequence",
    "unit_sequence",
    "write_sequence",
]


class FormatError(ValueError):
    pass


class MagicError(FormatError):
    pass


class TruncationError(FormatError):
    def __init__(self, scale: int, message: str):
        self.scale = scale
        super().__init__(message)


class ScaleLengthError(FormatError):
    pass


def _offset(j: int) -> int:
    return (1 << j) - 1


class TreeSequence:
    """Immutable coefficient array over scales ``0..max_scale``."""

    __slots__ = ("_data", "_J")

    def __init__(self, data: np.ndarray, max_scale: int | None = None):
        arr = np.array(data, dtype=np.complex128, copy=True).ravel()
        size = arr.size
        J = (size + 1).bit_length() - 2 if max_scale is None else int(max_scale)
        if J < 0 or size != (1 << (J + 1)) - 1:
            raise ScaleLengthError(f"{size} coefficients do not fill scales 0..J for any J")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        arr.flags.writeable = False
        self._data = arr
        self._J = J

    @classmethod
    def _wrap(cls, arr: np.ndarray, J: int) -> TreeSequence:
        # trusted constructor: arr is a fresh complex128 buffer of the right size
        obj = cls.__new__(cls)
        arr.flags.writeable = False
        obj._data = arr
        obj._J = J
        return obj

    @classmethod
    def zeros(cls, J: int) -> TreeSequence:
        return cls._wrap(np.zeros((1 << (J + 1)) - 1, dtype=np.complex128), J)

    @classmethod
    def from_levels(cls, levels: Sequence[np.ndarray]) -> TreeSequence:
        for j, lev in enumerate(levels):
            if len(lev) != 1 << j:
                raise ScaleLengthError(f"scale {j} has {len(lev)} coefficients, expected {1 << j}")
        return cls(np.concatenate([np.asarray(lev, dtype=np.complex128) for lev in levels]), len(levels) - 1)

    @property
    def max_scale(self) -> int:
        return self._J

    @property
    def data(self) -> np.ndarray:
        return self._data

    def level(self, j: int) -> np.ndarray:
        if not 0 <= j <= self._J:
            raise IndexError(f"scale {j} outside 0..{self._J}")
        return self._data[_offset(j) : _offset(j + 1)]

    @property
    def levels(self) -> list[np.ndarray]:
        return [self.level(j) for j in range(self._J + 1)]

    def __getitem__(self, index: tuple[int, int]) -> complex:
        j, k = index
        if not 0 <= k < (1 << j):
            raise IndexError(f"position {k} outside scale {j}")
        return complex(self.level(j)[k])

    def nonzero_counts(self) -> list[int]:
        return [int(np.count_nonzero(lev)) for lev in self.levels]

    def _check(self, other: TreeSequence) -> None:
        if self._J != other._J:
            raise ValueError(f"max_scale mismatch: {self._J} vs {other._J}")

    def __add__(self, other: TreeSequence) -> TreeSequence:
        self._check(other)
        return TreeSequence._wrap(self._data + other._data, self._J)

    def __sub__(self, other: TreeSequence) -> TreeSequence:
        self._check(other)
        return TreeSequence._wrap(self._data - other._data, self._J)

    def __mul__(self, scalar: complex) -> TreeSequence:
        return TreeSequence._wrap(self._data * scalar, self._J)

    __rmul__ = __mul__

    def __neg__(self) -> TreeSequence:
        return TreeSequence._wrap(-self._data, self._J)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TreeSequence):
            return NotImplemented
        return self._J == other._J and np.array_equal(self._data, other._data)

    def __repr__(self) -> str:
        return f"TreeSequence(J={self._J}, nnz={int(np.count_nonzero(self._data))})"


# ---------------------------------------------------------------------------
# generators


def _check_index(J: int, j: int, k: int = 0) -> None:
    if J < 0 or J > MAX_SCALE:
        raise ValueError(f"max scale {J} outside 0..{MAX_SCALE}")
    if not 0 <= j <= J:
        raise ValueError(f"scale {j} outside 0..{J}")
    if not 0 <= k < (1 << j):
        raise ValueError(f"position {k} outside 0..{(1 << j) - 1}")


def unit_sequence(J: int, j: int, k: int) -> TreeSequence:
    _check_index(J, j, k)
    arr = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    arr[_offset(j) + k] = 1.0
    return TreeSequence._wrap(arr, J)


def spike_sequence(J: int, m: int, alpha: float, amplitude: float = 1.0) -> TreeSequence:
    """One coefficient ``amplitude * 2**(-alpha m)`` at ``(m, 0)``."""
    _check_index(J, m)
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    arr = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    arr[_offset(m)] = amplitude * 2.0 ** (-alpha * m)
    return TreeSequence._wrap(arr, J)


def floor_pow2(exponent: float) -> int:
    """``floor(2**exponent)`` guarded against round-off just below an integer."""
    val = 2.0**exponent
    n = math.floor(val)
    if n + 1 - val <= 1e-9 * val:
        n += 1
    return n


def staircase_count(nu_value: float, j: int) -> int:
    return min(floor_pow2(nu_value * j), 1 << j)


def staircase_sequence(nu: Profile, J: int, alpha: float, amplitude: float = 1.0) -> TreeSequence:
    """``floor(2**(nu(alpha) j))`` coefficients ``amplitude 2**(-alpha j)`` per scale.

    Positions fill ``k = 0, 1, 2, ...`` at each scale.
    """
    _check_index(J, 0)
    level = nu(alpha)
    if level == -math.inf:
        raise ValueError(f"nu({alpha}) = -inf: no staircase exists below alpha_min")
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    arr = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    for j in range(J + 1):
        c = staircase_count(level, j)
        arr[_offset(j) : _offset(j) + c] = amplitude * 2.0 ** (-alpha * j)
    return TreeSequence._wrap(arr, J)


def _translate_levels(base: TreeSequence, N: int, j0: int):
    J = base.max_scale
    for j in range(J + 1):
        lev = base.level(j)
        if j < j0:
            yield j, None, None
            continue
        pos = np.flatnonzero(lev)
        if N * pos.size > (1 << j):
            raise ValueError(
                f"scale {j}: {N} disjoint copies of {pos.size} coefficients do not fit in {1 << j} slots"
            )
        yield j, lev[pos], pos.size


def disjoint_translates(base: TreeSequence, N: int, j0: int) -> list[TreeSequence]:
    """``N`` copies of ``base`` with pairwise disjoint supports from scale ``j0`` on.

    Scales below ``j0`` are zeroed.  At each scale the nonzero values of the
    base, in order, are laid out in block ``n`` of width ``count`` for copy
    ``n``; for a staircase base this is a plain translation by ``n * count``.
    """
    if N < 1:
        raise ValueError("N must be positive")
    J = base.max_scale
    outs = [np.zeros((1 << (J + 1)) - 1, dtype=np.complex128) for _ in range(N)]
    for j, vals, c in _translate_levels(base, N, j0):
        if vals is None or c == 0:
            continue
        off = _offset(j)
        for n, arr in enumerate(outs):
            arr[off + n * c : off + (n + 1) * c] = vals
    return [TreeSequence._wrap(arr, J) for arr in outs]


def disjoint_sum(base: TreeSequence, N: int, j0: int) -> TreeSequence:
    """Sum of :func:`disjoint_translates` without materialising the copies."""
    if N < 1:
        raise ValueError("N must be positive")
    J = base.max_scale
    arr = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    for j, vals, c in _translate_levels(base, N, j0):
        if vals is None or c == 0:
            continue
        off = _offset(j)
        arr[off : off + N * c] = np.tile(vals, N)
    return TreeSequence._wrap(arr, J)


def linear_combine(coeffs: Sequence[complex], seqs: Sequence[TreeSequence]) -> TreeSequence:
    if len(coeffs) != len(seqs):
        raise ValueError(f"{len(coeffs)} coefficients for {len(seqs)} sequences")
    if not seqs:
        raise ValueError("nothing to combine")
    J = seqs[0].max_scale
    out = np.zeros_like(seqs[0].data)
    for c, s in zip(coeffs, seqs):
        if s.max_scale != J:
            raise ValueError(f"max_scale mismatch: {J} vs {s.max_scale}")
        out += c * s.data
    return TreeSequence._wrap(out, J)


def scale_rng(seed: int, j: int) -> np.random.Generator:
    """Independent counter-based stream for scale ``j`` under ``seed``."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), j]))


def random_sequence(nu: Profile, J: int, seed: int = 0) -> TreeSequence:
    """Random element of S^nu at finite scale.

    At scale ``j`` the ``i``-th largest magnitude is ``u * 2**(-a_i j)`` with
    ``a_i = inf{alpha : nu(alpha) >= log2(i)/j}`` and ``u`` uniform in
    ``(1/2, 1]``, placed at uniformly random positions with random phases.
    Hence at most ``floor(2**(nu(alpha) j))`` coefficients reach
    ``2**(-alpha j)`` for every alpha.
    """
    _check_index(J, 0)
    arr = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    for j in range(J + 1):
        rng = scale_rng(seed, j)
        n = 1 << j
        ranks = np.arange(1, n + 1, dtype=float)
        levels = np.log2(ranks) / j if j > 0 else np.zeros(1)
        exps = np.asarray(nu.inverse(levels), dtype=float)
        keep = np.isfinite(exps)
        m = int(keep.sum())
        if m == 0:
            continue
        shrink = 1.0 - 0.5 * rng.random(m)
        phase = np.exp(2j * np.pi * rng.random(m))
        pos = rng.permutation(n)[:m]
        arr[_offset(j) + pos] = shrink * 2.0 ** (-exps[keep] * j) * phase
    return TreeSequence._wrap(arr, J)


# ---------------------------------------------------------------------------
# I/O


def write_sequence(seq: TreeSequence, path: str | Path, fmt: str | None = None) -> None:
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "snu")
    if fmt == "csv":
        _write_csv(seq, path)
        return
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", seq.max_scale))
        fh.write(seq.data.astype("<c16").tobytes())


def read_sequence(path: str | Path, fmt: str | None = None) -> TreeSequence:
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "snu")
    if fmt == "csv":
        return _read_csv(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise MagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 8:
        raise TruncationError(0, f"{path}: header ends before the max-scale field")
    (J,) = struct.unpack("<I", raw[4:8])
    if J > MAX_SCALE:
        raise FormatError(f"{path}: max scale {J} exceeds {MAX_SCALE}")
    body = raw[8:]
    need = ((1 << (J + 1)) - 1) * 16
    if len(body) < need:
        have = len(body) // 16
        scale = (have + 1).bit_length() - 1
        raise TruncationError(scale, f"{path}: data ends inside scale {scale} ({have} of {need // 16} coefficients)")
    if len(body) > need:
        raise ScaleLengthError(f"{path}: {len(body) - need} trailing bytes after scale {J}")
    arr = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    return TreeSequence._wrap(arr, J)


def _write_csv(seq: TreeSequence, path) -> None:
    J = seq.max_scale
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "re", "im"])
        for j in range(J + 1):
            lev = seq.level(j)
            last = (1 << j) - 1
            for k in np.flatnonzero(lev):
                w.writerow([j, int(k), repr(float(lev[k].real)), repr(float(lev[k].imag))])
            # the final slot is always written so the loader can recover J
            if j == J and lev[last] == 0:
                w.writerow([j, last, "0.0", "0.0"])


def _read_csv(path, max_scale: int | None = None) -> TreeSequence:
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["j", "k", "re", "im"]:
            raise MagicError(f"{path}: expected header j,k,re,im, got {header}")
        for line, row in enumerate(r, start=2):
            if len(row) != 4:
                raise FormatError(f"{path}:{line}: expected 4 fields, got {len(row)}")
            try:
                rows.append((int(row[0]), int(row[1]), float(row[2]), float(row[3])))
            except ValueError:
                raise FormatError(f"{path}:{line}: malformed row {row}") from None
    J = max_scale if max_scale is not None else max((j for j, *_ in rows), default=0)
    if J > MAX_SCALE:
        raise FormatError(f"{path}: max scale {J} exceeds {MAX_SCALE}")
    arr = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    for j, k, re, im in rows:
        if not (0 <= j <= J and 0 <= k < (1 << j)):
            raise ScaleLengthError(f"{path}: index ({j}, {k}) outside the tree of depth {J}")
        arr[_offset(j) + k] = complex(re, im)
    return TreeSequence._wrap(arr, J)
