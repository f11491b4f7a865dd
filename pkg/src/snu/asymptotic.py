"""Finite-scale estimates of the asymptotic profile of a tree sequence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from snu.profile import Profile
from snu.treeseq import TreeSequence

DEFAULT_EPS = (0.2, 0.1, 0.05, 0.02, 0.01)
DEFAULT_TOL = 0.1

__all__ = [
    "DEFAULT_EPS",
    "DEFAULT_TOL",
    "MembershipReport",
    "ProfileEstimate",
    "Verdict",
    "counting_function",
    "default_alpha_grid",
    "estimate_profile",
    "membership_report",
]


def _threshold_count(sorted_mags: np.ndarray, thresh: np.ndarray) -> np.ndarray:
    # sorted_mags ascending; count of entries >= thresh
    return sorted_mags.size - np.searchsorted(sorted_mags, thresh, side="left")


def counting_function(x: TreeSequence, alpha: float, eps: float, j: int) -> int:
    """``#{k : |x_{j,k}| >= 2^{-(alpha+eps) j}}``."""
    if not 0 <= j <= x.max_scale:
        raise ValueError(f"scale {j} outside 0..{x.max_scale}")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    mags = np.abs(x.level(j))
    return int(np.count_nonzero((mags > 0) & (mags >= 2.0 ** (-(alpha + eps) * j))))


def default_alpha_grid(nu: Profile | None = None, lo: float = -1.0, hi: float = 2.0, step: float = 0.05) -> np.ndarray:
    if nu is not None:
        lo = nu.alpha_min - 0.5
        top = nu.alpha_max if math.isfinite(nu.alpha_max) else float(nu.alphas[-1])
        hi = top + 0.5
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _log_counts(x: TreeSequence, alphas: np.ndarray, eps: float, js: range) -> tuple[np.ndarray, np.ndarray]:
    """Per (alpha, j) log2(count)/j and raw counts."""
    logs = np.full((alphas.size, len(js)), -math.inf)
    counts = np.zeros((alphas.size, len(js)), dtype=np.int64)
    for col, j in enumerate(js):
        m = np.abs(x.level(j))
        m = np.sort(m[m > 0])
        c = _threshold_count(m, 2.0 ** (-(alphas + eps) * j))
        counts[:, col] = c
        with np.errstate(divide="ignore"):
            logs[:, col] = np.where(c > 0, np.log2(np.maximum(c, 1)) / j, -math.inf)
    return logs, counts


@dataclass(frozen=True)
class ProfileEstimate:
    alpha_grid: np.ndarray
    eps_schedule: tuple[float, ...]
    j_window: tuple[int, int]
    values: np.ndarray  # (len(eps), len(alpha))
    witness_scale: np.ndarray = field(repr=False)
    witness_count: np.ndarray = field(repr=False)

    @property
    def limit_values(self) -> np.ndarray:
        return self.values[-1]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "eps", "nu_hat", "limit"])
            last = len(self.eps_schedule) - 1
            for e, eps in enumerate(self.eps_schedule):
                for a, alpha in enumerate(self.alpha_grid):
                    w.writerow([repr(float(alpha)), repr(float(eps)), repr(float(self.values[e, a])), int(e == last)])


def _window(x: TreeSequence, j_window) -> tuple[int, int]:
    J = x.max_scale
    if j_window is None:
        j_window = (max(1, J // 2), J)
    lo, hi = int(j_window[0]), int(j_window[1])
    if lo < 1 or hi > J or lo > hi:
        raise ValueError(f"scale window {j_window} must satisfy 1 <= lo <= hi <= {J}")
    return lo, hi


def estimate_profile(
    x: TreeSequence,
    alpha_grid: Sequence[float] | None = None,
    eps_schedule: Sequence[float] = DEFAULT_EPS,
    j_window: tuple[int, int] | None = None,
) -> ProfileEstimate:
    """Window-max proxy of ``limsup_j log2(count)/j`` for each ``(eps, alpha)``."""
    alphas = np.asarray(default_alpha_grid() if alpha_grid is None else alpha_grid, dtype=float)
    eps = tuple(float(e) for e in eps_schedule)
    if alphas.size == 0 or not eps:
        raise ValueError("alpha grid and eps schedule must be non-empty")
    if any(e < 0 for e in eps):
        raise ValueError("eps values must be nonnegative")
    lo, hi = _window(x, j_window)
    js = range(lo, hi + 1)
    values = np.empty((len(eps), alphas.size))
    wscale = np.empty((len(eps), alphas.size), dtype=np.int64)
    wcount = np.empty((len(eps), alphas.size), dtype=np.int64)
    for e, ep in enumerate(eps):
        logs, counts = _log_counts(x, alphas, ep, js)
        idx = np.argmax(logs, axis=1)
        values[e] = logs[np.arange(alphas.size), idx]
        wscale[e] = np.array(js)[idx]
        wcount[e] = counts[np.arange(alphas.size), idx]
    return ProfileEstimate(alphas, eps, (lo, hi), values, wscale, wcount)


@dataclass(frozen=True)
class Verdict:
    alpha: float
    nu_hat: float
    nu: float
    passed: bool
    scale: int | None
    count: int | None


@dataclass(frozen=True)
class MembershipReport:
    """Finite-scale necessary evidence for membership; not a proof."""

    verdicts: tuple[Verdict, ...]
    tol: float
    estimate: ProfileEstimate

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failures(self) -> list[Verdict]:
        return [v for v in self.verdicts if not v.passed]


def membership_report(
    x: TreeSequence,
    nu: Profile,
    tol: float = DEFAULT_TOL,
    alpha_grid: Sequence[float] | None = None,
    eps_schedule: Sequence[float] = DEFAULT_EPS,
    j_window: tuple[int, int] | None = None,
) -> MembershipReport:
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if alpha_grid is None:
        alpha_grid = default_alpha_grid(nu)
    est = estimate_profile(x, alpha_grid, eps_schedule, j_window)
    nu_vals = np.asarray(nu(est.alpha_grid), dtype=float)
    out = []
    for a, alpha in enumerate(est.alpha_grid):
        hat = float(est.limit_values[a])
        bound = float(nu_vals[a])
        ok = hat == -math.inf or hat <= bound + tol
        out.append(
            Verdict(
                float(alpha),
                hat,
                bound,
                ok,
                None if ok else int(est.witness_scale[-1, a]),
                None if ok else int(est.witness_count[-1, a]),
            )
        )
    return MembershipReport(tuple(out), float(tol), est)
