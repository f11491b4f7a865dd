"""Piecewise-linear admissible profiles and their transforms.

A profile is a non-decreasing right-continuous map from the reals into
``{-inf} U [0, 1]``.  Here it is stored as a list of half-open linear
segments ``[alpha_i, alpha_{i+1})`` on which the profile equals
``value_i + slope_i * (alpha - alpha_i)``; below the first breakpoint the
profile is ``-inf`` and the last segment runs to ``+inf`` with slope 0.

Extended reals are plain floats: ``NEG_INF`` is ``-inf`` and arithmetic on it
is absorbing, which is exactly the convention used for counting budgets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

NEG_INF = -math.inf
POS_INF = math.inf

# slack for invariants that are checked on floating-point segment data
TOL = 1e-12

__all__ = [
    "NEG_INF",
    "POS_INF",
    "Profile",
    "ProfileError",
    "Segment",
    "alpha_bounds",
    "clamp",
    "concave_conjugate",
    "convexity_index",
    "dual_profile",
    "dual_via_eta",
    "eta_prime",
    "evaluate",
    "inverse_conjugate",
    "is_concave",
    "load_profile",
    "PropertyCheck",
    "check_dual_properties",
    "mean_value_check",
    "right_inf_derivative",
    "save_profile",
    "shifted_dual",
]


class ProfileError(ValueError):
    """Raised when segment data violates an admissible-profile invariant."""

    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}")


@dataclass(frozen=True)
class Segment:
    alpha: float
    value: float
    slope: float


class Profile:
    """Admissible profile with finitely many linear pieces.

    Instances are immutable.  Evaluation is vectorised over numpy arrays.
    """

    __slots__ = ("_alphas", "_values", "_slopes")

    def __init__(self, segments: Iterable[Segment | tuple[float, float, float]]):
        segs = [s if isinstance(s, Segment) else Segment(*map(float, s)) for s in segments]
        if not segs:
            raise ProfileError("non-empty", "a profile needs at least one segment")
        alphas = np.array([s.alpha for s in segs], dtype=float)
        values = np.array([s.value for s in segs], dtype=float)
        slopes = np.array([s.slope for s in segs], dtype=float)
        _validate(alphas, values, slopes)
        for arr in (alphas, values, slopes):
            arr.flags.writeable = False
        self._alphas = alphas
        self._values = values
        self._slopes = slopes

    # -- accessors -------------------------------------------------------
    @property
    def alpha_min(self) -> float:
        return float(self._alphas[0])

    @property
    def alpha_max(self) -> float:
        hit = np.flatnonzero(self._values >= 1.0)
        return float(self._alphas[hit[0]]) if hit.size else POS_INF

    @property
    def alphas(self) -> np.ndarray:
        return self._alphas

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def slopes(self) -> np.ndarray:
        return self._slopes

    @property
    def segments(self) -> list[Segment]:
        return [
            Segment(float(a), float(v), float(s))
            for a, v, s in zip(self._alphas, self._values, self._slopes)
        ]

    def ends(self) -> np.ndarray:
        """Right end of every segment (``inf`` for the last one)."""
        return np.append(self._alphas[1:], POS_INF)

    def end_limits(self) -> np.ndarray:
        """Left limit of the profile at the right end of each segment."""
        lengths = np.append(np.diff(self._alphas), 0.0)
        return self._values + self._slopes * lengths

    # -- evaluation ------------------------------------------------------
    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=float)
        idx = np.searchsorted(self._alphas, a, side="right") - 1
        safe = np.clip(idx, 0, None)
        out = self._values[safe] + self._slopes[safe] * (a - self._alphas[safe])
        out = np.where(idx < 0, NEG_INF, np.minimum(out, 1.0))
        return float(out) if out.ndim == 0 else out

    def inverse(self, level):
        """Generalised inverse ``inf{alpha : nu(alpha) >= level}``.

        Levels above the largest attained value map to ``+inf``.
        """
        u = np.atleast_1d(np.asarray(level, dtype=float))
        out = np.full(u.shape, POS_INF)
        limits = self.end_limits()
        limits[-1] = self._values[-1]
        # first segment whose closure reaches the level
        reach = np.maximum(self._values, limits)
        for i in range(len(self._alphas) - 1, -1, -1):
            hit = u <= reach[i]
            a, v, s = self._alphas[i], self._values[i], self._slopes[i]
            if s > 0:
                cand = a + np.maximum(u - v, 0.0) / s
            else:
                cand = np.full(u.shape, a)
            out = np.where(hit, cand, out)
        out = np.where(u <= self._values[0], self._alphas[0], out)
        return float(out[0]) if np.ndim(level) == 0 else out

    def shifted(self, eps: float) -> Profile:
        return Profile(Segment(a + eps, v, s) for a, v, s in zip(self._alphas, self._values, self._slopes))

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "alpha_min": self.alpha_min,
            "segments": [
                {"alpha": s.alpha, "value": s.value, "slope": s.slope} for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Profile:
        try:
            alpha_min = float(data["alpha_min"])
            raw = data["segments"]
        except KeyError as exc:
            raise ProfileError("schema", f"missing field {exc.args[0]!r}") from None
        segs = []
        for i, item in enumerate(raw):
            try:
                segs.append(Segment(float(item["alpha"]), float(item["value"]), float(item["slope"])))
            except KeyError as exc:
                raise ProfileError("schema", f"segments[{i}] missing field {exc.args[0]!r}") from None
        if not segs:
            raise ProfileError("non-empty", "segments list is empty")
        if segs[0].alpha != alpha_min:
            raise ProfileError(
                "first-alpha-is-alpha_min",
                f"segments[0].alpha={segs[0].alpha} differs from alpha_min={alpha_min}",
            )
        return cls(segs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Profile):
            return NotImplemented
        return (
            np.array_equal(self._alphas, other._alphas)
            and np.array_equal(self._values, other._values)
            and np.array_equal(self._slopes, other._slopes)
        )

    def __hash__(self):
        return hash((self._alphas.tobytes(), self._values.tobytes(), self._slopes.tobytes()))

    def __repr__(self) -> str:
        body = ", ".join(f"({s.alpha:g}, {s.value:g}, {s.slope:g})" for s in self.segments)
        return f"Profile([{body}])"


def _validate(alphas: np.ndarray, values: np.ndarray, slopes: np.ndarray) -> None:
    if not (np.all(np.isfinite(alphas)) and np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
        raise ProfileError("finite", "segment data must be finite")
    if np.any(np.diff(alphas) <= 0):
        i = int(np.flatnonzero(np.diff(alphas) <= 0)[0])
        raise ProfileError("sorted", f"segment alphas not strictly increasing at index {i + 1}")
    if np.any(slopes < 0):
        i = int(np.flatnonzero(slopes < 0)[0])
        raise ProfileError("slope>=0", f"negative slope {slopes[i]} in segment {i}")
    if np.any(values < -TOL) or np.any(values > 1 + TOL):
        i = int(np.flatnonzero((values < -TOL) | (values > 1 + TOL))[0])
        raise ProfileError("values-in-[0,1]", f"segment {i} starts at value {values[i]}")
    if slopes[-1] != 0:
        raise ProfileError("last-slope-zero", f"last segment has slope {slopes[-1]}")
    lim = values[:-1] + slopes[:-1] * np.diff(alphas)
    if np.any(lim > 1 + TOL):
        i = int(np.flatnonzero(lim > 1 + TOL)[0])
        raise ProfileError("values-in-[0,1]", f"segment {i} exceeds 1 before its end (limit {lim[i]})")
    if np.any(lim > values[1:] + TOL):
        i = int(np.flatnonzero(lim > values[1:] + TOL)[0])
        raise ProfileError(
            "non-decreasing",
            f"downward jump at alpha={alphas[i + 1]}: {lim[i]} -> {values[i + 1]}",
        )


def load_profile(path: str | Path) -> Profile:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProfileError("schema", f"{path}: invalid JSON ({exc.msg})") from None
    return Profile.from_dict(data)


def save_profile(nu: Profile, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(nu.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# elementary transforms


def evaluate(nu: Profile, alpha):
    return nu(alpha)


def alpha_bounds(nu: Profile) -> tuple[float, float]:
    return nu.alpha_min, nu.alpha_max


def clamp(beta):
    """Project an extended real onto ``{-inf} U [0, 1]``."""
    b = np.asarray(beta, dtype=float)
    out = np.where(b < 0, NEG_INF, np.minimum(b, 1.0))
    return float(out) if out.ndim == 0 else out


def right_inf_derivative(nu: Profile, alpha: float) -> float:
    if alpha < nu.alpha_min:
        raise ValueError(f"right-inf derivative undefined at alpha={alpha} < alpha_min={nu.alpha_min}")
    i = int(np.searchsorted(nu.alphas, alpha, side="right")) - 1
    return float(nu.slopes[i])


def _active(nu: Profile) -> np.ndarray:
    """Mask of segments lying in [alpha_min, alpha_max)."""
    return nu.alphas < nu.alpha_max


def convexity_index(nu: Profile) -> float:
    active = _active(nu)
    if not active.any():
        return 1.0
    return float(min(1.0, nu.slopes[active].min()))


def concave_conjugate(nu: Profile, p):
    """``inf_{alpha >= alpha_min} (alpha p - nu(alpha) + 1)``.

    The objective is piecewise linear in alpha and jumps only downwards, so
    the infimum is attained at a breakpoint (the last segment is flat, hence
    the objective increases there).
    """
    pa = np.asarray(p, dtype=float)
    if np.any(pa <= 0):
        raise ValueError("concave conjugate needs p > 0")
    vals = np.multiply.outer(pa, nu.alphas) - nu.values + 1.0
    out = vals.min(axis=-1)
    return float(out) if out.ndim == 0 else out


DEFAULT_P_GRID = np.arange(1, 10001) / 1000.0


def inverse_conjugate(eta: Callable, alpha, p_grid=None):
    """Grid infimum ``inf_p (alpha p - eta(p) + 1)``.

    This inverts the conjugate only when the underlying profile is concave;
    for other profiles it returns the concave hull.
    """
    grid = DEFAULT_P_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty p grid")
    if np.any(grid <= 0):
        raise ValueError("p grid must be strictly positive")
    e = np.asarray(eta(grid), dtype=float)
    a = np.asarray(alpha, dtype=float)
    out = (np.multiply.outer(a, grid) - e + 1.0).min(axis=-1)
    return float(out) if out.ndim == 0 else out


def is_concave(nu: Profile) -> bool:
    if len(nu.alphas) == 1:
        return True
    lim = nu.end_limits()[:-1]
    if np.any(np.abs(lim - nu.values[1:]) > 1e-9):
        return False
    return bool(np.all(np.diff(nu.slopes) <= 1e-12))


# ---------------------------------------------------------------------------
# dual profile


def _first_exceedance(nu: Profile):
    """Pieces of ``t -> inf{alpha : nu(alpha) - alpha > t}``.

    Returns ``(pieces, top)`` where each piece is ``(lo, hi, a_lo, rate)``:
    on ``lo <= t < hi`` the infimum equals ``a_lo + rate * (t - lo)``.  The
    pieces tile ``(-inf, top)``; for ``t >= top`` the set is empty.
    """
    pieces = []
    top = NEG_INF
    ends = nu.ends()
    for a, v, s, b in zip(nu.alphas, nu.values, nu.slopes, ends):
        g0 = v - a
        if g0 > top + TOL:
            pieces.append((top, g0, a, 0.0))
        top = max(top, g0)
        rise = s - 1.0
        if rise > 0 and math.isfinite(b):
            g1 = (v + s * (b - a)) - b
            if g1 > top:
                start = a + max(top - g0, 0.0) / rise
                pieces.append((top, g1, start, 1.0 / rise))
                top = g1
    return pieces, top


def dual_profile(nu: Profile) -> Profile:
    """Dual profile ``t -> clamp(t + inf{alpha : nu(alpha) - alpha > t})``."""
    pieces, top = _first_exceedance(nu)
    segs: list[Segment] = []
    plateau = top
    for lo, hi, a_lo, rate in pieces:
        slope = 1.0 + rate
        if lo == NEG_INF:
            zero, one = -a_lo, 1.0 - a_lo
            f_lo = NEG_INF
        else:
            f_lo = lo + a_lo
            zero = lo - f_lo / slope
            one = lo + (1.0 - f_lo) / slope
        start = max(lo, zero)
        if f_lo >= 1.0:
            plateau = lo
            break
        end = min(hi, one)
        if end > start:
            val = 0.0 if start == zero else min(max(f_lo, 0.0), 1.0)
            segs.append(Segment(start + 0.0, val, slope))
        if one < hi:
            plateau = max(lo, one)
            break
    segs = [s for s in segs if s.alpha < plateau]
    segs.append(Segment(plateau + 0.0, 1.0, 0.0))
    out = Profile(segs)

    a_min, a_max = nu.alpha_min, nu.alpha_max
    if out.alpha_min != -a_min:
        raise RuntimeError(f"dual alpha_min {out.alpha_min} != {-a_min}")
    d_max = out.alpha_max
    if not (1 - a_max - 1e-9 <= d_max <= 1 - a_min + 1e-9):
        raise RuntimeError(f"dual alpha_max {d_max} outside [{1 - a_max}, {1 - a_min}]")
    return out


def shifted_dual(nu: Profile, eps: float) -> Profile:
    if eps <= 0:
        raise ValueError("shift must be positive")
    return dual_profile(nu).shifted(eps)


# ---------------------------------------------------------------------------
# Besov-dual route for concave profiles


def eta_prime(nu: Profile, p_prime):
    """``(p'-1)(1 - eta(p'/(p'-1))) + 1`` for ``p' > 1``."""
    pp = np.asarray(p_prime, dtype=float)
    if np.any(pp <= 1):
        raise ValueError("eta' is defined for p' > 1")
    if not is_concave(nu):
        raise ValueError("eta' route requires a concave profile")
    return _eta_prime(nu, pp)


def _eta_prime(nu: Profile, pp):
    out = (pp - 1.0) * (1.0 - concave_conjugate(nu, pp / (pp - 1.0))) + 1.0
    return float(out) if np.ndim(out) == 0 else out


P_PRIME_MAX = 100.0
P_PRIME_GRID = 1.0 + np.logspace(-8, math.log10(P_PRIME_MAX - 1.0), 10_000)


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    x = (lo + hi) / 2.0
    return x, f(x)


def dual_via_eta(nu: Profile, alpha_prime, p_grid=None):
    """``sup_{p' > 1} (alpha' p' - eta'(p') + 1)`` over a log grid in ``p' - 1``.

    The objective is concave in ``p'``, so the grid maximiser is refined by a
    golden-section search on its neighbouring cells.
    """
    if not is_concave(nu):
        raise ValueError("dual_via_eta requires a concave profile")
    dual = dual_profile(nu)
    lo_ok, hi_ok = dual.alpha_min, dual.alpha_max
    ap = np.atleast_1d(np.asarray(alpha_prime, dtype=float))
    if np.any(ap < lo_ok) or np.any(ap >= hi_ok):
        raise ValueError(f"alpha' must lie in [{lo_ok}, {hi_ok})")
    grid = P_PRIME_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    ep = _eta_prime(nu, grid)
    out = np.empty(ap.shape)
    for n, a in enumerate(ap):
        obj = a * grid - ep + 1.0
        i = int(np.argmax(obj))
        best = obj[i]
        left = grid[i - 1] if i > 0 else 1.0 + 1e-12
        right = grid[i + 1] if i + 1 < grid.size else grid[i]
        if right > left:
            _, refined = _golden_max(
                lambda q: a * q - _eta_prime(nu, q) + 1.0, left, right, 1e-12 * max(1.0, right)
            )
            best = max(best, refined)
        out[n] = best
    return float(out[0]) if np.ndim(alpha_prime) == 0 else out


# ---------------------------------------------------------------------------


def _mvt_grid(nu: Profile) -> np.ndarray:
    pts = []
    amax = nu.alpha_max
    for a, b in zip(nu.alphas, nu.ends()):
        if a >= amax:
            break
        length = (b - a) if math.isfinite(b) else 1.0
        pts.extend(a + length * np.arange(8) / 8.0)
    return np.asarray(pts)


def mean_value_check(nu: Profile, p: float) -> bool:
    """Whether every right-inf derivative on [alpha_min, alpha_max) is >= p.

    The equivalent finite-difference form ``nu(a) - nu(a') >= p (a - a')`` is
    evaluated on a grid of pairs as well; the two verdicts must agree.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    active = _active(nu)
    by_slope = bool(np.all(nu.slopes[active] >= p)) if active.any() else True
    pts = _mvt_grid(nu)
    if pts.size:
        vals = nu(pts)
        da = pts[:, None] - pts[None, :]
        dv = vals[:, None] - vals[None, :]
        pairs = da >= 0
        by_difference = bool(np.all(dv[pairs] >= p * da[pairs] - 1e-12))
    else:
        by_difference = True
    if by_slope != by_difference:
        raise RuntimeError(f"derivative and difference forms disagree for p={p}: {by_slope} vs {by_difference}")
    return by_slope


def sample(nu: Profile, grid: Sequence[float]) -> np.ndarray:
    return np.asarray(nu(np.asarray(grid, dtype=float)))


# ---------------------------------------------------------------------------
# grid verification of the dual-profile properties


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    witness: tuple | None = None  # first violating grid point


def _span(nu: Profile, step: float, margin: float = 0.5) -> np.ndarray:
    hi = nu.alpha_max if math.isfinite(nu.alpha_max) else float(nu.alphas[-1])
    grid = np.arange(nu.alpha_min - margin, hi + margin + step / 2, step)
    return np.unique(np.concatenate([grid, nu.alphas]))


def check_dual_properties(
    nu: Profile, step: float = 1e-3, tol: float = 1e-9, pair_step: float | None = None
) -> list[PropertyCheck]:
    """Check right-continuity, the duality inequality, the equality case,
    monotonicity with unit-slope lower bound, and the endpoint identities of
    the dual profile on regular grids.

    The pairwise inequality uses a coarser grid (``pair_step``, default
    ``10 * step``) against every breakpoint; the single-variable checks use
    ``step``.  The equality case is checked at ``alpha = nu'(alpha') - alpha'``
    for ``alpha'`` in ``[alpha'_min, alpha'_max)``.
    """
    with np.errstate(invalid="ignore"):
        return _check_dual(nu, dual_profile(nu), step, tol, pair_step)


def _check_dual(nu: Profile, nd: Profile, step: float, tol: float, pair_step: float | None) -> list[PropertyCheck]:
    out: list[PropertyCheck] = []
    dg = _span(nd, step)

    # right-continuity at every breakpoint of the dual
    h = 1e-10
    b = nd.alphas
    jump = np.abs(nd(b + h) - nd(b)) - nd.slopes * h
    bad = np.flatnonzero(jump > tol)
    out.append(PropertyCheck("right-continuous", bad.size == 0, (float(b[bad[0]]),) if bad.size else None))

    # alpha + alpha' >= min(nu(alpha), nu'(alpha'))
    ps = pair_step or 10 * step
    ap, dp = _span(nu, ps), _span(nd, ps)
    ap = np.unique(np.concatenate([ap, nu.alphas, nu.alphas - ps / 10]))
    dp = np.unique(np.concatenate([dp, nd.alphas, nd.alphas - ps / 10]))
    nu_a, nd_d = nu(ap), nd(dp)
    nu_right = nu(ap + tol)
    lo, hi = nd.alpha_min, nd.alpha_max
    ineq = eqw = None
    for start in range(0, ap.size, 256):
        sl = slice(start, start + 256)
        lhs = ap[sl, None] + dp[None, :]
        if ineq is None:
            viol = np.argwhere(lhs < np.minimum(nu_a[sl, None], nd_d[None, :]) - tol)
            if viol.size:
                ineq = (float(ap[start + viol[0][0]]), float(dp[viol[0][1]]))
        if eqw is None:
            # grid pairs that hit nu'(a') = a + a' up to tol: the exact solution
            # lies within tol of a, so compare against nu at a + tol
            hit = (np.abs(nd_d[None, :] - lhs) <= tol) & (nd_d[None, :] > nu_right[sl, None] + tol)
            hit &= ((dp >= lo) & (dp < hi))[None, :]
            idx = np.argwhere(hit)
            if idx.size:
                eqw = (float(ap[start + idx[0][0]]), float(dp[idx[0][1]]))
    out.append(PropertyCheck("duality-inequality", ineq is None, ineq))

    # nu'(a') = a + a'  =>  nu'(a') <= nu(a), on the unclamped range of the dual
    inner = dg[(dg >= lo) & (dg < hi)]
    vals = nd(inner)
    a_star = vals - inner
    # a_star is rounded; nudge right so a jump of nu at a_star is not missed
    bad = np.flatnonzero(vals > nu(a_star + 1e-12 * np.maximum(1.0, np.abs(a_star))) + tol)
    witness = (float(a_star[bad[0]]), float(inner[bad[0]])) if bad.size else eqw
    out.append(PropertyCheck("equality-case", witness is None, witness))

    # non-decreasing and nu'(a' - e) <= nu'(a') - e for a' <= alpha'_max
    v = nd(dg)
    bad = np.flatnonzero(np.diff(v) < -tol)
    out.append(PropertyCheck("non-decreasing", bad.size == 0, (float(dg[bad[0] + 1]),) if bad.size else None))
    base = dg[dg <= hi] if math.isfinite(hi) else dg
    witness = None
    for e in (step, 0.01, 0.1, 0.25, 0.5, 1.0):
        gap = nd(base - e) - (nd(base) - e)
        bad = np.flatnonzero(gap > tol)
        if bad.size:
            witness = (float(base[bad[0]]), e)
            break
    out.append(PropertyCheck("unit-slope-bound", witness is None, witness))

    out.append(
        PropertyCheck(
            "alpha_min-identity",
            abs(nd.alpha_min + nu.alpha_min) <= tol,
            None if abs(nd.alpha_min + nu.alpha_min) <= tol else (nd.alpha_min, -nu.alpha_min),
        )
    )
    ok = 1 - nu.alpha_max - tol <= nd.alpha_max <= 1 - nu.alpha_min + tol
    out.append(PropertyCheck("alpha_max-bracket", ok, None if ok else (nd.alpha_max, 1 - nu.alpha_max, 1 - nu.alpha_min)))
    return out
