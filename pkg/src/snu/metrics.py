"""Norms and distances on tree sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from snu.profile import Profile, convexity_index
from snu.treeseq import TreeSequence

__all__ = [
    "DominationWitness",
    "SplitResult",
    "besov_dominates_d",
    "besov_norm",
    "besov_sup",
    "distance_d",
    "interp_pnorm",
    "scale_infimum",
    "threshold_split",
]


def scale_infimum(mags: np.ndarray, alpha: float, beta: float, j: int) -> float:
    """``inf{C >= 0 : #{m >= C 2^-alpha j} <= C 2^beta j}`` for one scale.

    With ``u`` the nonzero magnitudes rescaled by ``2^(alpha j)`` and sorted
    descending, ``C`` in ``(u[k], u[k-1]]`` yields exactly ``k`` exceedances,
    so the band contributes ``max(k 2^-beta j, u[k])`` when that lies inside it.
    """
    u = np.sort(mags[mags > 0])[::-1] * 2.0 ** (alpha * j)
    n = u.size
    if n == 0:
        return 0.0
    k = np.arange(n + 1, dtype=float)
    upper = np.concatenate(([math.inf], u))
    lower = np.concatenate((u, [0.0]))
    need = k * 2.0 ** (-beta * j)
    cand = np.maximum(need, lower)
    ok = (lower < upper) & (cand <= upper)
    return float(cand[ok].min())


def distance_d(x: TreeSequence, alpha: float, beta: float) -> float:
    """``d_{alpha,beta}(x)``; ``beta = -inf`` gives the weighted sup norm."""
    if beta == -math.inf:
        return besov_sup(x, alpha)
    if not beta >= 0:
        raise ValueError(f"beta must be -inf or >= 0, got {beta}")
    best = 0.0
    for j in range(x.max_scale + 1):
        best = max(best, scale_infimum(np.abs(x.level(j)), alpha, beta, j))
    return best


def besov_sup(x: TreeSequence, alpha: float) -> float:
    best = 0.0
    for j in range(x.max_scale + 1):
        lev = x.level(j)
        if lev.size:
            best = max(best, 2.0 ** (alpha * j) * float(np.abs(lev).max()))
    return best


def _scale_besov(mags: np.ndarray, alpha: float, p: float, j: int) -> float:
    mx = float(mags.max()) if mags.size else 0.0
    if mx == 0.0:
        return 0.0
    # factor out the max so that p < 1 and tiny magnitudes stay well scaled
    mean = float(np.sum((mags / mx) ** p)) * 2.0**-j
    return 2.0 ** (alpha * j) * mx * mean ** (1.0 / p)


def besov_norm(x: TreeSequence, alpha: float, p: float) -> float:
    """``sup_j 2^{(alpha - 1/p) j} ||x_j||_p``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    if p == math.inf:
        return besov_sup(x, alpha)
    return max(_scale_besov(np.abs(x.level(j)), alpha, p, j) for j in range(x.max_scale + 1))


@dataclass(frozen=True)
class SplitResult:
    x_prime: TreeSequence
    x_dblprime: TreeSequence
    threshold: float
    total: float
    s: float
    p0: float


def threshold_split(x: TreeSequence, alpha: float, t: float) -> tuple[TreeSequence, TreeSequence]:
    """Clip each coefficient to modulus ``t 2^(-alpha j)``, phase preserved."""
    data = x.data
    out = np.empty_like(data)
    J = x.max_scale
    for j in range(J + 1):
        lo, hi = (1 << j) - 1, (1 << (j + 1)) - 1
        lev = data[lo:hi]
        cap = t * 2.0 ** (-alpha * j)
        mag = np.abs(lev)
        scale = np.where(mag > cap, cap / np.where(mag > 0, mag, 1.0), 1.0)
        out[lo:hi] = lev * scale
    rest = data - out
    # a - (a - b) is exact (Sterbenz), so rest + clipped reproduces data bit for bit
    return TreeSequence._wrap(rest, J), TreeSequence._wrap(data - rest, J)


def _golden_min(f, lo: float, hi: float, rtol: float) -> tuple[float, float]:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rtol * max(abs(hi), 1e-300):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def interp_pnorm(x: TreeSequence, nu: Profile, alpha: float, eps: float) -> SplitResult:
    """Threshold-split upper bound for ``inf ||x'||_{b^s_{p0,inf}} + ||x''||_{b^alpha_{inf,inf}}``.

    For a fixed sup budget ``t`` every admissible ``x''`` has
    ``|x''_{j,k}| <= t 2^(-alpha j)``, and the Besov norm is monotone in the
    moduli, so clipping is the best split for that ``t``; the search over
    ``t`` combines a scan of the kink values with golden-section refinement.
    """
    p0 = convexity_index(nu)
    if p0 <= 0:
        raise ValueError("convexity index is 0: no p0-norm exists")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not nu.alpha_min <= alpha < nu.alpha_max:
        raise ValueError(f"alpha={alpha} outside [alpha_min, alpha_max) = [{nu.alpha_min}, {nu.alpha_max})")
    s = alpha + (1.0 - float(nu(alpha))) / p0 - eps

    def objective(t: float) -> float:
        x1, _ = threshold_split(x, alpha, t)
        return besov_norm(x1, s, p0) + min(t, top)

    top = besov_sup(x, alpha)
    if top == 0.0:
        return SplitResult(x, TreeSequence.zeros(x.max_scale), 0.0, 0.0, s, p0)

    kinks = []
    for j in range(x.max_scale + 1):
        m = np.abs(x.level(j))
        kinks.append(m[m > 0] * 2.0 ** (alpha * j))
    cands = np.unique(np.concatenate(kinks + [np.linspace(0.0, top, 65)]))
    vals = np.array([objective(t) for t in cands])
    i = int(np.argmin(vals))
    lo = cands[max(i - 1, 0)]
    hi = cands[min(i + 1, cands.size - 1)]
    t_best, f_best = float(cands[i]), float(vals[i])
    if hi > lo:
        t_g, f_g = _golden_min(objective, float(lo), float(hi), 1e-6)
        if f_g < f_best:
            t_best, f_best = t_g, f_g
    x1, x2 = threshold_split(x, alpha, t_best)
    total = besov_norm(x1, s, p0) + besov_sup(x2, alpha)
    return SplitResult(x1, x2, t_best, total, s, p0)


@dataclass(frozen=True)
class DominationWitness:
    holds: bool
    distance: float
    bound: float

    def __bool__(self) -> bool:
        return self.holds


def besov_dominates_d(x: TreeSequence, alpha: float, beta: float, s: float, p: float) -> DominationWitness:
    """Check ``d_{alpha,beta}(x) <= ||x||_{b^{s/p}_{p,inf}}^{p/(p+1)}`` (4 ulp slack)."""
    if not beta >= alpha * p + 1.0 - s - 1e-12:
        raise ValueError(f"hypothesis beta >= alpha p + 1 - s fails: {beta} < {alpha * p + 1.0 - s}")
    dist = distance_d(x, alpha, beta)
    bound = besov_norm(x, s / p, p) ** (p / (p + 1.0))
    slack = 4.0 * np.spacing(max(bound, dist))
    return DominationWitness(bool(dist <= bound + slack), float(dist), float(bound))
