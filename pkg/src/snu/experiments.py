"""Finite-scale executions of the constructive convexity and duality arguments."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from snu.asymptotic import membership_report
from snu.metrics import distance_d
from snu.profile import Profile, convexity_index, dual_profile, shifted_dual
from snu.treeseq import (
    TreeSequence,
    disjoint_sum,
    random_sequence,
    scale_rng,
    spike_sequence,
    staircase_sequence,
)

__all__ = [
    "ConfigError",
    "ConvexityConfig",
    "ExperimentReport",
    "NoViolationFound",
    "NonnormParams",
    "PairingResult",
    "SamplingError",
    "boundedness_experiment",
    "convexity_boundedness",
    "divergence_witness",
    "fit_exponent",
    "nonconvexity_witness",
    "nonnormability_witness",
    "pairing",
    "symmetry_probe",
    "worker_count",
]

MAX_RETRIES = 100


class ConfigError(ValueError):
    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}")


class NoViolationFound(RuntimeError):
    pass


class SamplingError(RuntimeError):
    pass


def worker_count() -> int:
    raw = os.environ.get("SNU_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SNU_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"SNU_THREADS must be a positive integer, got {raw!r}")
    return n


def _pmap(fn: Callable, items: Iterable) -> list:
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log2 y`` against ``log2 x``."""
    lx, ly = np.log2(np.asarray(xs, float)), np.log2(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


def _jsonable(v: Any) -> Any:
    if isinstance(v, Profile):
        return v.to_dict()
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class ExperimentReport:
    name: str
    rows: list[tuple]
    columns: tuple[str, ...]
    passed: bool
    tolerance: float | None = None
    fitted_exponent: float | None = None
    theory_exponent: float | None = None
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r[0])

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "name": self.name,
                "config": self.config,
                "columns": list(self.columns),
                "rows": [list(r) for r in self.rows],
                "fitted_exponent": self.fitted_exponent,
                "theory_exponent": self.theory_exponent,
                "tolerance": self.tolerance,
                "verdict": self.verdict,
                "extra": self.extra,
            }
        )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------------------
# non-convexity: p-convex combinations of disjoint staircases blow up


@dataclass(frozen=True)
class ConvexityConfig:
    nu: Profile
    p: float
    alpha: float
    alpha_prime: float
    eps: float
    lam: float
    N_list: tuple[int, ...]

    def __post_init__(self):
        nu = self.nu
        if not 0 < self.p <= 1:
            raise ConfigError("p-in-(0,1]", f"p = {self.p}")
        if not self.eps > 0:
            raise ConfigError("eps-positive", f"eps = {self.eps}")
        if not self.lam > 0:
            raise ConfigError("lambda-positive", f"lambda = {self.lam}")
        if not self.N_list or any(int(n) < 1 for n in self.N_list):
            raise ConfigError("N-positive", f"N_list = {self.N_list}")
        if not nu.alpha_min <= self.alpha < self.alpha_prime:
            raise ConfigError(
                "alpha_min<=alpha<alpha'",
                f"alpha_min = {nu.alpha_min}, alpha = {self.alpha}, alpha' = {self.alpha_prime}",
            )
        if not float(nu(self.alpha_prime)) + self.eps < 1:
            raise ConfigError("nu(alpha')+eps<1", f"nu(alpha') + eps = {float(nu(self.alpha_prime)) + self.eps}")
        if not self.t < self.p * self.s:
            raise ConfigError("t<p*s", f"t = {self.t} >= p s = {self.p * self.s}: p does not exceed the local slope")
        lhs = self.p / (self.p + 1) * (self.s + self.t)
        if not lhs < 1 - float(nu(self.alpha)):
            raise ConfigError("p/(p+1)(s+t)<1-nu(alpha)", f"{lhs} >= {1 - float(nu(self.alpha))}")

    @property
    def s(self) -> float:
        return self.alpha_prime - self.alpha

    @property
    def t(self) -> float:
        return float(self.nu(self.alpha_prime)) - float(self.nu(self.alpha)) + self.eps

    @property
    def theory_exponent(self) -> float:
        p, s, t = self.p, self.s, self.t
        return (p * s - t) / (p * (s + t))

    def focal_scale(self, N: int) -> int:
        p = self.p
        return math.ceil(((p + 1) / p * math.log2(N) - math.log2(self.lam)) / (self.s + self.t))

    def first_disjoint_scale(self, N: int) -> int:
        """Smallest ``j`` with ``2^j >= N 2^{nu(alpha) j}``."""
        level = float(self.nu(self.alpha))
        j = 0
        while 2.0**j < N * 2.0 ** (level * j) * (1 - 1e-12):
            j += 1
        return j

    def to_dict(self) -> dict:
        return {
            "nu": self.nu.to_dict(),
            "p": self.p,
            "alpha": self.alpha,
            "alpha_prime": self.alpha_prime,
            "eps": self.eps,
            "lambda": self.lam,
            "N_list": list(self.N_list),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ConvexityConfig:
        try:
            return cls(
                Profile.from_dict(d["nu"]),
                float(d["p"]),
                float(d["alpha"]),
                float(d["alpha_prime"]),
                float(d["eps"]),
                float(d.get("lambda", 1.0)),
                tuple(int(n) for n in d["N_list"]),
            )
        except KeyError as exc:
            raise ConfigError("schema", f"missing field {exc.args[0]!r}") from None


def nonconvexity_witness(cfg: ConvexityConfig, J: int, tolerance: float = 0.15) -> ExperimentReport:
    beta = float(cfg.nu(cfg.alpha_prime)) + cfg.eps
    for N in cfg.N_list:
        jf, j0 = cfg.focal_scale(N), cfg.first_disjoint_scale(N)
        if jf > J:
            raise ConfigError("focal-scale<=J", f"N = {N}: focal scale {jf} exceeds J = {J}")
        if jf < j0:
            raise ConfigError("focal-scale>=j0", f"N = {N}: focal scale {jf} below first disjoint scale {j0}")
    base = staircase_sequence(cfg.nu, J, cfg.alpha, amplitude=cfg.lam)

    def one(N: int) -> tuple:
        j0 = cfg.first_disjoint_scale(N)
        x = disjoint_sum(base, N, j0) * N ** (-1.0 / cfg.p)
        d = distance_d(x, cfg.alpha_prime, beta)
        jf = cfg.focal_scale(N)
        level = float(cfg.nu(cfg.alpha))
        C = cfg.lam * N ** (-1.0 / cfg.p) * 2.0 ** (cfg.s * jf)
        Cp = N * 2.0 ** (-cfg.t * jf) * math.floor(2.0 ** (level * jf) + 1e-9) / 2.0 ** (level * jf)
        lower = 2.0 ** (-cfg.t - 1) * cfg.lam ** (cfg.t / (cfg.s + cfg.t)) * N**cfg.theory_exponent
        return (N, d, min(C, Cp), lower, jf, j0)

    rows = _pmap(one, sorted(set(cfg.N_list)))
    fitted = fit_exponent([r[0] for r in rows], [r[1] for r in rows])
    theory = cfg.theory_exponent
    measured = [r[1] for r in rows]
    monotone = all(b >= a * (1 - 1e-12) for a, b in zip(measured[1:], measured[2:]))
    bounded_below = all(r[1] >= r[2] * (1 - 1e-9) for r in rows)
    passed = abs(fitted - theory) <= tolerance * theory and monotone
    return ExperimentReport(
        "nonconvexity",
        rows,
        ("N", "distance", "focal_lower_bound", "asymptotic_lower_bound", "focal_scale", "j0"),
        passed,
        tolerance,
        fitted,
        theory,
        config=cfg.to_dict() | {"J": J},
        extra={"monotone": monotone, "above_focal_bound": bounded_below, "s": cfg.s, "t": cfg.t},
    )


# ---------------------------------------------------------------------------
# sampling inside finite intersections of d-balls


def _ladder_ok(x: TreeSequence, ladder: Sequence[tuple[float, float]], radius: float) -> bool:
    return all(distance_d(x, a, b) < radius for a, b in ladder)


def sample_in_balls(
    nu: Profile, ladder: Sequence[tuple[float, float]], radius: float, J: int, seed: int
) -> TreeSequence:
    """A random sequence rescaled by halving until it lies in every ball."""
    x = random_sequence(nu, J, seed)
    for _ in range(MAX_RETRIES):
        if _ladder_ok(x, ladder, radius):
            return x
        x = x * 0.5
    raise SamplingError(f"no element of the ball intersection after {MAX_RETRIES} halvings (seed {seed})")


def _beta(nu: Profile, alpha: float, shift: float) -> float:
    v = float(nu(alpha))
    return -math.inf if v == -math.inf else v + shift


def p_simplex_weights(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Positive ``theta`` with ``sum theta^p = 1``."""
    u = 1.0 - rng.random(n)
    return (u / u.sum()) ** (1.0 / p)


def convexity_boundedness(
    nu: Profile,
    M: float,
    eps: float,
    alpha: float,
    N: int,
    seed: int = 0,
    J: int = 10,
    trials: int = 100,
    p: float | None = None,
) -> ExperimentReport:
    """Random ``p``-convex combinations of ladder-ball elements stay in the ``M``-ball."""
    p0 = convexity_index(nu)
    if p0 <= 0:
        raise ValueError("convexity index is 0: no locally convex neighbourhood base to test")
    if not eps > 0 or not M > 0 or N < 1:
        raise ValueError("need eps > 0, M > 0, N >= 1")
    level = float(nu(alpha))
    if not (nu.alpha_min <= alpha and level < 1):
        raise ValueError(f"need alpha_min <= alpha with nu(alpha) < 1, got alpha = {alpha}")
    p_used = p0 if p is None else float(p)
    L = math.ceil((alpha - nu.alpha_min) * 2 * p0 / eps)
    lam = M / (L + 2)
    ladder = []
    for l in range(-1, L + 1):
        a = nu.alpha_min + eps / (2 * p0) * l
        ladder.append((a, _beta(nu, a, eps / 2)))
    target = level + eps

    def one(trial: int) -> tuple:
        rng = scale_rng(seed, 1_000_003 + trial)
        seeds = rng.integers(0, 2**62, size=N)
        xs = [sample_in_balls(nu, ladder, lam, J, int(s)) for s in seeds]
        theta = p_simplex_weights(rng, N, p_used)
        comb = np.zeros_like(xs[0].data)
        for th, x in zip(theta, xs):
            comb += th * x.data
        d = distance_d(TreeSequence._wrap(comb, J), alpha, target)
        return (trial, d, M)

    rows = _pmap(one, range(trials))
    violations = sum(1 for r in rows if r[1] > M)
    worst = max(r[1] for r in rows)
    return ExperimentReport(
        "boundedness",
        rows,
        ("trial", "distance", "M"),
        violations == 0,
        0.0,
        config={"nu": nu, "M": M, "eps": eps, "alpha": alpha, "N": N, "seed": seed, "J": J, "trials": trials, "p": p_used},
        extra={"p0": p0, "L": L, "lambda": lam, "max_observed": worst, "violations": violations},
    )


# ---------------------------------------------------------------------------
# non-normability


@dataclass(frozen=True)
class NonnormParams:
    ladder_alphas: tuple[float, ...]
    ladder_eps: tuple[float, ...]
    delta0: float
    alpha_prime: float
    alpha_second: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> NonnormParams:
        try:
            return cls(
                tuple(float(a) for a in d["ladder_alphas"]),
                tuple(float(e) for e in d["ladder_eps"]),
                float(d["delta0"]),
                float(d["alpha_prime"]),
                None if d.get("alpha_second") is None else float(d["alpha_second"]),
            )
        except KeyError as exc:
            raise ConfigError("schema", f"missing field {exc.args[0]!r}") from None


def entry_scale(delta0: float, beta: float) -> float:
    """Scale from which a single ``delta0``-sized spike lies in the ``delta0``-ball of ``d_{., beta}``."""
    return -math.log2(delta0) / beta


def nonnormability_witness(nu: Profile, params: NonnormParams, m_list: Sequence[int], J: int) -> ExperimentReport:
    a = np.asarray(params.ladder_alphas, float)
    e = np.asarray(params.ladder_eps, float)
    if a.size == 0 or a.size != e.size:
        raise ConfigError("ladder", "ladder alphas and eps must be non-empty and of equal length")
    if np.any(np.diff(a) <= 0) or np.any(e <= 0):
        raise ConfigError("ladder", "ladder alphas must increase strictly and eps be positive")
    if not 0 < params.delta0 < 1:
        raise ConfigError("delta0-in-(0,1)", f"delta0 = {params.delta0}")
    below = a[a < nu.alpha_min]
    ap = params.alpha_prime
    if below.size:
        source = float(below.max())
        case = "first"
    else:
        if params.alpha_second is None:
            raise ConfigError("alpha''", "all ladder alphas are >= alpha_min: alpha_second is required")
        source = params.alpha_second
        case = "second"
    if not source < ap < nu.alpha_min:
        raise ConfigError("alpha_n<alpha'<alpha_min", f"need {source} < {ap} < {nu.alpha_min}")
    if any(not 0 <= m <= J for m in m_list):
        raise ConfigError("m-in-[0,J]", f"m_list = {list(m_list)}, J = {J}")
    betas = [_beta(nu, float(al), float(ep)) for al, ep in zip(a, e)]
    thresholds = [0.0 if b == -math.inf else entry_scale(params.delta0, b) for b in betas]
    m_entry = max(thresholds)
    rows = []
    ok = True
    for m in sorted(set(int(m) for m in m_list)):
        x = spike_sequence(J, m, source, params.delta0)
        inside = all(distance_d(x, float(al), b) <= params.delta0 for al, b in zip(a, betas))
        d = distance_d(x, ap, -math.inf)
        theory = params.delta0 * 2.0 ** ((ap - source) * m)
        ok &= abs(d - theory) <= 1e-12 * theory
        if m >= m_entry:
            ok &= inside
        rows.append((m, d, theory, inside))
    ms = [r[0] for r in rows]
    fitted = None
    if len(rows) >= 2:
        fitted = float(np.polyfit(ms, np.log2([r[1] for r in rows]), 1)[0])
    return ExperimentReport(
        "nonnorm",
        rows,
        ("m", "distance", "theory", "in_ladder"),
        bool(ok),
        1e-12,
        fitted,
        ap - source,
        config={"nu": nu, **asdict(params), "m_list": list(m_list), "J": J},
        extra={"case": case, "source_alpha": source, "entry_scales": thresholds, "entry_scale": m_entry},
    )


# ---------------------------------------------------------------------------
# duality


@dataclass(frozen=True)
class PairingResult:
    per_scale: np.ndarray
    cumulative: np.ndarray

    @property
    def total(self) -> complex:
        return complex(self.cumulative[-1])


def pairing(x: TreeSequence, y: TreeSequence, weighted: bool = False) -> PairingResult:
    if x.max_scale != y.max_scale:
        raise ValueError(f"max_scale mismatch: {x.max_scale} vs {y.max_scale}")
    sums = np.array([np.vdot(y.level(j), x.level(j)) for j in range(x.max_scale + 1)], dtype=np.complex128)
    if weighted:
        sums = sums * 2.0 ** -np.arange(x.max_scale + 1)
    return PairingResult(sums, np.cumsum(sums))


def _alpha_prime_grid(nu_dual: Profile, step: float, lo: float, hi: float) -> np.ndarray:
    pts = [np.arange(lo, hi + step / 2, step)]
    br = nu_dual.alphas
    pts.append(br)
    pts.append((br[:-1] + br[1:]) / 2)
    g = np.unique(np.concatenate(pts))
    return g[(g >= lo) & (g <= hi)]


@dataclass(frozen=True)
class Selection:
    n: int
    scale: int
    alpha_prime: float
    eps: float
    in_I: bool
    alpha: float
    placed: int
    scale_sum: float


def divergence_witness(
    y: TreeSequence,
    nu: Profile,
    eps_schedule: Sequence[float] = (0.02, 0.01),
    J: int | None = None,
    grid_step: float = 0.01,
    tol: float = 0.1,
) -> tuple[TreeSequence, ExperimentReport]:
    """Build ``x`` in S^nu whose pairing with ``y`` gains at least 1 per selected scale."""
    J = y.max_scale if J is None else int(J)
    if J > y.max_scale:
        raise ValueError(f"J = {J} exceeds the sequence depth {y.max_scale}")
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be non-empty and positive")
    nd = dual_profile(nu)
    amin_d = nd.alpha_min
    mags_all = [np.abs(y.level(j)) for j in range(J + 1)]
    out = np.zeros((1 << (J + 1)) - 1, dtype=np.complex128)
    selections: list[Selection] = []
    used = set()
    for j in range(1, J + 1):
        eps = eps_schedule[len(selections) % len(eps_schedule)]
        mags = mags_all[j]
        if not np.any(mags > 0):
            continue
        # below lo no coefficient reaches 2^(-alpha' j)
        lo = -math.log2(float(mags.max())) / j
        hi = max(lo, float(nd.alphas[-1]) + eps + 1.0)
        grid = _alpha_prime_grid(nd, grid_step, math.floor(lo / grid_step) * grid_step, hi)
        grid = np.unique(np.concatenate([grid, grid + eps]))  # dual kinks sit at alpha' - eps
        srt = np.sort(mags[mags > 0])
        counts = srt.size - np.searchsorted(srt, 2.0 ** (-grid * j), side="left")
        dual_vals = np.asarray(nd(grid - eps), float)
        with np.errstate(over="ignore"):
            allow = np.where(dual_vals == -math.inf, 0.0, 2.0 ** (dual_vals * j))
        viol = np.flatnonzero(counts > allow)
        if viol.size == 0:
            continue
        i = int(viol[0])
        ap, dv = float(grid[i]), float(dual_vals[i])
        hit = np.flatnonzero(mags >= 2.0 ** (-ap * j))
        in_I = dv == -math.inf
        if in_I:
            a_n, want = -ap, 1
        else:
            a_n, want = dv - ap, math.ceil(2.0 ** (dv * j) - 1e-9)
        pos = hit[:want]
        lev = y.level(j)[pos]
        out[(1 << j) - 1 + pos] = 2.0 ** (-a_n * j) * lev / np.abs(lev)
        ssum = float(np.real(np.vdot(y.level(j)[pos], out[(1 << j) - 1 + pos])))
        selections.append(Selection(len(selections), j, ap, eps, bool(in_I), a_n, int(pos.size), ssum))
        used.add(eps)
    missing = [e for e in eps_schedule if e not in used]
    if missing:
        raise NoViolationFound(f"no violation of the shifted dual balls within scales <= {J} for eps in {missing}")
    x = TreeSequence._wrap(out, J)
    mem = membership_report(x, nu, tol)
    pr = pairing(x, y)
    sums_ok = all(s.scale_sum >= 1 - 1e-12 for s in selections)
    rows = [(s.scale, s.scale_sum, 1.0, s.alpha_prime, s.eps, "I" if s.in_I else "J", s.alpha, s.placed) for s in selections]
    report = ExperimentReport(
        "duality-witness",
        rows,
        ("scale", "scale_sum", "lower_bound", "alpha_prime", "eps", "set", "alpha", "placed"),
        sums_ok and mem.passed,
        1e-12,
        config={"nu": nu, "eps_schedule": eps_schedule, "J": J, "tol": tol},
        extra={
            "selected": len(selections),
            "pairing_total": float(np.real(pr.total)),
            "membership": "PASS" if mem.passed else "FAIL",
            "membership_failures": [(v.alpha, v.nu_hat, v.nu) for v in mem.failures],
        },
    )
    return x, report


def _geom(r: float) -> float:
    return 1.0 / (1.0 - r)


def pairing_bound(nu: Profile, eps: float, A: float) -> float:
    """Sum over the four case bounds of the band-by-band pairing estimate."""
    nd = dual_profile(nu)
    L = math.ceil(4 / eps)
    g1 = _geom(2.0 ** (-eps / 4))
    g7 = _geom(2.0 ** (-7 * eps / 4))
    total = 0.0
    for l in range(L + 1):
        a = nu.alpha_min + eps / 4 * l
        for lp in range(L + 1):
            ap = nd.alpha_min + 2 * eps + eps / 4 * lp
            if float(nu(a)) <= float(nd(ap - eps)):
                total += A * g1
            else:
                total += A * A * g1
    total += (L + 2) * A * g7
    total += (L + 1) * A * A * g7
    return total


def boundedness_experiment(
    nu: Profile, eps: float, y_seed: int = 0, x_trials: int = 50, J: int = 14, y_scale: float = 1.0
) -> ExperimentReport:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    nd = dual_profile(nu)
    y = random_sequence(shifted_dual(nu, 2 * eps), J, y_seed) * y_scale
    L = math.ceil(4 / eps)
    dual_ladder = []
    for lp in range(-1, L + 1):
        ap = nd.alpha_min + 2 * eps + eps / 4 * lp
        dual_ladder.append((ap, _beta(nd, ap - 2 * eps, eps / 4)))
    dmax = max(distance_d(y, a, b) for a, b in dual_ladder)
    A = dmax * (1 + 1e-6) + 1e-12
    ladder = []
    for l in range(-1, L + 1):
        a = nu.alpha_min + eps / 4 * l
        ladder.append((a, _beta(nu, a, eps / 4)))
    bound = pairing_bound(nu, eps, A)

    def one(trial: int) -> tuple:
        seed = int(scale_rng(y_seed, 2_000_003 + trial).integers(0, 2**62))
        x = sample_in_balls(nu, ladder, 1.0, J, seed)
        return (trial, abs(pairing(x, y).total), bound)

    rows = _pmap(one, range(x_trials))
    worst = max((r[1] for r in rows), default=0.0)
    return ExperimentReport(
        "duality-bound",
        rows,
        ("trial", "abs_pairing", "bound"),
        all(r[1] <= bound for r in rows),
        0.0,
        config={"nu": nu, "eps": eps, "y_seed": y_seed, "x_trials": x_trials, "J": J},
        extra={"A": A, "L": L, "bound": bound, "max_observed": worst},
    )


# ---------------------------------------------------------------------------
# reflection symmetry between nu and its dual


@dataclass(frozen=True)
class ProbePoint:
    alpha: float
    beta: float
    status: str  # PASS, FAIL or EXCLUDED
    reason: str
    dual_value: float | None


def _probe_point(nu: Profile, nd: Profile, alpha: float, tol: float) -> ProbePoint:
    if alpha < nu.alpha_min:
        return ProbePoint(alpha, -math.inf, "EXCLUDED", "below alpha_min", None)
    i = int(np.searchsorted(nu.alphas, alpha, side="right") - 1)
    beta = float(nu(alpha))
    slope = float(nu.slopes[i])
    start = float(nu.alphas[i])
    end = float(nu.alphas[i + 1]) if i + 1 < nu.alphas.size else math.inf
    if not (start < alpha < end):
        return ProbePoint(alpha, beta, "EXCLUDED", "breakpoint", None)
    if not 0 < beta < 1:
        return ProbePoint(alpha, beta, "EXCLUDED", "value outside (0,1)", None)
    if slope <= 0:
        return ProbePoint(alpha, beta, "EXCLUDED", "flat segment", None)
    if slope <= 1:
        return ProbePoint(alpha, beta, "EXCLUDED", "slope <= 1 maps to a jump of the dual", None)
    # the reflected point is reached only if nu - alpha beats every earlier value
    g_here = beta - alpha
    prev = nu.values[:i + 1] - nu.alphas[:i + 1]
    prev_ends = nu.end_limits()[:i] - nu.alphas[1 : i + 1] if i > 0 else np.empty(0)
    shadow = max(float(np.max(prev)), float(np.max(prev_ends)) if prev_ends.size else -math.inf)
    if not g_here > shadow + 1e-12:
        return ProbePoint(alpha, beta, "EXCLUDED", "shadowed by an earlier part of the graph", None)
    dv = float(nd(beta - alpha))
    return ProbePoint(alpha, beta, "PASS" if abs(dv - beta) <= tol else "FAIL", "", dv)


def symmetry_probe(nu: Profile, grid: Sequence[float] | None = None, tol: float = 1e-9) -> ExperimentReport:
    if grid is None:
        top = nu.alpha_max if math.isfinite(nu.alpha_max) else float(nu.alphas[-1]) + 1.0
        grid = np.arange(nu.alpha_min, top, 1e-3)
    nd = dual_profile(nu)
    pts = [_probe_point(nu, nd, float(a), tol) for a in grid]
    checked = [p for p in pts if p.status != "EXCLUDED"]
    rows = [(p.alpha, p.beta, p.dual_value if p.dual_value is not None else math.nan, p.status) for p in pts]
    return ExperimentReport(
        "symmetry",
        rows,
        ("alpha", "nu", "dual_at_reflection", "status"),
        all(p.status == "PASS" for p in checked),
        tol,
        config={"nu": nu, "tol": tol},
        extra={
            "eligible": len(checked),
            "excluded": len(pts) - len(checked),
            "failures": [(p.alpha, p.beta, p.dual_value) for p in checked if p.status == "FAIL"],
        },
    )
