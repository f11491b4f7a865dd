"""Command-line interface: ``snu profile|seq|experiment ...``.

Exit codes: 0 success, 1 environment/input error, 2 property or experiment
FAIL, 64 usage error.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from snu import asymptotic, experiments, metrics, profile, treeseq
from snu.profile import Profile, ProfileError

EXIT_OK, EXIT_ENV, EXIT_FAIL, EXIT_USAGE = 0, 1, 2, 64


class InputError(Exception):
    """Bad file, bad JSON or bad configuration; maps to exit 1."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: no such file")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _load_profile(path: str) -> Profile:
    try:
        return Profile.from_dict(_read_json(path))
    except ProfileError as exc:
        raise InputError(f"{path}: {exc}") from None


def _profile_field(value, base: Path) -> Profile:
    if isinstance(value, str):
        return _load_profile(str(base / value))
    try:
        return Profile.from_dict(value)
    except ProfileError as exc:
        raise InputError(f"profile 'nu': {exc}") from None


def _load_sequence(path: str) -> treeseq.TreeSequence:
    if not Path(path).is_file():
        raise InputError(f"{path}: no such file")
    try:
        return treeseq.read_sequence(path)
    except treeseq.FormatError as exc:
        raise InputError(str(exc)) from None


def _parse_grid(spec: str) -> np.ndarray:
    try:
        start, stop, step = (float(s) for s in spec.split(":"))
    except ValueError:
        raise click.BadParameter(f"expected start:stop:step, got {spec!r}", param_hint="--pgrid") from None
    if step <= 0 or stop < start:
        raise click.BadParameter(f"empty grid {spec!r}", param_hint="--pgrid")
    n = int(math.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1)


def _write_curve(path: str, xs, ys, header=("x", "y")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, y in zip(xs, ys):
            w.writerow([_fmt(x), _fmt(y)])


@click.group()
def cli():
    """Profiles, tree sequences and convexity/duality experiments for S^nu spaces."""


# ---------------------------------------------------------------------------
# profile


@cli.group("profile")
def profile_group():
    """Transforms of a piecewise-linear profile given as JSON."""


@profile_group.command("dual")
@click.option("--in", "src", required=True, help="Profile JSON.")
@click.option("--out", required=True, help="Destination for the dual profile JSON.")
@click.option("--curve", default=None, help="CSV of sampled dual values (default: OUT with .csv suffix).")
@click.option("--step", default=1e-3, show_default=True, type=float)
def profile_dual(src, out, curve, step):
    """Write the dual profile and a sampled curve."""
    nu = _load_profile(src)
    nd = profile.dual_profile(nu)
    profile.save_profile(nd, out)
    lo = nd.alpha_min - 0.5
    hi = (nd.alpha_max if math.isfinite(nd.alpha_max) else float(nd.alphas[-1])) + 0.5
    grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    _write_curve(curve or str(Path(out).with_suffix(".csv")), grid, nd(grid), ("alpha_prime", "nu_prime"))
    return EXIT_OK


@profile_group.command("conjugate")
@click.option("--in", "src", required=True, help="Profile JSON.")
@click.option("--pgrid", default="0.01:10:0.01", show_default=True, help="start:stop:step")
@click.option("--out", default=None, help="CSV destination (stdout if omitted).")
def profile_conjugate(src, pgrid, out):
    """Tabulate the concave conjugate eta(p)."""
    nu = _load_profile(src)
    ps = _parse_grid(pgrid)
    if ps[0] <= 0:
        raise click.BadParameter("p must be positive", param_hint="--pgrid")
    eta = profile.concave_conjugate(nu, ps)
    if out is None:
        w = csv.writer(sys.stdout)
        w.writerow(["p", "eta"])
        for p, e in zip(ps, eta):
            w.writerow([_fmt(p), _fmt(e)])
    else:
        _write_curve(out, ps, eta, ("p", "eta"))
    return EXIT_OK


@profile_group.command("p0")
@click.option("--in", "src", required=True, help="Profile JSON.")
def profile_p0(src):
    """Print the convexity index."""
    click.echo(_fmt(profile.convexity_index(_load_profile(src))))
    return EXIT_OK


@profile_group.command("check")
@click.option("--in", "src", required=True, help="Profile JSON.")
@click.option("--step", default=1e-3, show_default=True, type=float)
@click.option("--tol", default=1e-9, show_default=True, type=float)
def profile_check(src, step, tol):
    """Grid-check the properties of the dual profile."""
    nu = _load_profile(src)
    results = profile.check_dual_properties(nu, step=step, tol=tol, pair_step=step)
    for r in results:
        line = f"{r.name}: {'PASS' if r.passed else 'FAIL'}"
        if not r.passed:
            line += " at " + ", ".join(_fmt(v) for v in r.witness)
        click.echo(line)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# seq


@cli.group("seq")
def seq_group():
    """Generate and analyse tree sequences (SNU1 binary or CSV)."""


@seq_group.command("generate")
@click.option("--kind", required=True, type=click.Choice(["staircase", "spike", "random"]))
@click.option("--profile", "prof", default=None, help="Profile JSON (staircase, random).")
@click.option("--J", "J", default=16, show_default=True, type=click.IntRange(0, treeseq.MAX_SCALE))
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0, 2**64 - 1))
@click.option("--alpha", default=None, type=float, help="Exponent (staircase, spike).")
@click.option("--m", default=None, type=int, help="Spike scale.")
@click.option("--amplitude", default=1.0, show_default=True, type=float)
@click.option("--out", required=True, help="Destination (.csv selects the CSV format).")
def seq_generate(kind, prof, J, seed, alpha, m, amplitude, out):
    """Write a generated sequence."""
    if kind in ("staircase", "random") and prof is None:
        raise click.UsageError(f"--kind {kind} requires --profile")
    if kind in ("staircase", "spike") and alpha is None:
        raise click.UsageError(f"--kind {kind} requires --alpha")
    if kind == "spike":
        if m is None:
            raise click.UsageError("--kind spike requires --m")
        seq = treeseq.spike_sequence(J, m, alpha, amplitude)
    elif kind == "staircase":
        seq = treeseq.staircase_sequence(_load_profile(prof), J, alpha, amplitude)
    else:
        seq = treeseq.random_sequence(_load_profile(prof), J, seed) * amplitude
    treeseq.write_sequence(seq, out)
    return EXIT_OK


@seq_group.command("analyze")
@click.option("--in", "src", required=True, help="Sequence file.")
@click.option("--profile", "prof", required=True, help="Profile JSON to test membership against.")
@click.option("--out", default=None, help="CSV for the profile estimate.")
@click.option("--tol", default=asymptotic.DEFAULT_TOL, show_default=True, type=float)
@click.option("--j-lo", default=None, type=int)
@click.option("--j-hi", default=None, type=int)
def seq_analyze(src, prof, out, tol, j_lo, j_hi):
    """Estimate the asymptotic profile and report a membership verdict."""
    x = _load_sequence(src)
    nu = _load_profile(prof)
    window = None
    if j_lo is not None or j_hi is not None:
        window = (j_lo if j_lo is not None else max(1, x.max_scale // 2), j_hi if j_hi is not None else x.max_scale)
    try:
        rep = asymptotic.membership_report(x, nu, tol, j_window=window)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    if out:
        rep.estimate.to_csv(out)
    for v in rep.failures:
        click.echo(f"FAIL alpha={_fmt(v.alpha)} nu_hat={_fmt(v.nu_hat)} nu={_fmt(v.nu)} scale={v.scale} count={v.count}")
    click.echo("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAIL


@seq_group.command("norm")
@click.option("--in", "src", required=True, help="Sequence file.")
@click.option("--alpha", required=True, type=float)
@click.option("--beta", default=None, type=float, help="Distance d_{alpha,beta}; -inf gives the weighted sup norm.")
@click.option("--p", default=None, type=float, help="Besov exponent p.")
def seq_norm(src, alpha, beta, p):
    """Print a distance or Besov norm."""
    if (beta is None) == (p is None):
        raise click.UsageError("give exactly one of --beta and --p")
    x = _load_sequence(src)
    if beta is not None:
        if not (beta == -math.inf or beta >= 0):
            raise click.BadParameter("must be -inf or >= 0", param_hint="--beta")
        val = metrics.distance_d(x, alpha, beta)
    else:
        if not p > 0:
            raise click.BadParameter("must be positive", param_hint="--p")
        val = metrics.besov_norm(x, alpha, p)
    click.echo(_fmt(val))
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise InputError(f"config: missing field {key!r}")
    return cfg[key]


def _sequence_field(spec, base: Path) -> treeseq.TreeSequence:
    if isinstance(spec, str):
        return _load_sequence(str(base / spec))
    kind = _need(spec, "kind")
    J = int(_need(spec, "J"))
    if kind == "staircase":
        nu = _profile_field(_need(spec, "profile"), base)
        return treeseq.staircase_sequence(nu, J, float(_need(spec, "alpha")), float(spec.get("amplitude", 1.0)))
    if kind == "random":
        nu = _profile_field(_need(spec, "profile"), base)
        return treeseq.random_sequence(nu, J, int(spec.get("seed", 0)))
    raise InputError(f"config: unknown sequence kind {kind!r}")


def _run_experiment(name: str, cfg: dict, base: Path) -> experiments.ExperimentReport:
    nu = _profile_field(_need(cfg, "nu"), base)
    if name == "nonconvexity":
        conf = experiments.ConvexityConfig.from_dict(cfg | {"nu": nu.to_dict()})
        return experiments.nonconvexity_witness(conf, int(_need(cfg, "J")), float(cfg.get("tolerance", 0.15)))
    if name == "boundedness":
        return experiments.convexity_boundedness(
            nu,
            float(_need(cfg, "M")),
            float(_need(cfg, "eps")),
            float(_need(cfg, "alpha")),
            int(_need(cfg, "N")),
            int(cfg.get("seed", 0)),
            int(cfg.get("J", 10)),
            int(cfg.get("trials", 100)),
            None if cfg.get("p") is None else float(cfg["p"]),
        )
    if name == "nonnorm":
        params = experiments.NonnormParams.from_dict(cfg)
        return experiments.nonnormability_witness(nu, params, [int(m) for m in _need(cfg, "m_list")], int(_need(cfg, "J")))
    if name == "duality-witness":
        y = _sequence_field(_need(cfg, "y"), base)
        _, rep = experiments.divergence_witness(
            y, nu, [float(e) for e in cfg.get("eps_schedule", (0.02, 0.01))], cfg.get("J"), tol=float(cfg.get("tol", 0.1))
        )
        return rep
    if name == "duality-bound":
        return experiments.boundedness_experiment(
            nu, float(_need(cfg, "eps")), int(cfg.get("y_seed", 0)), int(cfg.get("x_trials", 50)), int(cfg.get("J", 14))
        )
    if name == "symmetry":
        grid = None
        if "grid" in cfg:
            g = cfg["grid"]
            grid = np.arange(float(g["start"]), float(g["stop"]), float(g["step"]))
        return experiments.symmetry_probe(nu, grid, float(cfg.get("tol", 1e-9)))
    raise AssertionError(name)


EXPERIMENTS = ["nonconvexity", "boundedness", "nonnorm", "duality-witness", "duality-bound", "symmetry"]


@cli.command("experiment")
@click.argument("name", type=click.Choice(EXPERIMENTS))
@click.option("--config", "config_path", required=True, help="Experiment configuration JSON.")
@click.option("--out", default=None, help="Report JSON (default: stdout).")
@click.option("--csv", "csv_path", default=None, help="Also write the report rows as CSV.")
def experiment_cmd(name, config_path, out, csv_path):
    """Run one experiment; exit 0 on PASS and 2 on FAIL."""
    cfg = _read_json(config_path)
    try:
        rep = _run_experiment(name, cfg, Path(config_path).parent)
    except experiments.ConfigError as exc:
        raise InputError(f"{config_path}: invalid configuration, violated invariant {exc}") from None
    except experiments.NoViolationFound as exc:
        click.echo(f"FAIL {exc}", err=True)
        return EXIT_FAIL
    if out:
        rep.to_json(out)
    else:
        click.echo(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    if csv_path:
        rep.to_csv(csv_path)
    click.echo(f"{name}: {rep.verdict}", err=True)
    return EXIT_OK if rep.passed else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="snu", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_ENV
    except click.ClickException as exc:
        exc.show()
        return EXIT_ENV
    except (InputError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ENV
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
