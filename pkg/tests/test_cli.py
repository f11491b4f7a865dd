import json
import shutil
import subprocess
import sys

import pytest

from conftest import CLAMP, HALF, SLOPE2
from snu.cli import main
from snu.profile import Profile, load_profile, save_profile, shifted_dual
from snu.treeseq import read_sequence


@pytest.fixture
def work(tmp_path):
    for name, nu in [("clamp", CLAMP), ("slope2", SLOPE2), ("half", HALF)]:
        save_profile(nu, tmp_path / f"{name}.json")
    return tmp_path


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_profile_p0(work, capsys):
    assert run(capsys, "profile", "p0", "--in", work / "clamp.json")[:2] == (0, "1\n")
    assert run(capsys, "profile", "p0", "--in", work / "half.json")[:2] == (0, "0.5\n")


def test_profile_dual(work, capsys):
    code, *_ = run(capsys, "profile", "dual", "--in", work / "slope2.json", "--out", work / "d.json")
    assert code == 0
    assert load_profile(work / "d.json") == Profile([(-1, 0, 2), (-0.5, 1, 0)])
    lines = (work / "d.csv").read_text().splitlines()
    assert lines[0] == "alpha_prime,nu_prime" and len(lines) > 100


def test_profile_conjugate(work, capsys):
    code, out, _ = run(capsys, "profile", "conjugate", "--in", work / "clamp.json", "--pgrid", "0.5:2:0.5")
    assert code == 0
    rows = [tuple(map(float, line.split(","))) for line in out.splitlines()[1:]]
    assert rows == [(0.5, 0.5), (1.0, 1.0), (1.5, 1.0), (2.0, 1.0)]


def test_profile_conjugate_bad_grid(work, capsys):
    assert run(capsys, "profile", "conjugate", "--in", work / "clamp.json", "--pgrid", "0:1")[0] == 64
    assert run(capsys, "profile", "conjugate", "--in", work / "clamp.json", "--pgrid", "0:1:0.5")[0] == 64


def test_profile_check(work, capsys):
    code, out, _ = run(capsys, "profile", "check", "--in", work / "slope2.json")
    assert code == 0
    assert all(line.endswith("PASS") for line in out.splitlines())


def test_profile_bad_json_names_field(work, capsys):
    (work / "bad.json").write_text(json.dumps({"alpha_min": 0, "segments": [{"alpha": 0, "value": 0}]}))
    code, _, err = run(capsys, "profile", "p0", "--in", work / "bad.json")
    assert code == 1 and "slope" in err
    (work / "junk.json").write_text("{")
    assert run(capsys, "profile", "p0", "--in", work / "junk.json")[0] == 1


def test_missing_profile_file(work, capsys):
    code, _, err = run(capsys, "profile", "p0", "--in", work / "nope.json")
    assert code == 1 and "nope.json" in err


def test_seq_spike_norm(work, capsys):
    f = work / "spike.snu"
    assert run(capsys, "seq", "generate", "--kind", "spike", "--J", 8, "--m", 5, "--alpha", 1, "--out", f)[0] == 0
    code, out, _ = run(capsys, "seq", "norm", "--in", f, "--alpha", 1, "--beta", "-inf")
    assert code == 0 and float(out) == 1.0
    code, out, _ = run(capsys, "seq", "norm", "--in", f, "--alpha", 2, "--beta", "-inf")
    assert float(out) == 2.0**5
    code, out, _ = run(capsys, "seq", "norm", "--in", f, "--alpha", 1, "--p", 1)
    assert code == 0 and float(out) == pytest.approx(2.0**-5)


def test_seq_norm_usage(work, capsys):
    f = work / "spike.snu"
    run(capsys, "seq", "generate", "--kind", "spike", "--J", 4, "--m", 2, "--alpha", 1, "--out", f)
    assert run(capsys, "seq", "norm", "--in", f, "--alpha", 1)[0] == 64
    assert run(capsys, "seq", "norm", "--in", f, "--alpha", 1, "--beta", 0, "--p", 1)[0] == 64
    assert run(capsys, "seq", "norm", "--in", f, "--alpha", 1, "--beta", -0.5)[0] == 64


def test_seq_analyze_staircase(work, capsys):
    f = work / "stair.snu"
    args = ("seq", "generate", "--kind", "staircase", "--profile", work / "clamp.json", "--J", 14, "--alpha", 0.5)
    assert run(capsys, *args, "--out", f)[0] == 0
    code, out, _ = run(capsys, "seq", "analyze", "--in", f, "--profile", work / "clamp.json", "--out", work / "e.csv")
    assert code == 0 and out.strip() == "PASS"
    assert (work / "e.csv").read_text().startswith("alpha,eps,nu_hat,limit")


def test_seq_analyze_fail_exit_code(work, capsys):
    f = work / "stair.csv"
    run(capsys, "seq", "generate", "--kind", "staircase", "--profile", work / "clamp.json", "--J", 12, "--alpha", 0.2, "--out", f)
    assert read_sequence(f).max_scale == 12
    code, out, _ = run(capsys, "seq", "analyze", "--in", f, "--profile", work / "half.json", "--tol", 0.05)
    assert code == 2 and out.splitlines()[-1] == "FAIL" and "scale=" in out


def test_seq_generate_usage_errors(work, capsys):
    assert run(capsys, "seq", "generate", "--kind", "bogus", "--out", work / "x.snu")[0] == 64
    assert run(capsys, "seq", "generate", "--kind", "random", "--out", work / "x.snu")[0] == 64
    assert run(capsys, "seq", "generate", "--kind", "spike", "--alpha", 1, "--out", work / "x.snu")[0] == 64
    assert run(capsys, "seq", "generate", "--kind", "spike", "--J", 25, "--m", 1, "--alpha", 1, "--out", work / "x.snu")[0] == 64
    assert run(capsys, "nonsense")[0] == 64


def test_seq_random_is_byte_identical(work, capsys):
    a, b = work / "a.snu", work / "b.snu"
    for f in (a, b):
        run(capsys, "seq", "generate", "--kind", "random", "--profile", work / "clamp.json", "--J", 12, "--seed", 7, "--out", f)
    assert a.read_bytes() == b.read_bytes()
    c = work / "c.snu"
    run(capsys, "seq", "generate", "--kind", "random", "--profile", work / "clamp.json", "--J", 12, "--seed", 8, "--out", c)
    assert a.read_bytes() != c.read_bytes()


def test_corrupt_sequence_is_env_error(work, capsys):
    (work / "bad.snu").write_bytes(b"XXXX\0\0\0\0")
    code, _, err = run(capsys, "seq", "norm", "--in", work / "bad.snu", "--alpha", 0, "--beta", 0)
    assert code == 1 and "magic" in err.lower()


# -- experiments ------------------------------------------------------------


def write_cfg(work, name, cfg):
    path = work / f"{name}.cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_symmetry(work, capsys):
    cfg = write_cfg(work, "sym", {"nu": "slope2.json"})
    code, *_ = run(capsys, "experiment", "symmetry", "--config", cfg, "--out", work / "r.json", "--csv", work / "r.csv")
    assert code == 0
    rep = json.loads((work / "r.json").read_text())
    assert rep["verdict"] == "PASS" and rep["extra"]["eligible"] > 0


def test_experiment_nonconvexity_halfslope(work, capsys):
    cfg = write_cfg(work, "nc", {
        "nu": "half.json", "p": 1, "alpha": 0, "alpha_prime": 0.5, "eps": 0.05, "lambda": 8,
        "N_list": [2**k for k in range(4, 11)], "J": 22,
    })
    code, *_ = run(capsys, "experiment", "nonconvexity", "--config", cfg, "--out", work / "r.json")
    assert code == 0
    rep = json.loads((work / "r.json").read_text())
    assert rep["fitted_exponent"] == pytest.approx(0.25, rel=0.15)


def test_experiment_config_invariant_named(work, capsys):
    cfg = write_cfg(work, "nc", {"nu": "half.json", "p": 0.5, "alpha": 0, "alpha_prime": 0.5, "eps": 0.05,
                                 "N_list": [16], "J": 22})
    code, _, err = run(capsys, "experiment", "nonconvexity", "--config", cfg)
    assert code == 1 and "t<p*s" in err


def test_experiment_boundedness(work, capsys):
    cfg = write_cfg(work, "b", {"nu": CLAMP.to_dict(), "M": 1, "eps": 0.2, "alpha": 0.5, "N": 4, "trials": 10})
    code, out, _ = run(capsys, "experiment", "boundedness", "--config", cfg)
    assert code == 0
    rep = json.loads(out)
    assert rep["extra"]["max_observed"] <= 1


def test_experiment_nonnorm(work, capsys):
    cfg = write_cfg(work, "nn", {"nu": "clamp.json", "ladder_alphas": [-1, 0], "ladder_eps": [0.1, 0.1],
                                 "delta0": 0.5, "alpha_prime": -0.5, "m_list": [10, 12], "J": 12})
    assert run(capsys, "experiment", "nonnorm", "--config", cfg)[0] == 0


def test_experiment_duality_witness(work, capsys):
    cfg = write_cfg(work, "dw", {
        "nu": "slope2.json",
        "y": {"kind": "staircase", "profile": {"alpha_min": -2, "segments": [{"alpha": -2, "value": 0.7, "slope": 0}]},
              "alpha": -0.75, "J": 14},
    })
    assert run(capsys, "experiment", "duality-witness", "--config", cfg)[0] == 0


def test_experiment_duality_witness_no_violation(work, capsys):
    save_profile(shifted_dual(SLOPE2, 0.04), work / "certified.json")
    cfg = write_cfg(work, "dw", {"nu": "slope2.json", "eps_schedule": [0.02],
                                 "y": {"kind": "random", "profile": "certified.json", "J": 16, "seed": 1}})
    code, _, err = run(capsys, "experiment", "duality-witness", "--config", cfg)
    assert code == 2 and "no violation" in err


def test_experiment_duality_bound(work, capsys):
    cfg = write_cfg(work, "db", {"nu": "clamp.json", "eps": 0.4, "x_trials": 10, "J": 10})
    assert run(capsys, "experiment", "duality-bound", "--config", cfg)[0] == 0


def test_experiment_missing_config(work, capsys):
    code, _, err = run(capsys, "experiment", "symmetry", "--config", work / "absent.json")
    assert code == 1 and "absent.json" in err


def test_experiment_missing_field(work, capsys):
    cfg = write_cfg(work, "x", {"nu": "clamp.json"})
    code, _, err = run(capsys, "experiment", "duality-bound", "--config", cfg)
    assert code == 1 and "eps" in err


def test_experiment_unknown_name(work, capsys):
    cfg = write_cfg(work, "x", {"nu": "clamp.json"})
    assert run(capsys, "experiment", "teleport", "--config", cfg)[0] == 64


def test_experiment_output_is_deterministic(work, capsys):
    cfg = write_cfg(work, "b", {"nu": "half.json", "M": 1, "eps": 0.2, "alpha": 1.0, "N": 3, "trials": 6, "seed": 4})
    run(capsys, "experiment", "boundedness", "--config", cfg, "--out", work / "1.json", "--csv", work / "1.csv")
    run(capsys, "experiment", "boundedness", "--config", cfg, "--out", work / "2.json", "--csv", work / "2.csv")
    assert (work / "1.json").read_bytes() == (work / "2.json").read_bytes()
    assert (work / "1.csv").read_bytes() == (work / "2.csv").read_bytes()


def test_bad_thread_env_is_env_error(work, capsys, monkeypatch):
    monkeypatch.setenv("SNU_THREADS", "zero")
    cfg = write_cfg(work, "db", {"nu": "clamp.json", "eps": 0.4, "x_trials": 3, "J": 8})
    assert run(capsys, "experiment", "duality-bound", "--config", cfg)[0] == 1


@pytest.mark.skipif(shutil.which("snu") is None, reason="console script not installed")
def test_console_script_exit_codes(work):
    ok = subprocess.run(["snu", "profile", "p0", "--in", str(work / "clamp.json")], capture_output=True, text=True)
    assert ok.returncode == 0 and ok.stdout == "1\n"
    assert subprocess.run(["snu", "bogus"], capture_output=True).returncode == 64
    mod = subprocess.run([sys.executable, "-m", "snu.cli", "profile", "p0", "--in", str(work / "nope.json")],
                         capture_output=True)
    assert mod.returncode == 1
