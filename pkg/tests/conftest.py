import numpy as np
import pytest
from hypothesis import strategies as st

from snu.profile import Profile, is_concave

CLAMP = Profile([(0, 0, 1), (1, 1, 0)])
SLOPE2 = Profile([(1, 0, 2), (1.5, 1, 0)])
HALF = Profile([(0, 0, 0.5), (2, 1, 0)])

CORPUS = {
    "clamp": CLAMP,
    "slope2": SLOPE2,
    "half": HALF,
    "concave4": Profile([(0, 0, 3), (0.1, 0.3, 1), (0.4, 0.6, 0.5), (1.2, 1, 0)]),
    "steep": Profile([(-0.5, 0, 10), (-0.45, 0.5, 2), (-0.3, 0.8, 0.25), (0.5, 1, 0)]),
    "capped": Profile([(0, 0, 1), (0.5, 0.5, 0)]),
    "constant": Profile([(0, 0.5, 0)]),
    "jump": Profile([(0, 0, 1), (0.3, 0.6, 1), (0.7, 1, 0)]),
    "plateaus": Profile([(0, 0, 0), (1, 0.3, 3), (1.1, 0.6, 0.5), (1.5, 0.8, 0), (2, 1, 0)]),
    "convex": Profile([(0, 0, 0.5), (1, 0.5, 1.5), (4 / 3, 1, 0)]),
    "lifted": Profile([(-1, 0.2, 0.2), (1, 0.6, 0), (2, 1, 0)]),
    "mixed": Profile([(0, 0, 0.25), (1, 0.25, 4), (1.1, 0.65, 0.5), (1.5, 0.85, 0), (3, 1, 0)]),
}
CONCAVE = {k: v for k, v in CORPUS.items() if is_concave(v)}
NONCONCAVE = {k: v for k, v in CORPUS.items() if not is_concave(v)}


@pytest.fixture(params=sorted(CORPUS))
def corpus_profile(request):
    return CORPUS[request.param]


@pytest.fixture(params=sorted(CONCAVE))
def concave_profile(request):
    return CONCAVE[request.param]


@st.composite
def profiles(draw, max_segments=4, allow_jumps=True):
    """Random admissible piecewise-linear profiles on a coarse lattice."""
    n = draw(st.integers(1, max_segments))
    start = draw(st.integers(-8, 8)) / 4
    widths = [draw(st.integers(1, 8)) / 8 for _ in range(n - 1)]
    alphas = start + np.concatenate([[0.0], np.cumsum(widths)])
    segs = []
    v = draw(st.integers(0, 7 if allow_jumps else 0)) / 8
    for i in range(n):
        if i == n - 1:
            segs.append((float(alphas[i]), v, 0.0))
            break
        w = widths[i]
        room = 1.0 - v
        s = draw(st.integers(0, 8)) / 8 * room / w
        segs.append((float(alphas[i]), v, s))
        end = v + s * w
        jump = draw(st.integers(0, 4)) / 8 * (1.0 - end) if allow_jumps else 0.0
        v = min(1.0, end + jump)
    return Profile(segs)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid and rep.when == "call":
                n = int(nodeid.split("test_criterion_")[1][:2])
                lines.append((n, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, verdict in sorted(lines):
            terminalreporter.write_line(f"criterion {n}: {verdict}")
