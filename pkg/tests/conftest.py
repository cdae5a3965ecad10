import itertools

import numpy as np
import pytest


def enumerate_network(tensors, legs, H, W, absolute=False):
    """Sum over edge labels written out with itertools, independent of the library."""
    edges = []
    for r in range(H):
        for c in range(W):
            if c + 1 < W:
                edges.append(((r, c, "r"), (r, c + 1, "l")))
            if r + 1 < H:
                edges.append(((r, c, "d"), (r + 1, c, "u")))
    dims = [np.shape(tensors[a[0]][a[1]])[legs[a[0]][a[1]].index(a[2])] for a, _ in edges]
    total = 0.0
    for x in itertools.product(*[range(d) for d in dims]):
        label = {}
        for (a, b), v in zip(edges, x):
            label[a] = v
            label[b] = v
        term = 1.0
        for r in range(H):
            for c in range(W):
                idx = tuple(label[(r, c, g)] for g in legs[r][c])
                term = term * tensors[r][c][idx]
        total += abs(term) if absolute else term
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def einsum_network(net, absolute=False):
    """Contract a LatticeNetwork with one einsum call; open legs come out in listed order."""
    import string

    letters = iter(string.ascii_letters)
    names = {}

    def lab(key):
        if key not in names:
            names[key] = next(letters)
        return names[key]

    def bond(r, c, leg):
        if (r, c, leg) in net.open_legs:
            return ("open", r, c, leg)
        if leg == "r":
            return ("h", r, c)
        if leg == "l":
            return ("h", r, c - 1)
        if leg == "d":
            return ("v", r, c)
        return ("v", (r - 1) % net.H, c)

    subs, ops = [], []
    for r in range(net.H):
        for c in range(net.W):
            subs.append("".join(lab(bond(r, c, g)) for g in net.legs[r][c]))
            t = net.tensors[r][c]
            ops.append(np.abs(t) if absolute else t)
    out = "".join(lab(("open",) + tuple(x)) for x in net.open_legs)
    return np.einsum(",".join(subs) + "->" + out, *ops, optimize="greedy")


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion and fail the test on FAIL."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, checks: dict, detail: str = ""):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        if failed:
            line += f" (failed: {', '.join(failed)})"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
