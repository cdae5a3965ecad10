"""End-to-end acceptance checks at full size.

Each test prints one ``PASS``/``FAIL`` line and the session summary repeats
them in criterion order. The whole module takes about an hour on one core.
"""

import itertools
import math
import time

import numpy as np
import pytest

from signtn import peps
from signtn.boundary import entropy_scan, half_value_crossover
from signtn.contraction import brute_force_value, random_network, transfer_value, uniform_network
from signtn.ensembles import EnsembleSpec, PepsSpec
from signtn.harness import gauge_test_tensor, uniform_block_s2
from signtn.sign_mc import cylinder_delta_f
from signtn.statmech import (
    _rank1_parts,
    build_orthogonal_model,
    build_rank1_link_model,
    build_s4_model,
    build_unitary_model,
    partition_function,
    phase_scan,
    predicted_entropy,
    rank1_ising_tensor,
    rank1_vertex_weights,
)

pytestmark = pytest.mark.acceptance

KINDS = ["orthogonal", "unitary", "gaussian_real", "gaussian_complex"]


def mean_delta_f(kind, D, lam, n=20, W=4, L=400):
    vals = [
        cylinder_delta_f(EnsembleSpec(kind, D, lam, seed=s), W, L, 20, np.random.default_rng(1000 + s)).delta_f
        for s in range(n)
    ]
    return float(np.mean(vals)), vals


def test_criterion_01_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    combos = list(itertools.product(KINDS, [2, 3], [0.0, 0.5, 2.0]))
    worst = 0.0
    for i in range(100):
        kind, D, lam = combos[i % len(combos)]
        net = random_network(EnsembleSpec(kind, D, lam, seed=i), 3, 3)
        worst = max(worst, transfer_value(net).relative_deviation(brute_force_value(net)))
    elapsed = time.perf_counter() - t0
    criterion(1, {"deviation": worst < 1e-10, "runtime": elapsed < 60}, f"max rel dev {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_plateau_collapse(criterion):
    f3, _ = mean_delta_f("orthogonal", 3, 1e-3)
    f4, _ = mean_delta_f("orthogonal", 4, 1e-3)
    gap = abs((f3 - math.log(3)) - (f4 - math.log(4)))
    criterion(2, {"collapse": gap < 0.1}, f"df(D=3)={f3:.4f}, df(D=4)={f4:.4f}, |offset difference|={gap:.4f}")


def test_criterion_03_mid_regime_slope(criterion):
    a, _ = mean_delta_f("orthogonal", 4, 0.3)
    b, _ = mean_delta_f("orthogonal", 4, 0.6)
    ratio = (a - b) / math.log(2)
    criterion(3, {"slope": 0.7 <= ratio <= 1.3}, f"(df(0.3)-df(0.6))/log 2 = {ratio:.3f}")


def test_criterion_04_unitary_tail(criterion):
    scaled = {lam: mean_delta_f("unitary", 3, lam)[0] * 4 * lam**2 for lam in (4.0, 8.0)}
    checks = {f"lambda={lam:g}": 0.6 <= v <= 1.4 for lam, v in scaled.items()}
    criterion(4, checks, ", ".join(f"df*4l^2(l={lam:g})={v:.3f}" for lam, v in scaled.items()))


def test_criterion_05_exact_zero(criterion):
    _, vals = mean_delta_f("orthogonal", 2, 5.0, n=5)
    criterion(5, {"zero": max(vals) < 1e-9}, f"max df = {max(vals):.2e}")


CROSS_GRID = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0]


@pytest.fixture(scope="module")
def transition_scan():
    _, agg = entropy_scan("orthogonal", [4], CROSS_GRID, [3, 4, 5], 50, seed=3)
    return agg


def sampled_crossovers(agg):
    out = {}
    for W in (3, 4, 5):
        pts = [(a["lambdaD"], a["mean_s2_per_W"]) for a in agg if a["W"] == W]
        out[W] = half_value_crossover(*zip(*pts))
    return out


def test_criterion_06_entanglement_transition(criterion, transition_scan):
    agg = transition_scan
    at = lambda x: {a["W"]: a for a in agg if a["lambdaD"] == x}
    low, high = at(0.25), at(2.0)
    per_w = [low[W]["mean_s2_per_W"] for W in (3, 4, 5)]
    spread = (max(per_w) - min(per_w)) / np.mean(per_w)
    s_high = [high[W]["mean_s2"] for W in (3, 4, 5)]
    slope_high = float(np.polyfit([3, 4, 5], s_high, 1)[0])
    cross = sampled_crossovers(agg)
    checks = {
        "volume law at 0.25": spread < 0.2,
        "area law below 0.1": max(s_high) < 0.1,
        "area law W-independent": abs(slope_high) < 0.02,
        "crossover": all(abs(c - 1.0) <= 0.3 for c in cross.values()),
        "exact entropies": all(a["converged"] for a in agg),
    }
    detail = (
        f"S2/W at 0.25 = {np.round(per_w, 3).tolist()} (spread {spread:.3f}); "
        f"S2 at 2 = {np.round(s_high, 4).tolist()} (slope {slope_high:.4f}); "
        f"crossovers {({W: round(c, 3) for W, c in cross.items()})}"
    )
    criterion(6, checks, detail)


def test_criterion_07_statmech_agreement(criterion, transition_scan):
    grid = np.round(np.arange(0.25, 2.001, 0.125), 3)
    predicted = {}
    for W in (3, 4, 5):
        ys = [predicted_entropy(build_orthogonal_model(4, x / 4), W).predicted_s2 / W for x in grid]
        predicted[W] = half_value_crossover(grid, ys)
    sampled = sampled_crossovers(transition_scan)
    p, s = float(np.mean(list(predicted.values()))), float(np.mean(list(sampled.values())))
    criterion(7, {"agreement": abs(p - s) <= 0.3}, f"predicted crossover {p:.3f}, sampled {s:.3f}")


def test_criterion_08_phase_map(criterion):
    tau = {(D, mu): phase_scan("orthogonal", [D], [mu])[0]["line_tension"] for D, mu in [(4, 0.5), (4, 2.0), (2, 0.0)]}
    checks = {"hard at (4, 0.5)": tau[4, 0.5] >= 0.1, "easy at (4, 2)": tau[4, 2.0] <= 0.02, "easy at (2, 0)": tau[2, 0.0] <= 0.02}
    criterion(8, checks, ", ".join(f"tension{k}={v:.4f}" for k, v in tau.items()))


def enumerate_patch(model, right):
    """Log partition function of the 2x2 patch summed spin by spin."""
    total = 0.0
    for conf in itertools.product(range(model.q), repeat=4):
        s = np.array(conf).reshape(2, 2)
        w = 1.0
        for r in range(2):
            for c in range(2):
                w *= model.onsite((c > 0) + 1 + 1)[s[r, c]]
            w *= model.Wlink[s[r, 0], s[r, 1]] * model.boundary_vector(right[r])[s[r, 1]]
        for c in range(2):
            w *= model.Wlink[s[0, c], s[1, c]]
        total += w
    return math.log(total)


def rank1_patch(D, lam, right):
    _, _, WTT, _, R = _rank1_parts(D, lam)
    end = {"B": R @ WTT[:, 0] / D, "A": R @ WTT[:, 1] / D}
    t2, t3 = rank1_ising_tensor(D, lam, legs=2), rank1_ising_tensor(D, lam, legs=3)
    total = 0.0
    for h0, h1, v0, v1, e0, e1 in itertools.product(range(2), repeat=6):
        w = t2[h0, v0] * t3[h0, e0, v1] * t2[h1, v0] * t3[h1, e1, v1]
        total += w * end[right[0]][e0] * end[right[1]][e1]
    return math.log(total)


def test_criterion_09_golden_values(criterion):
    D, mu = 4, 0.5
    ortho = build_orthogonal_model(D, mu / D)
    unit = build_unitary_model(D, mu / D)
    v_o = [mu**4] + [mu**2] * 6 + [D**4 / (D**4 + 2)] * 3
    v_u = [mu**4] + [mu**2] * 4 + [D**4 / (D**4 + 1)] * 2
    lam = 0.5
    w = rank1_vertex_weights(100, lam)
    series = [
        1 + 2 * lam**2 + lam**4 - 2 * lam**4 / 100,
        lam**4 - (2 * lam**4 - lam**2 - 0.5) / 100,
        lam**4 - 2 * lam**4 / 100,
    ]
    right = ["A", "B"]
    models = {"orthogonal": build_orthogonal_model(3, 0.3), "unitary": build_unitary_model(2, 0.4), "s4": build_s4_model(2, 3)}
    devs = {k: abs(math.exp(partition_function(m, 2, 2, right) - enumerate_patch(m, right)) - 1) for k, m in models.items()}
    devs["rank1"] = abs(math.exp(partition_function(build_rank1_link_model(3, 0.4), 2, 2, right, edges="free") - rank1_patch(3, 0.4, right)) - 1)
    checks = {
        "orthogonal V": list(ortho.V) == v_o,
        "unitary V": list(unit.V) == v_u,
        "rank-1 series": float(np.max(np.abs(w[:3] - series))) < 1e-3,
        "w(1) = w(3)": w[1] == w[3],
        "2x2 enumeration": max(devs.values()) < 1e-10,
    }
    criterion(9, checks, f"series dev {np.max(np.abs(w[:3] - series)):.1e}, 2x2 devs {({k: f'{v:.1e}' for k, v in devs.items()})}")


def test_criterion_10_interpolation_contrast(criterion):
    lams = [0.125, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0]
    lam_star = {}
    for D in (3, 4):
        _, agg = entropy_scan("orthogonal", [D], [x * D for x in lams], [4], 20, seed=5, target="rank1_signed")
        lam_star[D] = half_value_crossover([a["lambdaD"] / D for a in agg], [a["mean_s2_per_W"] for a in agg])
    lamD_star = {}
    for D in (3, 4):
        _, agg = entropy_scan("orthogonal", [D], CROSS_GRID, [4], 20, seed=5, target="positive_random")
        lamD_star[D] = half_value_crossover([a["lambdaD"] for a in agg], [a["mean_s2_per_W"] for a in agg])
    shift = abs(lam_star[4] - lam_star[3]) / lam_star[3]
    checks = {
        "rank-1 window": all(0.5 <= v <= 2.0 for v in lam_star.values()),
        "rank-1 shift": shift < 0.25,
        "positive crossover": all(abs(v - 1.0) <= 0.3 for v in lamD_star.values()),
    }
    detail = f"rank-1 lambda* {({D: round(v, 3) for D, v in lam_star.items()})} (shift {shift:.1%}); positive lambdaD* {({D: round(v, 3) for D, v in lamD_star.items()})}"
    criterion(10, checks, detail)


def test_criterion_11_peps_entropy(criterion):
    _, _, _, alphas = peps.peps_entropy_experiment([2, 3], [2, 3, 4, 6], [3], 10, seed=11)
    _, _, slopes, _ = peps.peps_entropy_experiment([2, 3], [2, 4], {2: [3, 4, 5], 3: [3, 4]}, 10, seed=11, chi={2: None, 3: 16})
    checks = {
        "flat in W": all(abs(s) <= 0.02 for s in slopes.values()),
        "decay exponent": all(2 <= a <= 4 for a in alphas.values()),
    }
    detail = f"slopes {({k: round(v, 4) for k, v in slopes.items()})}; alpha {({k: round(v, 2) for k, v in alphas.items()})}"
    criterion(11, checks, detail)


def test_criterion_12_positive_sum(criterion):
    rng = np.random.default_rng(12)
    successes = 0
    for i in range(10):
        a = peps.double_layer(peps.make_peps_tensor(PepsSpec(2, 64), np.random.default_rng([12, i])))
        rho = peps.rho_from_grouping(a, "ld|ur")
        dec = peps.separable_decompose(rho, (4, 4), rng=rng)
        successes += bool(dec.success)
    net, layers = peps.peps_network(PepsSpec(2, 64), 4, 4, seed=13)
    decs = peps.decompose_network(layers, rng)
    all_ok = all(d.success for row in decs for d in row)
    est, faces = peps.positive_sum_estimate(layers, decs, 10_000, rng, return_samples=True)
    exact = float(np.real(transfer_value(net).value))
    z = abs(est.mean - exact) / est.stderr
    checks = {
        "decompositions": successes >= 9 and all_ok,
        "nonnegative terms": float(faces.min()) >= -1e-12,
        "estimate": z <= 3,
    }
    detail = f"{successes}/10 decomposed, min plaquette {faces.min():.2e}, estimate {est.mean:.5g} vs exact {exact:.5g} ({z:.2f} sigma)"
    criterion(12, checks, detail)


def test_criterion_13_gauge_optimization(criterion):
    monotone, decreased, worst_inv = True, 0, 0.0
    for i in range(20):
        rng = np.random.default_rng([7, i])
        a = gauge_test_tensor(2, 2, 0.0, 0.5, rng)
        pair, out = peps.gauge_optimize(a, "positivity", 60, rng)
        monotone &= bool(np.all(np.diff(pair.objective_trace) >= 0))
        bvec = peps.gauge_boundary(pair.X, pair.Y)
        before = transfer_value(uniform_network(a.A, 3, 3))
        after = transfer_value(uniform_network(out.A, 3, 3, bvec))
        worst_inv = max(worst_inv, after.relative_deviation(before))
        decreased += uniform_block_s2(out.A, 3, bvec) <= uniform_block_s2(a.A, 3) + 1e-12
    checks = {"monotone": monotone, "invariance": worst_inv < 1e-8, "entropy": decreased >= 16}
    criterion(13, checks, f"invariance {worst_inv:.1e}, S2 non-increasing in {decreased}/20")
