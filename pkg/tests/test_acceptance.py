"""One test (or a small group) per acceptance criterion, at the stated tolerances."""

import json
import math
import time
import warnings

import numpy as np
import pytest
from scipy import stats

from isingclans.bounds import BoundParams, EpsilonWarning, tv_bound
from isingclans.cli import main as cli_main
from isingclans.contours import Contour, alpha0_interval, enumerate_anchored, unit_square
from isingclans.estimators import (
    ExperimentSpec,
    ModelParams,
    check_coupling,
    check_pair_empirical,
    check_pair_exact,
    estimate_p_gamma,
    tv_experiment,
    wilson_ci,
)
from isingclans.families import FiniteFamily, KeySetRegion, LatticeFamily
from isingclans.interval import Interval
from isingclans.process import (
    ProcessParams,
    World,
    exact_gibbs_small,
    forward_dynamics,
    sample_eta_zero_many,
)
from grid import bound_grid
from oracles import anchored_contour_counts, bounds_oracle

# --- shared fixtures ------------------------------------------------------------------


def domino(x, y, vertical=False):
    """Boundary of the two sites (x, y) and its right (or upper) neighbour."""
    a, b = unit_square(x, y), unit_square(x, y + 1) if vertical else unit_square(x + 1, y)
    return Contour.from_links(set(a.links) ^ set(b.links))


def small_families(beta):
    """Three hand-built families of at most 12 contours."""
    row = [unit_square(x, 0) for x in range(5)]
    block = [unit_square(x, y) for x in range(4) for y in range(3)]
    mixed = [
        unit_square(0, 0), unit_square(1, 0), unit_square(3, 1), unit_square(5, 0),
        domino(0, 1), domino(2, 0), domino(4, 0, vertical=True), domino(1, 3),
        Contour.from_links(set(domino(0, 5).links) ^ set(domino(0, 6).links)),
        Contour.from_links(set(domino(3, 3).links) ^ set(unit_square(5, 3).links)),
    ]
    for c in mixed:
        assert c.is_valid()
    return [FiniteFamily(f, beta) for f in (row, block, mixed)]


# --- 1 ------------------------------------------------------------------------------------


def test_criterion_1_enumeration_oracle(record):
    ok = True
    details = []
    for L in (4, 6, 8, 10):
        t = time.perf_counter()
        got = enumerate_anchored(L_max=L).length_counts()
        dt = time.perf_counter() - t
        want = anchored_contour_counts(L)
        ok &= got == want
        if L == 10:
            ok &= dt < 60
            details.append(f"L_max=10 in {dt:.3f}s")
    record(1, ok, f"counts {got} equal the oracle; " + ", ".join(details))
    assert ok


# --- 2 ------------------------------------------------------------------------------------


def poisson_gof(counts: np.ndarray, mean: float) -> float:
    """Chi-square p-value against Poisson(mean), merging cells with expectation < 5.

    With a single cell left the test degenerates; the exact two-sided Poisson
    test on the total count is used then.
    """
    n = len(counts)
    kmax = int(counts.max()) + 1
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = stats.poisson.pmf(np.arange(kmax + 1), mean) * n
    exp[-1] += stats.poisson.sf(kmax, mean) * n
    cells_o, cells_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if cells_e:
        cells_o[-1] += acc_o
        cells_e[-1] += acc_e
    if len(cells_e) >= 2:
        return float(stats.chisquare(cells_o, cells_e).pvalue)
    total = int(counts.sum())
    lam = n * mean
    lo = stats.poisson.cdf(total, lam)
    hi = stats.poisson.sf(total - 1, lam)
    return float(min(1.0, 2 * min(lo, hi)))


def test_criterion_2_free_network_marginals(record):
    beta = 2.0
    contours = [unit_square(0, 0), domino(3, 0), domino(6, 0, vertical=True),
                Contour.from_links(set(domino(0, 4).links) ^ set(domino(0, 5).links)),
                Contour.from_links(set(domino(4, 4).links) ^ set(unit_square(6, 4).links))]
    assert sorted(c.length for c in contours) == [4, 6, 6, 8, 8]
    fam = FiniteFamily(contours, beta)
    region = KeySetRegion(frozenset(fam.keys()))
    rng = np.random.default_rng(2024)
    n = 100_000
    counts = np.zeros((n, len(fam)), dtype=int)
    batch = fam.draw_region_batch(region, rng, n)
    for r, proposals in enumerate(batch):
        if proposals:
            for c in World(fam).alive_in_region(region, 0.0, rng, proposals):
                counts[r, c.basis] += 1
    pvals = [poisson_gof(counts[:, k], fam.rate(k)) for k in fam.keys()]
    ok = all(p > 0.01 for p in pvals)
    record(2, ok, "p-values " + ", ".join(f"{p:.3f}" for p in pvals))
    assert ok


# --- 3 ------------------------------------------------------------------------------------


@pytest.mark.parametrize("beta", [1.5, 2.0])
def test_criterion_3_sampler_exactness(record, beta):
    worst = 0.0
    for i, fam in enumerate(small_families(beta)):
        p = ProcessParams(fam, seed=i)
        samples = sample_eta_zero_many(KeySetRegion(frozenset(fam.keys())), p, 1_000_000,
                                       np.random.default_rng([3, i, int(beta * 10)]))
        emp = {}
        for s in samples:
            k = frozenset(s)
            emp[k] = emp.get(k, 0) + 1
        ex = exact_gibbs_small(fam).as_dict()
        tv = 0.5 * sum(abs(emp.get(k, 0) / len(samples) - ex.get(k, 0.0)) for k in set(emp) | set(ex))
        worst = max(worst, tv)
    ok = worst < 0.01
    record(3, ok, f"beta={beta}: max TV {worst:.2e} over 3 families")
    assert ok


# --- 4 ------------------------------------------------------------------------------------


def test_criterion_4_p_gamma_intervals(record):
    beta = 2.0
    fam = LatticeFamily(16, beta)
    p = ProcessParams(fam)
    rho = alpha0_interval(beta, 12)
    keys = [k for k in ((i, 0, 0) for i in range(len(fam.shapes))) if 4 <= fam.length(k) <= 8]
    # one shape per length plus both orientations of the domino
    chosen = {}
    for k in keys:
        chosen.setdefault(fam.length(k), []).append(k)
    picks = [ks[j] for ks in chosen.values() for j in range(min(2, len(ks)))]
    ok = True
    lines = []
    for j, k in enumerate(picks):
        est = estimate_p_gamma(k, p, 1_000_000, 40 + j)
        n = fam.length(k)
        lo, hi = math.exp(-(beta + rho.hi) * n), math.exp(-beta * n)
        inside = est.ci[1] >= lo and est.ci[0] <= hi
        ok &= inside
        lines.append(f"|g|={n} p={est.value:.3g}")
    record(4, ok, "p_gamma inside intervals: " + ", ".join(lines))
    assert ok


@pytest.mark.parametrize("beta", [1.5, 2.0])
def test_criterion_4_pair_bound(record, beta):
    ok = True
    for fam in small_families(beta):
        ok &= check_pair_exact(fam).passed
        ok &= check_pair_empirical(fam, 200_000, 7).passed
    record(4, ok, f"pair bound exact and empirical at beta={beta}")
    assert ok


# --- 5 ------------------------------------------------------------------------------------


@pytest.mark.parametrize("separation", [6, 8, 10])
def test_criterion_5_coupling(record, separation):
    chk = check_coupling(ModelParams(beta=2.0, beta_prime=1.7, L_max=16), separation, 100_000, 5)
    d = chk.detail
    record(5, chk.passed, f"sep={separation}: flag rate {d['flag_rate']:.2e} (CI hi {d['flag_ci'][1]:.2e}) "
                          f"vs bound {d['bound']:.3g}")
    assert chk.passed


# --- 6 ------------------------------------------------------------------------------------


def test_criterion_6_stationarity(record):
    beta = 0.7
    fam = FiniteFamily([unit_square(x, y) for x in range(4) for y in range(3)], beta)
    p = ProcessParams(fam, check_beta_star=False)
    reps = 20_000
    rng = np.random.default_rng(66)
    starts = sample_eta_zero_many(KeySetRegion(frozenset(fam.keys())), p, reps, rng)
    n = len(fam)
    at0 = np.zeros(n)
    at50 = np.zeros(n)
    for s in starts:
        at0[list(s)] += 1
        run = forward_dynamics(s, 50.0, fam, rng)
        at50[list(run.final)] += 1
    worst = 0.0
    for k in range(n):
        lo, hi = wilson_ci(int(at0[k]), reps)
        width = hi - lo
        worst = max(worst, abs(at50[k] - at0[k]) / reps / width)
    exact = exact_gibbs_small(fam).marginals
    ok = worst < 2.0
    record(6, ok, f"max drift {worst:.2f} CI widths; max |p50 - exact| "
                  f"{np.max(np.abs(at50 / reps - exact)):.4f}")
    assert ok


# --- 7 ------------------------------------------------------------------------------------


def _close(iv, ref):
    ref = float(ref)
    return iv.lo <= ref <= iv.hi or math.isclose(iv.mid, ref, rel_tol=1e-12)


def test_criterion_7_dual_implementation(record):
    from isingclans import bounds as B

    funcs = {"b1": B.b1_bound, "b2": B.b2_bound, "b3": B.b3_bound, "b3_simplified": B.b3_simplified,
             "delta": B.delta_choice, "Q": B.Q_constant, "A": B.A_constant, "M": B.M_constant}
    bad = []
    grid = bound_grid()
    for beta, bp, N in grid:
        bs = Interval.coerce(ModelParams().bound_params().beta_star).hi
        rho = alpha0_interval(beta, 12).mid
        rho_p = alpha0_interval(bp, 12).mid
        p = BoundParams(beta, bp, N, 1.0, Interval.point(bs), Interval.point(rho), Interval.point(rho_p))
        o = bounds_oracle(2, beta, bp, N, 1.0, bs, rho, rho_p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EpsilonWarning)
            for name, f in funcs.items():
                if not _close(f(p), o[name]):
                    bad.append((name, beta, bp, N))
    ok = not bad and len(grid) == 100
    record(7, ok, f"dual implementations agree to 12 digits at {len(grid) - len(bad)}/{len(grid)} points")
    assert ok


def test_criterion_7_closed_form_dominates_assembled(record):
    failures = []
    grid = bound_grid()
    for beta, bp, N in grid:
        rep = tv_bound(BoundParams.from_model(beta, bp, N, 1.0))
        if not rep.consistent:
            failures.append((beta, round(bp, 3), N, rep.tv_assembled.hi / rep.tv_bound.hi))
    ok = not failures
    worst = max((f[3] for f in failures), default=0.0)
    record(7, ok, f"closed form >= 2(2b1+2b2+b3) at {len(grid) - len(failures)}/{len(grid)} points"
                  + (f", worst ratio {worst:.3g} (gap beta-beta' not small)" if failures else ""))
    assert ok


# --- 8 ------------------------------------------------------------------------------------


def test_criterion_8_theorem_consistency(record):
    t = time.perf_counter()
    spec = ExperimentSpec(ModelParams(beta=2.0, beta_prime=1.8, N=8, lam=1.0, L_max=16), 100_000, 8)
    res = tv_experiment(spec)
    dt = time.perf_counter() - t
    ok = res.verdict == "PASS" and dt < 1800
    label = "PASS by vacuity (analytic bound >= 1)" if res.vacuous else res.verdict
    record(8, ok, f"lambda_hat={res.lambda_hat:.3f}, empirical TV={res.tv:.4f} "
                  f"(CI {res.ci[0]:.4f}-{res.ci[1]:.4f}), half-window TV={res.tv_halves:.4f}, "
                  f"bound<={res.bound.tv_bound.hi:.3g}: {label}; {dt:.0f}s")
    assert ok


# --- 9 ------------------------------------------------------------------------------------

COMMAND_ARGS = {
    "enumerate": ["--L-max", "10"],
    "alpha0": ["--L-max", "12"],
    "beta-star": ["--L-max", "12"],
    "bounds": [],
    "sample": ["--window", "10", "--replicas", "200", "--L-max", "10"],
    "estimate": ["--window", "60", "--replicas", "2000", "--N", "6", "--L-max", "12"],
    "tv-check": ["--window", "300", "--replicas", "5000"],
    "validate": ["--replicas", "5000", "--L-max", "12"],
    "sweep": ["--grid", "N=4,8", "--grid", "beta_prime=1.5,1.8"],
}


def test_criterion_9_determinism(record, tmp_path):
    bad = []
    for cmd, args in COMMAND_ARGS.items():
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / f"{cmd}-{rep}"
            code = cli_main([cmd, "--seed", "123", "--out", str(d), "--log-level", "WARNING", *args])
            assert code in (0, 1)
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        if outs[0] != outs[1] or not outs[0]:
            bad.append(cmd)
        for name, body in outs[0].items():
            if name.endswith(".json"):
                assert json.loads(body)["config"]["seed"] == 123
    ok = not bad
    record(9, ok, f"{len(COMMAND_ARGS) - len(bad)}/{len(COMMAND_ARGS)} commands byte-identical")
    assert ok
