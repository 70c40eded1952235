"""Monte Carlo side of the Poisson approximation for large contours."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .bounds import BoundParams, coupling_bound, pair_bound, tv_bound
from .contours import Contour, Window, alpha0_interval
from .families import FiniteFamily, KeySetRegion, LatticeFamily, WindowRegion
from .process import (
    ProcessParams,
    coupled_clans,
    exact_gibbs_small,
    sample_eta_zero_many,
)

log = logging.getLogger(__name__)

#: replicas per independently seeded block; results do not depend on workers
BLOCK = 10_000


class MarginError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    beta: float = 2.0
    beta_prime: float = 1.8
    N: int = 8
    lam: float = 1.0
    L_max: int = 16
    window: Optional[int] = None
    box: Optional[int] = None
    D: Optional[float] = None
    d: int = 2
    norm: str = "euclidean"
    beta_star_L_max: int = 12
    max_clan_size: int = 10**6

    def bound_params(self, lam: Optional[float] = None) -> BoundParams:
        return BoundParams.from_model(
            self.beta, self.beta_prime, self.N, self.lam if lam is None else lam,
            L_max=self.beta_star_L_max, d=self.d, D=self.D,
        )


@dataclass
class ExperimentSpec:
    params: ModelParams
    replicas: int = 10_000
    seed: int = 0
    target: str = "tv-experiment"

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.target not in ("estimate-lambda", "size-window", "tv-experiment", "validate-lemmas"):
            raise ValueError(f"unknown target {self.target!r}")


def check_margin(window: Window, box: Optional[int], D: float, L_max: int) -> None:
    """V must sit inside the simulation box with margin D + L_max / 2.

    ``box=None`` means the unbounded lattice, where nothing is clipped.
    """
    if box is None:
        return
    margin = D + L_max / 2
    half = box / 2
    reach = max(abs(window.x0), abs(window.x1 + 1), abs(window.y0), abs(window.y1 + 1))
    if reach + margin > half:
        raise MarginError(
            f"window {window} needs margin {margin:.3g} inside a box of side {box}"
        )


# --- confidence intervals ---------------------------------------------------------


def wilson_ci(k: int, n: int, conf: float = 0.99) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("zero replicas")
    z = stats.norm.ppf(0.5 + conf / 2)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def clopper_pearson(k: int, n: int, conf: float = 0.99) -> tuple[float, float]:
    """Exact binomial interval; used where counts are too small for Wilson's lower end."""
    if n <= 0:
        raise ValueError("zero replicas")
    a = (1 - conf) / 2
    lo = float(stats.beta.ppf(a, k, n - k + 1)) if k > 0 else 0.0
    hi = float(stats.beta.ppf(1 - a, k + 1, n - k)) if k < n else 1.0
    return lo, hi


def mean_ci(x: np.ndarray, conf: float = 0.99) -> tuple[float, float]:
    z = stats.norm.ppf(0.5 + conf / 2)
    m = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    return float(m - z * se), float(m + z * se)


# --- replica driver ------------------------------------------------------------------


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, block)))


def perfect_samples(region, params: ProcessParams, replicas: int, seed: int, stream: int = 0) -> list[list]:
    """Kept roots in ``region`` at time 0, one sorted key list per replica."""
    out: list[list] = []
    for b in range(0, math.ceil(replicas / BLOCK)):
        n = min(BLOCK, replicas - b * BLOCK)
        out.extend(sample_eta_zero_many(region, params, n, _block_rng(seed, stream, b)))
    return out


# --- p_gamma and lambda --------------------------------------------------------------


@dataclass
class Estimate:
    value: float
    ci: tuple
    hits: int = 0
    replicas: int = 0


def estimate_p_gamma(key, params: ProcessParams, replicas: int, seed: int, conf: float = 0.99) -> Estimate:
    """Fraction of perfect samples in which contour ``key`` is present."""
    if replicas <= 0:
        raise ValueError("zero replicas")
    samples = perfect_samples(KeySetRegion(frozenset([key])), params, replicas, seed, stream=1)
    hits = sum(1 for s in samples if s)
    return Estimate(hits / replicas, wilson_ci(hits, replicas, conf), hits, replicas)


@dataclass
class LambdaEstimate:
    value: float
    ci: tuple
    totals: np.ndarray
    per_contour: dict
    half_totals: Optional[np.ndarray] = None

    @property
    def bookkeeping_gap(self) -> float:
        n = len(self.totals)
        return abs(sum(self.per_contour.values()) / n - self.value)


def estimate_lambda(
    N: int,
    window: Window,
    params: ProcessParams,
    replicas: int,
    seed: int,
    conf: float = 0.99,
    split: bool = False,
) -> LambdaEstimate:
    """Mean number of present contours of length >= N meeting ``window``."""
    if replicas <= 0:
        raise ValueError("zero replicas")
    if N > params.family.max_length:
        return LambdaEstimate(0.0, (0.0, 0.0), np.zeros(replicas, dtype=int), {},
                              np.zeros((replicas, 2), dtype=int) if split else None)
    region = WindowRegion(window, N)
    samples = perfect_samples(region, params, replicas, seed, stream=2)
    totals = np.array([len(s) for s in samples], dtype=int)
    per = Counter()
    for s in samples:
        per.update(s)
    halves = None
    if split:
        left, right = split_window(window)
        fam = params.family
        halves = np.array(
            [
                [
                    sum(1 for k in s if fam.in_region(k, WindowRegion(left, N))),
                    sum(1 for k in s if fam.in_region(k, WindowRegion(right, N))),
                ]
                for s in samples
            ],
            dtype=int,
        )
    return LambdaEstimate(float(totals.mean()), mean_ci(totals, conf), totals, dict(per), halves)


def split_window(window: Window) -> tuple[Window, Window]:
    """Left and right halves, separated by a one-column gap when the width allows."""
    w = window.x1 - window.x0 + 1
    if w < 3:
        raise ValueError("window too narrow to split")
    half = (w - 1) // 2
    left = Window(window.x0, window.y0, window.x0 + half - 1, window.y1)
    right = Window(window.x1 - half + 1, window.y0, window.x1, window.y1)
    return left, right


# --- exact translate counting for square windows ---------------------------------------


def translates_hitting_count(sites: np.ndarray, side: int) -> int:
    """Number of translates of a site set meeting a ``side`` x ``side`` window."""
    rows: dict[int, tuple[int, int]] = {}
    for x, y in sites:
        x, y = int(x), int(y)
        lo, hi = rows.get(y, (x, x))
        rows[y] = (min(lo, x), max(hi, x))
    ys = sorted(rows)
    r0, r1 = ys[0], ys[-1]
    h = r1 - r0 + 1
    width = max(hi for _, hi in rows.values()) - min(lo for lo, _ in rows.values()) + 1
    if side < max(h, width):
        s = set()
        for x, y in sites:
            for tx in range(-int(x), side - int(x)):
                for ty in range(-int(y), side - int(y)):
                    s.add((tx, ty))
        return len(s)

    def span(lo_row: int, hi_row: int) -> int:
        mins = [rows[y][0] for y in range(lo_row, hi_row + 1) if y in rows]
        maxs = [rows[y][1] for y in range(lo_row, hi_row + 1) if y in rows]
        return max(maxs) - min(mins) if mins else -1

    total = 0
    # window rows cover a contiguous block of shape rows; all x-intervals overlap
    for k in range(r0, r1):
        for lo_row, hi_row in ((r0, k), (k + 1, r1)):
            sp = span(lo_row, hi_row)
            if sp >= 0:
                total += side + sp
    total += (side - h + 1) * (side + span(r0, r1))
    return total


def free_mass(family: LatticeFamily, N: int, side: int) -> float:
    """Sum of exp(-beta |g|) over contours of length >= N meeting a side x side window."""
    total = 0.0
    for i, shape in enumerate(family.shapes):
        if shape.length >= N:
            total += family.shape_rates[i] * translates_hitting_count(family._shape_sites[i], side)
    return total


@dataclass
class WindowChoice:
    side: int
    window: Window
    lambda_hat: float
    ci: tuple
    ratio: float
    bracket: tuple  # (side below, side above) of the mass-based root
    lower_bracket: bool = False


def size_window_for_lambda(
    N: int,
    lambda_target: float,
    params: ProcessParams,
    replicas: int = 20_000,
    seed: int = 0,
    pilot_side: int = 256,
    max_side: int = 1 << 16,
) -> WindowChoice:
    """Square window whose expected number of large contours is ``lambda_target``.

    Translation invariance gives lambda(V) = sum over shapes of p_shape times
    the number of translates meeting V.  The ratio p / exp(-beta|g|) is
    nearly constant, so it is estimated once on a pilot window and the side
    is then found by bisection on the exactly counted free mass.
    """
    if not lambda_target > 0:
        raise ValueError("lambda_target must be positive")
    fam = params.family
    if not isinstance(fam, LatticeFamily):
        raise TypeError("window sizing needs a translation-invariant LatticeFamily")
    if N > fam.L_max:
        raise ValueError(f"target unreachable: no contour of length >= N={N} below L_max={fam.L_max}")
    pilot = estimate_lambda(N, Window.centered(pilot_side), params, replicas, seed)
    m_pilot = free_mass(fam, N, pilot_side)
    ratio = float(min(max(pilot.value / m_pilot, 0.5), 1.0)) if pilot.value > 0 else 1.0

    def lam_of(side: int) -> float:
        return ratio * free_mass(fam, N, side)

    if lam_of(1) >= lambda_target:
        est = estimate_lambda(N, Window.centered(1), params, replicas, seed + 1)
        return WindowChoice(1, Window.centered(1), est.value, est.ci, ratio, (1, 1), True)
    if lam_of(max_side) < lambda_target:
        raise ValueError(f"lambda target {lambda_target} unreachable below side {max_side}")
    lo, hi = 1, max_side
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lam_of(mid) >= lambda_target:
            hi = mid
        else:
            lo = mid
    side = hi
    w = Window.centered(side)
    est = estimate_lambda(N, w, params, replicas, seed + 1)
    return WindowChoice(side, w, est.value, est.ci, ratio, (lo, hi))


# --- total variation ----------------------------------------------------------------


def _kmax(lam: float) -> int:
    """Cutoff past which the Poisson(lam) tail is below double precision."""
    return int(lam + 15 * math.sqrt(lam + 1) + 40)


def empirical_tv_poisson(counts: np.ndarray, lam: float) -> float:
    """TV between the empirical law of integer ``counts`` and Poisson(lam)."""
    if not lam > 0:
        raise ValueError("reference lambda must be positive")
    counts = np.asarray(counts, dtype=int)
    n = len(counts)
    kmax = max(int(counts.max()) if n else 0, _kmax(lam))
    emp = np.bincount(counts, minlength=kmax + 1)[: kmax + 1] / n
    ref = stats.poisson.pmf(np.arange(kmax + 1), lam)
    tail = max(0.0, 1.0 - ref.sum())
    return 0.5 * (float(np.abs(emp - ref).sum()) + tail)


def empirical_tv_poisson2(pairs: np.ndarray, lam1: float, lam2: float) -> float:
    """TV between an empirical 2-D count law and Poisson(lam1) x Poisson(lam2)."""
    pairs = np.asarray(pairs, dtype=int)
    n = len(pairs)
    k1 = max(int(pairs[:, 0].max()), _kmax(lam1))
    k2 = max(int(pairs[:, 1].max()), _kmax(lam2))
    emp = np.zeros((k1 + 1, k2 + 1))
    np.add.at(emp, (pairs[:, 0], pairs[:, 1]), 1.0)
    emp /= n
    ref = np.outer(stats.poisson.pmf(np.arange(k1 + 1), lam1), stats.poisson.pmf(np.arange(k2 + 1), lam2))
    tail = max(0.0, 1.0 - ref.sum())
    return 0.5 * (float(np.abs(emp - ref).sum()) + tail)


def bootstrap_tv_ci(counts: np.ndarray, conf: float = 0.99, B: int = 200, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap CI of the TV to Poisson(mean) for resampled counts."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(99,)))
    counts = np.asarray(counts, dtype=int)
    n = len(counts)
    vals = []
    for _ in range(B):
        s = counts[rng.integers(n, size=n)]
        lam = float(s.mean())
        vals.append(empirical_tv_poisson(s, lam) if lam > 0 else 1.0)
    a = (1 - conf) / 2
    return float(np.quantile(vals, a)), float(np.quantile(vals, 1 - a))


def tv_noise_floor(lam: float, n: int) -> float:
    """Expected TV between n iid Poisson(lam) draws and their law (a half-sum of
    binomial mean absolute deviations), the level the estimator sits at when
    the Poisson approximation is exact."""
    kmax = _kmax(lam)
    p = stats.poisson.pmf(np.arange(kmax + 1), lam)
    return 0.5 * float(np.sum(np.sqrt(2 * p * (1 - p) / (math.pi * n))))


@dataclass
class TVResult:
    tv: float
    ci: tuple
    tv_halves: Optional[float]
    lambda_hat: float
    lambda_ci: tuple
    lambda_analytic: Optional[float]
    tv_analytic_reference: Optional[float]
    noise_floor: float
    bound: object  # BoundReport
    verdict: str
    vacuous: bool
    histogram: list
    window: Window
    replicas: int

    def to_dict(self) -> dict:
        return {
            "tv_empirical": self.tv,
            "tv_ci": list(self.ci),
            "tv_half_windows": self.tv_halves,
            "lambda_hat": self.lambda_hat,
            "lambda_ci": list(self.lambda_ci),
            "lambda_analytic_mid": self.lambda_analytic,
            "tv_vs_analytic_reference": self.tv_analytic_reference,
            "noise_floor": self.noise_floor,
            "tv_bound": self.bound.tv_bound.as_list(),
            "tv_assembled": self.bound.tv_assembled.as_list(),
            "verdict": self.verdict,
            "vacuous": self.vacuous,
            "window": [self.window.x0, self.window.y0, self.window.x1, self.window.y1],
            "replicas": self.replicas,
            "bounds": self.bound.to_dict(),
        }


def analytic_lambda_mid(family: LatticeFamily, N: int, side: int, rho_hi: float) -> float:
    """Sum of interval midpoints of p_gamma over contours of length >= N meeting the window."""
    total = 0.0
    for i, shape in enumerate(family.shapes):
        n = shape.length
        if n >= N:
            mid = 0.5 * (math.exp(-(family.beta + rho_hi) * n) + math.exp(-family.beta * n))
            total += mid * translates_hitting_count(family._shape_sites[i], side)
    return total


def tv_experiment(spec: ExperimentSpec, window: Optional[Window] = None, reference: str = "empirical") -> TVResult:
    """Empirical TV of the large-contour count against Poisson, next to the analytic bound."""
    mp = spec.params
    fam = LatticeFamily(mp.L_max, mp.beta)
    pp = ProcessParams(fam, seed=spec.seed, beta_star_L_max=mp.beta_star_L_max, max_clan_size=mp.max_clan_size)
    if window is None:
        if mp.window is not None:
            window = Window.centered(mp.window)
        else:
            window = size_window_for_lambda(mp.N, mp.lam, pp, seed=spec.seed).window
    side = window.x1 - window.x0 + 1
    bparams = mp.bound_params()
    check_margin(window, mp.box, _D_hi(bparams), mp.L_max)
    est = estimate_lambda(mp.N, window, pp, spec.replicas, spec.seed, split=side >= 3)
    if est.value <= 0:
        raise ValueError("reference lambda_hat is zero; enlarge the window or lower N")
    report = tv_bound(mp.bound_params(lam=est.value))
    tv = empirical_tv_poisson(est.totals, est.value)
    ci = bootstrap_tv_ci(est.totals, seed=spec.seed)
    lam_mid = analytic_lambda_mid(fam, mp.N, side, bparams.rho.hi) if window == Window.centered(side) else None
    tv_ref = empirical_tv_poisson(est.totals, lam_mid) if lam_mid else None
    tv_halves = None
    if est.half_totals is not None:
        l1, l2 = est.half_totals.mean(axis=0)
        if l1 > 0 and l2 > 0:
            tv_halves = float(empirical_tv_poisson2(est.half_totals, float(l1), float(l2)))
    half = 0.5 * (ci[1] - ci[0])
    passed = tv - half <= report.tv_bound.hi
    if reference == "analytic" and tv_ref is not None:
        passed = tv_ref - half <= report.tv_bound.hi
    hist = _histogram(est.totals, est.value)
    return TVResult(
        tv, ci, tv_halves, est.value, est.ci, lam_mid, tv_ref,
        tv_noise_floor(est.value, spec.replicas), report,
        "PASS" if passed else "FAIL", report.vacuous, hist, window, spec.replicas,
    )


def _D_hi(bp: BoundParams) -> float:
    from .bounds import D_value

    return D_value(bp).hi


def _histogram(totals: np.ndarray, lam: float) -> list:
    kmax = int(max(totals.max(), stats.poisson.ppf(1 - 1e-6, lam)))
    emp = np.bincount(totals, minlength=kmax + 1)[: kmax + 1] / len(totals)
    ref = stats.poisson.pmf(np.arange(kmax + 1), lam)
    return [(k, float(emp[k]), float(ref[k])) for k in range(kmax + 1)]


# --- lemma validation ------------------------------------------------------------------


@dataclass
class LemmaCheck:
    name: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} margin={self.margin:.3g}"


def check_p_gamma(contours: Sequence[Contour], mp: ModelParams, replicas: int, seed: int) -> LemmaCheck:
    """Every estimated p_gamma overlaps its analytic interval (CI-widened)."""
    fam = LatticeFamily(mp.L_max, mp.beta)
    pp = ProcessParams(fam, seed=seed, beta_star_L_max=mp.beta_star_L_max, max_clan_size=mp.max_clan_size)
    rho = alpha0_interval(mp.beta, mp.beta_star_L_max)
    rows = []
    worst = math.inf
    ok = True
    for i, c in enumerate(contours):
        key = _lattice_key(fam, c)
        est = estimate_p_gamma(key, pp, replicas, seed + i)
        lo = math.exp(-(mp.beta + rho.hi) * c.length)
        hi = math.exp(-mp.beta * c.length)
        inside = est.ci[1] >= lo and est.ci[0] <= hi
        margin = min(est.ci[1] - lo, hi - est.ci[0])
        worst = min(worst, margin)
        ok &= inside
        rows.append({"length": c.length, "p_hat": est.value, "ci": list(est.ci), "interval": [lo, hi], "inside": inside})
    return LemmaCheck("p_gamma interval", ok, worst, {"contours": rows})


def _lattice_key(fam: LatticeFamily, c: Contour):
    """(shape, tx, ty) key of a contour in a lattice family."""
    mx, my = c.links[0]
    tx, ty = (mx - 1) // 2, my // 2
    shape = c.translate(-tx, -ty)
    try:
        i = fam.shapes.index(shape)
    except ValueError:
        raise ValueError(f"contour of length {c.length} is not in the family (L_max={fam.L_max})")
    return (i, tx, ty)


def check_pair_exact(family: FiniteFamily) -> LemmaCheck:
    """Exact pair marginals of a small family never exceed the pair bound."""
    ex = exact_gibbs_small(family)
    worst = math.inf
    ok = True
    n = len(family)
    for a in range(n):
        for b in range(a + 1, n):
            bound = pair_bound(family.length(a), family.length(b), ex.marginals[a], ex.marginals[b], family.beta)
            gap = bound - ex.pair_marginals[a, b]
            worst = min(worst, gap)
            ok &= gap > 0
    return LemmaCheck("pair bound (exact)", ok, worst, {"pairs": n * (n - 1) // 2})


def check_pair_empirical(family: FiniteFamily, replicas: int, seed: int) -> LemmaCheck:
    """Empirical pair frequencies stay below the bound evaluated at upper CI ends."""
    pp = ProcessParams(family, seed=seed, check_beta_star=False)
    keys = frozenset(family.keys())
    samples = perfect_samples(KeySetRegion(keys), pp, replicas, seed, stream=3)
    n = len(family)
    single = np.zeros(n, dtype=int)
    pair = np.zeros((n, n), dtype=int)
    for s in samples:
        for a in s:
            single[a] += 1
            for b in s:
                pair[a, b] += 1
    worst = math.inf
    ok = True
    for a in range(n):
        for b in range(a + 1, n):
            p1 = wilson_ci(int(single[a]), replicas)[1]
            p2 = wilson_ci(int(single[b]), replicas)[1]
            bound = pair_bound(family.length(a), family.length(b), p1, p2, family.beta)
            # Wilson's lower end sits above the true rate for one or two hits
            lo = clopper_pearson(int(pair[a, b]), replicas)[0]
            gap = bound - lo
            worst = min(worst, gap)
            ok &= gap >= 0
    return LemmaCheck("pair bound (empirical)", ok, worst, {"replicas": replicas})


def square_region(side: int, x0: int, y0: int) -> list:
    return [(x, y) for x in range(x0, x0 + side) for y in range(y0, y0 + side)]


def check_coupling(
    mp: ModelParams, separation: int, trials: int, seed: int, side: int = 2, conf: float = 0.99
) -> LemmaCheck:
    """Incompatibility frequency of independent clans of two square regions."""
    fam = LatticeFamily(mp.L_max, mp.beta)
    pp = ProcessParams(fam, seed=seed, beta_star_L_max=mp.beta_star_L_max, max_clan_size=mp.max_clan_size)
    wa = Window.square(side, 0, 0)
    wb = Window.square(side, side + separation - 1, 0)
    flags = mism = 0
    for b in range(math.ceil(trials / BLOCK)):
        n = min(BLOCK, trials - b * BLOCK)
        ra = _block_rng(seed, 10 + 2 * separation, b)
        rb = _block_rng(seed, 11 + 2 * separation, b)
        for _ in range(n):
            cc = coupled_clans(wa, wb, pp, ra, rb)
            flags += cc.incompatible
            mism += cc.mismatch or cc.incompatible
    rho_p = alpha0_interval(mp.beta_prime, mp.beta_star_L_max)
    bound = coupling_bound(list(wa.sites()), list(wb.sites()), mp.beta, mp.beta_prime, rho_p, mp.norm)
    ci = wilson_ci(flags, trials, conf)
    ci_m = wilson_ci(mism, trials, conf)
    passed = ci[1] <= bound and ci_m[1] <= bound
    return LemmaCheck(
        f"coupling separation={separation}",
        passed,
        bound - ci_m[1],
        {"flag_rate": flags / trials, "flag_ci": list(ci), "divergence_rate": mism / trials,
         "divergence_ci": list(ci_m), "bound": bound, "trials": trials},
    )


def check_b1(mp: ModelParams, side: int, replicas: int, seed: int, N: Optional[int] = None) -> LemmaCheck:
    """b1 computed from estimated presence probabilities against the analytic b1 bound."""
    from dataclasses import replace

    if N is not None:
        mp = replace(mp, N=N)
    from .bounds import b1_bound, D_value
    from .contours import contour_distance

    fam_l = LatticeFamily(mp.L_max, mp.beta)
    pp = ProcessParams(fam_l, seed=seed, beta_star_L_max=mp.beta_star_L_max, max_clan_size=mp.max_clan_size)
    w = Window.centered(side)
    est = estimate_lambda(mp.N, w, pp, replicas, seed)
    lam = max(est.value, 1e-300)
    bp = mp.bound_params(lam=lam)
    D = D_value(bp).lo
    contours = {k: fam_l.contour(k) for k in est.per_contour}
    p = {k: v / replicas for k, v in est.per_contour.items()}
    b1_hat = 0.0
    keys = sorted(contours)
    for a in keys:
        for b in keys:
            if contour_distance(contours[a], contours[b], mp.norm) < D:
                b1_hat += p[a] * p[b]
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bound = b1_bound(bp).hi
    return LemmaCheck("b1 from estimates", b1_hat <= bound, bound - b1_hat, {"b1_hat": b1_hat, "b1_bound": bound})


def check_volume(mp: ModelParams, window: Window, lam_hat: float) -> LemmaCheck:
    """|V| <= lambda N exp((beta + rho) N)."""
    rho = alpha0_interval(mp.beta, mp.beta_star_L_max)
    bound = lam_hat * mp.N * math.exp((mp.beta + rho.hi) * mp.N)
    return LemmaCheck("volume lemma", window.area <= bound, bound - window.area, {"area": window.area, "bound": bound})


def validate_lemmas(spec: ExperimentSpec, small_families: Sequence[FiniteFamily] = ()) -> list[LemmaCheck]:
    from .contours import enumerate_anchored

    mp = spec.params
    out = []
    reps = spec.replicas
    samples = []
    anchored = enumerate_anchored(L_max=min(8, mp.L_max))
    for n in (4, 6, 8):
        c = next((c for c in anchored if c.length == n), None)
        if c is not None:
            samples.append(c)
    out.append(check_p_gamma(samples, mp, reps, spec.seed))
    for fam in small_families:
        out.append(check_pair_exact(fam))
        out.append(check_pair_empirical(fam, reps, spec.seed))
    out.append(check_coupling(mp, 10, max(1000, reps // 10), spec.seed))
    out.append(check_b1(mp, 16, max(1000, reps // 10), spec.seed, N=4))
    return out
