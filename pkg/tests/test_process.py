from collections import Counter

import numpy as np
import pytest

from isingclans.contours import Window, unit_square
from isingclans.families import FiniteFamily, LatticeFamily
from isingclans.process import (
    Clan,
    ClanBudgetError,
    ClanInvariantError,
    Cylinder,
    ProcessParams,
    SubcriticalityError,
    classify,
    coupled_clans,
    exact_gibbs_small,
    forward_dynamics,
    free_and_loss_at_zero,
    grow_clan,
    sample_eta_zero_many,
    sample_free_network_at_zero,
)
from oracles import blocked_pair_law, two_state_presence


def params(fam, **kw):
    return ProcessParams(fam, check_beta_star=False, **kw)


def empirical_law(samples):
    c = Counter(frozenset(s) for s in samples)
    n = len(samples)
    return {k: v / n for k, v in c.items()}


def tv(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def test_single_contour_presence_is_two_state_law():
    fam = FiniteFamily([unit_square()], 0.2)
    s = sample_eta_zero_many([0], params(fam), 100000, np.random.default_rng(0))
    p = sum(1 for x in s if x) / len(s)
    want = two_state_presence(4, 0.2)
    assert abs(p - want) < 4 * np.sqrt(want * (1 - want) / len(s))


def test_blocked_pair_law():
    fam = FiniteFamily([unit_square(0, 0), unit_square(1, 0)], 0.1)
    s = sample_eta_zero_many([0, 1], params(fam), 100000, np.random.default_rng(1), check=True)
    law = blocked_pair_law(fam.rate(0), fam.rate(1))
    emp = empirical_law(s)
    assert frozenset({0, 1}) not in emp
    for cfg, p in law.items():
        assert emp.get(frozenset(cfg), 0.0) == pytest.approx(p, abs=0.006)


def test_exact_gibbs_small_against_hand_computation():
    fam = FiniteFamily([unit_square(0, 0), unit_square(1, 0), unit_square(3, 0)], 0.5)
    ex = exact_gibbs_small(fam)
    m = np.exp(-2.0)
    z = (1 + 2 * m) * (1 + m)
    assert ex.Z == pytest.approx(z)
    assert ex.marginals[2] == pytest.approx(m / (1 + m))
    assert ex.pair_marginals[0, 1] == 0.0
    assert ex.pair_marginals[0, 2] == pytest.approx(m * m / z)


def test_sampler_matches_exact_gibbs_in_strong_interaction_regime():
    # beta far below the lattice threshold, still subcritical on this family
    fam = FiniteFamily([unit_square(x, y) for x in range(3) for y in range(2)], 0.4)
    s = sample_eta_zero_many(list(fam.keys()), params(fam), 60000, np.random.default_rng(2), check=True)
    ex = exact_gibbs_small(fam)
    assert tv(empirical_law(s), ex.as_dict()) < 0.012


def test_samples_are_pairwise_compatible():
    fam = LatticeFamily(8, 0.9)
    p = params(fam)
    for s in sample_eta_zero_many(Window.square(5), p, 3000, np.random.default_rng(4)):
        for a in s:
            for b in s:
                if a != b:
                    assert not fam.incompatible(a, b)


def test_clan_invariants_and_roundtrip():
    fam = LatticeFamily(8, 0.8)
    rng = np.random.default_rng(5)
    found = False
    for _ in range(200):
        clan = classify(grow_clan(Window.square(4), 0.0, params(fam), rng), fam)
        if len(clan) > 3:
            found = True
            back = Clan.loads(clan.dumps(fam))
            assert back.dumps(fam) == clan.dumps(fam)
            assert back.labels == clan.labels
    assert found


def reference_labels(clan):
    """Level recursion: kept iff no ancestor is kept."""
    memo = {}

    def kept(i):
        if i not in memo:
            memo[i] = not any(kept(a) for a in clan.edges.get(i, ()))
        return memo[i]

    return {i: "kept" if kept(i) else "erased" for i in clan.cylinders}


def test_classify_matches_level_recursion():
    fam = LatticeFamily(8, 0.7)
    rng = np.random.default_rng(6)
    for _ in range(100):
        clan = classify(grow_clan(Window.square(4), 0.0, params(fam), rng))
        assert clan.labels == reference_labels(clan)


def test_check_detects_missing_ancestor():
    fam = FiniteFamily([unit_square(0, 0), unit_square(1, 0)], 1.0)
    a = Cylinder(0, 0, -2.0, 1.0)
    b = Cylinder(1, 1, -1.0, 0.5)
    clan = Clan({0: a, 1: b}, {0: (), 1: ()}, (0, 1))
    with pytest.raises(ClanInvariantError):
        clan.check(fam)
    Clan({0: a, 1: b}, {0: (), 1: (0,)}, (0, 1)).check(fam)


def test_unclassified_clan_has_no_kept_roots():
    clan = Clan({0: Cylinder(0, 0, -1.0, 1.0)}, {0: ()}, (0,))
    with pytest.raises(ClanInvariantError):
        clan.kept_roots()


def test_budget_error_near_criticality():
    fam = LatticeFamily(10, 0.3)
    with pytest.raises(ClanBudgetError) as err:
        for seed in range(20):
            grow_clan(Window.square(6), 0.0, params(fam, max_clan_size=200), np.random.default_rng(seed))
    assert err.value.size > 200


def test_subcriticality_is_enforced():
    with pytest.raises(SubcriticalityError):
        ProcessParams(LatticeFamily(6, 1.0))
    ProcessParams(LatticeFamily(6, 2.0))


def test_seeded_determinism():
    fam = LatticeFamily(8, 1.5)
    p = ProcessParams(fam)
    a = sample_eta_zero_many(Window.square(10), p, 500, np.random.default_rng(9))
    b = sample_eta_zero_many(Window.square(10), p, 500, np.random.default_rng(9))
    assert a == b


def test_lattice_agrees_with_finite_restriction_far_from_the_boundary():
    # unit squares only; a 9x9 box is many correlation lengths wide at beta = 0.6
    beta = 0.6
    lat = LatticeFamily(4, beta)
    fin = FiniteFamily([unit_square(x, y) for x in range(-4, 5) for y in range(-4, 5)], beta)
    centre = next(k for k in fin.keys() if fin.contour(k) == unit_square(0, 0))
    key = next(k for k in [(0, -1, 0)] if lat.contour(k) == unit_square(0, 0))
    n = 60000
    s_lat = sample_eta_zero_many([key], params(lat), n, np.random.default_rng(10))
    s_fin = sample_eta_zero_many([centre], params(fin), n, np.random.default_rng(11))
    p1 = sum(1 for s in s_lat if s) / n
    p2 = sum(1 for s in s_fin if s) / n
    assert abs(p1 - p2) < 4 * np.sqrt(2 * p1 * (1 - p1) / n)


def test_free_network_and_loss_network_share_cylinders():
    fam = LatticeFamily(8, 1.5)
    free, loss = free_and_loss_at_zero(Window.square(6), ProcessParams(fam), np.random.default_rng(12))
    for k, v in loss.items():
        assert free[k] >= v


def test_free_network_marginals():
    fam = FiniteFamily([unit_square(0, 0), unit_square(1, 0)], 0.3)
    rng = np.random.default_rng(13)
    counts = [sample_free_network_at_zero(params(fam), rng)[0] for _ in range(20000)]
    assert np.mean(counts) == pytest.approx(fam.rate(0), rel=0.03)


def test_forward_dynamics_stationary_marginals():
    fam = FiniteFamily([unit_square(0, 0), unit_square(1, 0), unit_square(3, 0)], 0.2)
    ex = exact_gibbs_small(fam)
    run = forward_dynamics([], 4000.0, fam, np.random.default_rng(14))
    np.testing.assert_allclose(run.time_average, ex.marginals, atol=0.03)


def test_forward_dynamics_rejects_incompatible_start():
    fam = FiniteFamily([unit_square(0, 0), unit_square(1, 0)], 1.0)
    with pytest.raises(ValueError):
        forward_dynamics([0, 1], 1.0, fam, np.random.default_rng(0))


def test_coupling_divergence_requires_interaction():
    fam = LatticeFamily(8, 0.9)
    p = params(fam)
    ra, rb = np.random.default_rng(15), np.random.default_rng(16)
    seen = 0
    for _ in range(3000):
        cc = coupled_clans(Window.square(2), Window.square(2, 3, 0), p, ra, rb)
        if cc.mismatch:
            assert cc.incompatible
            seen += 1
    assert seen > 0


def test_far_apart_regions_never_diverge():
    fam = LatticeFamily(6, 2.0)
    p = ProcessParams(fam)
    ra, rb = np.random.default_rng(17), np.random.default_rng(18)
    for _ in range(500):
        cc = coupled_clans(Window.square(2), Window.square(2, 40, 0), p, ra, rb)
        assert not cc.incompatible and not cc.mismatch
