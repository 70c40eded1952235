from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingclans.contours import Window, compatible, enumerate_shapes, unit_square
from isingclans.estimators import translates_hitting_count
from isingclans.families import FiniteFamily, KeySetRegion, LatticeFamily, WindowRegion, _count_hitting


def three_squares(beta=1.0):
    return FiniteFamily([unit_square(0, 0), unit_square(1, 0), unit_square(3, 0)], beta)


def test_finite_family_incompatibility_includes_self():
    fam = three_squares()
    assert fam.incompatible(0, 0)
    assert fam.incompatible(0, 1) and not fam.incompatible(0, 2)
    assert sorted(fam.incompatible_with(0)) == [0, 1]


def test_finite_family_rejects_duplicates():
    with pytest.raises(ValueError):
        FiniteFamily([unit_square(), unit_square()], 1.0)


def test_finite_family_rates():
    fam = three_squares(0.5)
    np.testing.assert_allclose(fam.rates, np.exp(-2.0))
    assert fam.region_mass(KeySetRegion(frozenset({0, 2}))) == pytest.approx(2 * np.exp(-2.0))


def test_finite_batch_counts_are_poisson():
    fam = three_squares(0.25)
    rng = np.random.default_rng(1)
    draws = fam.draw_region_batch(KeySetRegion(frozenset({0, 1, 2})), rng, 40000)
    c = Counter(k for d in draws for k in d)
    for k in range(3):
        assert c[k] / 40000 == pytest.approx(fam.rate(k), rel=0.03)


def lattice_neighbours(fam, key):
    """Brute force: every key whose contour shares a dual vertex with ``key``."""
    g = fam.contour(key)
    out = set()
    for si, s in enumerate(fam.shapes):
        for tx in range(key[1] - fam.L_max, key[1] + fam.L_max + 1):
            for ty in range(key[2] - fam.L_max, key[2] + fam.L_max + 1):
                if not compatible(g, s.translate(tx, ty)):
                    out.add((si, tx, ty))
    return out


@pytest.mark.parametrize("key", [(0, 0, 0), (2, 2, -1)])
def test_lattice_incompatible_matches_brute_force(key):
    fam = LatticeFamily(6, 1.0)
    nb = lattice_neighbours(fam, key)
    for si in range(len(fam.shapes)):
        for tx in range(key[1] - 4, key[1] + 5):
            for ty in range(key[2] - 4, key[2] + 5):
                k = (si, tx, ty)
                assert fam.incompatible(key, k) == (k in nb)


def test_lattice_draw_incompatible_has_exact_intensities():
    fam = LatticeFamily(6, 0.5)
    key = (0, 0, 0)
    nb = lattice_neighbours(fam, key)
    rng = np.random.default_rng(7)
    reps = 60000
    c = Counter()
    for _ in range(reps):
        c.update(fam.draw_incompatible(key, rng))
    assert set(c) <= nb
    expected = sum(fam.rate(k) for k in nb)
    assert sum(c.values()) / reps == pytest.approx(expected, rel=0.02)
    # grouped by shape to keep the per-cell noise small
    by_shape = Counter()
    for k, v in c.items():
        by_shape[k[0]] += v
    want = Counter()
    for k in nb:
        want[k[0]] += fam.rate(k)
    for si, m in want.items():
        assert by_shape[si] / reps == pytest.approx(m, rel=0.08, abs=5e-4)


def test_lattice_window_draws_have_exact_intensities():
    fam = LatticeFamily(6, 0.5)
    region = WindowRegion(Window.square(3), 0)
    rng = np.random.default_rng(3)
    reps = 40000
    draws = fam.draw_region_batch(region, rng, reps)
    keys = [k for d in draws for k in d]
    assert all(fam.in_region(k, region) for k in keys)
    assert len(keys) / reps == pytest.approx(fam.region_mass(region), rel=0.02)
    assert fam.region_mass(region) <= fam.region_mass_upper(region)


def test_region_N_filter():
    fam = LatticeFamily(8, 1.0)
    region = WindowRegion(Window.square(4), 8)
    draws = fam.draw_region_batch(region, np.random.default_rng(0), 20000)
    assert all(fam.length(k) >= 8 for d in draws for k in d)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(enumerate_shapes(8)) - 1), st.integers(1, 9))
def test_translate_count_formula_matches_direct_count(si, side):
    fam = LatticeFamily(8, 1.0)
    sites = fam._shape_sites[si]
    assert translates_hitting_count(sites, side) == _count_hitting(sites, Window.square(side))


def test_key_json_and_contour():
    fam = LatticeFamily(4, 1.0)
    # shapes are anchored at their minimal link (1, 0), so shape 0 is the square of site (1, 0)
    assert fam.contour((0, 2, 3)) == unit_square(3, 3)
    assert fam.key_json((0, 2, 3)) == [0, 2, 3]
