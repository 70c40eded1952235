"""Contour families that drive the cylinder process.

A family assigns every contour it contains a birth rate ``exp(-beta |g|)``
and knows how to draw, for a given space-time query, a Poisson process of
candidate contours with exactly those intensities.  Two flavours exist:

``FiniteFamily``
    an explicit, enumerated list of contours (keys are integer indices);
``LatticeFamily``
    every translate of every contour shape up to ``L_max`` on the whole of
    Z^2 (keys are ``(shape, tx, ty)`` triples); nothing is materialised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .contours import (
    Contour,
    ContourFamily,
    Window,
    enumerate_shapes,
)


@dataclass(frozen=True)
class WindowRegion:
    """Contours of length >= N adjacent to a site of ``window``."""

    window: Window
    N: int = 0


@dataclass(frozen=True)
class KeySetRegion:
    keys: frozenset


def _as_region(region) -> object:
    if isinstance(region, (WindowRegion, KeySetRegion)):
        return region
    if isinstance(region, Window):
        return WindowRegion(region)
    return KeySetRegion(frozenset(region))


class FiniteFamily:
    def __init__(self, contours: Iterable[Contour], beta: float):
        if isinstance(contours, ContourFamily):
            contours = contours.members
        self.contours: tuple[Contour, ...] = tuple(contours)
        if len(set(self.contours)) != len(self.contours):
            raise ValueError("duplicate contours in family")
        self.beta = float(beta)
        self.lengths = np.array([c.length for c in self.contours], dtype=int)
        self.rates = np.exp(-self.beta * self.lengths.astype(float))
        n = len(self.contours)
        self._inc = [
            np.array(
                [j for j in range(n) if not self.contours[i].vertices.isdisjoint(self.contours[j].vertices)],
                dtype=int,
            )
            for i in range(n)
        ]
        self._inc_sets = [frozenset(a.tolist()) for a in self._inc]
        self._region_cache: dict = {}

    def __len__(self) -> int:
        return len(self.contours)

    @property
    def max_length(self) -> int:
        return int(self.lengths.max()) if len(self.contours) else 0

    def keys(self) -> range:
        return range(len(self.contours))

    def contour(self, key: int) -> Contour:
        return self.contours[key]

    def length(self, key: int) -> int:
        return int(self.lengths[key])

    def rate(self, key: int) -> float:
        return float(self.rates[key])

    def incompatible(self, a: int, b: int) -> bool:
        return b in self._inc_sets[a]

    def incompatible_with(self, key: int) -> np.ndarray:
        return self._inc[key]

    def in_region(self, key: int, region) -> bool:
        return key in self._region_keys(region)

    def _region_keys(self, region) -> frozenset:
        region = _as_region(region)
        hit = self._region_cache.get(region)
        if hit is None:
            if isinstance(region, KeySetRegion):
                hit = frozenset(k for k in region.keys if 0 <= k < len(self.contours))
            else:
                hit = frozenset(
                    i
                    for i, c in enumerate(self.contours)
                    if c.length >= region.N and c.intersects_window(region.window)
                )
            self._region_cache[region] = hit
        return hit

    def region_mass(self, region) -> float:
        keys = self._region_keys(region)
        return float(sum(self.rates[k] for k in keys))

    def draw_region(self, region, rng: np.random.Generator) -> list[int]:
        """Poisson counts with intensity rate(key) for each key in the region."""
        keys = sorted(self._region_keys(region))
        if not keys:
            return []
        counts = rng.poisson(self.rates[keys])
        return [k for k, c in zip(keys, counts) for _ in range(c)]

    def draw_region_batch(self, region, rng: np.random.Generator, n: int) -> list[list[int]]:
        """``n`` independent draws of :meth:`draw_region` (mostly empty lists)."""
        keys = sorted(self._region_keys(region))
        out: list[list[int]] = [[] for _ in range(n)]
        if not keys:
            return out
        counts = rng.poisson(self.rates[keys], size=(n, len(keys)))
        for r in np.flatnonzero(counts.sum(axis=1)):
            out[r] = [k for k, c in zip(keys, counts[r]) for _ in range(c)]
        return out

    def draw_incompatible(self, key: int, rng: np.random.Generator) -> list[int]:
        idx = self._inc[key]
        counts = rng.poisson(self.rates[idx])
        return [int(k) for k, c in zip(idx, counts) for _ in range(c)]

    def key_json(self, key: int):
        return int(key)


class LatticeFamily:
    """All contours of length <= L_max on Z^2, indexed by (shape, translation)."""

    def __init__(self, L_max: int, beta: float, shapes: Sequence[Contour] | None = None):
        self.L_max = L_max
        self.beta = float(beta)
        self.shapes: tuple[Contour, ...] = tuple(shapes) if shapes is not None else enumerate_shapes(L_max)
        self.shape_lengths = np.array([s.length for s in self.shapes], dtype=int)
        self.shape_rates = np.exp(-self.beta * self.shape_lengths.astype(float))
        self._shape_verts = [np.array(sorted(s.vertices), dtype=np.int64) for s in self.shapes]
        self._shape_vset = [frozenset(s.vertices) for s in self.shapes]
        self._shape_sites = [np.array(sorted(s.sites()), dtype=np.int64) for s in self.shapes]
        nv = np.array([len(v) for v in self._shape_verts], dtype=float)
        w = self.shape_rates * nv
        self._vert_weight_total = float(w.sum())
        self._vert_cdf = np.cumsum(w) / w.sum()
        self._site_bbox = []
        for s in self._shape_sites:
            self._site_bbox.append((int(s[:, 0].min()), int(s[:, 1].min()), int(s[:, 0].max()), int(s[:, 1].max())))
        self._window_cache: dict = {}

    @property
    def max_length(self) -> int:
        return self.L_max

    def contour(self, key) -> Contour:
        i, tx, ty = key
        return self.shapes[i].translate(tx, ty)

    def length(self, key) -> int:
        return int(self.shape_lengths[key[0]])

    def rate(self, key) -> float:
        return float(self.shape_rates[key[0]])

    def vertices(self, key) -> frozenset:
        return _translated_vertices(self, key)

    def incompatible(self, a, b) -> bool:
        if a == b:
            return True
        # cheap reject on translation distance: shapes have diameter < L_max / 2
        if abs(a[1] - b[1]) > self.L_max or abs(a[2] - b[2]) > self.L_max:
            return False
        va = self._shape_vset[a[0]]
        dx, dy = 2 * (b[1] - a[1]), 2 * (b[2] - a[2])
        for vx, vy in self._shape_verts[b[0]]:
            if (int(vx) + dx, int(vy) + dy) in va:
                return True
        return False

    def in_region(self, key, region) -> bool:
        region = _as_region(region)
        if isinstance(region, KeySetRegion):
            return key in region.keys
        if self.length(key) < region.N:
            return False
        w = region.window
        i, tx, ty = key
        for sx, sy in self._shape_sites[i]:
            if w.x0 <= sx + tx <= w.x1 and w.y0 <= sy + ty <= w.y1:
                return True
        return False

    def draw_incompatible(self, key, rng: np.random.Generator) -> list:
        """Poisson process over contours sharing a dual vertex with ``key``.

        Candidates are drawn from the superposition over (vertex of key,
        shape, vertex of shape) triples and then thinned by the number of
        triples that produce the same translate.
        """
        gi, gx, gy = key
        gverts = self._shape_verts[gi]
        total = len(gverts) * self._vert_weight_total
        k = rng.poisson(total)
        if k == 0:
            return []
        out = []
        vi = rng.integers(len(gverts), size=k)
        shape_idx = np.searchsorted(self._vert_cdf, rng.random(k), side="right")
        shape_idx = np.minimum(shape_idx, len(self.shapes) - 1)
        u = rng.random(k)
        gset = self._shape_vset[gi]
        for j in range(k):
            si = int(shape_idx[j])
            sverts = self._shape_verts[si]
            w = sverts[int(u[j] * len(sverts))]
            v = gverts[vi[j]]
            # translate that maps vertex w of the shape onto vertex v of key
            dx2 = int(v[0] - w[0])
            dy2 = int(v[1] - w[1])
            mult = 0
            for sx, sy in sverts:
                if (int(sx) + dx2, int(sy) + dy2) in gset:
                    mult += 1
            if mult > 1 and rng.random() * mult >= 1.0:
                continue
            out.append((si, gx + dx2 // 2, gy + dy2 // 2))
        return out

    def _window_table(self, region: WindowRegion):
        hit = self._window_cache.get(region)
        if hit is None:
            w = region.window
            ok = self.shape_lengths >= region.N
            boxes = []
            for i, (ax, ay, bx, by) in enumerate(self._site_bbox):
                # translates whose site bounding box meets the window
                boxes.append((w.x0 - bx, w.y0 - by, w.x1 - ax, w.y1 - ay))
            boxes = np.array(boxes, dtype=np.int64)
            areas = (boxes[:, 2] - boxes[:, 0] + 1) * (boxes[:, 3] - boxes[:, 1] + 1)
            weights = np.where(ok, self.shape_rates * areas, 0.0)
            total = float(weights.sum())
            cdf = np.cumsum(weights) / total if total > 0 else weights
            hit = (boxes, total, cdf)
            self._window_cache[region] = hit
        return hit

    def region_mass_upper(self, region) -> float:
        region = _as_region(region)
        if isinstance(region, KeySetRegion):
            return float(sum(self.rate(k) for k in region.keys))
        return self._window_table(region)[1]

    def region_mass(self, region) -> float:
        """Exact total rate of the region (counts translates one by one)."""
        region = _as_region(region)
        if isinstance(region, KeySetRegion):
            return float(sum(self.rate(k) for k in region.keys))
        total = 0.0
        w = region.window
        for i, shape in enumerate(self.shapes):
            if shape.length < region.N:
                continue
            total += self.shape_rates[i] * _count_hitting(self._shape_sites[i], w)
        return total

    def draw_region(self, region, rng: np.random.Generator) -> list:
        region = _as_region(region)
        if isinstance(region, KeySetRegion):
            keys = sorted(region.keys)
            counts = rng.poisson([self.rate(k) for k in keys]) if keys else []
            return [k for k, c in zip(keys, counts) for _ in range(c)]
        boxes, total, cdf = self._window_table(region)
        if total <= 0:
            return []
        return self._draw_window(region, int(rng.poisson(total)), rng)

    def draw_region_batch(self, region, rng: np.random.Generator, n: int) -> list[list]:
        region = _as_region(region)
        if isinstance(region, KeySetRegion):
            keys = sorted(region.keys)
            out: list[list] = [[] for _ in range(n)]
            if not keys:
                return out
            counts = rng.poisson([self.rate(k) for k in keys], size=(n, len(keys)))
            for r in np.flatnonzero(counts.sum(axis=1)):
                out[r] = [k for k, c in zip(keys, counts[r]) for _ in range(c)]
            return out
        boxes, total, cdf = self._window_table(region)
        ks = rng.poisson(total, size=n) if total > 0 else np.zeros(n, dtype=int)
        return [self._draw_window(region, int(k), rng) if k else [] for k in ks]

    def _draw_window(self, region: WindowRegion, k: int, rng: np.random.Generator) -> list:
        if k == 0:
            return []
        boxes, total, cdf = self._window_table(region)
        shape_idx = np.searchsorted(cdf, rng.random(k), side="right")
        shape_idx = np.minimum(shape_idx, len(self.shapes) - 1)
        ux = rng.random(k)
        uy = rng.random(k)
        w = region.window
        out = []
        for j in range(k):
            si = int(shape_idx[j])
            x0, y0, x1, y1 = boxes[si]
            tx = int(x0 + int(ux[j] * (x1 - x0 + 1)))
            ty = int(y0 + int(uy[j] * (y1 - y0 + 1)))
            sites = self._shape_sites[si]
            for sx, sy in sites:
                if w.x0 <= sx + tx <= w.x1 and w.y0 <= sy + ty <= w.y1:
                    out.append((si, tx, ty))
                    break
        return out

    def key_json(self, key):
        return [int(key[0]), int(key[1]), int(key[2])]


def _count_hitting(sites: np.ndarray, w: Window) -> int:
    ts = set()
    for sx, sy in sites:
        for x in range(w.x0 - int(sx), w.x1 - int(sx) + 1):
            for y in range(w.y0 - int(sy), w.y1 - int(sy) + 1):
                ts.add((x, y))
    return len(ts)


def _translated_vertices(fam: LatticeFamily, key) -> frozenset:
    i, tx, ty = key
    return frozenset((int(x) + 2 * tx, int(y) + 2 * ty) for x, y in fam._shape_verts[i])
