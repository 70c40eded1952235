"""Two-dimensional Peierls contours on the dual lattice.

Coordinates are doubled so that everything stays integral:

* a site ``x`` of Z^2 sits at ``2x`` (both coordinates even),
* a link crossing the edge ``{x, x + e_i}`` has midpoint ``2x + e_i``
  (exactly one coordinate odd; its index is the link's orientation),
* a dual vertex sits at a point with both coordinates odd.

A contour is a closed, connected set of links; it is stored as the
lexicographically sorted tuple of its doubled midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

from .interval import Interval

Link = tuple[int, int]
Vertex = tuple[int, int]
Site = tuple[int, int]

#: link crossing the edge between site 0 and site e_1
DEFAULT_ANCHOR: Link = (1, 0)


class InvalidParameterError(ValueError):
    pass


class DivergentTailError(ValueError):
    pass


def link_orientation(link: Link) -> int:
    """Axis of the crossed primal edge (index of the odd coordinate)."""
    mx, my = link
    if (mx & 1) == (my & 1):
        raise InvalidParameterError(f"{link} is not a link midpoint")
    return 0 if mx & 1 else 1


def link_endpoints(link: Link) -> tuple[Vertex, Vertex]:
    mx, my = link
    if mx & 1:
        return (mx, my - 1), (mx, my + 1)
    return (mx - 1, my), (mx + 1, my)


def link_sites(link: Link) -> tuple[Site, Site]:
    """The two primal sites separated by ``link`` (plain coordinates)."""
    mx, my = link
    if mx & 1:
        return ((mx - 1) // 2, my // 2), ((mx + 1) // 2, my // 2)
    return (mx // 2, (my - 1) // 2), (mx // 2, (my + 1) // 2)


def link_between(u: Vertex, v: Vertex) -> Link:
    return ((u[0] + v[0]) // 2, (u[1] + v[1]) // 2)


@dataclass(frozen=True)
class Contour:
    links: tuple[Link, ...]
    _vertices: frozenset = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        verts = set()
        for lk in self.links:
            verts.update(link_endpoints(lk))
        object.__setattr__(self, "_vertices", frozenset(verts))

    @classmethod
    def from_links(cls, links: Iterable[Link]) -> "Contour":
        return cls(tuple(sorted(set(map(tuple, links)))))

    @property
    def length(self) -> int:
        return len(self.links)

    def __len__(self) -> int:
        return len(self.links)

    @property
    def vertices(self) -> frozenset:
        return self._vertices

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(xmin, ymin, xmax, ymax) of the dual vertices, doubled coordinates."""
        xs = [v[0] for v in self._vertices]
        ys = [v[1] for v in self._vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def sites(self) -> frozenset:
        """Primal sites adjacent to at least one link."""
        out = set()
        for lk in self.links:
            out.update(link_sites(lk))
        return frozenset(out)

    def translate(self, dx: int, dy: int) -> "Contour":
        """Shift by the site vector (dx, dy)."""
        return Contour(tuple((x + 2 * dx, y + 2 * dy) for x, y in self.links))

    def is_closed(self) -> bool:
        deg: dict[Vertex, int] = {}
        for lk in self.links:
            for v in link_endpoints(lk):
                deg[v] = deg.get(v, 0) + 1
        return all(d % 2 == 0 for d in deg.values())

    def is_connected(self) -> bool:
        if not self.links:
            return False
        by_vertex: dict[Vertex, list[Link]] = {}
        for lk in self.links:
            for v in link_endpoints(lk):
                by_vertex.setdefault(v, []).append(lk)
        seen = {self.links[0]}
        stack = [self.links[0]]
        while stack:
            lk = stack.pop()
            for v in link_endpoints(lk):
                for nb in by_vertex[v]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
        return len(seen) == len(self.links)

    def is_valid(self) -> bool:
        return (
            self.length >= 4
            and self.length % 2 == 0
            and self.is_closed()
            and self.is_connected()
        )

    def surrounds(self, site: Site = (0, 0)) -> bool:
        """Odd number of crossings of the ray from ``site`` along +x."""
        sx, sy = 2 * site[0], 2 * site[1]
        return sum(1 for mx, my in self.links if my == sy and mx > sx and mx & 1) % 2 == 1

    def intersects_window(self, window: "Window") -> bool:
        return any(window.contains(s) for s in self.sites())

    def encode(self) -> str:
        return ",".join(f"{x} {y}" for x, y in self.links)

    @classmethod
    def decode(cls, line: str) -> "Contour":
        links = []
        for tok in line.strip().split(","):
            x, y = tok.split()
            links.append((int(x), int(y)))
        c = cls.from_links(links)
        if not c.is_valid():
            raise InvalidParameterError(f"not a closed connected contour: {line.strip()!r}")
        return c


def unit_square(x: int = 0, y: int = 0) -> Contour:
    """Boundary of the single site (x, y)."""
    return Contour.from_links(
        [(2 * x + 1, 2 * y), (2 * x - 1, 2 * y), (2 * x, 2 * y + 1), (2 * x, 2 * y - 1)]
    )


@dataclass(frozen=True)
class Window:
    """Inclusive box of primal sites."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise InvalidParameterError(f"empty window {self}")

    @classmethod
    def square(cls, side: int, x0: int = 0, y0: int = 0) -> "Window":
        return cls(x0, y0, x0 + side - 1, y0 + side - 1)

    @classmethod
    def centered(cls, side: int) -> "Window":
        x0 = -(side // 2)
        return cls(x0, x0, x0 + side - 1, x0 + side - 1)

    @property
    def area(self) -> int:
        return (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)

    def contains(self, site: Site) -> bool:
        return self.x0 <= site[0] <= self.x1 and self.y0 <= site[1] <= self.y1

    def shift(self, dx: int, dy: int) -> "Window":
        return Window(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def sites(self) -> Iterator[Site]:
        for x in range(self.x0, self.x1 + 1):
            for y in range(self.y0, self.y1 + 1):
                yield (x, y)


def compatible(a: Contour, b: Contour) -> bool:
    """Contours are compatible iff they share no link endpoint."""
    return a.vertices.isdisjoint(b.vertices)


def contour_distance(a: Contour, b: Contour, norm: str = "euclidean") -> float:
    """Minimum distance between link midpoints, in lattice units."""
    best = math.inf
    for ax, ay in a.links:
        for bx, by in b.links:
            dx, dy = abs(ax - bx), abs(ay - by)
            if norm == "euclidean":
                d2 = dx * dx + dy * dy
            elif norm == "sup":
                d2 = max(dx, dy) ** 2
            else:
                raise InvalidParameterError(f"unknown norm {norm!r}")
            if d2 < best:
                best = d2
                if best == 0:
                    return 0.0
    return math.sqrt(best) / 2.0


@dataclass(frozen=True)
class ContourFamily:
    members: tuple[Contour, ...]
    generator: tuple = ()
    d: int = 2

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def length_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.members:
            out[c.length] = out.get(c.length, 0) + 1
        return dict(sorted(out.items()))

    def filter(self, N: int = 0, window: Window | None = None) -> "ContourFamily":
        keep = [
            c
            for c in self.members
            if c.length >= N and (window is None or c.intersects_window(window))
        ]
        return ContourFamily(tuple(keep), self.generator + (("filter", N, window),), self.d)

    def dumps(self) -> str:
        return "".join(c.encode() + "\n" for c in self.members)

    @classmethod
    def loads(cls, text: str) -> "ContourFamily":
        members = [Contour.decode(ln) for ln in text.splitlines() if ln.strip()]
        return cls(tuple(sorted(members, key=_family_key)))


def _family_key(c: Contour):
    return (c.length, c.links)


def _check_lmax(L_max: int) -> None:
    if L_max < 4 or L_max % 2:
        raise InvalidParameterError(f"L_max must be even and >= 4, got {L_max}")


def _closed_trails(anchor: Link, L_max: int, floor: Link | None = None) -> set[tuple[Link, ...]]:
    """Link sets of all closed trails of length <= L_max that start by crossing ``anchor``.

    Every closed connected even subgraph has an Euler circuit, so this
    reaches every contour through the anchor.  With ``floor`` set, links
    lexicographically below it are forbidden.
    """
    start, first = link_endpoints(anchor)
    sx, sy = start
    found: set[tuple[Link, ...]] = set()
    used: set[Link] = {anchor}
    path: list[Link] = [anchor]
    steps = ((2, 0), (-2, 0), (0, 2), (0, -2))

    def dfs(vx: int, vy: int) -> None:
        n = len(path)
        if vx == sx and vy == sy and n >= 4:
            found.add(tuple(sorted(path)))
        remaining = L_max - n
        if remaining <= 0:
            return
        for dx, dy in steps:
            wx, wy = vx + dx, vy + dy
            # need to get back to the start afterwards
            if (abs(wx - sx) + abs(wy - sy)) // 2 > remaining - 1:
                continue
            lk = (vx + dx // 2, vy + dy // 2)
            if lk in used or (floor is not None and lk < floor):
                continue
            used.add(lk)
            path.append(lk)
            dfs(wx, wy)
            path.pop()
            used.discard(lk)

    dfs(*first)
    return found


@lru_cache(maxsize=None)
def _anchored(anchor: Link, L_max: int) -> tuple[Contour, ...]:
    trails = _closed_trails(anchor, L_max)
    return tuple(sorted((Contour(t) for t in trails), key=_family_key))


def enumerate_anchored(anchor: Link = DEFAULT_ANCHOR, L_max: int = 8) -> ContourFamily:
    """All contours of length <= L_max containing ``anchor``."""
    _check_lmax(L_max)
    link_orientation(anchor)
    return ContourFamily(_anchored(tuple(anchor), L_max), ("anchored", anchor, L_max))


@lru_cache(maxsize=None)
def enumerate_shapes(L_max: int) -> tuple[Contour, ...]:
    """One representative per translation class: minimal link at (1, 0)."""
    _check_lmax(L_max)
    trails = _closed_trails(DEFAULT_ANCHOR, L_max, floor=DEFAULT_ANCHOR)
    return tuple(sorted((Contour(t) for t in trails), key=_family_key))


def enumerate_surrounding(site: Site, L_max: int) -> ContourFamily:
    """All contours of length <= L_max that surround ``site``."""
    _check_lmax(L_max)
    sx, sy = site
    out = set()
    # a surrounding contour crosses the +x ray at distance < L_max / 2
    for k in range(L_max // 2):
        anchor = (2 * sx + 2 * k + 1, 2 * sy)
        for c in _anchored(anchor, L_max):
            if c.surrounds(site):
                out.add(c)
    return ContourFamily(tuple(sorted(out, key=_family_key)), ("surround", site, L_max))


def enumerate_window(window: Window, L_max: int, N: int = 0) -> ContourFamily:
    """All contours of length in [N, L_max] adjacent to some site of ``window``."""
    _check_lmax(L_max)
    out = set()
    for shape in enumerate_shapes(L_max):
        if shape.length < N:
            continue
        for t in translates_hitting(shape, window):
            out.add(shape.translate(*t))
    return ContourFamily(tuple(sorted(out, key=_family_key)), ("window", window, L_max, N))


def translates_hitting(shape: Contour, window: Window) -> set[Site]:
    ts = set()
    for sx, sy in shape.sites():
        for x in range(window.x0 - sx, window.x1 - sx + 1):
            for y in range(window.y0 - sy, window.y1 - sy + 1):
                ts.add((x, y))
    return ts


# --- alpha_0 and beta* ----------------------------------------------------


def _tail_sum(beta: float, L_max: int, d: int, mode: str) -> Interval:
    """Certified upper bound on sum_{n > L_max, n even} c(n) e^{-beta n}."""
    q = 2 * d - 1
    if beta <= math.log(q):
        raise DivergentTailError(f"beta={beta} <= log({q}); counting-bound tail diverges")
    x = Interval.point(q) * (-Interval.point(beta)).exp()
    y = x * x
    k0 = L_max // 2 + 1
    one = Interval.point(1.0)
    # sum_{k>=k0} k y^k = y^k0 (k0 - (k0 - 1) y) / (1 - y)^2
    s1 = y ** k0 * (Interval.point(k0) - Interval.point(k0 - 1) * y) / ((one - y) ** 2)
    if mode == "anchor":
        # c(n) = n q^n with n = 2k
        return Interval.point(2.0) * s1
    if mode == "surround":
        # c(n) = (n / 2) n q^n = 2 k^2 q^{2k}
        # sum_{k>=k0} k^2 y^k = y^k0 [k0^2 - (2k0^2 - 2k0 - 1) y + (k0 - 1)^2 y^2] / (1 - y)^3
        k = Interval.point(k0)
        num = k * k - Interval.point(2 * k0 * k0 - 2 * k0 - 1) * y + Interval.point((k0 - 1) ** 2) * y * y
        return Interval.point(2.0) * y ** k0 * num / ((one - y) ** 3)
    raise InvalidParameterError(f"unknown anchor mode {mode!r}")


@lru_cache(maxsize=None)
def _head_counts(L_max: int, mode: str) -> tuple[tuple[int, int], ...]:
    if mode == "anchor":
        fam = enumerate_anchored(DEFAULT_ANCHOR, L_max)
    elif mode == "surround":
        fam = enumerate_surrounding((0, 0), L_max)
    else:
        raise InvalidParameterError(f"unknown anchor mode {mode!r}")
    return tuple(fam.length_counts().items())


def alpha0_interval(beta: float, L_max: int, d: int = 2, mode: str = "anchor") -> Interval:
    """Certified enclosure of alpha_0(beta)."""
    _check_lmax(L_max)
    if d != 2:
        raise InvalidParameterError("contour enumeration is implemented for d = 2 only")
    b = Interval.point(beta)
    head = Interval.point(0.0)
    for n, c in _head_counts(L_max, mode):
        head = head + Interval.point(c) * (-(b * Interval.point(n))).exp()
    tail = _tail_sum(beta, L_max, d, mode)
    return Interval(head.lo, (head + tail).hi)


def alpha0_bounds(beta: float, L_max: int, d: int = 2, mode: str = "anchor") -> tuple[float, float]:
    iv = alpha0_interval(beta, L_max, d, mode)
    return iv.lo, iv.hi


def _alpha0_lower(beta: float, L_max: int, mode: str) -> float:
    b = Interval.point(beta)
    head = Interval.point(0.0)
    for n, c in _head_counts(L_max, mode):
        head = head + Interval.point(c) * (-(b * Interval.point(n))).exp()
    return head.lo


@dataclass(frozen=True)
class BetaStarBracket:
    lo: float
    hi: float
    tolerance: float
    L_max: int

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def certified(self) -> bool:
        return self.width <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "width": self.width,
            "tolerance": self.tolerance,
            "certified": self.certified,
            "L_max": self.L_max,
        }


def _bisect(pred, a: float, b: float) -> tuple[float, float]:
    """Shrink [a, b] with pred(a) False and pred(b) True down to adjacent floats."""
    while True:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            return a, b
        if pred(m):
            b = m
        else:
            a = m


@lru_cache(maxsize=None)
def beta_star_bracket(tolerance: float = 1e-3, L_max: int = 12, d: int = 2, mode: str = "anchor") -> BetaStarBracket:
    """Certified enclosure [lo, hi] of the root of alpha_0(beta) = 1.

    ``lo`` is the largest float found where the enumerated head alone is
    still >= 1; ``hi`` is the smallest float found where head plus tail is
    <= 1.  The bracket is always returned; ``certified`` reports whether
    its width meets ``tolerance`` at this truncation.
    """
    if tolerance <= 0:
        raise InvalidParameterError("tolerance must be positive")
    _check_lmax(L_max)
    q = 2 * d - 1

    # lower(beta) >= 1 holds at lo  ->  alpha_0(lo) >= 1  ->  beta* >= lo
    a, b = 0.0, 1.0
    while _alpha0_lower(b, L_max, mode) >= 1.0:
        b *= 2.0
    lo, _ = _bisect(lambda t: _alpha0_lower(t, L_max, mode) < 1.0, a, b)

    # upper(beta) <= 1 at hi  ->  beta* <= hi
    a = math.nextafter(math.log(q), math.inf)
    b = a + 1.0

    def upper_below_one(t: float) -> bool:
        try:
            return alpha0_interval(t, L_max, d, mode).hi <= 1.0
        except DivergentTailError:
            return False

    while not upper_below_one(b):
        b += 1.0
    _, hi = _bisect(upper_below_one, a, b)
    return BetaStarBracket(lo, hi, tolerance, L_max)
