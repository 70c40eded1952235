"""Space-time cylinder process, clans of ancestors and the loss network.

The Poisson process of cylinders is never generated in full.  A
:class:`World` reveals it lazily: a query ``(contour set S, time s)`` asks
for every cylinder whose basis is in ``S`` and whose life contains ``s``.
For one contour of rate ``m`` those cylinders form a Poisson process of
mean ``m`` with age and residual life both Exp(1).  Fresh proposals that
fall inside a space-time region already revealed by an earlier query are
discarded and replaced by what was revealed there, which keeps the world
consistent however the queries overlap.
"""

from __future__ import annotations

import copy
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional

import numpy as np

from .contours import beta_star_bracket
from .families import FiniteFamily, _as_region


class ClanBudgetError(RuntimeError):
    """Clan growth exceeded its size or depth budget (possible backward percolation)."""

    def __init__(self, message: str, size: int, depth: int, depth_counts: dict):
        super().__init__(message)
        self.size = size
        self.depth = depth
        self.depth_counts = depth_counts


class ClanInvariantError(RuntimeError):
    pass


class SubcriticalityError(ValueError):
    pass


@dataclass(frozen=True)
class Cylinder:
    id: int
    basis: Hashable
    birth: float
    death: float

    def alive_at(self, t: float) -> bool:
        # lives are half-open [birth, death)
        return self.birth <= t < self.death

    def lives_overlap(self, other: "Cylinder") -> bool:
        return self.birth < other.death and other.birth < self.death


def incompatible_cylinders(c1: Cylinder, c2: Cylinder, family) -> bool:
    """Bases incompatible and lives intersecting."""
    return family.incompatible(c1.basis, c2.basis) and c1.lives_overlap(c2)


@dataclass
class ProcessParams:
    family: object
    max_clan_size: int = 10**6
    max_depth: int = 10**4
    seed: int = 0
    check_beta_star: bool = True
    beta_star_L_max: int = 12

    def __post_init__(self):
        if self.check_beta_star:
            bs = beta_star_bracket(1e-3, self.beta_star_L_max)
            if not self.beta > bs.hi:
                raise SubcriticalityError(
                    f"beta={self.beta} is not above the certified beta* bracket "
                    f"[{bs.lo:.6g}, {bs.hi:.6g}] (L_max={self.beta_star_L_max})"
                )

    @property
    def beta(self) -> float:
        return self.family.beta

    def rng(self, *path: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=tuple(path)))


class _Query:
    __slots__ = ("time", "basis", "region")

    def __init__(self, time, basis=None, region=None):
        self.time = time
        self.basis = basis
        self.region = region


class World:
    """A partially revealed realisation of the cylinder process."""

    def __init__(self, family):
        self.family = family
        self.cylinders: list[Cylinder] = []
        self._by_basis: dict = {}
        self._queries: list[_Query] = []
        self._next_id = 0

    def _covers(self, key, birth: float, death: float) -> bool:
        fam = self.family
        for q in self._queries:
            if birth < q.time < death:
                if q.basis is not None:
                    if fam.incompatible(q.basis, key):
                        return True
                elif fam.in_region(key, q.region):
                    return True
        return False

    def _admit(self, keys, t: float, rng: np.random.Generator) -> None:
        if not keys:
            return
        n = len(keys)
        ages = rng.exponential(1.0, n)
        rests = rng.exponential(1.0, n)
        fresh = []
        for key, a, r in zip(keys, ages, rests):
            birth, death = t - float(a), t + float(r)
            if not self._covers(key, birth, death):
                fresh.append((key, birth, death))
        for key, birth, death in fresh:
            c = Cylinder(self._next_id, key, birth, death)
            self._next_id += 1
            self.cylinders.append(c)
            self._by_basis.setdefault(key, []).append(c)

    def alive_in_region(self, region, t: float, rng: np.random.Generator, proposals=None) -> list[Cylinder]:
        """Cylinders alive at ``t`` with basis in ``region``.

        ``proposals`` may carry a pre-drawn ``family.draw_region`` result.
        """
        region = _as_region(region)
        if proposals is None:
            proposals = self.family.draw_region(region, rng)
        self._admit(proposals, t, rng)
        self._queries.append(_Query(t, region=region))
        fam = self.family
        return [
            c
            for key, cs in self._by_basis.items()
            if fam.in_region(key, region)
            for c in cs
            if c.birth < t < c.death
        ]

    def ancestors(self, cyl: Cylinder, rng: np.random.Generator) -> list[Cylinder]:
        """First-generation ancestors: incompatible cylinders alive at ``cyl``'s birth."""
        t = cyl.birth
        self._admit(self.family.draw_incompatible(cyl.basis, rng), t, rng)
        self._queries.append(_Query(t, basis=cyl.basis))
        fam = self.family
        out = []
        for key, cs in self._by_basis.items():
            hits = [c for c in cs if c.birth < t < c.death]
            if hits and fam.incompatible(cyl.basis, key):
                out.extend(hits)
        out.sort(key=lambda c: (c.birth, c.id))
        return out


@dataclass
class Clan:
    cylinders: dict  # id -> Cylinder
    edges: dict  # id -> tuple of ancestor ids
    roots: tuple  # ids
    labels: dict = field(default_factory=dict)  # id -> "kept" | "erased"
    depth: int = 0

    def __len__(self) -> int:
        return len(self.cylinders)

    def kept_roots(self) -> list[Cylinder]:
        if not self.labels and self.cylinders:
            raise ClanInvariantError("clan has not been classified")
        return [self.cylinders[i] for i in self.roots if self.labels[i] == "kept"]

    def check(self, family) -> None:
        """Ancestor edges are exactly the earlier-born incompatible cylinders, acyclic."""
        cyls = sorted(self.cylinders.values(), key=lambda c: (c.birth, c.id))
        for i, c in enumerate(cyls):
            want = {
                a.id
                for a in cyls[:i]
                if a.death > c.birth and family.incompatible(a.basis, c.basis)
            }
            have = set(self.edges.get(c.id, ()))
            if want - have:
                raise ClanInvariantError(f"cylinder {c.id} is missing ancestors {sorted(want - have)}")
            for a in have:
                if a not in self.cylinders:
                    raise ClanInvariantError(f"edge {c.id} -> {a} leaves the clan")
                if not self.cylinders[a].birth < c.birth:
                    raise ClanInvariantError(f"edge {c.id} -> {a} is not backwards in time")
            if have - want:
                raise ClanInvariantError(f"cylinder {c.id} has spurious ancestors {sorted(have - want)}")

    def dumps(self, family=None) -> str:
        """JSON lines, one cylinder per line, ordered by id."""
        lines = []
        for cid in sorted(self.cylinders):
            c = self.cylinders[cid]
            basis = family.key_json(c.basis) if family is not None else c.basis
            lines.append(
                json.dumps(
                    {
                        "id": c.id,
                        "basis": basis,
                        "birth": c.birth,
                        "death": c.death,
                        "ancestors": sorted(self.edges.get(cid, ())),
                        "label": self.labels.get(cid),
                        "root": cid in self.roots,
                    },
                    sort_keys=True,
                )
            )
        return "".join(ln + "\n" for ln in lines)

    @classmethod
    def loads(cls, text: str) -> "Clan":
        cylinders, edges, roots, labels = {}, {}, [], {}
        for ln in text.splitlines():
            if not ln.strip():
                continue
            rec = json.loads(ln)
            basis = rec["basis"]
            if isinstance(basis, list):
                basis = tuple(basis)
            c = Cylinder(int(rec["id"]), basis, float(rec["birth"]), float(rec["death"]))
            cylinders[c.id] = c
            edges[c.id] = tuple(rec.get("ancestors", ()))
            if rec.get("root"):
                roots.append(c.id)
            if rec.get("label") is not None:
                labels[c.id] = rec["label"]
        return cls(cylinders, edges, tuple(roots), labels)


def grow_clan(
    query,
    t: float,
    params: ProcessParams,
    rng: np.random.Generator,
    world: Optional[World] = None,
    proposals=None,
) -> Clan:
    """Backward construction of the clans of all cylinders alive at ``t`` in ``query``.

    ``query`` is a window, a ``WindowRegion`` or an iterable of contour keys.
    Passing ``world`` continues an existing partial realisation.
    """
    if world is None:
        world = World(params.family)
    roots = world.alive_in_region(query, t, rng, proposals)
    cylinders = {c.id: c for c in roots}
    edges: dict = {}
    gen = {c.id: 0 for c in roots}
    frontier = sorted(roots, key=lambda c: c.id)
    depth = 0
    while frontier:
        nxt = []
        for c in frontier:
            anc = world.ancestors(c, rng)
            edges[c.id] = tuple(a.id for a in anc)
            for a in anc:
                if a.id not in cylinders:
                    cylinders[a.id] = a
                    gen[a.id] = gen[c.id] + 1
                    nxt.append(a)
            if len(cylinders) > params.max_clan_size:
                raise ClanBudgetError(
                    f"clan exceeded {params.max_clan_size} cylinders (possible backward percolation)",
                    len(cylinders), depth, dict(Counter(gen.values())),
                )
        if nxt:
            depth += 1
            if depth > params.max_depth:
                raise ClanBudgetError(
                    f"clan exceeded depth {params.max_depth} (possible backward percolation)",
                    len(cylinders), depth, dict(Counter(gen.values())),
                )
        frontier = nxt
    return Clan(cylinders, edges, tuple(sorted(c.id for c in roots)), depth=depth)


def classify(clan: Clan, family=None) -> Clan:
    """Label every cylinder kept or erased.

    A cylinder is kept iff none of its ancestors is kept; processing in
    birth order is the same as the level-by-level recursion since every
    ancestor is born strictly earlier.  With ``family`` given, ancestor sets
    are first checked for completeness.
    """
    if family is not None:
        clan.check(family)
    for cid, anc in clan.edges.items():
        for a in anc:
            if a not in clan.cylinders:
                raise ClanInvariantError(f"edge {cid} -> {a} leaves the clan")
    order = sorted(clan.cylinders.values(), key=lambda c: (c.birth, c.id))
    labels = {}
    for c in order:
        anc = clan.edges.get(c.id, ())
        for a in anc:
            if a not in labels:
                raise ClanInvariantError(f"ancestor {a} of {c.id} is not born earlier")
        labels[c.id] = "erased" if any(labels[a] == "kept" for a in anc) else "kept"
    clan.labels = labels
    return clan


def sample_eta_zero(window, params: ProcessParams, rng: np.random.Generator, check: bool = False) -> list:
    """Contours present at time 0 in the stationary loss network, restricted to ``window``.

    Returns the sorted list of basis keys of the kept roots.
    """
    clan = grow_clan(window, 0.0, params, rng)
    classify(clan, params.family if check else None)
    return sorted(c.basis for c in clan.kept_roots())


def sample_eta_zero_many(
    window, params: ProcessParams, n: int, rng: np.random.Generator, check: bool = False
) -> list[list]:
    """``n`` independent perfect samples; root proposals are drawn in one batch."""
    region = _as_region(window)
    batch = params.family.draw_region_batch(region, rng, n)
    out = []
    for proposals in batch:
        if not proposals:
            out.append([])
            continue
        clan = grow_clan(region, 0.0, params, rng, proposals=proposals)
        classify(clan, params.family if check else None)
        out.append(sorted(c.basis for c in clan.kept_roots()))
    return out


def sample_free_network_at_zero(params: ProcessParams, rng: np.random.Generator, keys=None) -> dict:
    """Independent Poisson(exp(-beta|g|)) occupation numbers."""
    fam = params.family
    if keys is None:
        keys = list(fam.keys())
    rates = np.array([fam.rate(k) for k in keys], dtype=float)
    counts = rng.poisson(rates) if len(keys) else []
    return {k: int(c) for k, c in zip(keys, counts)}


def free_and_loss_at_zero(window, params: ProcessParams, rng: np.random.Generator) -> tuple[Counter, Counter]:
    """Free-network occupation and loss-network occupation from the same cylinders."""
    clan = classify(grow_clan(window, 0.0, params, rng))
    free = Counter(clan.cylinders[i].basis for i in clan.roots)
    loss = Counter(c.basis for c in clan.kept_roots())
    return free, loss


# --- forward dynamics -----------------------------------------------------------


@dataclass
class TrajectorySummary:
    time_average: np.ndarray
    final: frozenset
    n_births: int
    n_deaths: int
    n_rejected: int
    duration: float


def forward_dynamics(
    initial: Iterable[int],
    duration: float,
    family: FiniteFamily,
    rng: np.random.Generator,
) -> TrajectorySummary:
    """Gillespie simulation of the loss network on a finite family."""
    n = len(family)
    present = np.zeros(n, dtype=bool)
    for k in initial:
        present[k] = True
    for k in np.flatnonzero(present):
        for j in family.incompatible_with(k):
            if j != k and present[j]:
                raise ValueError("initial configuration is not pairwise compatible")
    rates = family.rates
    birth_total = float(rates.sum())
    cdf = np.cumsum(rates) / birth_total if birth_total > 0 else rates
    occupied_time = np.zeros(n)
    t = 0.0
    nb = nd = nr = 0
    while True:
        k_alive = int(present.sum())
        total = birth_total + k_alive
        if total <= 0:
            occupied_time += present * (duration - t)
            break
        dt = rng.exponential(1.0 / total)
        if t + dt >= duration:
            occupied_time += present * (duration - t)
            break
        occupied_time += present * dt
        t += dt
        if rng.random() * total < birth_total:
            g = int(np.searchsorted(cdf, rng.random(), side="right"))
            g = min(g, n - 1)
            if any(present[j] for j in family.incompatible_with(g)):
                nr += 1
            else:
                present[g] = True
                nb += 1
        else:
            alive = np.flatnonzero(present)
            present[alive[rng.integers(len(alive))]] = False
            nd += 1
    return TrajectorySummary(
        occupied_time / duration if duration > 0 else present.astype(float),
        frozenset(int(i) for i in np.flatnonzero(present)),
        nb,
        nd,
        nr,
        duration,
    )


# --- exact Gibbs measure ------------------------------------------------------


@dataclass
class ExactGibbs:
    configurations: list  # list of frozensets of keys
    probabilities: np.ndarray
    Z: float
    marginals: np.ndarray
    pair_marginals: np.ndarray

    def as_dict(self) -> dict:
        return {cfg: float(p) for cfg, p in zip(self.configurations, self.probabilities)}


def exact_gibbs_small(family: FiniteFamily, beta: Optional[float] = None, max_states: int = 2**25) -> ExactGibbs:
    """Enumerate every compatible configuration of a small family."""
    beta = family.beta if beta is None else float(beta)
    n = len(family)
    inc = [set(int(j) for j in family.incompatible_with(i)) for i in range(n)]
    lengths = [family.length(i) for i in range(n)]
    configs: list = []
    weights: list = []

    def rec(i: int, chosen: list, energy: int) -> None:
        if len(configs) > max_states:
            raise OverflowError(f"more than {max_states} compatible configurations")
        if i == n:
            configs.append(frozenset(chosen))
            weights.append(-beta * energy)
            return
        rec(i + 1, chosen, energy)
        if all(j not in inc[i] for j in chosen):
            chosen.append(i)
            rec(i + 1, chosen, energy + lengths[i])
            chosen.pop()

    rec(0, [], 0)
    logw = np.array(weights)
    w = np.exp(logw)
    Z = float(w.sum())
    probs = w / Z
    marg = np.zeros(n)
    pair = np.zeros((n, n))
    for cfg, p in zip(configs, probs):
        idx = sorted(cfg)
        for a in idx:
            marg[a] += p
            for b in idx:
                pair[a, b] += p
    return ExactGibbs(configs, probs, Z, marg, pair)


# --- coupled clans ----------------------------------------------------------------


@dataclass
class CoupledClans:
    clan_a: Clan
    clan_b: Clan
    indep_a: Clan
    indep_b: Clan
    incompatible: bool
    mismatch: bool


def clans_incompatible(a: Clan, b: Clan, family) -> bool:
    for ca in a.cylinders.values():
        for cb in b.cylinders.values():
            if ca.lives_overlap(cb) and family.incompatible(ca.basis, cb.basis):
                return True
    return False


def _clan_signature(clan: Clan) -> list:
    return sorted((c.basis, c.birth, c.death) for c in clan.cylinders.values())


def _covered(cylinders, world: "World", upto: int) -> bool:
    """Some cylinder falls in the space-time region explored by the first ``upto`` queries."""
    queries = world._queries[:upto]
    fam = world.family
    for c in cylinders:
        for q in queries:
            if c.birth < q.time < c.death:
                if q.basis is not None:
                    if fam.incompatible(q.basis, c.basis):
                        return True
                elif fam.in_region(c.basis, q.region):
                    return True
    return False


def coupled_clans(region_a, region_b, params: ProcessParams, rng_a, rng_b) -> CoupledClans:
    """Joint and independent clans of two regions, coupled through shared randomness.

    The independent pair uses ``rng_a`` and ``rng_b`` in separate worlds.
    The joint pair explores ``region_a`` with ``rng_a`` and then continues
    the same world for ``region_b``, drawing fresh randomness from a copy of
    ``rng_b``.  The two constructions consume ``rng_b`` identically until
    one clan enters the space-time region explored by the other, which is
    the ``incompatible`` flag.  Without it the joint and independent
    clans of ``region_b`` coincide.
    """
    rng_b_joint = copy.deepcopy(rng_b)
    world = World(params.family)
    clan_a = classify(grow_clan(region_a, 0.0, params, rng_a, world=world))
    n_a = len(world._queries)
    clan_b = classify(grow_clan(region_b, 0.0, params, rng_b_joint, world=world))
    world_b = World(params.family)
    indep_b = classify(grow_clan(region_b, 0.0, params, rng_b, world=world_b))
    indep_a = clan_a
    flag = (
        clans_incompatible(indep_a, indep_b, params.family)
        or _covered(indep_b.cylinders.values(), world, n_a)
        or _covered(indep_a.cylinders.values(), world_b, len(world_b._queries))
    )
    mismatch = _clan_signature(clan_b) != _clan_signature(indep_b)
    return CoupledClans(clan_a, clan_b, indep_a, indep_b, flag, mismatch)
