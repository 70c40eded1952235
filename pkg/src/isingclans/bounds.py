"""Analytic Chen-Stein bounds for large contours.

All constants are evaluated in interval arithmetic so that the
uncertainty in alpha_0 (only bracketed, never known exactly) and in the
critical inverse temperature propagates into every reported number.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .contours import alpha0_interval, beta_star_bracket
from .interval import Interval


class BoundDomainError(ValueError):
    pass


class EpsilonWarning(UserWarning):
    pass


def _iv(x) -> Interval:
    return Interval.coerce(x)


@dataclass(frozen=True)
class BoundParams:
    beta: float
    beta_prime: float
    N: int
    lam: float
    beta_star: Interval
    rho: Interval
    rho_prime: Interval
    d: int = 2
    D: Optional[float] = None
    epsilon: Optional[float] = None
    strict_epsilon: bool = False

    def __post_init__(self):
        for name in ("beta_star", "rho", "rho_prime"):
            object.__setattr__(self, name, _iv(getattr(self, name)))
        if self.d < 2:
            raise BoundDomainError("d must be >= 2")
        if self.N < 4:
            raise BoundDomainError(f"N must be >= 4, got {self.N}")
        if not self.lam > 0:
            raise BoundDomainError("lambda must be positive")
        if not (self.beta_star.hi < self.beta_prime < self.beta):
            raise BoundDomainError(
                f"need beta* < beta' < beta with beta* <= {self.beta_star.hi}; "
                f"got beta'={self.beta_prime}, beta={self.beta}"
            )
        if self.rho.lo < 0 or self.rho_prime.lo < 0:
            raise BoundDomainError("alpha_0 enclosures must be non-negative")
        if self.D is not None and not self.D > 0:
            raise BoundDomainError("D must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise BoundDomainError("epsilon must be positive")

    @classmethod
    def from_model(
        cls,
        beta: float,
        beta_prime: float,
        N: int,
        lam: float,
        L_max: int = 12,
        d: int = 2,
        D: Optional[float] = None,
        epsilon: Optional[float] = None,
        tolerance: float = 1e-3,
        strict_epsilon: bool = False,
    ) -> "BoundParams":
        """Fill beta*, rho and rho' from the certified contour enumeration."""
        bs = beta_star_bracket(tolerance, L_max, d)
        if not beta_prime > bs.hi:
            raise BoundDomainError(
                f"beta'={beta_prime} is not above the certified beta* bracket "
                f"[{bs.lo}, {bs.hi}] at L_max={L_max}"
            )
        return cls(
            beta=beta,
            beta_prime=beta_prime,
            N=N,
            lam=lam,
            beta_star=Interval(bs.lo, bs.hi),
            rho=alpha0_interval(beta, L_max, d),
            rho_prime=alpha0_interval(beta_prime, L_max, d),
            d=d,
            D=D,
            epsilon=epsilon,
            strict_epsilon=strict_epsilon,
        )

    def echo(self) -> dict:
        return {
            "d": self.d,
            "beta": self.beta,
            "beta_prime": self.beta_prime,
            "N": self.N,
            "lambda": self.lam,
            "D": self.D,
            "epsilon": self.epsilon,
            "beta_star": self.beta_star.as_list(),
            "rho": self.rho.as_list(),
            "rho_prime": self.rho_prime.as_list(),
            "strict_epsilon": self.strict_epsilon,
        }


# --- building blocks --------------------------------------------------------


def _b(p: BoundParams) -> Interval:
    return Interval.point(p.beta)


def _gap(p: BoundParams) -> Interval:
    """beta - beta'."""
    return _b(p) - p.beta_prime


def _log_q(p: BoundParams) -> Interval:
    return Interval.point(2 * p.d - 1).log()


def _one_minus_rho_prime(p: BoundParams) -> Interval:
    if p.rho_prime.hi >= 1.0:
        raise BoundDomainError(f"alpha_0(beta') = {p.rho_prime} is not below 1")
    return 1.0 - p.rho_prime


def epsilon_value(p: BoundParams) -> Interval:
    """Default epsilon = beta' - beta*, taken at the upper end of the beta* bracket."""
    if p.epsilon is not None:
        return Interval.point(p.epsilon)
    return Interval.point(p.beta_prime) - p.beta_star.hi


def D_value(p: BoundParams) -> Interval:
    if p.D is not None:
        return Interval.point(p.D)
    return delta_choice(p) * p.N


def _check_epsilon(p: BoundParams, eps: Interval) -> list[str]:
    notes = []
    header = Interval.point(p.d) * (_b(p) + p.rho)
    if eps.hi > header.lo:
        raise BoundDomainError(f"epsilon={eps} exceeds d(beta+rho)={header}")
    if (eps * p.d).hi >= _gap(p).lo:
        msg = (
            f"epsilon*d={(eps * p.d).hi:.6g} >= beta-beta'={_gap(p).lo:.6g}: "
            "only the weaker epsilon <= d(beta+rho) condition holds"
        )
        if p.strict_epsilon:
            raise BoundDomainError(msg)
        warnings.warn(msg, EpsilonWarning, stacklevel=3)
        notes.append(msg)
    return notes


# --- lemmas -----------------------------------------------------------------


def p_gamma_bounds(length: int, p: BoundParams) -> Interval:
    """[exp(-(beta+rho)|g|), exp(-beta|g|)] for contours with |g| >= N."""
    if length < p.N:
        raise BoundDomainError(f"length {length} < N={p.N}")
    lo = (-(_b(p) + p.rho.hi) * length).exp().lo
    hi = (-_b(p) * length).exp().hi
    return Interval(lo, hi)


def pair_bound(len1: int, len2: int, p1_up: float, p2_up: float, p: BoundParams | float) -> float:
    """Upper bound on the joint presence probability of two contours."""
    if len1 <= 0 or len2 <= 0:
        raise BoundDomainError("lengths must be positive")
    beta = p.beta if isinstance(p, BoundParams) else float(p)
    b = Interval.point(beta)
    out = Interval.point(p1_up) * (-(b * len2)).exp() + Interval.point(p2_up) * (-(b * len1)).exp()
    return out.hi


def _common_b12(p: BoundParams) -> tuple[Interval, Interval, Interval]:
    eps = epsilon_value(p)
    D = D_value(p)
    b = _b(p)
    ratio = (b + p.rho) / (b - p.beta_star)
    vol = ((D + 1.0) / eps) ** p.d
    decay = (-(b - p.beta_star - eps) * p.N).exp()
    return ratio, vol, decay


def b1_bound(p: BoundParams) -> Interval:
    _check_epsilon(p, epsilon_value(p))
    ratio, vol, decay = _common_b12(p)
    return Interval.point(2.0 * p.lam * p.N) * ratio * vol * decay


def b2_bound(p: BoundParams) -> Interval:
    _check_epsilon(p, epsilon_value(p))
    ratio, vol, decay = _common_b12(p)
    inner = Interval.point(2.0 * p.N) * ratio + float(p.d**p.d)
    return Interval.point(p.lam) * vol * inner * decay


def Q_constant(p: BoundParams) -> Interval:
    g = _gap(p)
    om = _one_minus_rho_prime(p)
    return 4.0 * (2 * p.d - 1) ** 2 * (_b(p) + p.rho) / (om.sqr() * g.sqr())


def A_constant(p: BoundParams) -> Interval:
    br = _b(p) + p.rho
    return (br / _gap(p) + 1.0) * br * _log_q(p)


def b3_bound(p: BoundParams) -> Interval:
    """Full long-range bound; valid for any D."""
    g = _gap(p)
    D = D_value(p)
    first = Interval.point(2.0 * p.lam) * (-(g * p.N)).exp()
    # e^{AN} and e^{-gD} overflow separately long before their product does
    log_second = (
        Q_constant(p).log()
        + Interval.point(p.N * p.lam).log()
        + D.log() * p.d
        + A_constant(p) * p.N
        - g * D
    )
    return first + log_second.exp()


def b3_simplified(p: BoundParams) -> Interval:
    """Closed form used once D = delta N."""
    g = _gap(p)
    om = _one_minus_rho_prime(p)
    num = Interval.point(4.0 * p.lam) * (_b(p) + p.rho) ** p.d * float(p.N ** (p.d + 1))
    return num / (om.sqr() * g ** (2 * p.d + 2)) * (-(g * p.N)).exp()


def delta_choice(p: BoundParams) -> Interval:
    b = _b(p)
    br = b + p.rho
    inner = 1.0 + _log_q(p) * (1.0 / (b - p.beta_star) + 1.0 / br)
    return br / _gap(p) * inner + 1.0


def M_constant(p: BoundParams) -> Interval:
    g = _gap(p)
    om = _one_minus_rho_prime(p)
    dd = float(p.d**p.d)
    term1 = dd / (Interval.point(p.beta_prime) - p.beta_star) ** p.d
    term2 = 2.0 * _log_q(p).sqr() / om.sqr()
    return 10.0 * (_b(p) + p.rho) ** p.d / g ** (2 * p.d + 2) * (term1 + term2)


def tv_closed_form(p: BoundParams) -> Interval:
    g = _gap(p)
    return M_constant(p) * float(p.N ** (p.d + 1)) * p.lam * (-(g * p.N)).exp()


# --- report -------------------------------------------------------------------


@dataclass
class BoundReport:
    params: BoundParams
    K: Interval
    delta: Interval
    Q: Interval
    A: Interval
    M: Interval
    epsilon: Interval
    D: Interval
    b1_bound: Interval
    b2_bound: Interval
    b3_bound: Interval
    b3_simplified: Interval
    tv_assembled: Interval
    tv_assembled_full_b3: Interval
    tv_bound: Interval
    warnings: list = field(default_factory=list)
    norm: str = "euclidean"

    @property
    def consistent(self) -> bool:
        """Closed form dominates the assembled 2(2 b1 + 2 b2 + b3)."""
        return self.tv_assembled.hi <= self.tv_bound.hi

    @property
    def vacuous(self) -> bool:
        return self.tv_bound.hi >= 1.0

    def to_dict(self) -> dict:
        out = {"params": self.params.echo()}
        for k in (
            "K", "delta", "Q", "A", "M", "epsilon", "D", "b1_bound", "b2_bound",
            "b3_bound", "b3_simplified", "tv_assembled", "tv_assembled_full_b3", "tv_bound",
        ):
            out[k] = getattr(self, k).as_list()
        out["consistent"] = self.consistent
        out["vacuous"] = self.vacuous
        out["warnings"] = list(self.warnings)
        out["norm"] = self.norm
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    CSV_FIELDS = (
        "d", "beta", "beta_prime", "N", "lambda", "K", "delta", "Q", "A", "M", "epsilon", "D",
        "b1_bound", "b2_bound", "b3_bound", "b3_simplified", "tv_assembled", "tv_bound",
    )

    def csv_row(self) -> dict:
        p = self.params
        row = {"d": p.d, "beta": p.beta, "beta_prime": p.beta_prime, "N": p.N, "lambda": p.lam}
        for k in self.CSV_FIELDS[5:]:
            row[k] = repr(getattr(self, k).hi)
        return row


def tv_bound(p: BoundParams) -> BoundReport:
    """Evaluate every constant at the proof's choices epsilon = beta' - beta*, D = delta N.

    Explicit ``epsilon`` / ``D`` in the parameters override those choices.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EpsilonWarning)
        b1 = b1_bound(p)
        b2 = b2_bound(p)
    notes = sorted({str(w.message) for w in caught if issubclass(w.category, EpsilonWarning)})
    b3 = b3_bound(p)
    b3s = b3_simplified(p)
    two = Interval.point(2.0)
    assembled = two * (two * b1 + two * b2 + b3s)
    assembled_full = two * (two * b1 + two * b2 + b3)
    K = (Interval.point(p.beta) + p.rho) / _gap(p) + 1.0
    return BoundReport(
        params=p,
        K=K,
        delta=delta_choice(p),
        Q=Q_constant(p),
        A=A_constant(p),
        M=M_constant(p),
        epsilon=epsilon_value(p),
        D=D_value(p),
        b1_bound=b1,
        b2_bound=b2,
        b3_bound=b3,
        b3_simplified=b3s,
        tv_assembled=assembled,
        tv_assembled_full_b3=assembled_full,
        tv_bound=tv_closed_form(p),
        warnings=notes,
    )


def coupling_bound(
    region_a, region_b, beta: float, beta_prime: float, rho_prime: Interval, norm: str = "euclidean"
) -> float:
    """Upper bound on the probability that two independent clans are incompatible.

    ``region_a`` and ``region_b`` are iterables of sites.
    """
    rp = _iv(rho_prime)
    if rp.hi >= 1.0:
        raise BoundDomainError("alpha_0(beta') must be below 1")
    g = Interval.point(beta) - beta_prime
    total = Interval.point(0.0)
    for x in region_a:
        for y in region_b:
            dx, dy = x[0] - y[0], x[1] - y[1]
            if norm == "euclidean":
                r = Interval(*_sqrt_iv(dx * dx + dy * dy))
            else:
                r = Interval.point(max(abs(dx), abs(dy)))
            total = total + r * (-(g * r)).exp()
    om = 1.0 - rp
    return (2.0 * total / om.sqr()).hi


def _sqrt_iv(n: int) -> tuple[float, float]:
    s = math.sqrt(n)
    return math.nextafter(s, -math.inf), math.nextafter(s, math.inf)
