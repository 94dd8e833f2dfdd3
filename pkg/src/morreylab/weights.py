"""Weight models and Muckenhoupt / reverse Hölder diagnostics.

All class constants are suprema over a finite :class:`BallFamily`, hence
lower bounds of the true constants.  Membership is decided by watching the
estimate while the family grows (see :func:`stability`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Ball, BallFamily, Domain, SampledFunction, ball_integrals


class Weight:
    """Base class: a positive, locally integrable function on R^n."""

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def power(self, e: float) -> "Weight":
        raise NotImplementedError

    def interval_mass(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def singular_parts(self) -> list:
        return []

    def ball_mass(self, ball: Ball) -> Optional[float]:
        return None

    def __mul__(self, other: "Weight") -> "Product":
        return Product((self, other))

    def scaled(self, c: float) -> "Weight":
        return Product((self, Constant(c)))


def _pos_mass(u, v, alpha):
    """``int_u^v t^alpha dt`` for ``0 <= u <= v`` (vectorised, stable)."""
    k = alpha + 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if k > 0:
            from_zero = v**k / k
        else:
            from_zero = np.where(v > 0, np.inf, 0.0)
        logr = np.log(v / u)
        if k == 0:
            rel = logr
        else:
            rel = u**k * np.expm1(k * logr) / k
        out = np.where(u > 0, rel, from_zero)
    return np.where(v > u, out, 0.0)


@dataclass(frozen=True)
class Power(Weight):
    """``|x - center|^alpha``."""

    alpha: float
    center: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    def _dist(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim >= 1 and x.shape[-1] == 2 and len(self.center) == 2:
            return np.hypot(x[..., 0] - self.center[0], x[..., 1] - self.center[1])
        if x.ndim >= 1 and x.shape[-1] == 2 and len(self.center) == 1 and self.center[0] == 0:
            return np.hypot(x[..., 0], x[..., 1])
        return np.abs(x - self.center[0])

    def __call__(self, x):
        if self.alpha == 0:
            return np.ones(np.shape(self._dist(x)))
        with np.errstate(divide="ignore"):
            return self._dist(x) ** self.alpha

    def power(self, e):
        return Power(self.alpha * e, self.center)

    def interval_mass(self, a, b):
        c = self.center[0]
        u, v = np.asarray(a, dtype=float) - c, np.asarray(b, dtype=float) - c
        right = _pos_mass(np.maximum(u, 0.0), np.maximum(v, 0.0), self.alpha)
        left = _pos_mass(np.maximum(-v, 0.0), np.maximum(-u, 0.0), self.alpha)
        return right + left

    def singular_parts(self):
        c = self.center if len(self.center) == 2 else (self.center[0], 0.0)
        return [(c, self.alpha)]

    def ball_mass(self, ball: Ball):
        n = ball.dim
        center = self.center if len(self.center) == n else self.center * n
        if tuple(ball.center) != tuple(center):
            return None
        k = self.alpha + n
        if k <= 0:
            return math.inf
        const = 2.0 if n == 1 else 2 * math.pi
        return const * ball.radius**k / k


def Constant(c: float = 1.0) -> Weight:
    return Power(0.0) if c == 1 else Product((Power(0.0),), scale=float(c))


def endpoint(lam: float, dim: int = 1) -> Power:
    """The endpoint weight ``|x|^(lam - n)``."""
    return Power(lam - dim, (0.0,) * dim)


def shifted_power(alpha: float, center) -> Power:
    return Power(alpha, center)


@dataclass(frozen=True)
class Product(Weight):
    """Pointwise product of weights, times a positive scale."""

    factors: tuple
    scale: float = 1.0

    def __post_init__(self):
        flat = []
        scale = self.scale
        for f in self.factors:
            if isinstance(f, Product):
                flat.extend(f.factors)
                scale *= f.scale
            else:
                flat.append(f)
        object.__setattr__(self, "factors", tuple(flat))
        object.__setattr__(self, "scale", scale)

    def _merged(self) -> Optional[Power]:
        pw = [f for f in self.factors if isinstance(f, Power)]
        if len(pw) == len(self.factors) and len({p.center for p in pw}) == 1:
            return Power(sum(p.alpha for p in pw), pw[0].center)
        return None

    def __call__(self, x):
        out = self.scale
        for f in self.factors:
            out = out * f(x)
        return out

    def power(self, e):
        return Product(tuple(f.power(e) for f in self.factors), self.scale**e)

    def _dominant(self):
        pw = [f for f in self.factors if isinstance(f, Power)]
        return min(pw, key=lambda p: p.alpha) if pw else None

    def interval_mass(self, a, b):
        merged = self._merged()
        if merged is not None:
            return self.scale * merged.interval_mass(a, b)
        dom = self._dominant()
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        mid = 0.5 * (a + b)
        rest = self.scale * np.ones_like(mid)
        for f in self.factors:
            if f is not dom:
                rest = rest * f(mid)
        if dom is None:
            return rest * (b - a)
        with np.errstate(invalid="ignore"):
            return np.where(b > a, rest * dom.interval_mass(a, b), 0.0)

    def singular_parts(self):
        merged = self._merged()
        if merged is not None:
            return merged.singular_parts()
        dom = self._dominant()
        return dom.singular_parts() if dom is not None else []

    def ball_mass(self, ball):
        merged = self._merged()
        if merged is None:
            return None
        m = merged.ball_mass(ball)
        return None if m is None else self.scale * m


def factored_a1_power(u_exponent: float, lam: float, base: Weight, dim: int = 1) -> Product:
    """``u^(-lam/n) * base`` with ``u = |x|^u_exponent`` a power A_1 weight."""
    if not -dim < u_exponent <= 0:
        raise ValueError("u_exponent must lie in (-n, 0] for u to be an A_1 power")
    return Product((Power(-u_exponent * lam / dim, (0.0,) * dim), base))


@dataclass(frozen=True, eq=False)
class Sampled(Weight):
    """Piecewise-constant weight from grid samples, floored at ``floor``."""

    samples: SampledFunction
    floor: float = 1e-12

    def __post_init__(self):
        if not self.floor > 0:
            raise ValueError("positivity floor must be positive")
        v = np.maximum(self.samples.values, self.floor)
        object.__setattr__(self, "samples", self.samples.with_values(v))

    @property
    def domain(self) -> Domain:
        return self.samples.domain

    def __call__(self, x):
        e = self.domain.axis_edges
        return self.samples.evaluate(np.clip(np.asarray(x, dtype=float), e[0], e[-1]))

    def power(self, e):
        return Sampled(self.samples.with_values(self.samples.values**e), min(self.floor**e, 1e-12))

    @property
    def _cumulative(self):
        e = self.domain.axis_edges
        return e, np.concatenate([[0.0], np.cumsum(self.samples.values * np.diff(e))])

    def interval_mass(self, a, b):
        e, cum = self._cumulative
        return np.interp(b, e, cum) - np.interp(a, e, cum)


# ------------------------------------------------------------ class params


@dataclass(frozen=True)
class WeightClassParams:
    p: float
    sigma: float = 2.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not self.sigma > 1:
            raise ValueError("sigma must be > 1")

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def sigma_conj(self) -> float:
        return conjugate(self.sigma)


def conjugate(p: float) -> float:
    """Hölder conjugate ``p/(p-1)``; ``inf`` for ``p == 1``."""
    return math.inf if p == 1 else p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class ClassEstimate:
    constant: float
    argmax_ball: Ball
    family: BallFamily = field(repr=False)
    per_ball: np.ndarray = field(default=None, repr=False)


def _masses(w: Weight, domain: Domain, family: BallFamily) -> np.ndarray:
    ones = np.ones(domain.shape)
    return ball_integrals(ones, w, domain, family.pair_centers, family.pair_radii)


def _box_volumes(domain: Domain, family: BallFamily) -> np.ndarray:
    """``|B ∩ box|`` for every family ball."""
    return _masses(Power(0.0, (0.0,) * domain.dim), domain, family)


def _estimate(q: np.ndarray, family: BallFamily) -> ClassEstimate:
    q = np.where(np.isnan(q), np.inf, q)
    k = int(np.argmax(q))
    return ClassEstimate(float(q[k]), family.ball(k), family, q)


def ap_constant_estimate(w: Weight, p: float, family: BallFamily, domain: Domain) -> ClassEstimate:
    """``sup_B (w(B)/|B|) (w^(1-p')(B)/|B|)^(p-1)`` over the family."""
    if not p > 1:
        raise ValueError("ap_constant_estimate needs p > 1; use a1_constant_estimate")
    vol = _box_volumes(domain, family)
    avg_w = _masses(w, domain, family) / vol
    avg_d = _masses(w.power(1 - conjugate(p)), domain, family) / vol
    with np.errstate(invalid="ignore", over="ignore"):
        q = avg_w * avg_d ** (p - 1)
    return _estimate(q, family)


def _essinf_per_ball(w: Weight, domain: Domain, family: BallFamily) -> np.ndarray:
    """Minimum of ``w`` over midpoints of cells meeting each ball."""
    if domain.dim == 1:
        e = domain.axis_edges
        vals = w(domain.axis_midpoints)
        c, r = family.pair_centers[:, 0], family.pair_radii
        lo = np.clip(np.searchsorted(e, c - r, side="right") - 1, 0, len(vals) - 1)
        hi = np.clip(np.searchsorted(e, c + r, side="left") - 1, 0, len(vals) - 1)
        # sparse table range-minimum
        table = [vals]
        span = 1
        while 2 * span <= len(vals):
            prev = table[-1]
            table.append(np.minimum(prev[:-span], prev[span:]))
            span *= 2
        length = hi - lo + 1
        k = np.floor(np.log2(length)).astype(int)
        out = np.empty(len(lo))
        for kk in np.unique(k):
            sel = k == kk
            t = table[kk]
            out[sel] = np.minimum(t[lo[sel]], t[hi[sel] - 2**kk + 1])
        return out
    pts = domain.midpoints.reshape(-1, 2)
    vals = w(pts)
    out = np.empty(len(family))
    for k, (c, r) in enumerate(zip(family.pair_centers, family.pair_radii)):
        h = domain.axis_widths.max()
        inside = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) < r + h
        out[k] = vals[inside].min() if inside.any() else w(np.asarray(c)[None])[0]
    return out


def a1_constant_estimate(w: Weight, family: BallFamily, domain: Domain) -> ClassEstimate:
    """``sup_B (w(B)/|B|) / essinf_B w`` with the infimum over cell midpoints."""
    avg = _masses(w, domain, family) / _box_volumes(domain, family)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = avg / _essinf_per_ball(w, domain, family)
    return _estimate(q, family)


def rh_constant_estimate(w: Weight, sigma: float, family: BallFamily,
                         domain: Domain) -> ClassEstimate:
    """``sup_B (avg_B w^sigma)^(1/sigma) / avg_B w``."""
    if not sigma > 1:
        raise ValueError("sigma must be > 1")
    vol = _box_volumes(domain, family)
    avg_s = _masses(w.power(sigma), domain, family) / vol
    avg_w = _masses(w, domain, family) / vol
    with np.errstate(invalid="ignore", over="ignore"):
        q = avg_s ** (1 / sigma) / avg_w
    return _estimate(q, family)


def power_ap_member(alpha: float, p: float, n: int) -> bool:
    """Closed form: ``|x|^alpha`` is in A_p on R^n iff ``-n < alpha < n(p-1)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return -n < alpha <= 0
    return -n < alpha < n * (p - 1)


def ap_rh_member_factored(w: Weight, p: float, sigma: float, family: BallFamily,
                          domain: Domain) -> ClassEstimate:
    """A_p ∩ RH_sigma through ``w^sigma in A_{sigma(p-1)+1}``."""
    if p < 1 or not sigma > 1:
        raise ValueError("need p >= 1 and sigma > 1")
    q = sigma * (p - 1) + 1
    ws = w.power(sigma)
    if q == 1:
        return a1_constant_estimate(ws, family, domain)
    return ap_constant_estimate(ws, q, family, domain)


def sigma_witness_quotient(w: Weight, p: float, lam: float, family: BallFamily,
                           domain: Domain, eps: float = 0.0) -> ClassEstimate:
    """``w(B) s(B)^(q-1) / |B|^q`` with ``q = p + lam/n`` and ``s^(1-q) = w + eps``.

    With ``eps = 0`` this is the A_q quotient of ``w``.
    """
    n = domain.dim
    q = p + lam / n
    if not q > 1:
        raise ValueError("p + lam/n must exceed 1")
    if eps == 0:
        s = w.power(1.0 / (1.0 - q))
    else:
        vals = w(domain.midpoints if n == 2 else domain.axis_midpoints) + eps
        s = Sampled(SampledFunction(domain, vals ** (1.0 / (1.0 - q))), floor=1e-300)
    vol = _box_volumes(domain, family)
    with np.errstate(invalid="ignore", over="ignore"):
        quot = (_masses(w, domain, family) / vol) * (_masses(s, domain, family) / vol) ** (q - 1)
    return _estimate(quot, family)


# ------------------------------------------------------------ stability


STABLE_FACTOR = 1.2
UNSTABLE_FACTOR = 10.0


def stability(constants: Sequence[float]) -> str:
    """Classify a sequence of estimates taken on growing families.

    ``stable``: all finite and each step grows by less than 1.2x;
    ``unstable``: some value infinite or some step grows by 10x or more;
    otherwise ``inconclusive``.
    """
    c = np.asarray(constants, dtype=float)
    if len(c) < 2:
        raise ValueError("need at least two estimates")
    if np.any(~np.isfinite(c)):
        return "unstable"
    steps = c[1:] / c[:-1]
    if np.any(steps >= UNSTABLE_FACTOR):
        return "unstable"
    if np.all(steps < STABLE_FACTOR):
        return "stable"
    return "inconclusive"


def growing_families(domain: Domain, doublings: int = 2, mode: str = "full"):
    """``(domain_k, family_k)`` for ``k = 0..doublings``.

    Each step doubles the cell count (the center set) and halves the
    smallest radius, so the radius range doubles as well.
    """
    from .grid import default_family

    out = []
    for k in range(doublings + 1):
        levels = None if domain.log_levels is None else domain.log_levels * 2**k
        d = Domain(domain.dim, domain.half_width, domain.cells_per_axis * 2**k,
                   domain.refinement, domain.ratio, levels, domain.min_cell)
        out.append((d, default_family(d, mode)))
    return out


__all__ = [
    "Weight", "Power", "Product", "Sampled", "Constant", "endpoint", "shifted_power",
    "factored_a1_power", "WeightClassParams", "ClassEstimate", "conjugate",
    "ap_constant_estimate", "a1_constant_estimate", "rh_constant_estimate",
    "power_ap_member", "ap_rh_member_factored", "sigma_witness_quotient", "stability",
    "growing_families",
]
