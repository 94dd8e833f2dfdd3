"""Strong and weak weighted Morrey norms and the small inequalities around them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import Ball, BallFamily, Domain, SampledFunction, _quad1d, ball_integrals
from .grid import unit_ball_volume
from .weights import Power, Product, Weight, conjugate

T_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class MorreyParams:
    p: float
    lam: float
    weight: Weight

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    def check_dim(self, dim: int):
        if not self.lam < dim:
            raise ValueError(f"lambda must be < n = {dim}")


@dataclass(frozen=True)
class NormResult:
    value: float
    argmax_ball: Ball
    argmax_t: Optional[float] = None

    @property
    def diverged(self) -> bool:
        return math.isinf(self.value)


def _integrals(g, weight, domain: Domain, family: BallFamily, quad=None):
    return ball_integrals(g, weight, domain, family.pair_centers, family.pair_radii, quad)


def morrey_norm(f: SampledFunction, params: MorreyParams, family: BallFamily) -> NormResult:
    """``sup_B (r^-lam int_B |f|^p w)^(1/p)`` over the family.

    A ball on which ``|f|^p w`` is not integrable yields ``inf`` and is
    reported as the argmax.
    """
    params.check_dim(f.domain.dim)
    g = np.abs(f.values) ** params.p
    I = _integrals(g, params.weight, f.domain, family)
    q = I / family.pair_radii**params.lam
    k = int(np.argmax(q))
    return NormResult(float(q[k]) ** (1 / params.p), family.ball(k))


def weak_morrey_norm(f: SampledFunction, params: MorreyParams, family: BallFamily) -> NormResult:
    """``sup_{B,t} (t^p w({|f| > t} ∩ B) / r^lam)^(1/p)``.

    For piecewise-constant ``f`` the supremum over ``t`` is the limit
    ``t -> v^-`` at one of the sample values ``v``, i.e.
    ``max_v v^p w({|f| >= v} ∩ B)``; ``argmax_t`` reports that ``v``.
    """
    params.check_dim(f.domain.dim)
    d = f.domain
    a = np.abs(f.values)
    levels = np.unique(a[a > 0])
    r_lam = family.pair_radii**params.lam
    if levels.size == 0:
        return NormResult(0.0, family.ball(0), 0.0)
    best_q, best_k, best_t = -1.0, 0, 0.0
    if d.dim == 1:
        quad = _quad1d(d, params.weight)
        c, r = family.pair_centers[:, 0], family.pair_radii
        chunk = max(1, T_CHUNK_ELEMS // max(1, len(r)))
        for s in range(0, len(levels), chunk):
            v = levels[s:s + chunk]
            masks = (a[None, :] >= v[:, None]).astype(float)
            I = quad.integrals(masks, c - r, c + r)
            q = (v[:, None] ** params.p) * I / r_lam[None, :]
            i, k = np.unravel_index(int(np.argmax(q)), q.shape)
            if q[i, k] > best_q:
                best_q, best_k, best_t = float(q[i, k]), int(k), float(v[i])
    else:
        for v in levels:
            I = _integrals((a >= v).astype(float), params.weight, d, family)
            q = v**params.p * I / r_lam
            k = int(np.argmax(q))
            if q[k] > best_q:
                best_q, best_k, best_t = float(q[k]), k, float(v)
    return NormResult(best_q ** (1 / params.p), family.ball(best_k), best_t)


def lp_norm(f: SampledFunction, p: float, weight: Weight) -> float:
    """Global ``||f||_{L^p(w)}`` on the box."""
    d = f.domain
    g = np.abs(f.values) ** p
    R = d.half_width
    if d.dim == 1:
        I = _quad1d(d, weight).integrals(g, np.array([-R]), np.array([R]))[0]
    else:
        I = ball_integrals(g, weight, d, np.zeros((1, 2)), np.array([R * math.sqrt(2) * 1.01]))[0]
    return float(I) ** (1 / p)


# --------------------------------------------------------------- identities


def basic_inequality_constant(alpha: float, lam: float) -> float:
    """Geometric-series constant bounding the ratio in :func:`basic_inequality_check`."""
    if not alpha < lam:
        raise ValueError("need alpha < lambda")
    g = 2.0 ** (-(lam - alpha))
    return 2.0**alpha * g / (1.0 - g)


def basic_inequality_check(f: SampledFunction, p: float, lam: float, alpha: float,
                           base: Weight, r: float, family: BallFamily) -> float:
    """``int_{B(0,r)} f^p base / (r^(lam-alpha) ||f||^p_{L^{p,lam}(|x|^alpha base)})``."""
    if not alpha < lam:
        raise ValueError("basic inequality needs alpha < lambda")
    if np.any(f.values < 0):
        raise ValueError("f must be non-negative")
    d = f.domain
    origin = np.zeros((1, d.dim))
    lhs = ball_integrals(f.values**p, base, d, origin, np.array([r]))[0]
    w = Product((Power(alpha, (0.0,) * d.dim), base))
    norm = morrey_norm(f, MorreyParams(p, lam, w), family).value
    if norm == 0:
        return 0.0
    return float(lhs / (r ** (lam - alpha) * norm**p))


def embedding_constant(p: float, lam: float, dim: int) -> float:
    """``|B_1|^(lam/(n p))``: Hölder on one ball with ``|B| = |B_1| r^n``."""
    return unit_ball_volume(dim) ** (lam / (dim * p))


def embedding_check(f: SampledFunction, p: float, lam: float, weight: Weight,
                    family: BallFamily) -> tuple:
    """``(||f||_{L^{p,lam}(w)}, ||f||_{L^{pn/(n-lam)}(w^{n/(n-lam)})})``."""
    n = f.domain.dim
    if not lam < n:
        raise ValueError("need lambda < n")
    lhs = morrey_norm(f, MorreyParams(p, lam, weight), family).value
    s = n / (n - lam)
    rhs = lp_norm(f, p * s, weight.power(s))
    return lhs, rhs


def l1_embedding_beta(p: float, lam: float, alpha: float, dim: int, eps: float = 0.01) -> float:
    """Decay exponent for ``L^{p,lam}(|x|^alpha) -> L^1((1+|x|)^-beta)``.

    Summing the basic inequality over dyadic annuli with Hölder gives
    ``int_{|x|<2^k} |f| <~ 2^{k(n - (n - lam + alpha)/p)}``.
    """
    return dim - (dim - lam + alpha) / p + eps


def l1_weight_embedding_check(f: SampledFunction, p: float, lam: float, alpha: float,
                              base: Weight, family: BallFamily, eps: float = 0.01) -> tuple:
    """``(||f||_{L^1((1+|x|)^-beta)}, ||f||_{L^{p,lam}(|x|^alpha base)})``."""
    if not alpha < lam:
        raise ValueError("need alpha < lambda")
    d = f.domain
    beta = l1_embedding_beta(p, lam, alpha, d.dim, eps)
    pts = d.midpoints if d.dim == 2 else d.axis_midpoints
    rad = np.linalg.norm(pts, axis=-1) if d.dim == 2 else np.abs(pts)
    lhs = float(np.sum(np.abs(f.values) * (1.0 + rad) ** (-beta) * d.volumes))
    w = Product((Power(alpha, (0.0,) * d.dim), base))
    rhs = morrey_norm(f, MorreyParams(p, lam, w), family).value
    return lhs, rhs
