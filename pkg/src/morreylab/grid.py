"""Grid geometry, sampled functions, balls and ball quadrature.

Functions live on a tensor grid over the box ``[-R, R]^dim`` and are
piecewise constant (one midpoint sample per cell), extended by zero outside
the box.  The origin is always a cell boundary, so no sample sits on the
singular point of a power weight centred there.

Weights are duck-typed here (see :mod:`morreylab.weights`); quadrature only
needs ``interval_mass`` in 1D and ``__call__`` / ``singular_parts`` in 2D.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

ANGULAR_NODES = 16


class NonIntegrableWeightError(ArithmeticError):
    """A ball contains a non-integrable singularity of the weight."""


@dataclass(frozen=True)
class Domain:
    """Truncated box ``[-half_width, half_width]^dim`` split into cells.

    ``origin_log`` refinement splits the innermost uniform cell on each side
    of the origin into ``log_levels`` geometric cells of ratio ``ratio``.
    """

    dim: int = 1
    half_width: float = 4.0
    cells_per_axis: int = 256
    refinement: str = "uniform"
    ratio: float = 0.5
    log_levels: Optional[int] = None
    min_cell: float = 1e-15

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.cells_per_axis < 2 or self.cells_per_axis % 2:
            raise ValueError("cells_per_axis must be a positive even integer")
        if self.refinement not in ("uniform", "origin_log"):
            raise ValueError(f"unknown refinement {self.refinement!r}")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")

    @cached_property
    def axis_edges(self) -> np.ndarray:
        R = float(self.half_width)
        m = self.cells_per_axis // 2
        if self.refinement == "uniform":
            pos = np.linspace(0.0, R, m + 1)
        else:
            n_geo = m // 8 if self.log_levels is None else int(self.log_levels)
            n_geo = max(0, min(n_geo, m - 1))
            while True:
                h_u = R / (m - n_geo)
                if n_geo == 0 or h_u * self.ratio**n_geo >= self.min_cell:
                    break
                n_geo -= 1
            geo = h_u * self.ratio ** np.arange(n_geo, 0, -1, dtype=float)
            pos = np.concatenate([[0.0], geo, h_u * np.arange(1, m - n_geo + 1)])
        pos[-1] = R
        return np.concatenate([-pos[:0:-1], pos])

    @property
    def shape(self) -> tuple:
        return (self.cells_per_axis,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis**self.dim

    @cached_property
    def axis_midpoints(self) -> np.ndarray:
        e = self.axis_edges
        return 0.5 * (e[:-1] + e[1:])

    @cached_property
    def axis_widths(self) -> np.ndarray:
        return np.diff(self.axis_edges)

    @property
    def min_width(self) -> float:
        return float(self.axis_widths.min())

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Cell midpoints, shape ``shape + (dim,)``."""
        axes = np.meshgrid(*([self.axis_midpoints] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def volumes(self) -> np.ndarray:
        w = self.axis_widths
        return w if self.dim == 1 else np.outer(w, w)

    def locate(self, x) -> np.ndarray:
        """Cell index along one axis for coordinates ``x`` (-1 if outside)."""
        e = self.axis_edges
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(e, x, side="right") - 1
        j = np.where(x == e[-1], len(e) - 2, j)
        return np.where((x < e[0]) | (x > e[-1]), -1, j)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Piecewise-constant function: one value per cell, zero off the box."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise ValueError(f"expected {self.domain.shape} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, domain: Domain, fn: Callable) -> "SampledFunction":
        pts = domain.midpoints
        x = pts[..., 0] if domain.dim == 1 else pts
        return cls(domain, np.broadcast_to(fn(x), domain.shape).astype(float))

    @classmethod
    def constant(cls, domain: Domain, c: float = 1.0) -> "SampledFunction":
        return cls(domain, np.full(domain.shape, float(c)))

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.domain, values)

    def __abs__(self):
        return self.with_values(np.abs(self.values))

    def __mul__(self, c: float):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "SampledFunction"):
        return self.with_values(self.values + other.values)

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the piecewise-constant function at arbitrary points."""
        x = np.asarray(x, dtype=float)
        if self.domain.dim == 1:
            j = self.domain.locate(x)
            return np.where(j >= 0, self.values[np.clip(j, 0, None)], 0.0)
        i, j = self.domain.locate(x[..., 0]), self.domain.locate(x[..., 1])
        inside = (i >= 0) & (j >= 0)
        return np.where(inside, self.values[np.clip(i, 0, None), np.clip(j, 0, None)], 0.0)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return ball_volume(self.radius, self.dim)


def ball_volume(r, dim: int):
    return 2.0 * r if dim == 1 else math.pi * np.square(r)


def unit_ball_volume(dim: int) -> float:
    return 2.0 if dim == 1 else math.pi


@dataclass(frozen=True, eq=False)
class BallFamily:
    """Finite set of (center, radius) pairs over which suprema are taken."""

    centers: np.ndarray
    radii: np.ndarray
    mode: str = "full"
    _pairs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        c = c.reshape(-1, 1) if c.ndim <= 1 else c
        r = np.asarray(self.radii, dtype=float).ravel()
        if r.size == 0 or np.any(r <= 0):
            raise ValueError("radii must be positive")
        if self.mode not in ("full", "reduced"):
            raise ValueError(f"unknown mode {self.mode!r}")
        ci = np.repeat(np.arange(len(c)), len(r))
        rr = np.tile(r, len(c))
        if self.mode == "reduced":
            norm = np.linalg.norm(c[ci], axis=1)
            keep = (norm == 0) | (rr < norm / 4)
            ci, rr = ci[keep], rr[keep]
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "_pairs", (c[ci], rr))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def pair_centers(self) -> np.ndarray:
        return self._pairs[0]

    @property
    def pair_radii(self) -> np.ndarray:
        return self._pairs[1]

    def __len__(self):
        return len(self._pairs[1])

    def ball(self, k: int) -> Ball:
        return Ball(tuple(self._pairs[0][k]), float(self._pairs[1][k]))

    def balls(self):
        return (self.ball(k) for k in range(len(self)))


def make_ball_family(domain: Domain, r_min: float, K: int, mode: str = "full",
                     per_octave: int = 1) -> BallFamily:
    """Centers: every cell midpoint plus the origin.  Radii: ``r_min * 2**k``."""
    if not r_min > 0:
        raise ValueError("r_min must be positive")
    if K < 0:
        raise ValueError("K must be non-negative")
    if r_min * 2.0**K > 10 * domain.half_width:
        warnings.warn("radius range exceeds domain; integrals are truncated to the box",
                      stacklevel=2)
    radii = r_min * 2.0 ** (np.arange(K * per_octave + 1) / per_octave)
    centers = np.concatenate([domain.midpoints.reshape(-1, domain.dim),
                              np.zeros((1, domain.dim))])
    return BallFamily(centers, radii, mode)


def default_family(domain: Domain, mode: str = "full", per_octave: int = 1,
                   r_max: Optional[float] = None) -> BallFamily:
    """Dyadic radii from the power of two below the finest cell up to ``r_max``."""
    r_min = 2.0 ** math.floor(math.log2(domain.min_width))
    r_max = 2 * domain.half_width if r_max is None else r_max
    K = max(0, math.ceil(math.log2(r_max / r_min) - 1e-9))
    return make_ball_family(domain, r_min, K, mode, per_octave)


# ---------------------------------------------------------------- quadrature


def _cell_contrib(g, mass):
    with np.errstate(invalid="ignore"):
        return np.where(g == 0, 0.0, g * mass)


class _Quad1D:
    """Cached cell masses for one (domain, weight) pair in 1D."""

    def __init__(self, domain: Domain, weight):
        self.domain = domain
        self.weight = weight
        e = domain.axis_edges
        self.edges = e
        self.masses = np.asarray(weight.interval_mass(e[:-1], e[1:]), dtype=float)

    def integrals(self, g: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``int_a^b g w`` for piecewise-constant ``g``; ``inf`` marks divergence.

        ``g`` may carry leading batch axes (shape ``(..., N)``); the result
        then has shape ``(..., len(a))``.
        """
        e, N = self.edges, len(self.edges) - 1
        a = np.clip(np.asarray(a, dtype=float), e[0], e[-1])
        b = np.clip(np.asarray(b, dtype=float), e[0], e[-1])
        ja = np.clip(np.searchsorted(e, a, side="right") - 1, 0, N - 1)
        jb = np.clip(np.searchsorted(e, b, side="left") - 1, 0, N - 1)
        lo, hi = ja + 1, np.maximum(jb, ja + 1)
        end_a = np.minimum(b, e[ja + 1])
        mass_a = self.weight.interval_mass(a, np.maximum(a, end_a))
        start_b = np.maximum(a, e[jb])
        mass_b = np.where(jb > ja, self.weight.interval_mass(start_b, np.maximum(start_b, b)), 0.0)
        g = np.asarray(g, dtype=float)
        contrib = _cell_contrib(g, self.masses)
        inf_cell = np.isinf(contrib)
        zero = np.zeros(g.shape[:-1] + (1,))
        cf = np.concatenate([zero, np.cumsum(np.where(inf_cell, 0.0, contrib), axis=-1)], axis=-1)
        out = cf[..., hi] - cf[..., lo]
        out = out + _cell_contrib(g[..., ja], mass_a) + _cell_contrib(g[..., jb], mass_b)
        if inf_cell.any():
            ci = np.concatenate([zero, np.cumsum(inf_cell, axis=-1)], axis=-1)
            out = np.where(ci[..., hi] - ci[..., lo] > 0, np.inf, out)
        return np.where(b > a, out, 0.0)


def _quad1d(domain: Domain, weight) -> _Quad1D:
    return _Quad1D(domain, weight)


def ball_integrals(values: np.ndarray, weight, domain: Domain, centers: np.ndarray,
                   radii: np.ndarray, quad=None) -> np.ndarray:
    """``int_{B(c_k, r_k)} g w`` for many balls; ``values`` is the cellwise ``g``."""
    centers = np.asarray(centers, dtype=float).reshape(-1, domain.dim)
    radii = np.asarray(radii, dtype=float).ravel()
    if domain.dim == 1:
        q = quad if quad is not None else _quad1d(domain, weight)
        c = centers[:, 0]
        return q.integrals(np.asarray(values, dtype=float), c - radii, c + radii)
    return np.array([_ball_integral_2d(values, weight, domain, c, r)
                     for c, r in zip(centers, radii)])


def integrate_ball(f, w, ball: Ball) -> float:
    """``int_B f w``; ``f`` is a :class:`SampledFunction` or ``None`` for f = 1.

    Power components of ``w`` are integrated in closed form on each cell.
    With ``f=None`` the analytic ball mass is used when one exists.
    """
    if f is None:
        exact = w.ball_mass(ball) if hasattr(w, "ball_mass") else None
        if exact is not None:
            out = exact
        else:
            raise ValueError("f=None requires a domain-free closed form; pass a SampledFunction")
    else:
        out = float(ball_integrals(f.values, w, f.domain, np.array([ball.center]),
                                   np.array([ball.radius]))[0])
    if math.isinf(out):
        raise NonIntegrableWeightError(f"weight is not integrable on {ball}")
    return out


# ------------------------------------------------------------ 2D polar rule


def _rect_sector(o, rects):
    """Angular interval of directions from ``o`` that hit each rectangle."""
    x0, x1, y0, y1 = rects.T
    cx, cy = 0.5 * (x0 + x1) - o[0], 0.5 * (y0 + y1) - o[1]
    theta_c = np.arctan2(cy, cx)
    inside = (o[0] > x0) & (o[0] < x1) & (o[1] > y0) & (o[1] < y1)
    phis = []
    for xx, yy in ((x0, y0), (x1, y0), (x0, y1), (x1, y1)):
        vx, vy = xx - o[0], yy - o[1]
        phi = np.arctan2(cx * vy - cy * vx, cx * vx + cy * vy)
        zero = (vx == 0) & (vy == 0)
        phis.append(np.where(zero, np.nan, phi))
    phis = np.stack(phis)
    lo = theta_c + np.nanmin(phis, axis=0)
    hi = theta_c + np.nanmax(phis, axis=0)
    lo = np.where(inside, 0.0, lo)
    hi = np.where(inside, 2 * np.pi, hi)
    return lo, hi


def _polar_masses(o, rects, center, r, alpha, rest: Callable, n=ANGULAR_NODES):
    """Integral of ``|y-o|^alpha * rest(y)`` over ``rect ∩ B(center, r)``.

    Exact in the radial variable, midpoint rule with ``n`` nodes in angle.
    """
    lo, hi = _rect_sector(o, rects)
    dth = (hi - lo) / n
    th = lo[:, None] + dth[:, None] * (np.arange(n) + 0.5)
    ux, uy = np.cos(th), np.sin(th)
    x0, x1, y0, y1 = (v[:, None] for v in rects.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx1, tx2 = (x0 - o[0]) / ux, (x1 - o[0]) / ux
        ty1, ty2 = (y0 - o[1]) / uy, (y1 - o[1]) / uy
    tx_in = np.where(ux == 0, np.where((o[0] >= x0) & (o[0] <= x1), -np.inf, np.inf),
                     np.minimum(tx1, tx2))
    tx_out = np.where(ux == 0, np.where((o[0] >= x0) & (o[0] <= x1), np.inf, -np.inf),
                      np.maximum(tx1, tx2))
    ty_in = np.where(uy == 0, np.where((o[1] >= y0) & (o[1] <= y1), -np.inf, np.inf),
                     np.minimum(ty1, ty2))
    ty_out = np.where(uy == 0, np.where((o[1] >= y0) & (o[1] <= y1), np.inf, -np.inf),
                      np.maximum(ty1, ty2))
    d = np.asarray(o, dtype=float) - np.asarray(center, dtype=float)
    b = ux * d[0] + uy * d[1]
    cc = d @ d - r * r
    disc = b * b - cc
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = np.maximum.reduce([tx_in, ty_in, -b - sq, np.zeros_like(b)])
    t1 = np.minimum.reduce([tx_out, ty_out, -b + sq])
    ok = (disc > 0) & (t1 > t0)
    t0 = np.where(ok, t0, 0.0)
    t1 = np.where(ok, t1, 0.0)
    k = alpha + 2.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if k == 0:
            radial = np.log(t1 / t0)
        elif k < 0:
            radial = (t1**k - t0**k) / k
        else:
            radial = (t1**k - t0**k) / k
    radial = np.where(ok, radial, 0.0)
    tm = 0.5 * (t0 + t1)
    pts = np.stack([o[0] + ux * tm, o[1] + uy * tm], axis=-1)
    vals = np.where(ok, rest(pts), 0.0)
    with np.errstate(invalid="ignore"):
        contrib = np.where(ok, radial * vals, 0.0)
    return (contrib * dth[:, None]).sum(axis=1)


def _ball_integral_2d(values, weight, domain: Domain, c, r) -> float:
    e = domain.axis_edges
    N = len(e) - 1
    i0 = max(0, int(np.searchsorted(e, c[0] - r, side="right")) - 1)
    i1 = min(N, int(np.searchsorted(e, c[0] + r, side="left")))
    j0 = max(0, int(np.searchsorted(e, c[1] - r, side="right")) - 1)
    j1 = min(N, int(np.searchsorted(e, c[1] + r, side="left")))
    if i1 <= i0 or j1 <= j0:
        return 0.0
    I, J = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    g = np.asarray(values)[I, J]
    nz = g != 0
    I, J, g = I[nz], J[nz], g[nz]
    if g.size == 0:
        return 0.0
    rects = np.stack([e[I], e[I + 1], e[J], e[J + 1]], axis=1)
    # nearest / farthest point of each rectangle to the ball centre
    nx = np.clip(c[0], rects[:, 0], rects[:, 1]) - c[0]
    ny = np.clip(c[1], rects[:, 2], rects[:, 3]) - c[1]
    fx = np.maximum(np.abs(rects[:, 0] - c[0]), np.abs(rects[:, 1] - c[0]))
    fy = np.maximum(np.abs(rects[:, 2] - c[1]), np.abs(rects[:, 3] - c[1]))
    near = np.hypot(nx, ny)
    far = np.hypot(fx, fy)
    hit = near < r
    rects, g, far = rects[hit], g[hit], far[hit]
    mass = np.zeros(len(g))
    size = np.maximum(rects[:, 1] - rects[:, 0], rects[:, 3] - rects[:, 2])
    singular = [(np.asarray(sc, dtype=float), a) for sc, a in weight.singular_parts() if a != 0]
    near_sing = np.zeros(len(g), dtype=bool)
    owner = np.full(len(g), -1)
    for k, (sc, a) in enumerate(singular):
        dx = np.clip(sc[0], rects[:, 0], rects[:, 1]) - sc[0]
        dy = np.clip(sc[1], rects[:, 2], rects[:, 3]) - sc[1]
        close = np.hypot(dx, dy) <= size
        pick = close & ~near_sing
        owner[pick] = k
        near_sing |= close
    inside = far <= r
    simple = inside & ~near_sing
    if simple.any():
        mid = np.stack([0.5 * (rects[simple, 0] + rects[simple, 1]),
                        0.5 * (rects[simple, 2] + rects[simple, 3])], axis=1)
        area = (rects[simple, 1] - rects[simple, 0]) * (rects[simple, 3] - rects[simple, 2])
        mass[simple] = weight(mid) * area
    cut = ~inside & ~near_sing
    if cut.any():
        mass[cut] = _polar_masses(np.asarray(c, dtype=float), rects[cut], c, r, 0.0, weight)
    for k, (sc, a) in enumerate(singular):
        sel = owner == k
        if sel.any():
            def rest(pts, sc=sc, a=a):
                with np.errstate(divide="ignore", invalid="ignore"):
                    rho = np.hypot(pts[..., 0] - sc[0], pts[..., 1] - sc[1])
                    return weight(pts) * rho ** (-a)
            mass[sel] = _polar_masses(sc, rects[sel], c, r, a, rest)
    contrib = _cell_contrib(g, mass)
    if np.any(np.isinf(contrib)):
        return math.inf
    return float(contrib.sum())
