"""Hardy-Littlewood maximal operator, Hilbert transform, (Mh)^(1/s) weights."""

from __future__ import annotations

import math

import numpy as np

from .grid import BallFamily, SampledFunction, ball_integrals, ball_volume
from .weights import Power, Sampled


def maximal(f: SampledFunction, family: BallFamily) -> SampledFunction:
    """Centered maximal function at every cell midpoint.

    ``Mf(x) = max_r avg_{B(x, r)} |f|`` over the family radii and the
    limit ``r -> 0``, which is ``|f(x)|`` at a midpoint.  Averages divide by
    the full ball volume (``f`` vanishes off the box).
    """
    d = f.domain
    radii = np.asarray(family.radii, dtype=float)
    g = np.abs(f.values)
    if d.dim == 1:
        e = d.axis_edges
        cum = np.concatenate([[0.0], np.cumsum(g * np.diff(e))])
        x = d.axis_midpoints[:, None]
        mass = np.interp(x + radii, e, cum) - np.interp(x - radii, e, cum)
        return f.with_values(np.maximum(g, (mass / (2 * radii)).max(axis=1)))
    pts = d.midpoints.reshape(-1, 2)
    one = Power(0.0, (0.0, 0.0))
    best = g.reshape(-1).copy()
    for r in radii:
        m = ball_integrals(g, one, d, pts, np.full(len(pts), r))
        best = np.maximum(best, m / ball_volume(r, 2))
    return f.with_values(best.reshape(d.shape))


def hilbert(f: SampledFunction) -> SampledFunction:
    """Principal-value Hilbert transform of the piecewise-constant ``f``.

    ``Hf(x) = (1/pi) pv int f(y) / (x - y) dy``, integrated exactly per cell.
    Summing the log antiderivative by parts gives
    ``Hf(x) = (1/pi) sum_k (f_k - f_{k-1}) log|x - e_k|``; at a midpoint the
    own cell contributes zero, which is its symmetric principal value.
    """
    d = f.domain
    if d.dim != 1:
        raise NotImplementedError("the Hilbert transform is implemented in 1D only")
    v = f.values
    jumps = np.diff(np.concatenate([[0.0], v, [0.0]]))
    nz = np.nonzero(jumps)[0]
    e = d.axis_edges[nz]
    x = d.axis_midpoints
    out = np.zeros_like(x)
    step = max(1, 2**22 // max(1, len(nz)))
    for s in range(0, len(x), step):
        out[s:s + step] = np.log(np.abs(x[s:s + step, None] - e[None, :])) @ jumps[nz]
    return f.with_values(out / math.pi)


def hilbert_indicator_oracle(x):
    """Closed form ``H chi_(0,1)(x) = log(|x| / |x - 1|) / pi``."""
    x = np.asarray(x, dtype=float)
    if np.any((x == 0) | (x == 1)):
        raise ValueError("H chi_(0,1) is singular at x = 0 and x = 1")
    out = np.log(np.abs(x) / np.abs(x - 1.0)) / math.pi
    return float(out) if out.ndim == 0 else out


def m_power_a1(h: SampledFunction, s: float, family: BallFamily, floor: float = 1e-12) -> Sampled:
    """The sampled weight ``(Mh)^(1/s)``, an A_1 weight for any ``s > 1``."""
    if not s > 1:
        raise ValueError("s must be > 1")
    if np.any(h.values < 0):
        raise ValueError("h must be non-negative")
    if not np.any(h.values > 0):
        raise ValueError("degenerate weight: h vanishes identically")
    mh = maximal(h, family)
    return Sampled(mh.with_values(mh.values ** (1.0 / s)), floor)


def hilbert_oracle_error(cells: int, half_width: float = 4.0, gap: float = 0.05,
                         probes: int = 2**15) -> float:
    """Max error of ``hilbert(chi_(0,1))`` against the closed form, relative to its sup.

    The piecewise-constant output is read at a fixed probe set (midpoints
    of a ``probes``-cell grid) at distance ``>= gap`` from ``{0, 1}``, so
    the error reflects the O(h) reconstruction of a smooth function and
    not the exactness of the jump formula at cell midpoints.  The oracle
    vanishes at ``x = 1/2``, hence the normalization by its sup.
    """
    from .grid import Domain

    d = Domain(1, half_width, cells)
    f = SampledFunction.from_callable(d, lambda x: ((x > 0) & (x < 1)).astype(float))
    x = -half_width + (np.arange(probes) + 0.5) * (2 * half_width / probes)
    x = x[(np.abs(x) >= gap) & (np.abs(x - 1) >= gap)]
    exact = hilbert_indicator_oracle(x)
    got = hilbert(f).evaluate(x)
    return float(np.max(np.abs(got - exact)) / np.max(np.abs(exact)))
