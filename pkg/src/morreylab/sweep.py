"""Boundedness-region sweeps over (p, lambda, beta) with necessity witnesses.

A cell is probed by a suite of witness functions.  For each witness the
operator ratio ``||T f|| / ||f||`` is measured on several grid refinements;
the slope of ``log ratio`` against ``log(1/h)`` separates bounded behaviour
from power or logarithmic blow-up.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import BallFamily, Domain, SampledFunction, default_family
from .morrey import MorreyParams, NormResult, morrey_norm, weak_morrey_norm
from .operators import hilbert, maximal
from .weights import Power

BOUNDED_MAX = 0.05
UNBOUNDED_MIN = 0.2
LOG_SLOPE_MIN = 0.1
LOG_R2_MIN = 0.95
SIGMA_EPS = 1e-6
# a witness whose own norm grows faster than this under refinement is not in the space
DENOM_GROWTH_MAX = 0.02

CSV_FIELDS = ["p", "lambda", "beta", "classification", "max_ratio", "growth_exponent",
              "witness_id", "argmax_center", "argmax_radius"]


class ZeroNormError(ValueError):
    pass


# ----------------------------------------------------------------- config


@dataclass(frozen=True)
class Resolution:
    cells: int
    log_levels: int = 0


@dataclass(frozen=True)
class SweepConfig:
    operator: str = "M"
    p_grid: tuple = (2.0,)
    lambda_grid: tuple = (0.5,)
    beta_grid: tuple = ("mid",)
    dim: int = 1
    half_width: float = 3.875
    resolutions: tuple = (Resolution(256, 4), Resolution(512, 8), Resolution(1024, 16))
    norm: str = "auto"
    per_octave: int = 1
    family_mode: str = "full"
    suite: str = "all"
    seed: int = 42
    endpoint_at_p1: bool = False

    def __post_init__(self):
        if self.operator not in ("M", "H"):
            raise ValueError("operator must be M or H")
        if self.operator == "H" and self.dim != 1:
            raise ValueError("H requires dim = 1")
        if self.norm not in ("auto", "strong", "weak"):
            raise ValueError("norm must be auto, strong or weak")
        res = tuple(r if isinstance(r, Resolution) else Resolution(*r) for r in self.resolutions)
        if len(res) < 3:
            raise ValueError("need at least 3 resolutions")
        if any(b.cells <= a.cells for a, b in zip(res, res[1:])):
            raise ValueError("resolutions must be strictly increasing")
        object.__setattr__(self, "resolutions", res)
        for name in ("p_grid", "lambda_grid", "beta_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def norm_kind(self, p: float) -> str:
        if self.norm == "auto":
            return "weak" if p == 1 else "strong"
        return self.norm

    def domains(self) -> list:
        return [Domain(self.dim, self.half_width, r.cells,
                       "origin_log" if r.log_levels else "uniform", 0.5, r.log_levels or None)
                for r in self.resolutions]

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_BETA_TOKEN = re.compile(r"^(lo|hi|mid)\s*([+-]\s*[0-9.eE+-]+)?$")


def resolve_beta(token, p: float, lam: float, n: int) -> float:
    """Numbers pass through; ``lo``/``hi`` are ``lam-n`` and ``lam+n(p-1)``, ``mid`` between."""
    if isinstance(token, (int, float)):
        return float(token)
    s = str(token).strip()
    try:
        return float(s)
    except ValueError:
        pass
    m = _BETA_TOKEN.match(s)
    if not m:
        raise ValueError(f"bad beta token {token!r}")
    lo, hi = lam - n, lam + n * (p - 1)
    base = {"lo": lo, "hi": hi, "mid": 0.5 * (lo + hi)}[m.group(1)]
    off = float(m.group(2).replace(" ", "")) if m.group(2) else 0.0
    return round(base + off, 12)


def predicted_bounded(op: str, p: float, lam: float, beta: float, n: int = 1) -> bool:
    """Known sharp ranges: M on ``[lam-n, lam+n(p-1))``, H on ``(lam-1, lam+p-1)``."""
    hi = lam + n * (p - 1)
    if op == "M":
        return lam - n <= beta < hi
    return lam - 1 < beta < hi


# ---------------------------------------------------------------- witnesses


@dataclass(frozen=True, eq=False)
class Witness:
    id: str
    claim: str
    f: SampledFunction


def _radius(domain: Domain, center=0.0):
    pts = domain.midpoints
    if domain.dim == 1:
        return np.abs(pts[..., 0] - center)
    c = np.array([center, 0.0])
    return np.linalg.norm(pts - c, axis=-1)


def witness_suite(op: str, p: float, lam: float, beta: float, domain: Domain,
                  eps: float = SIGMA_EPS) -> list:
    """Test functions from the necessity arguments, plus smooth fillers."""
    n = domain.dim
    if op == "H" and n != 1:
        raise ValueError("H witnesses are 1D")
    rad = _radius(domain)
    x = domain.midpoints[..., 0]
    inside = (rad < 1).astype(float)
    out = []
    q = p + lam / n
    if q > 1:
        sigma = (rad**beta + eps) ** (1.0 / (1.0 - q))
        out.append(Witness("a_sigma", "w in A_{p+lam/n}", SampledFunction(domain, sigma * inside)))
        if op == "H":
            left = ((x > -1) & (x < 0)).astype(float)
            out.append(Witness("a_sigma_adjacent", "w in A_{p+lam} via adjacent intervals",
                               SampledFunction(domain, sigma * left)))
    out.append(Witness("b_ball_at_1", "beta >= lam-n: Mf >= c near 0",
                       SampledFunction(domain, (_radius(domain, 1.0) < 0.5).astype(float))))
    with np.errstate(divide="ignore"):
        out.append(Witness("c_inv_power", "beta < lam+n(p-1): |x|^-n not locally integrable",
                           SampledFunction(domain, rad ** (-n) * inside)))
        gamma = (beta + n - lam) / p
        if gamma >= n:
            out.append(Witness("c_extremal", "beta < lam+n(p-1): extremal profile",
                               SampledFunction(domain, rad ** (-gamma) * inside)))
    if op == "H":
        out.append(Witness("d_unit_interval", "H chi_(0,1) ~ -log|x| near 0",
                           SampledFunction(domain, ((x > 0) & (x < 1)).astype(float))))
        out.append(Witness("e_adjacent_left", "|H chi_I| > 1/(2 pi) on I'",
                           SampledFunction(domain, ((x > -1) & (x < 0)).astype(float))))
        out.append(Witness("e_interval_1_2", "H chi_(1,2) >= 1/(2 pi) on (0,1)",
                           SampledFunction(domain, ((x > 1) & (x < 2)).astype(float))))
    with np.errstate(divide="ignore", over="ignore"):
        bump = np.where(rad < 1, np.exp(-1.0 / np.maximum(1 - rad**2, 1e-300)), 0.0)
    out.append(Witness("f_bump", "filler", SampledFunction(domain, bump)))
    out.append(Witness("f_oscillating", "filler",
                       SampledFunction(domain, bump * np.cos(3 * math.pi * x))))
    return out


# ----------------------------------------------------------------- ratios


def apply_operator(op: str, f: SampledFunction, family: BallFamily) -> SampledFunction:
    if op == "M":
        return maximal(f, family)
    if op == "H":
        return hilbert(f)
    raise ValueError(f"unknown operator {op!r}")


def _norm(kind: str) -> Callable:
    return weak_morrey_norm if kind == "weak" else morrey_norm


def operator_ratio(op: str, f: SampledFunction, params: MorreyParams, family: BallFamily,
                   norm: str = "strong", detail: bool = False):
    """``||T f|| / ||f||_{L^{p,lam}(w)}``; numerator weak or strong per ``norm``.

    Returns ``inf`` when the numerator diverges (non-integrable weight).
    """
    den = morrey_norm(f, params, family)
    if den.value == 0:
        raise ZeroNormError("operator_ratio needs ||f|| > 0")
    num = _norm(norm)(abs(apply_operator(op, f, family)), params, family)
    with np.errstate(invalid="ignore"):
        ratio = num.value / den.value
    if detail:
        return ratio, num, den
    return ratio


def growth_exponent(levels: Sequence) -> float:
    """Least-squares slope of ``log ratio`` against ``log(1/h)``.

    ``levels`` holds ``(h, ratio)`` pairs; any infinite ratio gives ``inf``.
    """
    if len(levels) < 3:
        raise ValueError("need at least 3 refinement levels")
    h = np.array([lv[0] for lv in levels], dtype=float)
    r = np.array([lv[1] for lv in levels], dtype=float)
    if np.any(~np.isfinite(r)):
        return math.inf
    return float(np.polyfit(np.log(1 / h), np.log(r), 1)[0])


def log_growth_test(levels: Sequence) -> tuple:
    """Linear fit of ``ratio`` against ``log(1/h)``: ``(slope, r2, unbounded_log)``."""
    h = np.array([lv[0] for lv in levels], dtype=float)
    r = np.array([lv[1] for lv in levels], dtype=float)
    L = np.log(1 / h)
    slope, icpt = np.polyfit(L, r, 1)
    resid = r - (slope * L + icpt)
    ss_tot = float(np.sum((r - r.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), r2, bool(slope > LOG_SLOPE_MIN and r2 > LOG_R2_MIN)


def classify_growth(levels: Sequence) -> str:
    g = growth_exponent(levels)
    if g <= BOUNDED_MAX:
        return "bounded"
    if g >= UNBOUNDED_MIN:
        return "unbounded"
    return "unbounded" if log_growth_test(levels)[2] else "inconclusive"


# ------------------------------------------------------------------ regions


@dataclass
class RegionCell:
    p: float
    lam: float
    beta: float
    classification: str
    max_ratio: float
    growth_exponent: float
    witness_id: str
    argmax_center: tuple
    argmax_radius: float
    witnesses: dict = field(default_factory=dict, repr=False)
    seconds: float = 0.0

    def row(self) -> dict:
        return {
            "p": _fmt(self.p), "lambda": _fmt(self.lam), "beta": _fmt(self.beta),
            "classification": self.classification, "max_ratio": _fmt(self.max_ratio),
            "growth_exponent": _fmt(self.growth_exponent), "witness_id": self.witness_id,
            "argmax_center": " ".join(_fmt(c) for c in self.argmax_center),
            "argmax_radius": _fmt(self.argmax_radius),
        }


def _fmt(x: float) -> str:
    """9 significant digits, locale independent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


@dataclass
class RegionMap:
    cells: list
    config_hash: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for c in self.cells:
            w.writerow(c.row())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([c.row() for c in self.cells], indent=1) + "\n"

    def timings(self) -> list:
        return [c.seconds for c in self.cells]

    def lookup(self, p: float, lam: float, beta: float) -> RegionCell:
        for c in self.cells:
            if math.isclose(c.p, p) and math.isclose(c.lam, lam) and math.isclose(c.beta, beta):
                return c
        raise KeyError((p, lam, beta))


def read_csv(text: str) -> list:
    """Parse a RegionMap CSV back into typed dicts."""
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({
            "p": float(r["p"]), "lambda": float(r["lambda"]), "beta": float(r["beta"]),
            "classification": r["classification"], "max_ratio": float(r["max_ratio"]),
            "growth_exponent": float(r["growth_exponent"]), "witness_id": r["witness_id"],
            "argmax_center": tuple(float(v) for v in r["argmax_center"].split()),
            "argmax_radius": float(r["argmax_radius"]),
        })
    return rows


def classify_cell(config: SweepConfig, p: float, lam: float, beta: float,
                  domains: Optional[list] = None) -> RegionCell:
    t0 = time.perf_counter()
    domains = domains or config.domains()
    n = config.dim
    kind = config.norm_kind(p)
    per_w: dict = {}
    for d in domains:
        family = default_family(d, config.family_mode, config.per_octave)
        params = MorreyParams(p, lam, Power(beta, (0.0,) * n))
        for wit in witness_suite(config.operator, p, lam, beta, d):
            rec = per_w.setdefault(wit.id, {"levels": [], "dens": [], "ball": None,
                                            "admissible": True})
            if not rec["admissible"]:
                continue
            try:
                ratio, num, den = operator_ratio(config.operator, wit.f, params, family, kind,
                                                 detail=True)
            except ZeroNormError:
                rec["admissible"] = False
                continue
            if math.isinf(den.value) or math.isnan(ratio):
                rec["admissible"] = False
                continue
            rec["levels"].append((d.min_width, ratio))
            rec["dens"].append((d.min_width, den.value))
            rec["ball"] = num.argmax_ball
    results = {}
    for wid, rec in per_w.items():
        if not rec["admissible"] or len(rec["levels"]) < 3:
            continue
        dg = growth_exponent(rec["dens"])
        if dg > DENOM_GROWTH_MAX:
            continue
        g = growth_exponent(rec["levels"])
        results[wid] = {"growth": g, "class": classify_growth(rec["levels"]),
                        "log_test": None if math.isinf(g) else log_growth_test(rec["levels"]),
                        "levels": rec["levels"], "ball": rec["ball"], "denom_growth": dg}
    if not results:
        return RegionCell(p, lam, beta, "inconclusive", math.nan, math.nan, "none",
                          (0.0,) * n, 0.0, {}, time.perf_counter() - t0)
    classes = {r["class"] for r in results.values()}
    if "unbounded" in classes:
        label = "unbounded"
        pool = {k: v for k, v in results.items() if v["class"] == "unbounded"}
    elif classes == {"bounded"}:
        label = "bounded"
        pool = results
    else:
        label = "inconclusive"
        pool = results
    worst = max(sorted(pool), key=lambda k: pool[k]["growth"])
    w = results[worst]
    max_ratio = max(r["levels"][-1][1] for r in results.values())
    return RegionCell(p, lam, beta, label, max_ratio, w["growth"], worst,
                      tuple(w["ball"].center), w["ball"].radius, results,
                      time.perf_counter() - t0)


def sweep_cells(config: SweepConfig) -> list:
    cells = []
    for p in config.p_grid:
        for lam in config.lambda_grid:
            for tok in config.beta_grid:
                beta = resolve_beta(tok, p, lam, config.dim)
                if (p == 1 and not config.endpoint_at_p1
                        and str(tok).strip() == "lo" and config.operator == "M"):
                    continue
                cells.append((float(p), float(lam), beta))
    return cells


def classify_region(config: SweepConfig, threads: Optional[int] = None) -> RegionMap:
    """Classify every (p, lambda, beta) cell of the config grid."""
    threads = threads or int(os.environ.get("MORREYLAB_THREADS", "1") or 1)
    domains = config.domains()
    todo = sweep_cells(config)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            cells = list(ex.map(lambda c: classify_cell(config, *c, domains=domains), todo))
    else:
        cells = [classify_cell(config, *c, domains=domains) for c in todo]
    return RegionMap(cells, config.digest())
