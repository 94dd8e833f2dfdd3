"""Command-line front end: ``morreylab {norm,weights,op,sweep,verify}``.

Exit codes: 0 success, 2 bad arguments, 3 numeric failure (divergence,
non-integrable weight, failed verification).
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import (Domain, NonIntegrableWeightError, SampledFunction, default_family,
                   ball_integrals)
from .morrey import (MorreyParams, basic_inequality_check, basic_inequality_constant,
                     embedding_check, embedding_constant, morrey_norm, weak_morrey_norm)
from .operators import hilbert, hilbert_oracle_error, m_power_a1, maximal
from .sweep import Resolution, SweepConfig, _fmt, classify_region
from .weights import (Constant, Power, Product, Weight, a1_constant_estimate,
                      ap_constant_estimate, endpoint, growing_families, rh_constant_estimate,
                      shifted_power, stability)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(ValueError):
    """Bad user input; maps to exit code 2."""


class NumericFailure(RuntimeError):
    """Divergence or failed check; maps to exit code 3."""


# ------------------------------------------------------------ spec strings


def _floats(s: str, n: Optional[int] = None) -> list:
    try:
        out = [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected numbers, got {s!r}") from None
    if n is not None and len(out) != n:
        raise UsageError(f"expected {n} numbers, got {s!r}")
    return out


def _radius(x: np.ndarray, dim: int, center=0.0) -> np.ndarray:
    if dim == 1:
        return np.abs(x - center)
    return np.hypot(x[..., 0] - center, x[..., 1] - center)


def parse_function(spec: str, domain: Domain) -> SampledFunction:
    """Build a test function from ``kind:args``.

    ``indicator:a,b``          chi of (a, b) (a box in 2D)
    ``indicator-ball:c,r``     chi of B(c, r), c repeated per axis
    ``power:g[,r]``            |x|^g on B(0, r), r defaults to 1
    ``const:c``                c on the whole box
    ``gauss:s``                exp(-|x|^2 / s^2)
    """
    kind, _, arg = spec.partition(":")
    n = domain.dim
    if kind == "indicator":
        a, b = _floats(arg, 2)
        if n == 1:
            fn = lambda x: ((x > a) & (x < b)).astype(float)
        else:
            fn = lambda x: np.all((x > a) & (x < b), axis=-1).astype(float)
    elif kind == "indicator-ball":
        c, r = _floats(arg, 2)
        fn = lambda x: (_radius(x, n, c) < r).astype(float)
    elif kind == "power":
        vals = _floats(arg)
        if len(vals) not in (1, 2):
            raise UsageError("power takes g[,r]")
        g, r = vals[0], (vals[1] if len(vals) == 2 else 1.0)
        fn = lambda x: np.where(_radius(x, n) < r, _radius(x, n) ** g, 0.0)
    elif kind == "const":
        (c,) = _floats(arg, 1)
        fn = lambda x: np.full(x.shape[:-1] if n == 2 else x.shape, c)
    elif kind == "gauss":
        (s,) = _floats(arg, 1)
        fn = lambda x: np.exp(-_radius(x, n) ** 2 / s**2)
    else:
        raise UsageError(f"unknown function kind {kind!r}")
    try:
        return SampledFunction.from_callable(domain, fn)
    except ValueError as e:
        raise UsageError(str(e)) from None


def parse_weight(spec: str, dim: int = 1) -> Weight:
    """``power:a``, ``shifted:a,c``, ``const:c``, ``endpoint:lam``; join factors with ``*``."""
    factors = []
    origin = (0.0,) * dim
    for part in spec.split("*"):
        kind, _, arg = part.strip().partition(":")
        if kind == "power":
            factors.append(Power(_floats(arg, 1)[0], origin))
        elif kind == "shifted":
            a, c = _floats(arg, 2)
            factors.append(shifted_power(a, (c,) * dim))
        elif kind == "const":
            factors.append(Constant(_floats(arg, 1)[0]))
        elif kind == "endpoint":
            factors.append(endpoint(_floats(arg, 1)[0], dim))
        else:
            raise UsageError(f"unknown weight kind {kind!r}")
    return factors[0] if len(factors) == 1 else Product(tuple(factors))


def _domain(args) -> Domain:
    try:
        return Domain(args.dim, args.half_width, args.cells, args.refinement,
                      log_levels=args.log_levels)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_norm(args) -> int:
    d = _domain(args)
    f = parse_function(args.f, d)
    w = parse_weight(args.weight, d.dim) if args.weight else Power(args.beta, (0.0,) * d.dim)
    try:
        params = MorreyParams(args.p, args.lam, w)
        family = default_family(d, args.family_mode, r_max=args.radius_max)
        res = (weak_morrey_norm if args.weak else morrey_norm)(f, params, family)
    except ValueError as e:
        raise UsageError(str(e)) from None
    row = {"value": _fmt(res.value), "argmax_center": " ".join(_fmt(c) for c in res.argmax_ball.center),
           "argmax_radius": _fmt(res.argmax_ball.radius)}
    if args.weak:
        row["argmax_t"] = _fmt(res.argmax_t)
    if args.json:
        text = json.dumps(row) + "\n"
    else:
        text = "".join(f"{k}={v}\n" for k, v in row.items())
    _emit(text, args.out)
    if not math.isfinite(res.value):
        raise NumericFailure("norm diverged (non-integrable weight on some ball)")
    return EXIT_OK


def cmd_weights(args) -> int:
    d = _domain(args)
    w = parse_weight(args.weight, d.dim)
    consts = []
    lines = []
    try:
        for k, (dk, fam) in enumerate(growing_families(d, args.doublings, args.family_mode)):
            if args.cls == "ap":
                est = ap_constant_estimate(w, args.p, fam, dk)
            elif args.cls == "a1":
                est = a1_constant_estimate(w, fam, dk)
            else:
                est = rh_constant_estimate(w, args.sigma, fam, dk)
            consts.append(est.constant)
            b = est.argmax_ball
            lines.append({"step": k, "cells": dk.cells_per_axis, "balls": len(fam),
                          "constant": _fmt(est.constant),
                          "argmax_center": " ".join(_fmt(c) for c in b.center),
                          "argmax_radius": _fmt(b.radius)})
    except ValueError as e:
        raise UsageError(str(e)) from None
    verdict = stability(consts)
    if args.json:
        text = json.dumps({"trace": lines, "stability": verdict}, indent=1) + "\n"
    else:
        text = "".join(" ".join(f"{k}={v}" for k, v in ln.items()) + "\n" for ln in lines)
        text += f"stability={verdict}\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_op(args) -> int:
    d = _domain(args)
    f = parse_function(args.f, d)
    if args.op == "M":
        g = maximal(f, default_family(d, r_max=args.radius_max))
    else:
        if d.dim != 1:
            raise UsageError("H is implemented in 1D only")
        g = hilbert(f)
    pts = d.midpoints.reshape(-1, d.dim)
    cols = ["x"] if d.dim == 1 else ["x", "y"]
    rows = [",".join(cols + ["value"])]
    for pt, v in zip(pts, g.values.reshape(-1)):
        rows.append(",".join(_fmt(c) for c in pt) + "," + _fmt(v))
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


_LIST_KEYS = {"p": "p_grid", "lambda": "lambda_grid", "beta": "beta_grid"}


def _parse_resolutions(s: str) -> tuple:
    out = []
    for tok in s.split(","):
        cells, _, levels = tok.strip().partition(":")
        out.append(Resolution(int(cells), int(levels or 0)))
    return tuple(out)


def load_sweep_config(path: Optional[str], overrides=(), seed: int = 42) -> SweepConfig:
    """INI file with a ``[sweep]`` section, then ``key=value`` overrides."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path:
        if not cp.read(path, encoding="utf-8"):
            raise UsageError(f"cannot read config {path!r}")
    if not cp.has_section("sweep"):
        cp.add_section("sweep")
    for ov in overrides:
        key, eq, val = ov.partition("=")
        if not eq:
            raise UsageError(f"override must be key=value, got {ov!r}")
        cp.set("sweep", key.strip(), val.strip())
    kw: dict = {"seed": seed}
    try:
        for key, val in cp.items("sweep"):
            if key in ("p", "lambda"):
                kw[_LIST_KEYS[key]] = tuple(_floats(val))
            elif key == "beta":
                kw["beta_grid"] = tuple(v.strip() for v in val.split(",") if v.strip())
            elif key == "resolutions":
                kw["resolutions"] = _parse_resolutions(val)
            elif key in ("dim", "per_octave", "seed"):
                kw[key] = int(val)
            elif key == "half_width":
                kw[key] = float(val)
            elif key == "endpoint_at_p1":
                kw[key] = cp.getboolean("sweep", key)
            elif key in ("operator", "norm", "family_mode", "suite"):
                kw[key] = val
            else:
                raise UsageError(f"unknown config key {key!r}")
        return SweepConfig(**kw)
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from None


def cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config, args.set or (), args.seed)
    try:
        region = classify_region(cfg, args.threads)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _emit(region.to_json() if args.json else region.to_csv(), args.out)
    return EXIT_OK


# ------------------------------------------------------------ verify suites


@dataclass
class SuiteReport:
    name: str
    passed: int = 0
    total: int = 0
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.passed == self.total

    def check(self, cond: bool, what: str):
        self.total += 1
        if cond:
            self.passed += 1
        else:
            self.failures.append(what)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{self.name}: {self.passed}/{self.total} {status} ({self.seconds:.1f}s)"


def random_function(rng: np.random.Generator, domain: Domain, signed: bool = False) -> SampledFunction:
    """Cell noise, a random step function, or a truncated power bump (1D)."""
    x = domain.axis_midpoints
    R = domain.half_width
    kind = rng.integers(3)
    if kind == 0:
        v = rng.random(x.size) * (rng.random(x.size) < rng.uniform(0.1, 1.0))
    elif kind == 1:
        cuts = np.sort(rng.uniform(-R, R, rng.integers(2, 8)))
        v = rng.random(cuts.size + 1)[np.searchsorted(cuts, x)]
    else:
        c, rho, g = rng.uniform(-1, 1), rng.uniform(0.2, 2), rng.uniform(0, 0.45)
        dist = np.abs(x - c)
        v = np.where(dist < rho, np.maximum(dist, 1e-9) ** -g, 0.0)
    if not np.any(v):
        v[x.size // 2] = 1.0
    if signed:
        v = v * rng.choice([-1.0, 1.0], x.size)
    return SampledFunction(domain, v)


def _rel_close(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def _small_domain(cells: int = 128) -> Domain:
    return Domain(1, 4.0, cells)


def suite_hilbert_oracle(rng, rep: SuiteReport):
    e1, e2 = hilbert_oracle_error(2**12), hilbert_oracle_error(2**13)
    rep.check(e1 < 1e-2, f"relative error {e1:.3g} at 4096 cells")
    rep.check(1.4 <= e1 / e2 <= 2.6, f"error ratio {e1 / e2:.3g} under doubling")


def suite_homogeneity(rng, rep: SuiteReport, trials: int = 20):
    d = _small_domain()
    fam = default_family(d)
    for i in range(trials):
        f = random_function(rng, d, signed=True)
        c = rng.uniform(0.1, 5) * rng.choice([-1, 1])
        params = MorreyParams(rng.uniform(1, 3), rng.uniform(0, 0.9), Power(rng.uniform(-0.9, 1.5)))
        for norm in (morrey_norm, weak_morrey_norm):
            a = norm(f * c, params, fam).value
            b = abs(c) * norm(f, params, fam).value
            rep.check(_rel_close(a, b), f"trial {i} {norm.__name__}: {a} vs {b}")


def suite_weak_le_strong(rng, rep: SuiteReport, trials: int = 20):
    d = _small_domain()
    fam = default_family(d)
    for i in range(trials):
        f = random_function(rng, d, signed=True)
        params = MorreyParams(rng.uniform(1, 3), rng.uniform(0, 0.9), Power(rng.uniform(-0.9, 1.5)))
        wk = weak_morrey_norm(f, params, fam).value
        st = morrey_norm(f, params, fam).value
        rep.check(wk <= st * (1 + 1e-12), f"trial {i}: weak {wk} > strong {st}")


def suite_indicator_weak_eq(rng, rep: SuiteReport, trials: int = 20):
    d = _small_domain()
    fam = default_family(d)
    for i in range(trials):
        mask = random_function(rng, d).values > 0
        f = SampledFunction(d, mask.astype(float))
        params = MorreyParams(rng.uniform(1, 3), rng.uniform(0, 0.9), Power(rng.uniform(-0.9, 1.5)))
        wk = weak_morrey_norm(f, params, fam).value
        st = morrey_norm(f, params, fam).value
        rep.check(_rel_close(wk, st), f"trial {i}: weak {wk} != strong {st}")
    d2 = Domain(2, 2.0, 16)
    fam2 = default_family(d2)
    x = d2.midpoints
    f2 = SampledFunction(d2, (np.hypot(x[..., 0] - 0.3, x[..., 1]) < 1.1).astype(float))
    params = MorreyParams(2.0, 0.7, Power(0.5, (0.0, 0.0)))
    wk, st = weak_morrey_norm(f2, params, fam2).value, morrey_norm(f2, params, fam2).value
    rep.check(_rel_close(wk, st), f"2D disc: weak {wk} != strong {st}")


def suite_family_reduction(rng, rep: SuiteReport, trials: int = 20):
    d = _small_domain()
    full, reduced = default_family(d, "full"), default_family(d, "reduced")
    for i in range(trials):
        f = random_function(rng, d)
        p, lam = rng.uniform(1, 3), rng.uniform(0, 0.9)
        params = MorreyParams(p, lam, Power(rng.uniform(-0.9, 1.5)))
        nf = morrey_norm(f, params, full).value
        nr = morrey_norm(f, params, reduced).value
        bound = 5 ** ((lam + d.dim) / p)
        rep.check(nr <= nf * (1 + 1e-12) and nf <= bound * nr * (1 + 1e-12),
                  f"trial {i}: full {nf}, reduced {nr}, factor {bound}")


def suite_basic_inequality(rng, rep: SuiteReport, trials: int = 10):
    d = Domain(1, 4.0, 256, "origin_log", log_levels=8)
    fam = default_family(d)
    for alpha, lam, p in ((0.5, 0.8, 1.0), (0.0, 0.5, 2.0), (-0.3, 0.4, 1.5)):
        C = basic_inequality_constant(alpha, lam)
        for i in range(trials):
            f = random_function(rng, d)
            for r in (0.25, 0.5, 1.0, 2.0):
                ratio = basic_inequality_check(f, p, lam, alpha, Constant(1.0), r, fam)
                rep.check(ratio <= C * (1 + 1e-9),
                          f"alpha={alpha} lam={lam} p={p} trial {i} r={r}: {ratio} > {C}")


def suite_embedding(rng, rep: SuiteReport, trials: int = 100):
    d = _small_domain()
    fam = default_family(d)
    for i in range(trials):
        f = random_function(rng, d)
        p, lam = rng.uniform(1, 3), rng.uniform(0.05, 0.9)
        w = Power(rng.uniform(-0.5, 1.0))
        lhs, rhs = embedding_check(f, p, lam, w, fam)
        c = embedding_constant(p, lam, d.dim)
        rep.check(lhs <= c * rhs * (1 + 1e-9), f"trial {i}: {lhs} > {c} * {rhs}")


def suite_measure_ratio(rng, rep: SuiteReport):
    d = Domain(1, 4.0, 64)
    fam = default_family(d)
    c, r = fam.pair_centers[:, 0], fam.pair_radii
    inside = np.abs(c) + r <= d.half_width
    c, r = c[inside], r[inside]
    ones = np.ones(d.shape)
    for alpha, sigma in ((-0.5, 1.5), (0.5, 2.0), (1.5, 3.0), (-0.8, 1.2)):
        w = Power(alpha)
        const = 4 * rh_constant_estimate(w, sigma, fam, d).constant
        mass = ball_integrals(ones, w, d, c[:, None], r)
        # E = B(c_e, r_e) inside B = B(c_b, r_b)
        sub = np.abs(c[:, None] - c[None, :]) + r[:, None] <= r[None, :] * (1 + 1e-12)
        e_idx, b_idx = np.nonzero(sub)
        lhs = mass[e_idx] / mass[b_idx]
        rhs = const * (r[e_idx] / r[b_idx]) ** (1 - 1 / sigma)
        bad = int(np.sum(lhs > rhs * (1 + 1e-12)))
        rep.check(bad == 0, f"alpha={alpha} sigma={sigma}: {bad} of {lhs.size} pairs violate")


def _h_indicator(x):
    return (np.abs(x) < 1).astype(float)


def _h_steps(x):
    return ((x > 0) & (x < 0.5)) + 2.0 * ((x > 1) & (x < 2))


def _h_gauss(x):
    return np.exp(-x**2)


def suite_a1_mh(rng, rep: SuiteReport):
    base = Domain(1, 4.0, 128)
    for name, h_fn, s in (("indicator", _h_indicator, 2.0), ("steps", _h_steps, 1.5),
                          ("gauss", _h_gauss, 3.0)):
        consts = []
        for d, fam in growing_families(base, 2):
            w = m_power_a1(SampledFunction.from_callable(d, h_fn), s, fam)
            consts.append(a1_constant_estimate(w, fam, d).constant)
        verdict = stability(consts)
        rep.check(verdict == "stable", f"{name}, s={s}: {verdict} {consts}")


SUITES: dict = {
    "hilbert-oracle": suite_hilbert_oracle,
    "homogeneity": suite_homogeneity,
    "weak-le-strong": suite_weak_le_strong,
    "indicator-weak-eq": suite_indicator_weak_eq,
    "family-reduction": suite_family_reduction,
    "basic-inequality": suite_basic_inequality,
    "embedding": suite_embedding,
    "measure-ratio": suite_measure_ratio,
    "a1-mh": suite_a1_mh,
}


def run_suite(name: str, seed: int = 42) -> SuiteReport:
    if name not in SUITES:
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    rep = SuiteReport(name)
    t0 = time.perf_counter()
    SUITES[name](np.random.default_rng(seed), rep)
    rep.seconds = time.perf_counter() - t0
    return rep


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    reports = [run_suite(n, args.seed) for n in names]
    lines = []
    for rep in reports:
        lines.append(rep.line())
        lines.extend(f"  - {msg}" for msg in rep.failures[:5])
    _emit("\n".join(lines) + "\n", args.out)
    if not all(r.ok for r in reports):
        raise NumericFailure("verification failed")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_grid_args(sp):
    sp.add_argument("--dim", type=int, default=1, choices=(1, 2))
    sp.add_argument("--cells", type=int, default=1024, help="cells per axis (even)")
    sp.add_argument("--half-width", type=float, default=4.0)
    sp.add_argument("--refinement", default="uniform", choices=("uniform", "origin_log"))
    sp.add_argument("--log-levels", type=int, default=None)
    sp.add_argument("--family-mode", default="full", choices=("full", "reduced"))
    sp.add_argument("--out", help="write output to FILE instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morreylab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("norm", help="strong or weak weighted Morrey norm of a test function")
    sp.add_argument("--f", required=True, help="e.g. indicator:0,1 or power:-0.2,1")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--beta", type=float, default=0.0, help="weight |x|^beta")
    g.add_argument("--weight", help="weight spec, e.g. power:0.5*shifted:-0.2,1")
    sp.add_argument("--radius-max", type=float, default=None)
    sp.add_argument("--weak", action="store_true")
    sp.add_argument("--json", action="store_true")
    _add_grid_args(sp)
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("weights", help="A_p / A_1 / RH estimates over growing families")
    sp.add_argument("--weight", required=True)
    sp.add_argument("--class", dest="cls", default="ap", choices=("ap", "a1", "rh"))
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--sigma", type=float, default=2.0)
    sp.add_argument("--doublings", type=int, default=2)
    sp.add_argument("--json", action="store_true")
    _add_grid_args(sp)
    sp.set_defaults(func=cmd_weights, cells=256)

    sp = sub.add_parser("op", help="apply M or H and dump the sampled output as CSV")
    sp.add_argument("--op", required=True, choices=("M", "H"))
    sp.add_argument("--f", required=True)
    sp.add_argument("--radius-max", type=float, default=None)
    _add_grid_args(sp)
    sp.set_defaults(func=cmd_op)

    sp = sub.add_parser("sweep", help="classify (p, lambda, beta) cells")
    sp.add_argument("config", nargs="?", help="INI file with a [sweep] section")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run an invariant suite")
    sp.add_argument("suite", choices=["all", *SUITES])
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"morreylab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericFailure, NonIntegrableWeightError, FloatingPointError) as e:
        print(f"morreylab: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
