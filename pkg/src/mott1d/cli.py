"""Command-line front end.

Subcommands: `validate` (parameter checks), `first-order` and
`second-order` (oracle vs. leading-term comparisons), `probability`
(joint excitation at one configuration), `oscint-demo` (expansion rate
table on the Gaussian test integrand), `sweep` (full comparison report
with CSV/JSON/SVG outputs).

Runs are configured by a flat key = value file with dotted sections, e.g.

    experiment.lambda_sweep = 10, 20, 40
    oracle.n_time_nodes = 384
    output.directory = out

The CLI is a thin adapter: every number it prints or writes comes from
the corresponding library call unchanged.  Exit codes: 0 success,
1 validation failure, 2 numerical failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .duhamel import Oracle, OracleConfig
from .errors import NumericsError, ValidationError
from .oscint import StripIntegrand, brute_strip, expand_strip
from .params import derive_dimensionless, scaling_family, validate_assumptions
from .report import ExperimentSpec, fit_rate, run_experiment, write_csv, write_json
from .specfun import bump_potential
from .stationary import f1_leading, f1_minus_bound, f2_leading, p_plus_leading

EX_OK, EX_VALIDATION, EX_NUMERIC, EX_USAGE = 0, 1, 2, 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------

def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config(path) -> dict:
    """Flat `key = value` lines with dotted keys; `#` starts a comment.

    Comma-separated values become lists; `n:m` tokens become int pairs.
    """
    cfg = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{ln}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            items = [v.strip() for v in val.split(",")] if "," in val else [val.strip()]
            parsed = []
            for item in items:
                if ":" in item and not any(c.isalpha() for c in item):
                    a, _, b = item.partition(":")
                    parsed.append((int(a), int(b)))
                else:
                    parsed.append(_parse_scalar(item))
            cfg[key] = parsed if "," in val else parsed[0]
    return cfg


def _get(cfg: dict, key: str, default):
    val = cfg.get(key, default)
    if isinstance(default, (tuple, list)) and not isinstance(val, (tuple, list)):
        return [val]
    return val


def _oracle_config(cfg: dict) -> OracleConfig:
    return OracleConfig(
        n_points=int(_get(cfg, "oracle.n_points", 16384)),
        domain_pad=float(_get(cfg, "oracle.domain_pad", 20.0)),
        n_time_nodes=int(_get(cfg, "oracle.n_time_nodes", 384)),
        quadrature_rule=str(_get(cfg, "oracle.quadrature_rule", "simpson")),
        time_grid=str(_get(cfg, "oracle.time_grid", "graded")),
    )


def _sign_option(cfg: dict, both_signs: bool):
    if both_signs:
        return "both"
    raw = _get(cfg, "experiment.a2_sign", "both")
    if raw in ("both", 1, -1):
        return raw
    if raw in ("+1", "plus"):
        return 1
    if raw in ("-1", "minus"):
        return -1
    raise ValidationError(f"experiment.a2_sign: bad value {raw!r}")


def _experiment_spec(cfg: dict, both_signs: bool = False) -> ExperimentSpec:
    lam0 = cfg.get("model.lambda0")
    exc = _get(cfg, "experiment.excitations", [(1, 1)])
    if isinstance(exc, tuple):
        exc = [exc]
    exc = [e if isinstance(e, tuple) else (int(e), int(e)) for e in exc]
    return ExperimentSpec(
        lambda_sweep=tuple(float(v) for v in _get(cfg, "experiment.lambda_sweep", [10.0, 20.0, 40.0])),
        times=tuple(float(v) for v in _get(cfg, "experiment.times", [1.5])),
        excitations=tuple(exc),
        a2_sign=_sign_option(cfg, both_signs),
        oracle_cfg=_oracle_config(cfg),
        lambda0_scale=None if lam0 is None else float(lam0),
        bound_k=int(_get(cfg, "experiment.bound_k", 3)),
    )


def _potential(cfg: dict):
    return bump_potential(radius=float(_get(cfg, "potential.radius", 1.0)),
                          height=float(_get(cfg, "potential.height", 1.0)))


def _output_dir(cfg: dict) -> Path:
    env = os.environ.get("MOTT1D_OUTPUT_DIR")
    out = Path(env) if env else Path(str(_get(cfg, "output.directory", "out")))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# SVG emission
# ---------------------------------------------------------------------------

def _panel(lines, x0, rows_xy, title, panel_id):
    """One log-log panel: points, least-squares fit line, slope label."""
    width, height, pad = 320.0, 300.0, 45.0
    lines.append(f'<g transform="translate({x0},0)">')
    lines.append(f'<clipPath id="box{panel_id}"><rect x="{pad}" y="{pad}" '
                 f'width="{width - 2 * pad:.6g}" height="{height - 2 * pad:.6g}"/>'
                 f'</clipPath>')
    lines.append(f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad:.6g}" '
                 f'height="{height - 2 * pad:.6g}" fill="none" stroke="black"/>')
    lines.append(f'<text x="{width / 2:.6g}" y="25" text-anchor="middle" '
                 f'font-size="13">{title}</text>')
    if rows_xy:
        lx = [math.log10(x) for x, _ in rows_xy]
        ly = [math.log10(y) for _, y in rows_xy]
        lo_x, hi_x = min(lx), max(lx)
        lo_y, hi_y = min(ly), max(ly)
        if hi_x == lo_x:
            lo_x, hi_x = lo_x - 0.5, hi_x + 0.5
        if hi_y == lo_y:
            lo_y, hi_y = lo_y - 0.5, hi_y + 0.5

        def sx(v):
            return pad + (v - lo_x) / (hi_x - lo_x) * (width - 2 * pad)

        def sy(v):
            return height - pad - (v - lo_y) / (hi_y - lo_y) * (height - 2 * pad)

        if len(rows_xy) >= 3:
            slope = fit_rate([x for x, _ in rows_xy], [y for _, y in rows_xy])
            cx = sum(lx) / len(lx)
            cy = sum(ly) / len(ly)
            y_at = [cy + slope * (v - cx) for v in (lo_x, hi_x)]
            lines.append(f'<line x1="{sx(lo_x):.6g}" y1="{sy(y_at[0]):.6g}" '
                         f'x2="{sx(hi_x):.6g}" y2="{sy(y_at[1]):.6g}" '
                         f'stroke="gray" stroke-dasharray="4 3" '
                         f'clip-path="url(#box{panel_id})"/>')
            lines.append(f'<text x="{width / 2:.6g}" y="{height - 8:.6g}" '
                         f'text-anchor="middle" font-size="12">'
                         f'slope = {slope:.3f}</text>')
        for xv, yv in zip(lx, ly):
            lines.append(f'<circle cx="{sx(xv):.6g}" cy="{sy(yv):.6g}" r="3.5" '
                         f'fill="steelblue"/>')
        lines.append(f'<text x="{pad:.6g}" y="{pad - 6:.6g}" font-size="10">'
                     f'log10 y in [{lo_y:.3g}, {hi_y:.3g}], '
                     f'log10 Lambda in [{lo_x:.3g}, {hi_x:.3g}]</text>')
    else:
        lines.append(f'<text x="{width / 2:.6g}" y="{height / 2:.6g}" '
                     f'text-anchor="middle" font-size="12">no data</text>')
    lines.append("</g>")


def emit_svg(rows, path):
    """Two-panel diagnostic figure: leading-order deviation and the sign
    contrast, both against Lambda_1 on log-log axes.  Byte-deterministic
    for fixed input."""
    if not rows:
        raise ValidationError("emit_svg: need at least one row")
    plus = sorted([(r.Lambda1, abs(r.ratio - 1.0)) for r in rows
                   if r.a2_sign > 0 and not r.failed and math.isfinite(r.ratio)
                   and abs(r.ratio - 1.0) > 0])
    minus = sorted([(r.Lambda1, r.ratio) for r in rows
                    if r.a2_sign < 0 and not r.failed and math.isfinite(r.ratio)
                    and r.ratio > 0])
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             '<svg xmlns="http://www.w3.org/2000/svg" width="640" height="300" '
             'viewBox="0 0 640 300">']
    _panel(lines, 0.0, plus, "|oracle/leading - 1| vs Lambda1", 0)
    _panel(lines, 320.0, minus, "P- / P+ vs Lambda1", 1)
    lines.append("</svg>")
    data = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(data)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_validate(cfg: dict) -> int:
    eps = float(_get(cfg, "model.epsilon", 0.05))
    sign = _sign_option(cfg, False)
    sign = 1 if sign == "both" else sign
    lam0 = cfg.get("model.lambda0")
    p = scaling_family(eps, a2_sign=sign, lambda0=lam0)
    d = derive_dimensionless(p, eps)
    rep = validate_assumptions(d)
    for name, value, ok in rep.items:
        print(f"{'PASS' if ok else 'FAIL'} {name} = {value:.6g}")
    print(f"overall: {'PASS' if rep.passed else 'FAIL'}")
    return EX_OK if rep.passed else EX_VALIDATION


def _rel_l2(a, b) -> float:
    num = float(np.sqrt(np.sum(np.abs(a - b) ** 2)))
    den = float(np.sqrt(np.sum(np.abs(a) ** 2)))
    return num / den if den > 0 else math.inf


def _cmd_first_order(cfg: dict) -> int:
    V = _potential(cfg)
    spec = _experiment_spec(cfg)
    t_rel = spec.times[0]
    n1, _ = spec.excitations[0]
    print("Lambda1  rel_L2_dist  minus_norm  minus_bound")
    for lam in spec.lambda_sweep:
        p = scaling_family(1.0 / lam, lambda0=spec.lambda0_scale)
        t = t_rel * p.flight_time(2)
        orc = Oracle(p, V, spec.oracle_cfg)
        f1o = orc.f1(n1, 1, t)
        f1l = f1_leading(n1, 1, t, p, V, f1o)
        diff = _rel_l2(f1o.samples, f1l.samples)
        minus = orc.f1(n1, 1, t, branch="minus").l2_norm()
        bound = f1_minus_bound(n1, 1, t, p, V).bound_value
        print(f"{lam:7.3g}  {diff:11.4e}  {minus:10.4e}  {bound:11.4e}")
    return EX_OK


def _cmd_second_order(cfg: dict) -> int:
    V = _potential(cfg)
    spec = _experiment_spec(cfg)
    t_rel = spec.times[0]
    n1, n2 = spec.excitations[0]
    print("Lambda1  rel_L2_dist  centroid  centroid_expected")
    for lam in spec.lambda_sweep:
        p = scaling_family(1.0 / lam, lambda0=spec.lambda0_scale)
        t = t_rel * p.flight_time(2)
        orc = Oracle(p, V, spec.oracle_cfg)
        f2o = orc.f2_both_excited(n1, n2, t)
        f2l = f2_leading(n1, n2, t, p, V, f2o)
        d = derive_dimensionless(p, 1.0 / lam)
        expected = (n1 * p.a1 + n2 * p.a2) * d.dE \
            + p.P0 * (1 - (n1 + n2) * d.dE) / p.M * t
        print(f"{lam:7.3g}  {_rel_l2(f2o.samples, f2l.samples):11.4e}  "
              f"{f2o.centroid():8.5f}  {expected:8.5f}")
    return EX_OK


def _cmd_probability(cfg: dict, both_signs: bool) -> int:
    V = _potential(cfg)
    eps = float(_get(cfg, "model.epsilon", 0.05))
    spec = _experiment_spec(cfg, both_signs=both_signs)
    spec = ExperimentSpec(lambda_sweep=(1.0 / eps,), times=spec.times,
                          excitations=spec.excitations, a2_sign=spec.a2_sign,
                          oracle_cfg=spec.oracle_cfg,
                          lambda0_scale=spec.lambda0_scale, bound_k=spec.bound_k)
    rows, slopes = run_experiment(spec, potential=V)
    out = _output_dir(cfg)
    write_csv(rows, out / "probability.csv")
    for r in rows:
        print(f"sign={r.a2_sign:+d}  P={r.p_oracle:.6e}  leading={r.p_leading:.6e}  "
              f"bound={r.p_bound:.6e}  ratio={r.ratio:.6e}  converged={r.converged}")
    print(f"wrote {out / 'probability.csv'}")
    return EX_OK


def _cmd_oscint_demo(cfg: dict) -> int:
    lams = [float(v) for v in _get(cfg, "oscint.lambdas", [10.0, 20.0, 40.0, 80.0])]

    def gauss(x, y):
        return np.exp(-x**2 - y**2)

    def dgauss(x, y, a, b):
        def herm(nn, u):
            h0, h1 = np.ones_like(u), 2 * u
            if nn == 0:
                return h0
            for kk in range(2, nn + 1):
                h0, h1 = h1, 2 * u * h1 - 2 * (kk - 1) * h0
            return h1
        return (-1.0) ** (a + b) * herm(a, x) * herm(b, y) * np.exp(-x**2 - y**2)

    integrand = StripIntegrand(f=gauss, mu=1.0, nu=1.0, derivative=dgauss)
    print("order  Lambda  |error|      bound/L^p    slope")
    for order in (1, 2, 3):
        errs = []
        for lam in lams:
            ref = brute_strip(integrand, lam, tol=1e-11)
            res = expand_strip(integrand, lam, order)
            errs.append(abs(ref - res.value_estimate))
            print(f"{order:5d}  {lam:6.4g}  {errs[-1]:.5e}  "
                  f"{res.error_bound(lam):.5e}", end="")
            if lam == lams[-1]:
                print(f"  {fit_rate(lams, errs):+.3f}")
            else:
                print()
    return EX_OK


def _cmd_sweep(cfg: dict, workers: int) -> int:
    V = _potential(cfg)
    spec = _experiment_spec(cfg)
    rows, slopes = run_experiment(spec, potential=V, workers=workers)
    out = _output_dir(cfg)
    formats = [str(f) for f in _get(cfg, "output.formats", ["csv", "json", "svg"])]
    if "csv" in formats:
        write_csv(rows, out / "sweep.csv")
    if "json" in formats:
        write_json(rows, slopes, out / "sweep.json")
    if "svg" in formats:
        emit_svg(rows, out / "sweep.svg")
    for key in sorted(slopes):
        print(f"{key}: {slopes[key]:+.4f}")
    n_failed = sum(r.failed for r in rows)
    print(f"{len(rows)} rows, {n_failed} failed; outputs in {out}")
    return EX_OK if n_failed == 0 else EX_NUMERIC


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="mott1d",
                     description="Joint oscillator excitation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "first-order", "second-order", "probability",
                 "oscint-demo", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", "-c", default=None,
                        help="flat key=value configuration file")
        if name == "probability":
            sp.add_argument("--both-signs", action="store_true")
        if name == "sweep":
            sp.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        parser.print_usage(sys.stderr)
        return EX_USAGE

    cfg = {}
    if args.config is not None:
        if not Path(args.config).is_file():
            sys.stderr.write(f"error: config file not found: {args.config}\n")
            parser.print_usage(sys.stderr)
            return EX_USAGE
        try:
            cfg = parse_config(args.config)
        except ValidationError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EX_USAGE

    try:
        if args.command == "validate":
            return _cmd_validate(cfg)
        if args.command == "first-order":
            return _cmd_first_order(cfg)
        if args.command == "second-order":
            return _cmd_second_order(cfg)
        if args.command == "probability":
            return _cmd_probability(cfg, args.both_signs)
        if args.command == "oscint-demo":
            return _cmd_oscint_demo(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg, args.workers)
    except ValidationError as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EX_VALIDATION
    except NumericsError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EX_NUMERIC
    return EX_OK


if __name__ == "__main__":
    sys.exit(main())
