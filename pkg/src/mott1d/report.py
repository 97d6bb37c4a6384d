"""Experiment orchestration: sweeps, rate fits, machine-readable reports.

Each sweep point realizes the scaling family at epsilon = 1/Lambda1, runs
the grid oracle for the joint excitation probability, and compares it
against the closed-form leading probability (same side) or the certified
ceiling (opposite sides).  Rows are deterministic and independent; failed
rows are recorded rather than aborting the sweep.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .duhamel import Oracle, OracleConfig
from .errors import NumericsError, ValidationError
from .params import PhysicalParams, scaling_family
from .specfun import Potential, bump_potential
from .stationary import p_minus_bound, p_plus_leading

CSV_COLUMNS = [
    "epsilon", "Lambda1", "Lambda2", "t_over_tau2", "n1", "n2", "a2_sign",
    "p_oracle", "p_leading", "p_bound", "ratio", "converged",
]


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: Lambda targets x times x excitation pairs x signs."""

    lambda_sweep: tuple
    times: tuple = (1.5,)                 # in units of tau_2
    excitations: tuple = ((1, 1),)
    a2_sign: object = "both"              # +1 | -1 | "both"
    oracle_cfg: OracleConfig = field(default_factory=OracleConfig)
    lambda0_scale: Optional[float] = None  # override lam0; default eps^3
    bound_k: int = 3

    def __post_init__(self):
        if not self.lambda_sweep:
            raise ValidationError("ExperimentSpec: empty lambda_sweep")
        if not self.times or not self.excitations:
            raise ValidationError("ExperimentSpec: empty times or excitations")
        if any(t <= 1.0 for t in self.times):
            raise ValidationError("ExperimentSpec: probability runs need t/tau2 > 1")
        if any(min(n1, n2) < 1 for n1, n2 in self.excitations):
            raise ValidationError("ExperimentSpec: excitations must be >= 1")
        if self.a2_sign not in (1, -1, "both"):
            raise ValidationError("ExperimentSpec: a2_sign must be +1, -1 or 'both'")

    def signs(self):
        return (1, -1) if self.a2_sign == "both" else (self.a2_sign,)


@dataclass
class ComparisonRow:
    """One sweep point: oracle value next to its asymptotic counterpart."""

    epsilon: float
    Lambda1: float
    Lambda2: float
    t_over_tau2: float
    n1: int
    n2: int
    a2_sign: int
    p_oracle: float = math.nan
    p_leading: float = math.nan      # same-side rows only
    p_bound: float = math.nan        # opposite-side rows only
    ratio: float = math.nan          # oracle/leading, or contrast P-/P+
    converged: bool = False
    failed: bool = False
    error: str = ""
    params_echo: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def fit_rate(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValidationError("fit_rate: need at least 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValidationError("fit_rate: points must be positive")
    lx = np.log(xs)
    if np.allclose(lx, lx[0]):
        raise ValidationError("fit_rate: degenerate abscissae")
    return float(np.polyfit(lx, np.log(ys), 1)[0])


def _run_point(spec: ExperimentSpec, V: Potential, lam: float, t_rel: float,
               n1: int, n2: int, sign: int) -> ComparisonRow:
    eps = 1.0 / lam
    p = scaling_family(eps, a2_sign=sign, lambda0=spec.lambda0_scale)
    tau2 = p.flight_time(2)
    t = t_rel * tau2
    row = ComparisonRow(
        epsilon=eps, Lambda1=p.a1 / p.gamma, Lambda2=abs(p.a2) / p.gamma,
        t_over_tau2=t_rel, n1=n1, n2=n2, a2_sign=sign,
        params_echo=p.as_dict(),
    )
    try:
        oracle = Oracle(p, V, spec.oracle_cfg)
        value, diag = oracle.probability_with_diagnostics(n1, n2, t)
        row.p_oracle = value
        row.converged = bool(diag["converged"])
        if sign > 0:
            row.p_leading = p_plus_leading(n1, n2, p, V)
            if row.p_leading > 0:
                row.ratio = value / row.p_leading
        else:
            row.p_bound = p_minus_bound(n1, n2, t, spec.bound_k, p, V).bound_value
    except NumericsError as exc:
        row.failed = True
        row.error = str(exc)
    return row


def run_experiment(spec: ExperimentSpec, potential: Optional[Potential] = None,
                   workers: int = 1):
    """Execute the sweep; returns (rows, slopes).

    Rows are ordered by (Lambda, t, excitation, sign) regardless of the
    worker schedule.  Contrast ratios P-/P+ are filled once both signs of
    a point are available.  Slopes are fitted per (t, n1, n2) group over
    the Lambda axis, using converged rows only.
    """
    V = potential if potential is not None else bump_potential()
    points = [(lam, t_rel, n1, n2, sign)
              for lam in spec.lambda_sweep
              for t_rel in spec.times
              for (n1, n2) in spec.excitations
              for sign in spec.signs()]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _run_point(spec, V, *a), points))
    else:
        rows = [_run_point(spec, V, *a) for a in points]

    by_key = {(r.Lambda1, r.t_over_tau2, r.n1, r.n2, r.a2_sign): r for r in rows}
    for r in rows:
        if r.a2_sign < 0 and not r.failed:
            partner = by_key.get((r.Lambda1, r.t_over_tau2, r.n1, r.n2, 1))
            if partner is not None and partner.p_oracle > 0 and not partner.failed:
                r.ratio = r.p_oracle / partner.p_oracle

    slopes = {}
    for t_rel in spec.times:
        for (n1, n2) in spec.excitations:
            key = f"t{t_rel:g}_n{n1}{n2}"
            plus = [r for r in rows
                    if r.a2_sign > 0 and r.t_over_tau2 == t_rel
                    and (r.n1, r.n2) == (n1, n2) and r.converged and not r.failed]
            plus.sort(key=lambda r: r.Lambda1)
            if len(plus) >= 3 and all(math.isfinite(r.ratio) for r in plus):
                dev = [abs(r.ratio - 1.0) for r in plus]
                if all(d > 0 for d in dev):
                    slopes[f"ratio_deviation_{key}"] = fit_rate(
                        [r.Lambda1 for r in plus], dev)
            minus = [r for r in rows
                     if r.a2_sign < 0 and r.t_over_tau2 == t_rel
                     and (r.n1, r.n2) == (n1, n2) and r.converged and not r.failed
                     and math.isfinite(r.ratio) and r.ratio > 0]
            minus.sort(key=lambda r: r.Lambda1)
            if len(minus) >= 3:
                slopes[f"contrast_{key}"] = fit_rate(
                    [r.Lambda1 for r in minus], [r.ratio for r in minus])
    return rows, slopes


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in rows:
            rec = r.as_record()
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in rec.items()})


def write_json(rows, slopes, path):
    doc = {
        "rows": [dict(r.as_record(), failed=r.failed, error=r.error,
                      params=r.params_echo) for r in rows],
        "fitted_slopes": slopes,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
