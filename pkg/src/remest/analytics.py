"""Closed-form expected stage cost of a threshold policy with the matched
affine coder, its derivative in the threshold, the optimal threshold
sqrt(c + m), and a golden-section minimizer used as an independent numerical
cross-check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

from .strategies import SystemParams

__all__ = [
    "CostBreakdown",
    "cost_closed_form",
    "cost_derivative",
    "optimal_threshold",
    "numeric_argmin",
    "SweepRow",
    "threshold_sweep",
    "write_sweep_csv",
    "SWEEP_LAMBDAS",
    "SWEEP_SHAPES",
    "SWEEP_POWERS",
    "SWEEP_COSTS",
]

# Default sweep grids; chosen to hit gamma < 1, gamma = 1, and gamma > 1.
SWEEP_LAMBDAS: tuple[float, ...] = (0.5, 1.0, 2.0)
SWEEP_SHAPES: tuple[float, ...] = (0.5, 1.0, 2.0, 5.0)
SWEEP_POWERS: tuple[float, ...] = (0.25, 1.0, 4.0)
SWEEP_COSTS: tuple[float, ...] = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class CostBreakdown:
    """Expected per-stage cost split into its three terms.

    total = comm + est_no_tx + est_tx, where comm = c·tx_prob, est_no_tx is
    the truncated second moment inside the silence band, and est_tx is the
    residual estimation error m carried by each transmission.
    """

    total: float
    comm: float
    est_no_tx: float
    est_tx: float
    tx_prob: float


def cost_closed_form(p: SystemParams, beta: float) -> CostBreakdown:
    """Expected stage cost of threshold ``beta`` with the matched coder.

    For the two-sided exponential source the silence-band term has
    antiderivative

        2·int_0^beta x²·(lam/2)·e^(-lam·x) dx
            = 2/lam² - e^(-lam·beta)·(beta² + 2·beta/lam + 2/lam²),

    and a transmission occurs with probability e^(-lam·beta), costing c + m.
    The antiderivative is verified against adaptive quadrature in the tests.
    """
    if not math.isfinite(beta) or beta < 0.0:
        raise ValueError(f"beta must be finite and >= 0, got {beta!r}")
    lam = p.lam
    tx_prob = math.exp(-lam * beta)
    est_no_tx = 2.0 / lam**2 - tx_prob * (beta**2 + 2.0 * beta / lam + 2.0 / lam**2)
    comm = p.c * tx_prob
    est_tx = p.m * tx_prob
    return CostBreakdown(
        total=est_no_tx + comm + est_tx,
        comm=comm,
        est_no_tx=est_no_tx,
        est_tx=est_tx,
        tx_prob=tx_prob,
    )


def cost_derivative(p: SystemParams, beta: float) -> float:
    """d(total)/d(beta) = lam·e^(-lam·beta)·(beta² - (c + m)).

    Negative below sqrt(c + m), zero there, positive above: the expected
    cost is strictly unimodal in the threshold.
    """
    if not math.isfinite(beta) or beta <= 0.0:
        raise ValueError(f"beta must be finite and > 0, got {beta!r}")
    return p.lam * math.exp(-p.lam * beta) * (beta**2 - (p.c + p.m))


def optimal_threshold(p: SystemParams) -> float:
    """The unique cost-minimizing threshold sqrt(c + m)."""
    return math.sqrt(p.c + p.m)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def numeric_argmin(p: SystemParams, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Golden-section minimizer of the closed-form cost over [lo, hi].

    Deliberately independent of :func:`cost_derivative` and of the sqrt(c+m)
    formula, so it can serve as an oracle for both.  Requires
    0 <= lo < hi and tol > 0; the cost is unimodal on (0, inf), so the
    bracket only needs to contain the minimizer.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("bounds must be finite")
    if lo < 0.0 or hi <= lo:
        raise ValueError(f"need 0 <= lo < hi, got lo={lo!r}, hi={hi!r}")
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol!r}")

    def objective(b: float) -> float:
        return cost_closed_form(p, b).total

    dist = hi - lo
    if dist <= tol:
        return 0.5 * (lo + hi)
    n_iter = int(math.ceil(math.log(tol / dist) / math.log(_INV_PHI)))
    a, b = lo, hi
    c_pt = a + _INV_PHI_SQ * dist
    d_pt = a + _INV_PHI * dist
    yc = objective(c_pt)
    yd = objective(d_pt)
    for _ in range(max(n_iter - 1, 0)):
        if yc < yd:
            b, d_pt, yd = d_pt, c_pt, yc
            dist *= _INV_PHI
            c_pt = a + _INV_PHI_SQ * dist
            yc = objective(c_pt)
        else:
            a, c_pt, yc = c_pt, d_pt, yd
            dist *= _INV_PHI
            d_pt = a + _INV_PHI * dist
            yd = objective(d_pt)
    return 0.5 * (a + d_pt) if yc < yd else 0.5 * (c_pt + b)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    k: float
    p_t: float
    c: float
    beta_star_formula: float
    beta_star_numeric: float
    j_at_beta_star: float


def threshold_sweep(
    lambdas: Sequence[float] = SWEEP_LAMBDAS,
    shapes: Sequence[float] = SWEEP_SHAPES,
    powers: Sequence[float] = SWEEP_POWERS,
    costs: Sequence[float] = SWEEP_COSTS,
    lo: float = 0.0,
    hi: float = 10.0,
    tol: float = 1e-8,
) -> list[SweepRow]:
    """Formula vs golden-section optimal threshold over a parameter grid.

    Row order is the nested product lambda > k > P_T > c, matching the CSV
    schema (lambda, k, P_T, c, beta_star_formula, beta_star_numeric,
    J_at_beta_star).
    """
    rows = []
    for lam in lambdas:
        for k in shapes:
            for p_t in powers:
                for c in costs:
                    p = SystemParams(lam=lam, k=k, p_t=p_t, c=c)
                    formula = optimal_threshold(p)
                    numeric = numeric_argmin(p, lo, hi, tol)
                    rows.append(
                        SweepRow(
                            lam=lam,
                            k=k,
                            p_t=p_t,
                            c=c,
                            beta_star_formula=formula,
                            beta_star_numeric=numeric,
                            j_at_beta_star=cost_closed_form(p, formula).total,
                        )
                    )
    return rows


SWEEP_CSV_HEADER = [
    "lambda", "k", "P_T", "c",
    "beta_star_formula", "beta_star_numeric", "J_at_beta_star",
]


def write_sweep_csv(rows: Sequence[SweepRow], file) -> None:
    """Write sweep rows; ``file`` is a path or a text file object."""
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for r in rows:
            writer.writerow([
                repr(r.lam), repr(r.k), repr(r.p_t), repr(r.c),
                repr(r.beta_star_formula), repr(r.beta_star_numeric),
                repr(r.j_at_beta_star),
            ])

    if hasattr(file, "write"):
        _write(file)
    else:
        with open(file, "w", newline="") as fh:
            _write(fh)
