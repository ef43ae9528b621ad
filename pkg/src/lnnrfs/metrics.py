"""GOSPA with its localization / missed / false decomposition."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError


def solve_assignment(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Minimum-cost matching of a rectangular cost matrix.

    Every row is matched when ``rows <= cols`` (else every column). Returns
    ``(rows, cols, total_cost)``.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ContractError("cost must be a 2-D matrix")
    if cost.size and not np.all(np.isfinite(cost)):
        raise ContractError("costs must be finite")
    if cost.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int), 0.0
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, float(cost[rows, cols].sum())


@dataclass
class GospaResult:
    """GOSPA value and, for ``alpha = 2``, its decomposition.

    The parts are in units of distance**p, so ``total**p = localization +
    missed + false_``; for ``p = 1`` the parts add up to the total directly.
    """

    total: float
    localization: float
    missed: float
    false_: float
    assignment: list[tuple[int, int]] = field(default_factory=list)
    n_missed: int = 0
    n_false: int = 0


def gospa(truth, est, c: float = 100.0, p: float = 1.0, alpha: float = 2.0) -> GospaResult:
    """GOSPA between two point sets (rows are positions)."""
    if not c > 0 or not p >= 1 or not 0 < alpha <= 2:
        raise ContractError("need c > 0, p >= 1 and 0 < alpha <= 2")
    X = np.asarray(truth, dtype=float)
    Y = np.asarray(est, dtype=float)
    X = X.reshape(len(X), -1) if X.size else np.zeros((0, 2))
    Y = Y.reshape(len(Y), -1) if Y.size else np.zeros((0, 2))
    nx, ny = len(X), len(Y)
    penalty = c**p / alpha
    if nx == 0 or ny == 0:
        missed, false_ = penalty * nx, penalty * ny
        return GospaResult((missed + false_) ** (1 / p), 0.0, missed, false_, [], nx, ny)

    d = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
    capped = np.minimum(d, c) ** p
    rows, cols, matched_cost = solve_assignment(capped)
    total_p = matched_cost + penalty * abs(nx - ny)

    # pairs at or beyond the cut-off count as one missed plus one false object
    real = d[rows, cols] < c
    pairs = [(int(i), int(j)) for i, j, r in zip(rows, cols, real) if r]
    loc = float(np.sum(d[rows, cols][real] ** p))
    n_missed = nx - len(pairs)
    n_false = ny - len(pairs)
    if alpha == 2:
        missed, false_ = penalty * n_missed, penalty * n_false
    else:
        # the missed/false split is only defined for alpha = 2
        missed, false_ = float("nan"), float("nan")
    return GospaResult(total_p ** (1 / p), loc, missed, false_, pairs, n_missed, n_false)


@dataclass
class GospaSeries:
    """Per-scan GOSPA parts of one run."""

    times: np.ndarray
    total: np.ndarray
    localization: np.ndarray
    missed: np.ndarray
    false_: np.ndarray


def gospa_series(truth_positions, est_positions, times, c=100.0, p=1.0, alpha=2.0) -> GospaSeries:
    results = [gospa(X, Y, c, p, alpha) for X, Y in zip(truth_positions, est_positions)]
    return GospaSeries(
        np.asarray(times, dtype=float),
        np.array([r.total for r in results]),
        np.array([r.localization for r in results]),
        np.array([r.missed for r in results]),
        np.array([r.false_ for r in results]),
    )


@dataclass
class Aggregate:
    times: np.ndarray
    mean_total: np.ndarray
    std_total: np.ndarray
    mean_loc: np.ndarray
    mean_missed: np.ndarray
    mean_false: np.ndarray
    runs: int

    def time_average(self, t0: float | None = None, t1: float | None = None) -> dict:
        sel = np.ones(len(self.times), dtype=bool)
        if t0 is not None:
            sel &= self.times >= t0
        if t1 is not None:
            sel &= self.times <= t1
        return {
            "total": float(self.mean_total[sel].mean()),
            "loc": float(self.mean_loc[sel].mean()),
            "missed": float(self.mean_missed[sel].mean()),
            "false": float(self.mean_false[sel].mean()),
        }


def aggregate_runs(runs: list[GospaSeries]) -> Aggregate:
    """Element-wise mean and (population) std over Monte-Carlo runs."""
    if not runs:
        raise ContractError("no runs to aggregate")
    K = len(runs[0].times)
    if any(len(r.times) != K for r in runs):
        raise ContractError("runs have different horizons")
    stack = lambda name: np.vstack([getattr(r, name) for r in runs])
    total = stack("total")
    return Aggregate(
        runs[0].times.copy(),
        total.mean(axis=0),
        total.std(axis=0),
        stack("localization").mean(axis=0),
        stack("missed").mean(axis=0),
        stack("false_").mean(axis=0),
        len(runs),
    )


CSV_COLUMNS = ["filter", "t", "mean_total", "std_total", "mean_loc", "mean_missed", "mean_false"]


def write_gospa_csv(path, aggregates: dict[str, Aggregate]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for name, agg in aggregates.items():
            for k, t in enumerate(agg.times):
                w.writerow([name, repr(float(t))] + [
                    repr(float(v[k])) for v in (agg.mean_total, agg.std_total, agg.mean_loc,
                                                agg.mean_missed, agg.mean_false)])


def read_gospa_csv(path) -> dict[str, dict[str, np.ndarray]]:
    out: dict[str, dict[str, list]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cols = out.setdefault(row["filter"], {k: [] for k in CSV_COLUMNS[1:]})
            for k in CSV_COLUMNS[1:]:
                cols[k].append(float(row[k]))
    return {f: {k: np.array(v) for k, v in cols.items()} for f, cols in out.items()}
