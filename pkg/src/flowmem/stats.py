"""Volatility construction and the persistence-volatility regression.

The baseline regressand is the squared daily return. The rolling exponent
updates only every `step` trading days, so pairing it with daily
volatility needs an explicit alignment policy: forward_fill holds the
last computed exponent for at most `step` days; step_dates_only keeps
only the exponent's own dates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .errors import StatsError
from .rolling import RollingHurst

FILL_POLICIES = ("forward_fill", "step_dates_only")


@dataclass(frozen=True)
class ReturnSeries:
    calendar: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.returns, dtype=float)
        if arr.ndim != 1 or arr.size != len(self.calendar):
            raise StatsError("returns and calendar lengths differ")
        if not np.all(np.isfinite(arr)):
            raise StatsError("non-finite returns")
        object.__setattr__(self, "returns", arr)


@dataclass(frozen=True)
class VolatilitySeries:
    calendar: tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True)
class AlignedPairs:
    """Date-matched (hurst, volatility) samples ready for regression."""

    dates: tuple[str, ...]
    hurst: np.ndarray
    volatility: np.ndarray

    def lagged(self, lag: int) -> "AlignedPairs":
        """Pair volatility at t with the exponent lag days earlier."""
        if lag < 0:
            raise StatsError(f"lag must be >= 0, got {lag}")
        if lag == 0:
            return self
        if lag >= len(self.dates):
            raise StatsError(f"lag {lag} leaves no pairs")
        return AlignedPairs(
            dates=self.dates[lag:],
            hurst=self.hurst[:-lag],
            volatility=self.volatility[lag:],
        )


@dataclass(frozen=True)
class OlsResult:
    alpha: float
    beta: float
    t_alpha: float
    t_beta: float
    r_squared: float
    n: int
    residual_variance: float

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "t_alpha": self.t_alpha,
            "t_beta": self.t_beta,
            "r_squared": self.r_squared,
            "n": self.n,
            "residual_variance": self.residual_variance,
        }


def returns_from_prices(calendar, closes) -> ReturnSeries:
    """Log price ratios; the first date is consumed by the difference."""
    prices = np.asarray(closes, dtype=float)
    if prices.size != len(calendar):
        raise StatsError("prices and calendar lengths differ")
    if prices.size < 2:
        raise StatsError("need at least 2 prices")
    if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
        raise StatsError("prices must be positive and finite")
    return ReturnSeries(
        calendar=tuple(calendar[1:]),
        returns=np.diff(np.log(prices)),
    )


def read_prices_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Parse `date,close`; returns (calendar, closes)."""
    dates: list[str] = []
    closes: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip().lower() for h in next(reader))
        except StopIteration:
            raise StatsError(f"{path}: empty file") from None
        if header != ("date", "close"):
            raise StatsError(f"{path}: expected header date,close, got {header!r}")
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != 2:
                raise StatsError(f"line {line}: expected 2 fields")
            dates.append(row[0].strip())
            try:
                close = float(row[1])
            except ValueError:
                raise StatsError(f"line {line}: bad close {row[1]!r}") from None
            if not math.isfinite(close) or close <= 0:
                raise StatsError(f"line {line}: close must be positive and finite")
            closes.append(close)
    if not dates:
        raise StatsError(f"{path}: no data rows")
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise StatsError(f"{path}: dates must be strictly increasing")
    return tuple(dates), np.asarray(closes)


def squared_return_vol(returns: ReturnSeries) -> VolatilitySeries:
    """Baseline daily volatility: the squared return."""
    return VolatilitySeries(
        calendar=returns.calendar, values=returns.returns**2
    )


def align_h_rv(
    rolling: RollingHurst, rv: VolatilitySeries, fill_policy: str = "forward_fill"
) -> AlignedPairs:
    """Match rolling exponents to daily volatility by date.

    forward_fill holds each valid exponent for up to `rolling.step`
    volatility trading days, counted from the first volatility date at or
    after its stamp date, and never past the next entry. Flagged gap
    entries contribute nothing, so the days they would have covered are
    excluded rather than borrowed from an older estimate.
    """
    if fill_policy not in FILL_POLICIES:
        raise StatsError(f"unknown fill policy {fill_policy!r}")
    entries = rolling.entries
    if not entries:
        raise StatsError("rolling series has no entries")

    dates: list[str] = []
    hs: list[float] = []
    vols: list[float] = []
    if fill_policy == "step_dates_only":
        by_date = {e.end_date: e for e in entries}
        for i, d in enumerate(rv.calendar):
            e = by_date.get(d)
            if e is not None and e.ok:
                dates.append(d)
                hs.append(e.hurst)
                vols.append(float(rv.values[i]))
    else:
        ptr = -1
        active_i = -1  # rv index at which the current entry became active
        for i, d in enumerate(rv.calendar):
            while ptr + 1 < len(entries) and entries[ptr + 1].end_date <= d:
                ptr += 1
                active_i = i
            if ptr < 0:
                continue
            e = entries[ptr]
            if not e.ok:
                continue
            if i - active_i >= rolling.step:
                continue  # staleness cap: held for at most `step` days
            dates.append(d)
            hs.append(e.hurst)
            vols.append(float(rv.values[i]))
    if not dates:
        raise StatsError("no overlapping dates between rolling exponent and volatility")
    return AlignedPairs(
        dates=tuple(dates),
        hurst=np.asarray(hs),
        volatility=np.asarray(vols),
    )


def ols(y, x, robust: bool = False) -> OlsResult:
    """Closed-form simple regression of y on x with t-values.

    Classical (homoskedastic) standard errors by default; robust=True
    switches to the HC1 sandwich, which matters when y is a squared
    return. t-values use n-2 degrees of freedom either way.
    """
    yv = np.asarray(y, dtype=float)
    xv = np.asarray(x, dtype=float)
    if yv.shape != xv.shape or yv.ndim != 1:
        raise StatsError("y and x must be 1-d arrays of equal length")
    n = yv.size
    if n < 3:
        raise StatsError(f"need at least 3 observations, got {n}")
    if not (np.all(np.isfinite(yv)) and np.all(np.isfinite(xv))):
        raise StatsError("non-finite values in regression input")
    xm = xv.mean()
    dx = xv - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise StatsError("degenerate regressor: x is constant")
    ym = yv.mean()
    beta = float(dx @ (yv - ym)) / sxx
    alpha = ym - beta * xm
    resid = yv - alpha - beta * xv
    ssr = float(resid @ resid)
    sst = float((yv - ym) @ (yv - ym))
    dof = n - 2
    residual_variance = ssr / dof
    if sst > 0.0:
        r_squared = max(0.0, min(1.0, 1.0 - ssr / sst))
    else:
        r_squared = 1.0 if ssr < 1e-300 else 0.0

    if robust:
        u2 = resid * resid
        w_beta = dx / sxx
        w_alpha = 1.0 / n - xm * w_beta
        var_beta = float(n / dof) * float((w_beta * w_beta) @ u2)
        var_alpha = float(n / dof) * float((w_alpha * w_alpha) @ u2)
    else:
        var_beta = residual_variance / sxx
        var_alpha = residual_variance * (1.0 / n + xm * xm / sxx)

    def t_value(est, var):
        if var <= 0.0:
            return math.inf if est > 0 else (-math.inf if est < 0 else 0.0)
        return est / math.sqrt(var)

    return OlsResult(
        alpha=float(alpha),
        beta=float(beta),
        t_alpha=float(t_value(alpha, var_alpha)),
        t_beta=float(t_value(beta, var_beta)),
        r_squared=float(r_squared),
        n=int(n),
        residual_variance=float(residual_variance),
    )


def significance_stars(t_value: float, n: int) -> str:
    """Two-sided stars at the 10/5/1% levels with n-2 degrees of freedom."""
    if not math.isfinite(t_value):
        return "***"
    p = 2.0 * float(student_t.sf(abs(t_value), n - 2))
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def regression_table_rows(results: dict, robust_results: dict | None = None) -> list[dict]:
    """Flatten per-(group, flow) regressions into table rows with stars.

    `results` maps (group, flow) -> OlsResult. Rows come out in the
    mapping's iteration order.
    """
    rows = []
    for (group, flow), res in results.items():
        row = {
            "group": str(group),
            "flow": str(flow),
            "alpha": res.alpha,
            "t_alpha": res.t_alpha,
            "alpha_stars": significance_stars(res.t_alpha, res.n),
            "beta": res.beta,
            "t_beta": res.t_beta,
            "beta_stars": significance_stars(res.t_beta, res.n),
            "r_squared": res.r_squared,
            "n": res.n,
        }
        if robust_results is not None:
            rob = robust_results[(group, flow)]
            row["t_alpha_robust"] = rob.t_alpha
            row["t_beta_robust"] = rob.t_beta
        rows.append(row)
    return rows


def write_regression_table_csv(path, rows) -> None:
    if not rows:
        raise StatsError("no regression rows to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow(
                [
                    repr(float(v)) if isinstance(v, float) else str(v)
                    for v in (row[f] for f in fields)
                ]
            )
