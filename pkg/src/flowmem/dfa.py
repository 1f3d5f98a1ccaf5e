"""Detrended fluctuation analysis with polynomial detrending.

The estimator works on the integrated profile of a mean-adjusted series.
For each scale n the profile is split into floor(T/n) non-overlapping
leading blocks (trailing remainder discarded); a degree-m polynomial is
removed from every block and the fluctuation F(n) is the RMS of the
residuals, averaged block-wise. The scaling exponent is the OLS slope of
log10 F(n) on log10 n.

Block fits use an orthogonal (Legendre) basis on block coordinates mapped
to [-1, 1], which keeps the least-squares problem well conditioned at
large scales.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .errors import DfaError

# F(n) below this relative level is detrending round-off, not signal
_F_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class DfaConfig:
    """Scale-grid and detrending parameters, applied uniformly to all series.

    n_min=5 keeps several high-block-count scales in the fit; at rolling
    window lengths (~250) this halves the estimator dispersion relative to
    starting at 8, at the cost of a small positive bias (<0.02 at n=2^14).
    """

    detrend_order: int = 2
    n_min: int = 5
    n_max_fraction: float = 0.25
    n_scales: int = 20
    min_blocks: int = 4

    def __post_init__(self):
        if self.detrend_order < 0:
            raise DfaError(f"detrend_order must be >= 0, got {self.detrend_order}")
        if self.n_min < self.detrend_order + 2:
            raise DfaError(
                f"n_min={self.n_min} leaves order-{self.detrend_order} block fits underdetermined"
            )
        if not 0.0 < self.n_max_fraction <= 1.0:
            raise DfaError(f"n_max_fraction must be in (0, 1], got {self.n_max_fraction}")
        if self.n_scales < 4:
            raise DfaError(f"need at least 4 scales, got {self.n_scales}")
        if self.min_blocks < 2:
            raise DfaError(f"min_blocks must be >= 2, got {self.min_blocks}")


@dataclass(frozen=True)
class FluctuationCurve:
    """Sampled (scale, F) pairs; scales strictly increasing, F > 0."""

    scales: np.ndarray
    values: np.ndarray
    detrend_order: int
    series_length: int

    @property
    def points(self) -> tuple[tuple[int, float], ...]:
        return tuple((int(n), float(f)) for n, f in zip(self.scales, self.values))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "F"])
            for n, f in zip(self.scales, self.values):
                writer.writerow([int(n), repr(float(f))])


@dataclass(frozen=True)
class DfaFit:
    """Log-log scaling fit: exponent, intercept and OLS diagnostics."""

    hurst: float
    intercept: float
    slope_stderr: float
    r_squared: float
    scale_range: tuple[int, int]
    n_points_used: int
    detrend_order: int

    def to_json_dict(self) -> dict:
        return {
            "hurst": self.hurst,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "r_squared": self.r_squared,
            "scale_range": list(self.scale_range),
            "n_points_used": self.n_points_used,
            "detrend_order": self.detrend_order,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def profile(series) -> np.ndarray:
    """Integrated profile: cumulative sum of deviations from the mean.

    The final element is zero up to accumulation error.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DfaError("profile expects a 1-d series")
    if x.size < 2:
        raise DfaError(f"profile needs at least 2 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DfaError("non-finite values in input series")
    return np.cumsum(x - x.mean())


def make_scale_grid(length: int, config: DfaConfig = DfaConfig()) -> np.ndarray:
    """Log-spaced integer scales for a series of the given length.

    n_scales geometric targets between n_min and floor(length * n_max_fraction)
    are rounded to the nearest integer and deduplicated; scales whose block
    count floor(length/n) falls below min_blocks are discarded.
    """
    if length < config.n_min * config.min_blocks:
        raise DfaError(
            f"series too short for DFA: length {length} < "
            f"n_min*min_blocks = {config.n_min * config.min_blocks}"
        )
    n_max = max(int(length * config.n_max_fraction), config.n_min)
    targets = np.exp(
        np.linspace(np.log(config.n_min), np.log(n_max), config.n_scales)
    )
    scales = np.unique(np.rint(targets).astype(int))
    scales = scales[(scales >= config.n_min) & (length // scales >= config.min_blocks)]
    if scales.size == 0:
        raise DfaError("series too short for DFA: no admissible scales")
    return scales


def fluctuation(profile_values, scales, detrend_order: int = 2) -> FluctuationCurve:
    """Block-detrended fluctuation function F(n) over the given scales.

    Scales whose F(n) sits at the numerical floor (detrending annihilated
    the block content) are excluded from the curve, since log F would be
    meaningless there.
    """
    y = np.asarray(profile_values, dtype=float)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise DfaError("profile must be a finite 1-d array")
    m = int(detrend_order)
    if m < 0:
        raise DfaError(f"detrend order must be >= 0, got {m}")
    length = y.size
    floor = _F_FLOOR_REL * float(np.max(np.abs(y))) if length else 0.0

    kept_scales: list[int] = []
    kept_f: list[float] = []
    for n in np.asarray(scales, dtype=int):
        n = int(n)
        blocks = length // n
        if blocks < 1:
            raise DfaError(f"scale {n} exceeds series length {length}")
        if n < m + 2:
            raise DfaError(f"scale {n} too small for order-{m} detrending")
        # (n, blocks): one column per block, fixed layout for determinism
        seg = y[: blocks * n].reshape(blocks, n).T
        basis = legendre.legvander(np.linspace(-1.0, 1.0, n), m)
        q, r = np.linalg.qr(basis)
        if np.min(np.abs(np.diag(r))) < 1e-12 * np.max(np.abs(np.diag(r))):
            raise DfaError(f"singular block fit at scale {n}")
        resid = seg - q @ (q.T @ seg)
        f = float(np.sqrt(np.mean(resid * resid)))
        if f > floor:
            kept_scales.append(n)
            kept_f.append(f)
    return FluctuationCurve(
        scales=np.asarray(kept_scales, dtype=int),
        values=np.asarray(kept_f, dtype=float),
        detrend_order=m,
        series_length=length,
    )


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Closed-form simple OLS: (slope, intercept, slope_stderr, r_squared)."""
    n = x.size
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    dy = y - ym
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ssr = float(resid @ resid)
    sst = float(dy @ dy)
    if sst > 0.0:
        r_squared = max(0.0, min(1.0, 1.0 - ssr / sst))
    else:
        r_squared = 1.0
    dof = n - 2
    stderr = float(np.sqrt(max(ssr, 0.0) / dof / sxx)) if dof > 0 else 0.0
    return slope, float(intercept), stderr, r_squared


def fit_hurst(curve: FluctuationCurve, fit_range: tuple[int, int] | None = None) -> DfaFit:
    """OLS of log10 F(n) on log10 n over the admissible scales."""
    scales = curve.scales
    values = curve.values
    if fit_range is not None:
        lo, hi = fit_range
        mask = (scales >= lo) & (scales <= hi)
        scales = scales[mask]
        values = values[mask]
    if scales.size < 4:
        raise DfaError(f"insufficient scales for fit: {scales.size} < 4")
    slope, intercept, stderr, r_squared = _line_fit(
        np.log10(scales.astype(float)), np.log10(values)
    )
    return DfaFit(
        hurst=slope,
        intercept=intercept,
        slope_stderr=stderr,
        r_squared=r_squared,
        scale_range=(int(scales[0]), int(scales[-1])),
        n_points_used=int(scales.size),
        detrend_order=curve.detrend_order,
    )


def dfa_hurst(series, config: DfaConfig = DfaConfig()) -> DfaFit:
    """End-to-end estimate: profile -> scale grid -> F(n) -> log-log fit."""
    prof = profile(series)
    scales = make_scale_grid(prof.size, config)
    curve = fluctuation(prof, scales, config.detrend_order)
    return fit_hurst(curve)
