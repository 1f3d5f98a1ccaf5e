"""Seeded synthetic series generators used as correctness oracles.

Fractional Gaussian noise is produced by circulant embedding of the exact
autocovariance (O(n log n)); when the embedding is not nonnegative definite
(small n combined with H near 1) generation falls back to the sequential
Durbin-Levinson recursion, which is exact for any length at O(n^2).

All draws come from a single named generator (`RNG_NAME`) so that outputs
are bit-reproducible from (kind, params, seed) alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SynthError

RNG_NAME = "numpy.random.PCG64"
RNG_VERSION = 1

GENERATOR_KINDS = ("fgn", "fbm_increments_cumsum", "iid_gaussian", "pareto")


def _rng(seed) -> np.random.Generator:
    """Deterministic generator from an integer seed or a SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def fgn_autocovariance(hurst: float, lags) -> np.ndarray:
    """Exact autocovariance of unit-variance fractional Gaussian noise.

    gamma(k) = 0.5 * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})
    """
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def fgn(hurst: float, n: int, seed) -> np.ndarray:
    """Fractional Gaussian noise with exact covariance, unit variance.

    Parameters
    ----------
    hurst : float in (0, 1)
    n : int >= 2
        Any length is accepted; the embedding size is 2n.
    seed : int or numpy SeedSequence
    """
    if not 0.0 < hurst < 1.0:
        raise SynthError(f"hurst must be in (0, 1), got {hurst}")
    if n < 2:
        raise SynthError(f"need n >= 2, got {n}")
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    # first row of the 2n circulant: gamma(0..n) then mirrored gamma(n-1..1)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    rng = _rng(seed)
    if eig.min() < -1e-10 * eig.max():
        return _durbin_levinson_fgn(hurst, n, rng)
    eig = np.clip(eig, 0.0, None)

    # Hermitian-symmetric complex normals; fixed draw layout so the output
    # is a pure function of the seed.
    m = 2 * n
    z = rng.standard_normal(m)
    w = np.empty(m, dtype=complex)
    w[0] = np.sqrt(eig[0] / m) * z[0]
    w[n] = np.sqrt(eig[n] / m) * z[1]
    w[1:n] = np.sqrt(eig[1:n] / (2.0 * m)) * (z[2 : n + 1] + 1j * z[n + 1 :])
    w[n + 1 :] = np.conj(w[1:n][::-1])
    return np.fft.fft(w)[:n].real


def _durbin_levinson_fgn(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact sequential simulation; quadratic in n, used as fallback only."""
    gamma = fgn_autocovariance(hurst, np.arange(n))
    noise = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = noise[0]
    phi = np.zeros(n)  # phi[:t] holds the order-t predictor coefficients
    v = 1.0  # innovation variance, gamma(0) = 1
    for t in range(1, n):
        k = (gamma[t] - phi[: t - 1] @ gamma[t - 1 : 0 : -1]) / v
        phi[: t - 1] -= k * phi[: t - 1][::-1]
        phi[t - 1] = k
        v *= 1.0 - k * k
        out[t] = phi[:t] @ out[t - 1 :: -1][:t] + np.sqrt(v) * noise[t]
    return out


def cumsum(series) -> np.ndarray:
    """Prefix sum; turns stationary increments into a random-walk-like path."""
    return np.cumsum(np.asarray(series, dtype=float))


def pareto(alpha: float, n: int, seed) -> np.ndarray:
    """Pareto(alpha) sample on [1, inf) by inverse-CDF transform."""
    if alpha <= 0:
        raise SynthError(f"alpha must be positive, got {alpha}")
    if n < 1:
        raise SynthError(f"need n >= 1, got {n}")
    u = _rng(seed).random(n)
    # 1 - u lies in (0, 1], so the power never overflows at u ~ 1
    return (1.0 - u) ** (-1.0 / alpha)


def iid_gaussian(n: int, seed) -> np.ndarray:
    """Standard normal draws."""
    if n < 1:
        raise SynthError(f"need n >= 1, got {n}")
    return _rng(seed).standard_normal(n)


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative request for one synthetic series."""

    kind: str
    n: int
    seed: int
    hurst: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise SynthError(f"unknown generator kind {self.kind!r}")
        if self.kind in ("fgn", "fbm_increments_cumsum"):
            if self.hurst is None:
                raise SynthError(f"kind {self.kind!r} requires hurst")
        elif self.kind == "pareto":
            if self.alpha is None:
                raise SynthError("kind 'pareto' requires alpha")

    def metadata(self) -> dict:
        meta = {
            "kind": self.kind,
            "n": self.n,
            "seed": self.seed,
            "rng": RNG_NAME,
            "rng_version": RNG_VERSION,
        }
        if self.hurst is not None:
            meta["hurst"] = self.hurst
        if self.alpha is not None:
            meta["alpha"] = self.alpha
        return meta


def generate(spec: GeneratorSpec) -> np.ndarray:
    """Materialize a GeneratorSpec; bit-identical for identical specs."""
    if spec.kind == "fgn":
        return fgn(spec.hurst, spec.n, spec.seed)
    if spec.kind == "fbm_increments_cumsum":
        return cumsum(fgn(spec.hurst, spec.n, spec.seed))
    if spec.kind == "iid_gaussian":
        return iid_gaussian(spec.n, spec.seed)
    if spec.kind == "pareto":
        return pareto(spec.alpha, spec.n, spec.seed)
    raise SynthError(f"unknown generator kind {spec.kind!r}")
