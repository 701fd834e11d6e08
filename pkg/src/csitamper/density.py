"""Gaussian kernel density estimates of anomaly scores and their overlap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import DomainError, EmptyInputError

DEFAULT_BANDWIDTH = "auto"
GRID_POINTS = 2048
TAIL_BANDWIDTHS = 5.0
_MIN_BANDWIDTH = 1e-6
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class AnomalyPdf:
    """Gaussian KDE ``f(a) = 1/(N h) * sum_j phi((a - a_j) / h)``.

    ``auto_bandwidth`` records whether ``bandwidth`` came from Scott's rule,
    so a second estimate can be built under the same policy.
    """

    samples: np.ndarray
    bandwidth: float
    auto_bandwidth: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if samples.size == 0:
            raise EmptyInputError("a density needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise DomainError("density samples must be finite")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    def __call__(self, grid):
        return eval_pdf(self, grid)

    def __eq__(self, other):
        if not isinstance(other, AnomalyPdf):
            return NotImplemented
        return (
            self.bandwidth == other.bandwidth
            and self.auto_bandwidth == other.auto_bandwidth
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


def scott_bandwidth(samples) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    sigma = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    return max(sigma, _MIN_BANDWIDTH) * samples.size ** (-0.2)


def fit_kde(scores, bandwidth=DEFAULT_BANDWIDTH) -> AnomalyPdf:
    """Fit a Gaussian KDE; ``bandwidth`` is a positive float or ``"auto"`` (Scott)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise EmptyInputError("cannot fit a density to no scores")
    if isinstance(bandwidth, str):
        if bandwidth.lower() not in ("auto", "scott"):
            raise DomainError(f"unknown bandwidth policy {bandwidth!r}")
        return AnomalyPdf(scores, scott_bandwidth(scores), auto_bandwidth=True)
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    return AnomalyPdf(scores, float(bandwidth))


def refit_like(pdf: AnomalyPdf, scores) -> AnomalyPdf:
    """Estimate a density of ``scores`` under ``pdf``'s bandwidth policy."""
    return fit_kde(scores, "auto" if pdf.auto_bandwidth else pdf.bandwidth)


def eval_pdf(pdf: AnomalyPdf, grid, chunk=256) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise EmptyInputError("evaluation grid is empty")
    flat = grid.ravel()
    h = pdf.bandwidth
    out = np.empty_like(flat)
    # chunk over grid points to bound the (chunk, N) temporary
    for start in range(0, flat.size, chunk):
        u = (flat[start:start + chunk, np.newaxis] - pdf.samples[np.newaxis, :]) / h
        out[start:start + chunk] = np.exp(-0.5 * u * u).sum(axis=1)
    out *= _INV_SQRT_2PI / (pdf.samples.size * h)
    return out.reshape(grid.shape)


def overlap_grid(p: AnomalyPdf, q: AnomalyPdf, n_points=GRID_POINTS) -> np.ndarray:
    h = max(p.bandwidth, q.bandwidth)
    lo = min(p.samples.min(), q.samples.min()) - TAIL_BANDWIDTHS * h
    hi = max(p.samples.max(), q.samples.max()) + TAIL_BANDWIDTHS * h
    return np.linspace(lo, hi, n_points)


def overlapping_index(p: AnomalyPdf, q: AnomalyPdf, n_points=GRID_POINTS, clamp=True) -> float:
    """Integral of ``min(f_p, f_q)`` by the trapezoidal rule, in [0, 1]."""
    grid = overlap_grid(p, q, n_points)
    eta = float(trapezoid(np.minimum(eval_pdf(p, grid), eval_pdf(q, grid)), grid))
    return min(max(eta, 0.0), 1.0) if clamp else eta
