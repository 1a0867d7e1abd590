"""Synthetic benchmark generator: a sparse-smooth coefficient profile.

The ground truth mixes three source shapes on a 1-based index axis j:
a Gaussian bell centered at 50, a square plateau just below 105, and an
isolated point at 150. Designs and noise are standard normal, so the
signal-to-noise ratio follows directly from the truth's squared norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Problem

_POINT_INDEX = 150  # 1-based position of the isolated source


@dataclass(frozen=True)
class SimTruth:
    beta_true: np.ndarray
    support: np.ndarray  # boolean, beta_true != 0

    @property
    def p(self) -> int:
        return self.beta_true.shape[0]


@dataclass(frozen=True)
class SimConfig:
    n: int
    seed: int
    p: int = 200
    noise_sigma: float = 1.0

    def __post_init__(self):
        if self.p < _POINT_INDEX + 1:
            raise ValueError(f"p must be >= {_POINT_INDEX + 1} to fit the point source")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def make_truth(p: int = 200) -> SimTruth:
    """Coefficients on 1-based positions j = 1..p.

    bell:   exp(-0.015 (j - 50)^2)  for 30 < j < 70   (strict)
    square: 1                       for 95 < j < 105  (strict)
    point:  1                       at j = 150
    """
    if p < _POINT_INDEX + 1:
        raise ValueError(f"p must be >= {_POINT_INDEX + 1} to fit the point source")
    j = np.arange(1, p + 1)
    beta = np.zeros(p)
    bell = (j > 30) & (j < 70)
    beta[bell] = np.exp(-0.015 * (j[bell] - 50.0) ** 2)
    beta[(j > 95) & (j < 105)] = 1.0
    beta[j == _POINT_INDEX] = 1.0
    return SimTruth(beta_true=beta, support=beta != 0)


def generate(config: SimConfig, truth: SimTruth | None = None):
    """Sample one problem: X and noise i.i.d. normal, y = X beta + noise.

    Reproducible from the seed alone (PCG64 stream); callers running
    repetitions use one seed per repetition index.
    """
    if truth is None:
        truth = make_truth(config.p)
    if truth.p != config.p:
        raise ValueError(f"truth has p={truth.p} but config says p={config.p}")
    rng = np.random.default_rng(config.seed)
    X = rng.standard_normal((config.n, config.p))
    noise = config.noise_sigma * rng.standard_normal(config.n)
    return Problem(X, X @ truth.beta_true + noise), truth


def theoretical_snr(truth: SimTruth, noise_sigma: float = 1.0) -> float:
    """10 log10(||beta||^2 / sigma^2) in dB.

    For a standard-normal design row x, Var(x . beta) = ||beta||^2, so the
    squared norm of the truth is the per-observation signal power.
    """
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be > 0")
    power = float(truth.beta_true @ truth.beta_true)
    return 10.0 * np.log10(power / noise_sigma**2)


def empirical_snr(problem: Problem, truth: SimTruth) -> float:
    """10 log10(||X beta||^2 / ||y - X beta||^2) for one sampled problem."""
    signal = problem.X @ truth.beta_true
    noise = problem.y - signal
    return 10.0 * np.log10(float(signal @ signal) / float(noise @ noise))
