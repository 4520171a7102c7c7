"""Statistical verdict helpers for the Monte Carlo experiments.

Conventions are pre-registered and never tuned: moment checks pass within
three standard errors computed from the same sample; Kolmogorov-Smirnov
checks pass at significance 0.01 after a per-report Bonferroni correction
(a family of m tests fails only if some raw p-value drops below 0.01/m).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps


@dataclass
class StatCheck:
    """A moment estimate checked against its target at 3 standard errors."""

    name: str
    value: float
    target: float
    se: float
    n: int

    @property
    def tolerance(self) -> float:
        return 3.0 * self.se

    @property
    def z(self) -> float:
        return (self.value - self.target) / self.se if self.se > 0 else np.inf

    @property
    def passed(self) -> bool:
        return abs(self.value - self.target) <= self.tolerance

    def as_dict(self) -> dict:
        return {"criterion": self.name, "value": self.value,
                "target": self.target, "tolerance": self.tolerance,
                "se": self.se, "n": self.n, "pass": bool(self.passed)}


@dataclass
class KsCheck:
    name: str
    statistic: float
    p_value: float
    n: int
    corrected_p: float = float("nan")
    passed: bool = False

    def as_dict(self) -> dict:
        # tolerance is None: KS verdicts are significance-based, not banded
        return {"criterion": self.name, "value": self.statistic,
                "target": 0.0, "tolerance": None,
                "p_value": self.p_value,
                "corrected_p": None if np.isnan(self.corrected_p)
                else self.corrected_p,
                "n": self.n, "pass": bool(self.passed)}


def mean_check(name: str, samples: np.ndarray, target: float) -> StatCheck:
    """z-test of a sample mean against its target."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    se = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else np.inf
    return StatCheck(name, float(np.mean(samples)), float(target), se, n)


def correlation_check(name: str, x: np.ndarray, y: np.ndarray) -> StatCheck:
    """Sample correlation tested against zero (se = 1/sqrt(n) under the null)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    r = float(np.corrcoef(x, y)[0, 1])
    return StatCheck(name, r, 0.0, 1.0 / np.sqrt(n), n)


def slope_check(name: str, x: np.ndarray, y: np.ndarray,
                target: float) -> StatCheck:
    """Through-origin regression slope of y on x with a sandwich variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sxx = float(np.sum(x * x))
    b = float(np.sum(x * y)) / sxx
    resid = y - b * x
    se = float(np.sqrt(np.sum((resid * x) ** 2)) / sxx)
    return StatCheck(name, b, float(target), se, x.size)


def ks_uniform(name: str, u: np.ndarray) -> KsCheck:
    """One-sample KS of probability-integral-transformed data vs uniform."""
    u = np.asarray(u, dtype=float)
    res = _sps.kstest(u, "uniform")
    return KsCheck(name, float(res.statistic), float(res.pvalue), u.size)


def ks_two_sample(name: str, a: np.ndarray, b: np.ndarray) -> KsCheck:
    res = _sps.ks_2samp(np.asarray(a, float), np.asarray(b, float),
                        method="asymp")
    return KsCheck(name, float(res.statistic), float(res.pvalue),
                   min(len(a), len(b)))


def apply_bonferroni(checks: list[KsCheck], alpha: float = 0.01) -> None:
    """Fill corrected p-values and verdicts for a family of KS tests."""
    m = len(checks)
    for c in checks:
        c.corrected_p = min(1.0, c.p_value * m)
        c.passed = c.corrected_p >= alpha
