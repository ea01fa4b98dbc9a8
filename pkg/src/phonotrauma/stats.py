"""Effect sizes, hypothesis tests, and the power-law learning-curve fit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

from .errors import (
    ConstantInput,
    DegenerateInput,
    DegenerateVariance,
    NotReached,
    TooFewSamples,
    ZeroPooledStd,
)

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _as_sample(x, min_n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < min_n:
        raise TooFewSamples(f"{what} needs >= {min_n} values, got {x.size}")
    return x


def cohens_d(x, y) -> float:
    """Standardized mean difference ``(mean(x) - mean(y)) / pooled_std``."""
    x = _as_sample(x, 2, "cohens_d")
    y = _as_sample(y, 2, "cohens_d")
    n1, n2 = len(x), len(y)
    pooled = np.sqrt(((n1 - 1) * x.var(ddof=1) + (n2 - 1) * y.var(ddof=1)) / (n1 + n2 - 2))
    if pooled == 0:
        raise ZeroPooledStd("both samples are constant")
    return float((x.mean() - y.mean()) / pooled)


def t_sf(t: float, df: float) -> float:
    """Upper-tail probability P(T > t) of Student's t with ``df`` degrees of freedom."""
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return float(tail if t >= 0 else 1.0 - tail)


def welch_t_test(x, y, alternative: str = "two-sided") -> tuple[float, float]:
    """Welch's unequal-variance t-test.

    ``alternative`` is ``"two-sided"``, ``"greater"`` (mean(x) > mean(y)) or
    ``"less"``. Returns ``(t, p)``.
    """
    x = _as_sample(x, 2, "welch_t_test")
    y = _as_sample(y, 2, "welch_t_test")
    v1, v2 = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
    se2 = v1 + v2
    if se2 == 0:
        raise DegenerateVariance("both samples have zero variance")
    t = float((x.mean() - y.mean()) / np.sqrt(se2))
    df = se2**2 / (v1**2 / (len(x) - 1) + v2**2 / (len(y) - 1))
    if alternative == "two-sided":
        p = min(1.0, 2.0 * t_sf(abs(t), df))
    elif alternative == "greater":
        p = t_sf(t, df)
    elif alternative == "less":
        p = t_sf(-t, df)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return t, p


def spearman_rho(x, y) -> tuple[float, float]:
    """Spearman rank correlation with average ranks for ties.

    The p-value uses ``t = rho*sqrt((n-2)/(1-rho^2))`` on n-2 degrees of
    freedom, which is approximate for small n.
    """
    x = _as_sample(x, 3, "spearman_rho")
    y = _as_sample(y, 3, "spearman_rho")
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx @ rx) * (ry @ ry))
    if denom == 0:
        raise ConstantInput("spearman_rho of a constant sequence")
    rho = float(np.clip((rx @ ry) / denom, -1.0, 1.0))
    n = len(x)
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, min(1.0, 2.0 * t_sf(abs(t), n - 2))


# -- power law ---------------------------------------------------------------

@dataclass(frozen=True)
class PowerFit:
    """``y = a * x**b + c``."""

    a: float
    b: float
    c: float
    sse: float

    def predict(self, x):
        return self.a * np.power(np.asarray(x, dtype=float), self.b) + self.c

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "sse": self.sse}


def _profile(x, y, b):
    """Least-squares (a, c) for fixed exponent b, and the resulting SSE."""
    basis = np.column_stack([np.power(x, b), np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    return coef[0], coef[1], float(resid @ resid)


def fit_power_law(x, y, bracket=(-6.0, -0.01), grid: int = 400, tol: float = 1e-12) -> PowerFit:
    """Least-squares fit of ``y = a*x^b + c``.

    The exponent is profiled out: for each b the model is linear in (a, c).
    A grid scan over ``bracket`` locates the best b, then golden-section search
    refines it between the neighbouring grid points.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    if len(np.unique(x)) < 3:
        raise DegenerateInput("power fit needs at least 3 distinct x values")
    if np.any(x <= 0):
        raise DegenerateInput("power fit needs positive x")
    lo, hi = bracket
    if np.ptp(y) == 0:
        b = -1.0 if lo <= -1.0 <= hi else 0.5 * (lo + hi)
        return PowerFit(0.0, b, float(y.mean()), 0.0)

    bs = np.linspace(lo, hi, grid)
    sses = np.array([_profile(x, y, b)[2] for b in bs])
    i = int(np.argmin(sses))
    left, right = bs[max(i - 1, 0)], bs[min(i + 1, grid - 1)]

    def sse(b):
        return _profile(x, y, b)[2]

    # golden-section search on [left, right]
    c1 = right - _INV_PHI * (right - left)
    c2 = left + _INV_PHI * (right - left)
    f1, f2 = sse(c1), sse(c2)
    while right - left > tol * max(1.0, abs(left)):
        if f1 <= f2:
            right, c2, f2 = c2, c1, f1
            c1 = right - _INV_PHI * (right - left)
            f1 = sse(c1)
        else:
            left, c1, f1 = c1, c2, f2
            c2 = left + _INV_PHI * (right - left)
            f2 = sse(c2)
    candidates = [(sses[i], bs[i]), (f1, c1), (f2, c2)]
    _, b = min(candidates)
    a, c, s = _profile(x, y, b)
    return PowerFit(float(a), float(b), float(c), s)


def marginal_gain(fit: PowerFit, x: int) -> float:
    """Predicted change from ``x`` to ``x + 1`` days."""
    return float(fit.predict(x + 1) - fit.predict(x))


def threshold_day(fit: PowerFit, threshold_pp: float, horizon: int = 365) -> int:
    """Smallest day d >= 1 whose gain to d+1 falls below ``threshold_pp``."""
    for d in range(1, horizon + 1):
        if marginal_gain(fit, d) < threshold_pp:
            return d
    raise NotReached(f"gain stays >= {threshold_pp} through day {horizon}")
