"""Regression metrics and the unpaired two-sample t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVarianceError,
    EmptyInputError,
    LengthMismatchError,
    StatsError,
    TooFewSamplesError,
    ZeroTruthError,
)


def _pair(y, yhat, min_len=1):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise LengthMismatchError(f"lengths differ: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise EmptyInputError("no observations")
    if y.size < min_len:
        raise TooFewSamplesError(f"need at least {min_len} observations, got {y.size}")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def percent_error(y, yhat) -> float:
    """Mean absolute percentage error, in percent."""
    y, yhat = _pair(y, yhat)
    if np.any(y == 0):
        raise ZeroTruthError("percent error undefined when a true value is 0")
    return float(np.mean(np.abs(y - yhat) / np.abs(y)) * 100.0)


def pearson_r(y, yhat) -> float:
    y, yhat = _pair(y, yhat, min_len=2)
    dy = y - y.mean()
    dh = yhat - yhat.mean()
    syy = float(dy @ dy)
    shh = float(dh @ dh)
    if syy == 0 or shh == 0:
        raise DegenerateVarianceError("correlation undefined for a constant series")
    r = float(dy @ dh) / math.sqrt(syy * shh)
    return max(-1.0, min(1.0, r))


def r2(y, yhat) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot (can be negative)."""
    y, yhat = _pair(y, yhat, min_len=2)
    dy = y - y.mean()
    ss_tot = float(dy @ dy)
    if ss_tot == 0:
        raise DegenerateVarianceError("R^2 undefined for constant truth")
    res = y - yhat
    return 1.0 - float(res @ res) / ss_tot


@dataclass(frozen=True)
class MetricSet:
    mae: float
    percent_error: float
    r: float
    r2: float


def compute_metrics(y, yhat, notes: list[str] | None = None) -> MetricSet:
    """All four metrics; undefined ones become NaN and are explained in ``notes``."""

    def attempt(fn, name):
        try:
            return fn(y, yhat)
        except StatsError as exc:
            if notes is not None:
                notes.append(f"{name}: {exc}")
            return float("nan")

    return MetricSet(
        mae=mae(y, yhat),
        percent_error=attempt(percent_error, "percent_error"),
        r=attempt(pearson_r, "r"),
        r2=attempt(r2, "r2"),
    )


# Student t distribution via the regularized incomplete beta function


def _betacf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise StatsError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` (real) degrees of freedom."""
    if math.isnan(t) or math.isnan(df):
        return float("nan")
    if math.isinf(t):
        return 0.0
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float


def ttest_unpaired(a, b, equal_var: bool = False) -> TTestResult:
    """Two-tailed unpaired t-test; Welch form unless ``equal_var``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise TooFewSamplesError(f"each sample needs >= 2 values (got {na}, {nb})")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if equal_var:
        df = float(na + nb - 2)
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = sp2 * (1.0 / na + 1.0 / nb)
    else:
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        denom = qa * qa / (na - 1) + qb * qb / (nb - 1)
        df = se2 * se2 / denom if denom > 0 else float(na + nb - 2)
    diff = ma - mb
    if se2 == 0:
        if diff == 0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.copysign(math.inf, diff), df, 0.0)
    t = diff / math.sqrt(se2)
    return TTestResult(t, df, t_two_sided_p(t, df))
