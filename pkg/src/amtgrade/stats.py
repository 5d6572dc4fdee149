"""Group summaries, Welch's t-test, Cohen's d, Bonferroni and two-way ANOVA.

The t and F distributions are computed here from the regularized incomplete
beta function, evaluated by continued fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterable, Sequence

import numpy as np


class DegenerateInputError(ValueError):
    """Inputs for which the statistic is undefined."""


# --------------------------------------------------------------------------
# special functions

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 20_000


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast only on the near side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def t_sf_two_sided(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail P(F > f) of the F(d1, d2) distribution."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


# --------------------------------------------------------------------------
# two-sample comparisons


@dataclass(frozen=True)
class GroupSummary:
    n: int
    mean: float
    sd: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a group needs at least two samples")
        if self.sd < 0:
            raise ValueError("standard deviation must be non-negative")

    @property
    def var(self) -> float:
        return self.sd * self.sd


def summarize(samples: Sequence[float]) -> GroupSummary:
    xs = [float(x) for x in samples]
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two samples")
    mean = math.fsum(xs) / n
    ss = math.fsum((x - mean) ** 2 for x in xs)
    return GroupSummary(n, mean, math.sqrt(ss / (n - 1)))


@dataclass(frozen=True)
class TestResult:
    t: float
    df: float
    p: float
    d: float

    __test__ = False  # not a pytest class


def cohens_d(g1: GroupSummary, g2: GroupSummary) -> float:
    dof = g1.n + g2.n - 2
    if dof <= 0:
        raise ValueError("need n1 + n2 > 2")
    pooled = math.sqrt(((g1.n - 1) * g1.var + (g2.n - 1) * g2.var) / dof)
    if pooled == 0:
        raise DegenerateInputError("pooled standard deviation is zero")
    return (g1.mean - g2.mean) / pooled


def welch_t(g1: GroupSummary, g2: GroupSummary) -> TestResult:
    """Welch's unequal-variance t-test from summary statistics, two-sided."""
    if g1.sd == 0 and g2.sd == 0:
        raise DegenerateInputError("both groups have zero variance")
    v1, v2 = g1.var / g1.n, g2.var / g2.n
    se2 = v1 + v2
    t = (g1.mean - g2.mean) / math.sqrt(se2)
    df = se2 * se2 / (v1 * v1 / (g1.n - 1) + v2 * v2 / (g2.n - 1))
    p = min(1.0, t_sf_two_sided(t, df))
    return TestResult(t, df, p, cohens_d(g1, g2))


def bonferroni(p: float, k: int) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if k < 1:
        raise ValueError("k must be at least 1")
    return min(1.0, k * p)


# --------------------------------------------------------------------------
# two-way ANOVA


@dataclass(frozen=True)
class AnovaRow:
    ss: float
    df: int
    f: float | None
    p: float | None

    @property
    def ms(self) -> float:
        return self.ss / self.df


@dataclass(frozen=True)
class AnovaTable:
    a: AnovaRow
    b: AnovaRow
    ab: AnovaRow
    residual: AnovaRow
    names: tuple[str, str] = ("A", "B")
    ss_type: int = 2
    levels: tuple[tuple, tuple] = field(default=((), ()), compare=False)

    def rows(self) -> list[tuple[str, AnovaRow]]:
        a, b = self.names
        return [(a, self.a), (b, self.b), (f"{a}:{b}", self.ab), ("Residual", self.residual)]

    def to_json(self) -> dict:
        return {
            "ss_type": self.ss_type,
            "rows": [{"source": name, "ss": r.ss, "df": r.df, "f": r.f, "p": r.p} for name, r in self.rows()],
        }


def _dummies(codes: np.ndarray, k: int) -> np.ndarray:
    """Treatment coding: one column per non-reference level."""
    return (codes[:, None] == np.arange(1, k)[None, :]).astype(float)


def _rss(y: np.ndarray, *blocks: np.ndarray) -> float:
    X = np.column_stack([np.ones(len(y)), *blocks])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid)


def two_way_anova(records: Iterable[tuple[Hashable, Hashable, float]],
                  names: tuple[str, str] = ("A", "B"), ss_type: int = 2) -> AnovaTable:
    """Two-way ANOVA with interaction.

    ``ss_type`` 2 (default) gives each main effect adjusted for the other;
    ``ss_type`` 1 is sequential, A first.  They agree for balanced designs.
    """
    if ss_type not in (1, 2):
        raise ValueError("ss_type must be 1 or 2")
    rows = list(records)
    levels_a = sorted({r[0] for r in rows}, key=repr)
    levels_b = sorted({r[1] for r in rows}, key=repr)
    if len(levels_a) < 2 or len(levels_b) < 2:
        raise ValueError("each factor needs at least two levels")
    ia = {v: i for i, v in enumerate(levels_a)}
    ib = {v: i for i, v in enumerate(levels_b)}
    ca = np.array([ia[r[0]] for r in rows])
    cb = np.array([ib[r[1]] for r in rows])
    y = np.array([float(r[2]) for r in rows])
    ka, kb = len(levels_a), len(levels_b)
    counts = np.zeros((ka, kb), dtype=int)
    np.add.at(counts, (ca, cb), 1)
    if (counts == 0).any():
        empty = [(levels_a[i], levels_b[j]) for i, j in product(range(ka), range(kb)) if counts[i, j] == 0]
        raise ValueError(f"empty cells: {empty}")
    n = len(y)
    df_res = n - ka * kb
    if df_res <= 0:
        raise ValueError("no residual degrees of freedom")

    A, B = _dummies(ca, ka), _dummies(cb, kb)
    AB = np.column_stack([A[:, i] * B[:, j] for i in range(ka - 1) for j in range(kb - 1)])
    rss_full = _rss(y, A, B, AB)
    rss_ab = _rss(y, A, B)
    rss_0 = _rss(y)
    if ss_type == 2:
        ss_a = _rss(y, B) - rss_ab
        ss_b = _rss(y, A) - rss_ab
    else:
        ss_a = rss_0 - _rss(y, A)
        ss_b = _rss(y, A) - rss_ab
    ss_ab = rss_ab - rss_full
    ms_res = rss_full / df_res

    def row(ss, df):
        ss = max(ss, 0.0)
        if ms_res == 0:
            return AnovaRow(ss, df, None, None)
        f = (ss / df) / ms_res
        return AnovaRow(ss, df, f, f_sf(f, df, df_res))

    return AnovaTable(
        a=row(ss_a, ka - 1),
        b=row(ss_b, kb - 1),
        ab=row(ss_ab, (ka - 1) * (kb - 1)),
        residual=AnovaRow(rss_full, df_res, None, None),
        names=names,
        ss_type=ss_type,
        levels=(tuple(levels_a), tuple(levels_b)),
    )
