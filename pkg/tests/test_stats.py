import math
import random

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amtgrade.stats import (
    DegenerateInputError, GroupSummary, bonferroni, cohens_d, f_sf, reg_inc_beta, summarize,
    t_cdf, two_way_anova, welch_t,
)

from oracles import two_pass_mean_sd

mpmath.mp.dps = 40

MIROS_1, MIROS_3 = GroupSummary(6, 0.7193, 0.2103), GroupSummary(46, 0.4367, 0.2012)
MOE_1, MOE_3 = GroupSummary(6, 0.7594, 0.2304), GroupSummary(46, 0.3918, 0.1471)


def betainc_oracle(a, b, x):
    return float(mpmath.betainc(a, b, 0, x, regularized=True))


def test_summarize():
    g = summarize([0, 1])
    assert (g.n, g.mean) == (2, 0.5) and g.sd == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert summarize([3.2] * 5).sd == 0
    with pytest.raises(ValueError):
        summarize([1.0])


def test_summarize_matches_two_pass():
    rng = random.Random(1)
    for _ in range(20):
        xs = [rng.gauss(3, 2) for _ in range(rng.randint(2, 60))]
        g = summarize(xs)
        mean, sd = two_pass_mean_sd(xs)
        assert g.mean == pytest.approx(mean, abs=1e-12) and g.sd == pytest.approx(sd, abs=1e-12)


def test_welch_reported_values():
    r = welch_t(MIROS_1, MIROS_3)
    assert r.t == pytest.approx(3.11, abs=0.01)
    assert r.p == pytest.approx(0.0197, abs=0.002)
    assert r.d == pytest.approx(1.40, abs=0.01)
    r = welch_t(MOE_1, MOE_3)
    assert r.t == pytest.approx(3.81, abs=0.01)
    assert r.p == pytest.approx(0.0103, abs=0.002)
    assert r.d == pytest.approx(2.34, abs=0.01)


def test_welch_against_mpmath_integral():
    # two-sided p by direct quadrature of the Student-t density
    r = welch_t(MIROS_1, MIROS_3)
    nu = mpmath.mpf(r.df)
    dens = lambda x: mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2)) \
        * (1 + x * x / nu) ** (-(nu + 1) / 2)
    p = 2 * mpmath.quad(dens, [abs(r.t), mpmath.inf])
    assert r.p == pytest.approx(float(p), abs=1e-10)


def test_welch_identical_and_antisymmetric():
    g = GroupSummary(10, 1.0, 0.5)
    r = welch_t(g, g)
    assert r.t == 0 and r.p == pytest.approx(1.0, abs=1e-12)
    a, b = welch_t(MIROS_1, MIROS_3), welch_t(MIROS_3, MIROS_1)
    assert b.t == -a.t and b.df == a.df and b.p == pytest.approx(a.p, abs=1e-14)


def test_welch_df_bound():
    for g1, g2 in [(MIROS_1, MIROS_3), (MOE_1, MOE_3), (GroupSummary(5, 0, 1), GroupSummary(9, 1, 3))]:
        assert 0 < welch_t(g1, g2).df <= g1.n + g2.n - 2


def test_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        welch_t(GroupSummary(3, 1.0, 0.0), GroupSummary(3, 1.0, 0.0))
    with pytest.raises(DegenerateInputError):
        cohens_d(GroupSummary(3, 1.0, 0.0), GroupSummary(3, 2.0, 0.0))
    with pytest.raises(ValueError):
        GroupSummary(1, 0.0, 1.0)


def test_cohens_d():
    assert cohens_d(MIROS_1, MIROS_3) == pytest.approx(1.40, abs=0.01)
    assert cohens_d(MOE_1, MOE_3) == pytest.approx(2.34, abs=0.01)
    assert cohens_d(GroupSummary(4, 2.0, 1.0), GroupSummary(7, 2.0, 3.0)) == 0


@settings(max_examples=50)
@given(st.floats(-5, 5).filter(lambda a: abs(a) > 0.01), st.floats(-10, 10), st.integers(0, 2**31))
def test_cohens_d_affine_invariance(alpha, beta, seed):
    rng = random.Random(seed)
    x = [rng.gauss(0, 1) for _ in range(8)]
    y = [rng.gauss(1, 2) for _ in range(11)]
    d = cohens_d(summarize(x), summarize(y))
    d2 = cohens_d(summarize([alpha * v + beta for v in x]), summarize([alpha * v + beta for v in y]))
    assert d2 == pytest.approx(d if alpha > 0 else -d, rel=1e-9, abs=1e-12)


def test_bonferroni():
    assert bonferroni(0.0197, 3) == pytest.approx(0.059, abs=0.002)
    assert bonferroni(0.0103, 3) == pytest.approx(0.031, abs=0.002)
    assert bonferroni(0.9, 3) == 1.0
    ps = [0.0, 0.01, 0.2, 0.5, 1.0]
    for k in (1, 2, 5):
        adj = [bonferroni(p, k) for p in ps]
        assert adj == sorted(adj) and max(adj) <= 1
        assert all(bonferroni(p, k + 1) >= bonferroni(p, k) for p in ps)
    with pytest.raises(ValueError):
        bonferroni(0.5, 0)


# -- special functions

def test_reg_inc_beta_anchors():
    assert reg_inc_beta(1, 1, 0.3) == pytest.approx(0.3, abs=1e-14)
    for a in (0.3, 1, 2.5, 10, 150):
        assert reg_inc_beta(a, a, 0.5) == pytest.approx(0.5, abs=1e-12)
    # I_x(2, 3) = sum_{j=2..4} C(4, j) x^j (1 - x)^(4 - j)
    x = 0.4
    poly = sum(math.comb(4, j) * x**j * (1 - x) ** (4 - j) for j in range(2, 5))
    assert poly == pytest.approx(0.5248, abs=1e-12)
    assert reg_inc_beta(2, 3, 0.4) == pytest.approx(poly, abs=1e-12)
    assert reg_inc_beta(2, 3, 0.0) == 0.0 and reg_inc_beta(2, 3, 1.0) == 1.0
    with pytest.raises(ValueError):
        reg_inc_beta(0, 1, 0.5)
    with pytest.raises(ValueError):
        reg_inc_beta(1, 1, 1.5)


@pytest.mark.parametrize("a, b", [(0.5, 0.5), (0.5, 3.1), (2, 3), (3.13, 0.5), (12, 40), (110, 2.5)])
def test_reg_inc_beta_against_mpmath(a, b):
    for x in np.linspace(0.001, 0.999, 15):
        assert reg_inc_beta(a, b, x) == pytest.approx(betainc_oracle(a, b, x), abs=1e-12)


def test_t_cdf_properties():
    ts = np.linspace(-8, 8, 100)
    for df in (1, 2.5, 6.26, 30, 219):
        assert t_cdf(0.0, df) == pytest.approx(0.5, abs=1e-15)
        values = [t_cdf(t, df) for t in ts]
        assert all(b >= a for a, b in zip(values, values[1:]))
        for t in ts:
            assert t_cdf(t, df) + t_cdf(-t, df) == pytest.approx(1.0, abs=1e-10)


def test_f_sf_against_mpmath():
    for f, d1, d2 in [(22.76, 2, 219), (0.65, 4, 219), (1.0, 3, 7), (3.5, 1, 10)]:
        x = d2 / (d2 + d1 * f)
        assert f_sf(f, d1, d2) == pytest.approx(betainc_oracle(d2 / 2, d1 / 2, x), abs=1e-12)
    assert f_sf(0.65, 4, 219) == pytest.approx(0.627, abs=0.002)


# -- ANOVA

def balanced_records(rng, a=3, b=2, n=5, effects=True):
    recs = []
    for i in range(a):
        for j in range(b):
            mu = (0.3 * i + 0.5 * j + 0.2 * i * j) if effects else 0
            recs += [(f"m{i}", j, mu + rng.gauss(0, 1)) for _ in range(n)]
    return recs


def closed_form(records):
    """Classical balanced-design decomposition from cell and marginal means."""
    a_levels = sorted({r[0] for r in records})
    b_levels = sorted({r[1] for r in records})
    y = np.array([r[2] for r in records])
    grand = y.mean()
    cell = {(i, j): np.array([r[2] for r in records if r[0] == i and r[1] == j]) for i in a_levels for j in b_levels}
    n = len(cell[(a_levels[0], b_levels[0])])
    ma = {i: np.mean([r[2] for r in records if r[0] == i]) for i in a_levels}
    mb = {j: np.mean([r[2] for r in records if r[1] == j]) for j in b_levels}
    ss_a = len(b_levels) * n * sum((ma[i] - grand) ** 2 for i in a_levels)
    ss_b = len(a_levels) * n * sum((mb[j] - grand) ** 2 for j in b_levels)
    ss_ab = n * sum((cell[(i, j)].mean() - ma[i] - mb[j] + grand) ** 2 for i in a_levels for j in b_levels)
    ss_res = sum(((v - v.mean()) ** 2).sum() for v in cell.values())
    ss_tot = ((y - grand) ** 2).sum()
    return ss_a, ss_b, ss_ab, ss_res, ss_tot


@pytest.mark.parametrize("seed", range(5))
def test_balanced_anova_closed_form(seed):
    recs = balanced_records(random.Random(seed), a=2 + seed % 2, b=2 + seed % 3, n=3 + seed)
    table = two_way_anova(recs)
    ss_a, ss_b, ss_ab, ss_res, ss_tot = closed_form(recs)
    assert table.a.ss == pytest.approx(ss_a, abs=1e-8)
    assert table.b.ss == pytest.approx(ss_b, abs=1e-8)
    assert table.ab.ss == pytest.approx(ss_ab, abs=1e-8)
    assert table.residual.ss == pytest.approx(ss_res, abs=1e-8)
    assert table.a.ss + table.b.ss + table.ab.ss + table.residual.ss == pytest.approx(ss_tot, abs=1e-8)
    # sequential and adjusted sums coincide when balanced
    t1 = two_way_anova(recs, ss_type=1)
    assert t1.a.ss == pytest.approx(table.a.ss, abs=1e-8)


def test_balanced_2x2_known_cell_means():
    # cell means 1, 3 / 2, 8 with deviations -1, 0, +1 in every cell
    means = {("a1", "b1"): 1.0, ("a1", "b2"): 3.0, ("a2", "b1"): 2.0, ("a2", "b2"): 8.0}
    recs = [(a, b, m + e) for (a, b), m in means.items() for e in (-1.0, 0.0, 1.0)]
    t = two_way_anova(recs)
    # grand 3.5; A margins 2, 5; B margins 1.5, 5.5; interaction residual +-1 per cell
    assert t.a.ss == pytest.approx(6 * (1.5**2 + 1.5**2), abs=1e-8)
    assert t.b.ss == pytest.approx(6 * (2**2 + 2**2), abs=1e-8)
    assert t.ab.ss == pytest.approx(3 * 4 * 1.0, abs=1e-8)
    assert t.residual.ss == pytest.approx(8.0, abs=1e-8) and t.residual.df == 8


def test_constant_response():
    recs = [(i, j, 2.0) for i in range(3) for j in range(3) for _ in range(2)]
    t = two_way_anova(recs)
    assert t.a.ss == pytest.approx(0, abs=1e-20) and t.b.ss == pytest.approx(0, abs=1e-20)
    assert t.ab.ss == pytest.approx(0, abs=1e-20)


def test_study_design_df():
    rng = random.Random(0)
    recs = [(m, c, rng.random()) for m in ("MT3", "MIROS", "MoE-M")
            for c, n in ((1, 6), (2, 24), (3, 46)) for _ in range(n)]
    t = two_way_anova(recs, names=("model", "instrument_count"))
    assert len(recs) == 228
    assert (t.a.df, t.b.df, t.ab.df, t.residual.df) == (2, 2, 4, 219)


def test_anova_errors():
    with pytest.raises(ValueError):
        two_way_anova([("a", 1, 1.0), ("a", 2, 2.0), ("b", 1, 1.5), ("b", 1, 0.5)])
    with pytest.raises(ValueError):
        two_way_anova([("a", 1, 1.0), ("a", 2, 2.0), ("b", 1, 1.5), ("b", 2, 0.5)])
    with pytest.raises(ValueError):
        two_way_anova([("a", 1, 1.0), ("a", 1, 2.0)])


@pytest.mark.parametrize("typ", [1, 2])
def test_unbalanced_against_statsmodels(typ):
    pd = pytest.importorskip("pandas")
    sm = pytest.importorskip("statsmodels.formula.api")
    anova_lm = pytest.importorskip("statsmodels.stats.anova").anova_lm
    rng = random.Random(3)
    recs = [(m, c, 0.2 * k - 0.1 * c + rng.gauss(0, 0.3)) for k, m in enumerate("xyz")
            for c, n in ((1, 6), (2, 9), (3, 14)) for _ in range(n)]
    df = pd.DataFrame(recs, columns=["model", "count", "y"])
    ref = anova_lm(sm.ols("y ~ C(model) * C(count)", df).fit(), typ=typ)
    t = two_way_anova(recs, ss_type=typ)
    got = [t.a, t.b, t.ab, t.residual]
    for k, ours in enumerate(got):
        assert ours.ss == pytest.approx(ref["sum_sq"].iloc[k], abs=1e-8)
        assert ours.df == ref["df"].iloc[k]
        if ours.p is not None:
            assert ours.f == pytest.approx(ref["F"].iloc[k], rel=1e-8)
            assert ours.p == pytest.approx(ref["PR(>F)"].iloc[k], abs=1e-10)
