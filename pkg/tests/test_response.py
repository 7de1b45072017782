import numpy as np
import pytest
from scipy import stats as sp_stats

from medusa import response
from medusa.errors import DegenerateGroups, TooFewOnsets, TooShort

FS = 60.0


# ---------------------------------------------------------------------------
# phase response
# ---------------------------------------------------------------------------

def test_perfectly_periodic_signal_has_zero_sd():
    period = 2.0
    t = np.arange(int(20 * FS)) / FS
    x = np.sin(2 * np.pi * t / period)
    onsets = np.arange(0.0, 18.1, period)
    pr = response.phase_response(x, onsets, FS)
    assert pr.n_segments == 9
    assert pr.period_s == pytest.approx(period)
    assert pr.sd.max() < 1e-9


def test_too_few_onsets():
    with pytest.raises(TooFewOnsets):
        response.phase_response(np.zeros(100), [0.5], FS)


def test_series_must_cover_onsets():
    with pytest.raises(TooShort):
        response.phase_response(np.zeros(60), [0.0, 2.0], FS)


def test_white_noise_mean_obeys_clt_envelope():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n_seg = 100
        period = 1.0
        x = rng.normal(size=int((n_seg + 1) * period * FS))
        onsets = np.arange(n_seg + 1) * period
        pr = response.phase_response(x, onsets, FS)
        inside = np.abs(pr.mean) <= 3 * pr.sd / np.sqrt(n_seg)
        assert inside.mean() >= 0.95


def test_mean_trace_recovers_known_profile():
    period = 2.0
    profile = lambda phase: np.sin(2 * np.pi * phase) + 0.3 * np.sin(4 * np.pi * phase)
    t = np.arange(int(40 * FS)) / FS
    x = profile((t % period) / period)
    onsets = np.arange(0.0, 38.1, period)
    pr = response.phase_response(x, onsets, FS)
    np.testing.assert_allclose(pr.mean, profile(pr.phase), atol=5e-3)


def test_mean_invariant_under_segment_shuffle():
    rng = np.random.default_rng(3)
    x = rng.normal(size=int(30 * FS))
    onsets = np.arange(0.0, 29.0, 1.5)
    pr = response.phase_response(x, onsets, FS)
    shuffled = pr.segments[rng.permutation(pr.n_segments)]
    np.testing.assert_allclose(shuffled.mean(axis=0), pr.mean, atol=1e-12)


# ---------------------------------------------------------------------------
# one-way ANOVA
# ---------------------------------------------------------------------------

def test_anova_separated_groups():
    rng = np.random.default_rng(0)
    eps = 1e-6 * rng.normal(size=3)
    f, p = response.one_way_anova([eps, 1.0 + eps, 2.0 + eps])
    assert f > 1e6
    assert p < 1e-9


def test_anova_hand_computed_case():
    # groups {1,2} and {3,4}: SSB = 4 (df 1), SSW = 1 (df 2) -> F = 8
    f, p = response.one_way_anova([[1.0, 2.0], [3.0, 4.0]])
    assert f == pytest.approx(8.0, abs=1e-9)
    assert p == pytest.approx(sp_stats.f.sf(8.0, 1, 2), abs=1e-12)


def test_anova_null_pvalues_uniform():
    rng = np.random.default_rng(42)
    pvals = [
        response.one_way_anova([rng.normal(size=25) for _ in range(4)])[1]
        for _ in range(500)
    ]
    d = sp_stats.kstest(pvals, "uniform").statistic
    assert d < 0.1


def test_anova_shift_and_scale_invariance():
    rng = np.random.default_rng(5)
    groups = [rng.normal(size=12) for _ in range(3)]
    f0, _ = response.one_way_anova(groups)
    f_shift, _ = response.one_way_anova([g + 100.0 for g in groups])
    f_scale, _ = response.one_way_anova([g * 2.0 for g in groups])
    assert f_shift == pytest.approx(f0, rel=1e-9)
    assert f_scale == pytest.approx(f0, rel=1e-12)


def test_anova_degenerate_groups():
    with pytest.raises(DegenerateGroups):
        response.one_way_anova([[1.0, 1.0], [2.0, 2.0]])


def test_anova_validates_shapes():
    with pytest.raises(ValueError):
        response.one_way_anova([[1.0, 2.0]])
    with pytest.raises(ValueError):
        response.one_way_anova([[1.0, 2.0], [3.0]])


# ---------------------------------------------------------------------------
# pairwise tests
# ---------------------------------------------------------------------------

def test_identical_groups_are_never_significant():
    base = np.arange(10.0)
    for seed in (0, 1, 2):
        rows = response.pairwise_tests([base, base.copy(), base.copy()],
                                       n_permutations=2000, seed=seed)
        assert all(r.p_adjusted > 0.9 for r in rows)


def test_large_shift_is_significant():
    rng = np.random.default_rng(1)
    g1 = rng.normal(size=30)
    g2 = rng.normal(size=30)
    g3 = rng.normal(size=30) + 10.0
    rows = response.pairwise_tests([g1, g2, g3], n_permutations=5000, seed=0)
    for r in rows:
        if 2 in r.pair:
            assert r.p_adjusted < 0.001
        else:
            assert r.p_adjusted > 0.01


def test_two_group_permutation_matches_welch():
    rng = np.random.default_rng(9)
    g1 = rng.normal(size=24)
    g2 = rng.normal(size=24) + 0.55
    rows = response.pairwise_tests([g1, g2], n_permutations=8000, seed=3)
    assert abs(rows[0].p_adjusted - rows[0].p_welch) < 0.05


def test_permutation_reproducible_for_fixed_seed():
    rng = np.random.default_rng(4)
    groups = [rng.normal(size=15) for _ in range(3)]
    a = response.pairwise_tests(groups, n_permutations=1000, seed=7)
    b = response.pairwise_tests(groups, n_permutations=1000, seed=7)
    assert [r.p_adjusted for r in a] == [r.p_adjusted for r in b]


def test_adjusted_p_monotone_in_effect_size():
    rng = np.random.default_rng(11)
    base = rng.normal(size=40)
    other = rng.normal(size=40)
    ps = []
    for shift in (0.0, 1.0, 2.5):
        rows = response.pairwise_tests([base, other + shift],
                                       n_permutations=3000, seed=1)
        ps.append(rows[0].p_adjusted)
    assert ps[0] >= ps[1] >= ps[2]


def test_pairwise_degenerate_groups():
    with pytest.raises(DegenerateGroups):
        response.pairwise_tests([[3.0, 3.0], [3.0, 3.0]])
