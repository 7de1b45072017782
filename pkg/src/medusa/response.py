"""Stimulus-locked phase response and group statistics for repeatability indices."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats

from .errors import DegenerateGroups, TooFewOnsets, TooShort

PHASE_POINTS = 64


@dataclass
class PhaseResponse:
    """Per-cycle traces resampled onto a fixed phase grid."""

    period_s: float
    n_segments: int
    segments: np.ndarray   # (n_segments, PHASE_POINTS)
    mean: np.ndarray       # (PHASE_POINTS,)
    sd: np.ndarray         # (PHASE_POINTS,)

    @property
    def phase(self) -> np.ndarray:
        return np.arange(self.segments.shape[1]) / self.segments.shape[1]


def phase_response(
    series: np.ndarray,
    onsets_s: np.ndarray,
    frame_rate: float = 60.0,
    n_points: int = PHASE_POINTS,
) -> PhaseResponse:
    """Cut a series at consecutive onsets and overlay the cycles.

    Each segment between onset k and onset k+1 is linearly resampled onto
    ``n_points`` phase points covering [0, 1) of the cycle; the stack's
    per-point mean and population SD summarize the response.
    """
    onsets = np.asarray(onsets_s, dtype=float)
    if onsets.size < 2:
        raise TooFewOnsets(f"need at least 2 onsets, got {onsets.size}")
    x = np.asarray(series, dtype=float)
    t_end = (x.shape[0] - 1) / frame_rate
    if onsets[0] < -1e-9 or onsets[-1] > t_end + 1e-9:
        raise TooShort("series does not cover the onset span")

    t = np.arange(x.shape[0]) / frame_rate
    segments = np.empty((onsets.size - 1, n_points))
    for k in range(onsets.size - 1):
        sample_times = onsets[k] + (onsets[k + 1] - onsets[k]) * np.arange(n_points) / n_points
        segments[k] = np.interp(sample_times, t, x)
    return PhaseResponse(
        period_s=float(np.mean(np.diff(onsets))),
        n_segments=segments.shape[0],
        segments=segments,
        mean=segments.mean(axis=0),
        sd=segments.std(axis=0),
    )


def _validate_groups(groups) -> list[np.ndarray]:
    gs = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(gs) < 2:
        raise ValueError("need at least 2 groups")
    if any(g.size < 2 for g in gs):
        raise ValueError("every group needs at least 2 samples")
    return gs


def one_way_anova(groups) -> tuple[float, float]:
    """Classical one-way ANOVA; returns (F, p).

    p comes from the F distribution's survival function (regularized
    incomplete beta).  Raises DegenerateGroups when the pooled
    within-group variance is zero.
    """
    gs = _validate_groups(groups)
    n_total = sum(g.size for g in gs)
    k = len(gs)
    grand = np.concatenate(gs).mean()
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in gs)
    ssw = sum(np.sum((g - g.mean()) ** 2) for g in gs)
    if ssw == 0:
        raise DegenerateGroups("zero within-group variance")
    df1, df2 = k - 1, n_total - k
    f_stat = (ssb / df1) / (ssw / df2)
    return float(f_stat), float(sp_stats.f.sf(f_stat, df1, df2))


@dataclass
class PairwiseComparison:
    """Welch t-test plus a familywise-adjusted permutation p for one pair."""

    pair: tuple[int, int]
    t_statistic: float
    p_welch: float
    q_statistic: float
    p_adjusted: float


def pairwise_tests(
    groups,
    n_permutations: int = 10_000,
    seed: int = 0,
    chunk: int = 2_048,
) -> list[PairwiseComparison]:
    """All-pairs comparison with familywise error control.

    For every pair the Welch t-test p-value is reported alongside an
    adjusted p computed by permuting the pooled samples and referencing
    each pair's studentized range statistic against the permutation
    distribution of the familywise maximum.  Results are deterministic for
    a fixed seed.
    """
    gs = _validate_groups(groups)
    k = len(gs)
    sizes = np.array([g.size for g in gs])
    pool = np.concatenate(gs)
    n_total = pool.size
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    pairs = list(itertools.combinations(range(k), 2))

    means = np.array([g.mean() for g in gs])
    ssw = sum(np.sum((g - g.mean()) ** 2) for g in gs)
    if ssw == 0:
        raise DegenerateGroups("zero within-group variance")
    msw = ssw / (n_total - k)
    denom = np.array([np.sqrt(msw * 0.5 * (1 / sizes[i] + 1 / sizes[j])) for i, j in pairs])
    q_obs = np.array([abs(means[i] - means[j]) for i, j in pairs]) / denom

    rng = np.random.default_rng(seed)
    exceed = np.zeros(len(pairs), dtype=np.int64)
    done = 0
    half_inv = 0.5 * np.array([1 / sizes[i] + 1 / sizes[j] for i, j in pairs])
    while done < n_permutations:
        c = min(chunk, n_permutations - done)
        order = np.argsort(rng.random((c, n_total)), axis=1)
        perm = pool[order]
        mean_g = np.empty((c, k))
        ssw_p = np.zeros(c)
        for g in range(k):
            block = perm[:, bounds[g]:bounds[g + 1]]
            mean_g[:, g] = block.mean(axis=1)
            ssw_p += (block**2).sum(axis=1) - sizes[g] * mean_g[:, g] ** 2
        msw_p = ssw_p / (n_total - k)
        q_pairs = np.empty((c, len(pairs)))
        for idx, (i, j) in enumerate(pairs):
            diff = np.abs(mean_g[:, i] - mean_g[:, j])
            with np.errstate(divide="ignore", invalid="ignore"):
                q = diff / np.sqrt(msw_p * half_inv[idx])
            q_pairs[:, idx] = np.where(msw_p > 0, q, np.where(diff > 0, np.inf, 0.0))
        q_max = q_pairs.max(axis=1)
        exceed += (q_max[:, None] >= q_obs[None, :]).sum(axis=0)
        done += c

    p_adj = (1 + exceed) / (n_permutations + 1)
    results = []
    for idx, (i, j) in enumerate(pairs):
        t_res = sp_stats.ttest_ind(gs[i], gs[j], equal_var=False)
        results.append(
            PairwiseComparison(
                pair=(i, j),
                t_statistic=float(t_res.statistic),
                p_welch=float(t_res.pvalue),
                q_statistic=float(q_obs[idx]),
                p_adjusted=float(p_adj[idx]),
            )
        )
    return results
