import math
from typing import Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import stats

from src.const import WILCOXON_EXACT_MAX_N
from src.errors import DegeneratePairError, DegenerateVarianceError, PreconditionError


class WilcoxonResult(BaseModel):
    """
    Outcome of a two-sided Wilcoxon signed-rank test.

    Attributes:
        w_statistic (float): W⁺, the rank sum of the positive differences.
        w_minus (float): W⁻, the rank sum of the negative differences.
        p_value (float): Two-sided p-value.
        n (int): Number of non-zero differences ranked.
        method (str): "exact" (full sign enumeration), "normal" (tie- and continuity-corrected) or "degenerate".
    """

    w_statistic: float
    w_minus: float = 0.0
    p_value: float
    n: int
    method: Literal["exact", "normal", "degenerate"]


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Sample Pearson correlation, clamped to [-1, 1].

    Raises:
        PreconditionError: If the sequences differ in length or have fewer than two entries.
        DegenerateVarianceError: If either sequence is constant.
    """
    x_values = np.asarray(x, dtype=np.float64)
    y_values = np.asarray(y, dtype=np.float64)
    if x_values.shape != y_values.shape or x_values.ndim != 1 or len(x_values) < 2:
        raise PreconditionError(f"Need two equal-length sequences of at least 2 values, got {len(x)} and {len(y)}")
    if np.ptp(x_values) == 0 or np.ptp(y_values) == 0:
        raise DegenerateVarianceError("Pearson correlation is undefined for a constant sequence")
    r = stats.pearsonr(x_values, y_values)[0]
    return float(min(1.0, max(-1.0, r)))


def bland_altman_percent(
    pred_areas: Sequence[float],
    ref_areas: Sequence[float],
    normalization: Literal["mean", "reference"] = "mean",
) -> Tuple[float, float]:
    """
    Percent Bland–Altman bias and its standard deviation.

    Each pair contributes d_i = 100·(pred_i − ref_i)/m_i where m_i is the pair mean
    ("mean") or the reference value ("reference").

    Returns:
        Tuple[float, float]: (mean of d, sample standard deviation of d).

    Raises:
        PreconditionError: If the sequences differ in length or have fewer than two entries.
        DegeneratePairError: If a normalizer is zero; lists the offending indices.
    """
    pred = np.asarray(pred_areas, dtype=np.float64)
    ref = np.asarray(ref_areas, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 1 or len(pred) < 2:
        raise PreconditionError(f"Need two equal-length sequences of at least 2 values, got {len(pred)} and {len(ref)}")
    normalizer = (pred + ref) / 2.0 if normalization == "mean" else ref
    degenerate = np.flatnonzero(normalizer <= 0)
    if degenerate.size:
        raise DegeneratePairError(degenerate.tolist())
    differences = 100.0 * (pred - ref) / normalizer
    return float(differences.mean()), float(differences.std(ddof=1))


def _exact_two_sided(doubled_ranks: np.ndarray, doubled_w: int) -> float:
    n = len(doubled_ranks)
    patterns = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    sums = patterns @ doubled_ranks
    total = float(2**n)
    lower = np.count_nonzero(sums <= doubled_w) / total
    upper = np.count_nonzero(sums >= doubled_w) / total
    return min(1.0, 2.0 * min(lower, upper))


def wilcoxon_signed_rank(diffs: Sequence[float]) -> WilcoxonResult:
    """
    Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped and tied magnitudes get mid-ranks. Up to 12 non-zero
    differences the p-value comes from enumerating all 2ⁿ sign assignments of the actual
    ranks; beyond that a normal approximation with tie and continuity corrections is used.

    Raises:
        PreconditionError: If `diffs` is empty.
    """
    values = np.asarray(diffs, dtype=np.float64)
    if values.size == 0:
        raise PreconditionError("Wilcoxon signed-rank test needs at least one difference")
    values = values[values != 0]
    n = len(values)
    if n == 0:
        return WilcoxonResult(w_statistic=0.0, p_value=1.0, n=0, method="degenerate")

    ranks = stats.rankdata(np.abs(values))
    w_plus = float(ranks[values > 0].sum())
    w_minus = float(ranks[values < 0].sum())

    if n <= WILCOXON_EXACT_MAX_N:
        # mid-ranks are multiples of 1/2, so doubled ranks compare exactly as integers
        doubled_ranks = np.rint(2 * ranks).astype(np.int64)
        p_value = _exact_two_sided(doubled_ranks, int(round(2 * w_plus)))
        return WilcoxonResult(w_statistic=w_plus, w_minus=w_minus, p_value=p_value, n=n, method="exact")

    _, tie_counts = np.unique(ranks, return_counts=True)
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if variance <= 0:
        return WilcoxonResult(w_statistic=w_plus, w_minus=w_minus, p_value=1.0, n=n, method="normal")
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(variance)
    p_value = min(1.0, 2.0 * float(stats.norm.sf(z)))
    return WilcoxonResult(w_statistic=w_plus, w_minus=w_minus, p_value=p_value, n=n, method="normal")
