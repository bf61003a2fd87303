"""Distribution tests on positive link weights.

Two-sample Kolmogorov-Smirnov tests between layers, and normality tests of
log weights: one-sample KS against given parameters and Lilliefors (KS with
estimated mean and sd, Monte Carlo p-value).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.special import ndtri

from . import _kernels
from .errors import EmptyLayerError
from .model import LayerWeightMatrix, MultiNetworkPanel
from .rng import derive_seed, philox

DEFAULT_MC_REPS = 10_000
DEFAULT_SEED = 20030101
_SERIES_TOL = 1e-12
_CHUNK = 1 << 21  # simulated values per Monte Carlo chunk


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: int
    m: int | None = None
    mc_seed: int | None = None
    mc_reps: int | None = None

    __test__ = False  # not a pytest class


def positive_log_weights(layer: LayerWeightMatrix) -> np.ndarray:
    w = layer.entries
    v = np.log(w[w > 0])
    if v.size == 0:
        raise EmptyLayerError(layer.year, layer.layer)
    return np.sort(v)


def kolmogorov_sf(lam: float) -> float:
    """Q(lam) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2).

    Below lam = 1 the equivalent theta-function form
    1 - sqrt(2 pi)/lam sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 lam^2)) is summed
    instead; the alternating series converges slowly there.
    """
    if lam <= 0:
        return 1.0
    total = 0.0
    k = 1
    if lam < 1.0:
        c = math.pi ** 2 / (8.0 * lam * lam)
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            total += term
            if term < _SERIES_TOL:
                break
            k += 1
        q = 1.0 - math.sqrt(2.0 * math.pi) / lam * total
    else:
        sign = 1.0
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += sign * term
            if term < _SERIES_TOL:
                break
            sign = -sign
            k += 1
        q = 2.0 * total
    return min(max(q, 0.0), 1.0)


def _sample(x) -> np.ndarray:
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def ks_two_sample(a, b) -> TestResult:
    """Two-sided two-sample KS test with the asymptotic p-value."""
    a, b = _sample(a), _sample(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    d = float(_kernels.ks2_stat(a, b))
    n, m = a.size, b.size
    ne = math.sqrt(n * m / (n + m))
    return TestResult(d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d), "ks2", n, m)


def _gap(x_sorted_rows, mu, sd) -> np.ndarray:
    return _kernels.normal_gap_rows(
        np.ascontiguousarray(x_sorted_rows),
        np.ascontiguousarray(mu, dtype=np.float64),
        np.ascontiguousarray(sd, dtype=np.float64),
    )


def ks_one_sample_normal(sample, mu: float, sigma: float) -> TestResult:
    """One-sample KS test against N(mu, sigma^2)."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = _sample(sample)
    if x.size < 2:
        raise ValueError("one-sample KS needs at least 2 observations")
    d = float(_gap(x[None, :], [mu], [sigma])[0])
    n = x.size
    sn = math.sqrt(n)
    return TestResult(d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d), "ks1_normal", n)


def _estimated_gap(rows: np.ndarray) -> np.ndarray:
    """KS distance of each row against a normal with the row's own mean and
    sd (n - 1 denominator). Rows must be sorted ascending."""
    mu = rows.mean(axis=1)
    sd = rows.std(axis=1, ddof=1)
    return _gap(rows, mu, sd)


@lru_cache(maxsize=64)
def _lilliefors_null(n: int, reps: int, seed: int) -> np.ndarray:
    g = philox(seed)
    chunk = max(1, _CHUNK // n)
    out = []
    done = 0
    while done < reps:
        k = min(chunk, reps - done)
        z = np.sort(g.standard_normal((k, n)), axis=1)
        out.append(_estimated_gap(z))
        done += k
    null = np.concatenate(out)
    null.flags.writeable = False
    return null


def lilliefors(sample, mc_reps: int = DEFAULT_MC_REPS, seed: int = DEFAULT_SEED) -> TestResult:
    """Lilliefors normality test with a seeded Monte Carlo p-value.

    The p-value is the fraction of ``mc_reps`` simulated standard-normal
    samples of the same size whose statistic (parameters re-estimated) is at
    least the observed one. The null distribution depends only on
    (n, mc_reps, seed) and is cached.
    """
    x = _sample(sample)
    if x.size < 4:
        raise ValueError("Lilliefors test needs at least 4 observations")
    if mc_reps < 1:
        raise ValueError("mc_reps must be positive")
    if not x[-1] > x[0]:
        raise ValueError("Lilliefors test needs a non-constant sample")
    d = float(_estimated_gap(x[None, :])[0])
    null = _lilliefors_null(x.size, int(mc_reps), int(seed))
    p = int(np.count_nonzero(null >= d)) / null.size
    return TestResult(d, p, "lilliefors", x.size, mc_seed=int(seed), mc_reps=int(mc_reps))


def layer_pairs(n_layers: int) -> list[tuple[int, int]]:
    """All unordered layer index pairs (c, c') with c < c'."""
    return list(combinations(range(n_layers), 2))


@dataclass(frozen=True, eq=False)
class NormalityRow:
    layer: str
    n: int
    lilliefors: TestResult | None
    ks: TestResult | None


@dataclass(frozen=True, eq=False)
class LognormalityReport:
    year: int
    codes: tuple
    #: C x C two-sample KS p-values, upper triangle; NaN elsewhere
    ks_pvalues: np.ndarray
    ks_statistics: np.ndarray
    normality: tuple
    skipped: tuple
    n_pairs: int
    frac_pairs_same: float
    frac_reject_lilliefors: float
    frac_reject_ks: float


def _normality(sample, code, mc_reps, seed):
    if sample.size < 4 or not sample[-1] > sample[0]:
        return NormalityRow(code, sample.size, None, None)
    lt = lilliefors(sample, mc_reps, derive_seed(seed, code))
    sd = float(np.std(sample, ddof=1))
    ks = ks_one_sample_normal(sample, float(np.mean(sample)), sd)
    return NormalityRow(code, sample.size, lt, ks)


def lognormality_report(panel: MultiNetworkPanel, year, mc_reps: int = DEFAULT_MC_REPS,
                        seed: int = DEFAULT_SEED, alpha: float = 0.05,
                        threads: int = 1) -> LognormalityReport:
    """Pairwise KS equality tests and per-layer log-normality tests.

    Each layer's Monte Carlo seed is derived from ``seed`` and its layer
    code, so results do not depend on scheduling.
    """
    codes = panel.layers.codes
    samples = {}
    skipped = []
    for code in codes:
        if panel.is_empty(year, code):
            skipped.append(code)
        else:
            samples[code] = positive_log_weights(panel.layer(year, code))

    C = len(codes)
    pv = np.full((C, C), np.nan)
    st = np.full((C, C), np.nan)
    pairs = layer_pairs(C)
    n_same = n_tested = 0
    for a, b in pairs:
        ca, cb = codes[a], codes[b]
        if ca in samples and cb in samples:
            r = ks_two_sample(samples[ca], samples[cb])
            pv[a, b], st[a, b] = r.p_value, r.statistic
            n_tested += 1
            n_same += r.p_value > alpha

    live = [c for c in codes if c in samples]
    job = lambda c: _normality(samples[c], c, mc_reps, seed)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(job, live))
    else:
        rows = [job(c) for c in live]
    tested = [r for r in rows if r.lilliefors is not None]
    rej_l = sum(r.lilliefors.p_value < alpha for r in tested)
    rej_k = sum(r.ks.p_value < alpha for r in tested)
    return LognormalityReport(
        int(year), tuple(codes), pv, st, tuple(rows), tuple(skipped), len(pairs),
        n_same / n_tested if n_tested else math.nan,
        rej_l / len(tested) if tested else math.nan,
        rej_k / len(tested) if tested else math.nan,
    )


def log_weight_histogram(layer: LayerWeightMatrix, bins: int = 20):
    """(bin_left, bin_right, count) rows of the positive log weights."""
    x = positive_log_weights(layer)
    counts, edges = np.histogram(x, bins=bins)
    return [(float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(counts.size)]


def qq_points(sample):
    """(theoretical, empirical) standardized quantile pairs for a Q-Q plot."""
    x = _sample(sample)
    n = x.size
    z = (x - x.mean()) / x.std(ddof=1)
    theo = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return list(zip(theo.tolist(), z.tolist()))
