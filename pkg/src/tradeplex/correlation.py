"""Correlation machinery.

Within-layer correlations between node statistics, cross-layer correlations
of one statistic, and edge-level inter-layer correlation matrices over all
N(N-1) directed pairs (weights for ``phi_w``, link indicators for
``phi_u``), plus the distance transform d = sqrt((1 - phi) / 2) and the
per-year averages.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .model import AGGREGATE, MultiNetworkPanel
from .nodestats import layer_stats, statistic

MODES = ("product-moment", "rank")

#: Statistic pairs of the within-layer correlation table, as (label, x, y).
WITHIN_PAIRS = (
    ("NS_in~ND_in", "ns_in", "nd_in"),
    ("NS_out~ND_out", "ns_out", "nd_out"),
    ("ANNS_tot~NS_tot", "anns_tot", "ns_tot"),
    ("ANNS_in_in~NS_in", "anns_in_in", "ns_in"),
    ("ANNS_in_out~NS_in", "anns_in_out", "ns_in"),
    ("ANNS_out_in~NS_out", "anns_out_in", "ns_out"),
    ("ANNS_out_out~NS_out", "anns_out_out", "ns_out"),
    ("WCC_all~NS_tot", "wcc_all", "ns_tot"),
    ("WCC_in~NS_in", "wcc_in", "ns_in"),
    ("WCC_out~NS_out", "wcc_out", "ns_out"),
    ("WCENTR~NS_tot", "wcentr", "ns_tot"),
)


def pearson(x, y) -> float:
    """Product-moment correlation over the pairs where both values are finite.

    Two-pass with exactly rounded sums. NaN when fewer than two complete
    pairs remain or either side is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    n = x.size
    if n < 2 or x.min() == x.max() or y.min() == y.max():
        return math.nan
    dx = x - math.fsum(x) / n
    dy = y - math.fsum(y) / n
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0 or syy == 0:
        return math.nan
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return min(max(r, -1.0), 1.0)


def within_layer_corr(x, y, mode: str = "product-moment") -> float:
    """Correlation of two per-node statistics, complete cases only.

    ``mode="rank"`` applies the same formula to midranks.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if mode == "rank":
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = rankdata(x[ok]), rankdata(y[ok])
    return pearson(x, y)


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


@dataclass(frozen=True)
class WithinCorrRow:
    layer: str
    values: tuple  # one coefficient per WITHIN_PAIRS entry, NaN if undefined


def within_corr_table(panel: MultiNetworkPanel, year, mode: str = "product-moment",
                      threads: int = 1) -> list[WithinCorrRow]:
    """Aggregate row first, then one row per layer (NaN rows for empty layers)."""
    codes = [AGGREGATE, *panel.layers.codes]

    def row(code):
        if panel.is_empty(year, code):
            return WithinCorrRow(code, (math.nan,) * len(WITHIN_PAIRS))
        t = layer_stats(panel.layer(year, code), panel.nodes.ids)
        return WithinCorrRow(code, tuple(
            within_layer_corr(t.column(a), t.column(b), mode) for _, a, b in WITHIN_PAIRS
        ))

    return _map(row, codes, threads)


@dataclass(frozen=True, eq=False)
class LayerCorrelationMatrix:
    entries: np.ndarray
    kind: str
    year: int
    codes: tuple
    #: layers whose row/column is undefined (zero variance or empty)
    undefined: tuple = ()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "year": self.year,
            "codes": list(self.codes),
            "values": [[None if math.isnan(v) else v for v in row] for row in self.entries.tolist()],
        }


@dataclass(frozen=True, eq=False)
class LayerDistanceMatrix:
    entries: np.ndarray
    kind: str
    year: int
    codes: tuple

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "year": self.year,
            "codes": list(self.codes),
            "values": [[None if math.isnan(v) else v for v in row] for row in self.entries.tolist()],
        }


def cross_layer_stat_corr(panel: MultiNetworkPanel, year, name: str,
                          mode: str = "product-moment", threads: int = 1) -> LayerCorrelationMatrix:
    """Correlation across nodes of statistic ``name`` between every layer pair."""
    codes = panel.layers.codes
    live = panel.nonempty_codes(year)
    vecs = dict(zip(live, _map(lambda c: statistic(panel.layer(year, c), name), live, threads)))
    C = len(codes)
    R = np.full((C, C), np.nan)
    for a in range(C):
        xa = vecs.get(codes[a])
        if xa is None:
            continue
        for b in range(a, C):
            xb = vecs.get(codes[b])
            if xb is None:
                continue
            r = within_layer_corr(xa, xb, mode)
            if a == b and not math.isnan(r):
                r = 1.0
            R[a, b] = R[b, a] = r
    undefined = tuple(codes[c] for c in range(C) if math.isnan(R[c, c]))
    return LayerCorrelationMatrix(R, f"cross_stat({name})", int(year), tuple(codes), undefined)


def _pair_rows(mats: np.ndarray) -> np.ndarray:
    """(C, N, N) -> (C, N(N-1)) off-diagonal entries in row-major pair order."""
    n = mats.shape[-1]
    off = ~np.eye(n, dtype=bool)
    return np.ascontiguousarray(mats[:, off], dtype=np.float64)


def pair_correlation_matrix(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlations between the rows of X.

    Rows are centered with exactly rounded means, then the centered Gram
    matrix is accumulated with compensated summation. Returns (R, defined)
    where ``defined`` flags the non-constant rows; undefined rows/columns
    of R are NaN.
    """
    C, M = X.shape
    defined = (X.max(axis=1) > X.min(axis=1)) if M else np.zeros(C, bool)
    means = np.array([math.fsum(row) / M for row in X]) if M else np.zeros(C)
    G = _kernels.neumaier_gram(X - means[:, None])
    R = np.full((C, C), np.nan)
    for a in range(C):
        if not defined[a]:
            continue
        R[a, a] = 1.0
        for b in range(a + 1, C):
            if defined[b]:
                r = G[a, b] / math.sqrt(G[a, a] * G[b, b])
                R[a, b] = R[b, a] = min(max(r, -1.0), 1.0)
    return R, defined


def _interlayer(panel, year, unweighted: bool) -> LayerCorrelationMatrix:
    t = panel.year_index(year)
    mats = panel.normalized[t]
    X = _pair_rows(mats > 0 if unweighted else mats)
    R, defined = pair_correlation_matrix(X)
    codes = panel.layers.codes
    kind = "phi_u" if unweighted else "phi_w"
    return LayerCorrelationMatrix(R, kind, int(year), tuple(codes),
                                  tuple(c for c, ok in zip(codes, defined) if not ok))


def interlayer_corr_weighted(panel: MultiNetworkPanel, year) -> LayerCorrelationMatrix:
    """phi_w: Pearson correlation of normalized edge weights over all ordered
    node pairs, zero weights included."""
    return _interlayer(panel, year, unweighted=False)


def interlayer_corr_unweighted(panel: MultiNetworkPanel, year) -> LayerCorrelationMatrix:
    """phi_u: the same over the 0/1 link indicators at threshold 0."""
    return _interlayer(panel, year, unweighted=True)


def corr_to_distance(corr: LayerCorrelationMatrix) -> LayerDistanceMatrix:
    phi = np.asarray(corr.entries, dtype=np.float64)
    d = np.sqrt(np.clip((1.0 - phi) / 2.0, 0.0, 1.0))
    d[np.isnan(phi)] = np.nan
    diag = np.arange(d.shape[0])
    d[diag, diag] = np.where(np.isnan(phi[diag, diag]), np.nan, 0.0)
    kind = {"phi_w": "weighted", "phi_u": "unweighted"}.get(corr.kind, corr.kind)
    return LayerDistanceMatrix(d, kind, corr.year, corr.codes)


def average_interlayer(matrix) -> float:
    """Mean of the defined off-diagonal upper-triangle entries (NaN if none)."""
    e = np.asarray(getattr(matrix, "entries", matrix), dtype=np.float64)
    iu = np.triu_indices(e.shape[0], 1)
    v = e[iu]
    v = v[~np.isnan(v)]
    return math.fsum(v) / v.size if v.size else math.nan


@dataclass(frozen=True)
class EvolutionRow:
    year: int
    phi_w: float
    phi_u: float
    d_w: float
    d_u: float

    @property
    def flagged(self) -> bool:
        return any(math.isnan(v) for v in (self.phi_w, self.phi_u, self.d_w, self.d_u))


@dataclass(frozen=True)
class EvolutionSeries:
    rows: tuple

    @property
    def flagged_years(self) -> tuple:
        return tuple(r.year for r in self.rows if r.flagged)


def evolution_series(panel: MultiNetworkPanel, threads: int = 1) -> EvolutionSeries:
    """Average inter-layer correlations and distances for every year.

    Average distances are means of the entrywise-transformed matrices, not
    the transform of the average correlation.
    """
    if panel.n_years < 2:
        raise ValueError("evolution series needs at least two years")

    def row(year):
        pw = interlayer_corr_weighted(panel, year)
        pu = interlayer_corr_unweighted(panel, year)
        return EvolutionRow(
            year, average_interlayer(pw), average_interlayer(pu),
            average_interlayer(corr_to_distance(pw)), average_interlayer(corr_to_distance(pu)),
        )

    return EvolutionSeries(tuple(_map(row, panel.years, threads)))
