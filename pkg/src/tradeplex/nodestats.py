"""Node-level statistics of one weighted directed layer.

Degrees, strengths, strength-per-degree ratios, average nearest-neighbour
strengths, the five directed weighted clustering coefficients (cube-root
weights over max-normalized matrices), triangle-type shares and eigenvector
centrality. Undefined values (zero denominators) are NaN throughout and are
skipped by every downstream mean, correlation and ranking.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, EmptyLayerError
from .io import fmt
from .model import AGGREGATE, AdjacencyMatrix, LayerWeightMatrix, MultiNetworkPanel, binarize

EIG_TOL = 1e-12
EIG_MAX_ITER = 100_000


class Degrees(NamedTuple):
    nd_in: np.ndarray
    nd_out: np.ndarray
    nd_tot: np.ndarray
    nd_bilateral: np.ndarray


class Strengths(NamedTuple):
    ns_in: np.ndarray
    ns_out: np.ndarray
    ns_tot: np.ndarray


class ANNS(NamedTuple):
    anns_in_in: np.ndarray
    anns_in_out: np.ndarray
    anns_out_in: np.ndarray
    anns_out_out: np.ndarray
    anns_tot: np.ndarray


class Clustering(NamedTuple):
    wcc_cyc: np.ndarray
    wcc_mid: np.ndarray
    wcc_in: np.ndarray
    wcc_out: np.ndarray
    wcc_all: np.ndarray


class TriangleShares(NamedTuple):
    """Per-node shares of the four triangle types, and their network means.

    Per-node arrays are NaN for nodes in no triangle; the network means are
    over nodes with at least one triangle (NaN when there is none).
    """

    cyc: np.ndarray
    mid: np.ndarray
    in_: np.ndarray
    out_: np.ndarray
    network: tuple


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.full(num.shape, np.nan)
    ok = den != 0
    out[ok] = num[ok] / den[ok]
    return out


def degrees(adj: AdjacencyMatrix) -> Degrees:
    a = adj.entries.astype(np.int64)
    nd_in = a.sum(axis=0)
    nd_out = a.sum(axis=1)
    return Degrees(nd_in, nd_out, nd_in + nd_out, (a * a.T).sum(axis=1))


def strengths(layer: LayerWeightMatrix) -> Strengths:
    w = layer.entries
    ns_in = w.sum(axis=0)
    ns_out = w.sum(axis=1)
    return Strengths(ns_in, ns_out, ns_in + ns_out)


def strength_per_degree(deg: Degrees, strg: Strengths):
    """(ns_in / nd_in, ns_out / nd_out), NaN where the degree is zero."""
    return _ratio(strg.ns_in, deg.nd_in), _ratio(strg.ns_out, deg.nd_out)


def anns(layer: LayerWeightMatrix, adj: AdjacencyMatrix | None = None) -> ANNS:
    """Average nearest-neighbour strengths.

    ``anns_X_Y`` averages the Y-strength of the node's X-neighbours: in
    neighbours are the countries a node imports from, out neighbours those it
    exports to. ``anns_tot`` averages total strength over the union of both.
    """
    adj = adj if adj is not None else binarize(layer)
    a = adj.entries.astype(np.float64)
    s = strengths(layer)
    deg = degrees(adj)
    u = np.logical_or(adj.entries, adj.entries.T).astype(np.float64)
    return ANNS(
        _ratio(a.T @ s.ns_in, deg.nd_in),
        _ratio(a.T @ s.ns_out, deg.nd_in),
        _ratio(a @ s.ns_in, deg.nd_out),
        _ratio(a @ s.ns_out, deg.nd_out),
        _ratio(u @ s.ns_tot, u.sum(axis=1)),
    )


def _cube_root_weights(layer: LayerWeightMatrix) -> np.ndarray:
    w = layer.entries
    top = w.max() if w.size else 0.0
    if top <= 0:
        return np.zeros_like(w)
    return np.cbrt(w / top)


def triangle_intensities(layer: LayerWeightMatrix):
    """Diagonals of the cyc, mid, in and out weighted triangle products."""
    W = _cube_root_weights(layer)
    WT = W.T
    W2 = W @ W
    cyc = np.einsum("ij,ji->i", W2, W)        # [W^3]_ii
    mid = np.einsum("ij,ji->i", W @ WT, W)    # [W W^T W]_ii
    tin = np.einsum("ij,ji->i", WT, W2)       # [W^T W^2]_ii
    tout = np.einsum("ij,ji->i", W2, WT)      # [W^2 W^T]_ii
    return cyc, mid, tin, tout


def weighted_clustering(layer: LayerWeightMatrix, adj: AdjacencyMatrix | None = None) -> Clustering:
    adj = adj if adj is not None else binarize(layer)
    d = degrees(adj)
    cyc, mid, tin, tout = triangle_intensities(layer)
    # [(W + W^T)^3]_ii = 2 (cyc + mid + in + out)
    tall = 2.0 * (cyc + mid + tin + tout)
    mixed = d.nd_in * d.nd_out - d.nd_bilateral
    return Clustering(
        _ratio(cyc, mixed),
        _ratio(mid, mixed),
        _ratio(tin, d.nd_in * (d.nd_in - 1)),
        _ratio(tout, d.nd_out * (d.nd_out - 1)),
        _ratio(tall, 2 * (d.nd_tot * (d.nd_tot - 1) - 2 * d.nd_bilateral)),
    )


def triangle_shares(layer: LayerWeightMatrix, adj: AdjacencyMatrix | None = None) -> TriangleShares:
    parts = np.vstack(triangle_intensities(layer))
    tot = parts.sum(axis=0)
    shares = np.full(parts.shape, np.nan)
    ok = tot > 0
    shares[:, ok] = parts[:, ok] / tot[ok]
    if ok.any():
        network = tuple(float(math.fsum(row[ok]) / ok.sum()) for row in shares)
    else:
        network = (math.nan,) * 4
    return TriangleShares(shares[0], shares[1], shares[2], shares[3], network)


def principal_eigenvector(M: np.ndarray, tol: float = EIG_TOL, max_iter: int = EIG_MAX_ITER) -> np.ndarray:
    """Nonnegative principal right eigenvector of ``M`` by power iteration.

    Starts from the uniform vector and L1-normalizes each step. The
    iteration runs on ``I + M / r`` (r the largest row sum), which has the
    same eigenvectors as ``M`` but cannot oscillate on periodic graphs. For
    nilpotent ``M`` (acyclic graphs) the shifted iteration tends to the
    direction of the last nonzero power ``M^k x0``, which is returned
    directly.
    """
    n = M.shape[0]
    r = M.sum(axis=1).max() if n else 0.0
    if n == 0 or r <= 0:
        raise ValueError("matrix has no positive entry")
    A = M / r
    x = np.full(n, 1.0 / n)

    # acyclic check: A^k x0 vanishes within n steps iff A is nilpotent
    y = x
    for _ in range(n):
        z = A @ y
        s = z.sum()
        if s <= 0:
            return y / y.sum()
        y = z / s

    residual = math.inf
    for _ in range(max_iter):
        z = x + A @ x
        z /= z.sum()
        residual = float(np.abs(z - x).sum())
        x = z
        if residual < tol:
            return x
    raise ConvergenceError(max_iter, residual)


def eigenvector_centrality(layer: LayerWeightMatrix, return_parts: bool = False):
    """WCENTR: mean of the L1-normalized in- and out-eigenvector centralities.

    Out-centrality is the principal eigenvector of W (high for exporters to
    central nodes), in-centrality that of W^T.
    """
    w = layer.entries
    if not np.any(w > 0):
        raise EmptyLayerError(layer.year, layer.layer)
    c_out = principal_eigenvector(w)
    c_in = principal_eigenvector(w.T)
    total = c_in + c_out
    wc = total / total.sum()
    if return_parts:
        return wc, c_in, c_out
    return wc


@dataclass(frozen=True, eq=False)
class NodeStatsTable:
    """All node statistics of one layer-year; one array entry per node."""

    nodes: tuple
    year: int
    layer: str
    nd_in: np.ndarray
    nd_out: np.ndarray
    nd_tot: np.ndarray
    ns_in: np.ndarray
    ns_out: np.ndarray
    ns_tot: np.ndarray
    ns_in_per_nd_in: np.ndarray
    ns_out_per_nd_out: np.ndarray
    anns_in_in: np.ndarray
    anns_in_out: np.ndarray
    anns_out_in: np.ndarray
    anns_out_out: np.ndarray
    anns_tot: np.ndarray
    wcc_cyc: np.ndarray
    wcc_mid: np.ndarray
    wcc_in: np.ndarray
    wcc_out: np.ndarray
    wcc_all: np.ndarray
    wcentr: np.ndarray

    def column(self, name: str) -> np.ndarray:
        if name not in STAT_FIELDS:
            raise ValueError(f"unknown statistic {name!r}; choose from {', '.join(STAT_FIELDS)}")
        return getattr(self, name)

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("node",) + STAT_FIELDS)
        cols = [self.column(f) for f in STAT_FIELDS]
        for i, node in enumerate(self.nodes):
            w.writerow([node] + [fmt(col[i]) for col in cols])


STAT_FIELDS = tuple(f.name for f in fields(NodeStatsTable))[3:]
INTEGER_FIELDS = ("nd_in", "nd_out", "nd_tot")


def layer_stats(layer: LayerWeightMatrix, nodes) -> NodeStatsTable:
    """Compute every statistic of a normalized layer."""
    if not np.any(layer.entries > 0):
        raise EmptyLayerError(layer.year, layer.layer)
    adj = binarize(layer)
    d = degrees(adj)
    s = strengths(layer)
    r_in, r_out = strength_per_degree(d, s)
    return NodeStatsTable(
        tuple(nodes), layer.year, layer.layer,
        d.nd_in, d.nd_out, d.nd_tot, s.ns_in, s.ns_out, s.ns_tot, r_in, r_out,
        *anns(layer, adj), *weighted_clustering(layer, adj), eigenvector_centrality(layer),
    )


def stats_table(panel: MultiNetworkPanel, year, layer) -> NodeStatsTable:
    """Node statistics of normalized layer ``layer`` (or ``AGGREGATE``)."""
    if panel.is_empty(year, layer):
        raise EmptyLayerError(int(year), layer)
    return layer_stats(panel.layer(year, layer), panel.nodes.ids)


_FAMILIES = {
    **{k: "deg" for k in ("nd_in", "nd_out", "nd_tot")},
    **{k: "str" for k in ("ns_in", "ns_out", "ns_tot")},
    "ns_in_per_nd_in": "ratio", "ns_out_per_nd_out": "ratio",
    **{k: "anns" for k in ANNS._fields},
    **{k: "wcc" for k in Clustering._fields},
    "wcentr": "eig",
}


def statistic(layer: LayerWeightMatrix, name: str) -> np.ndarray:
    """One node statistic, computing only the family it belongs to."""
    fam = _FAMILIES.get(name)
    if fam is None:
        raise ValueError(f"unknown statistic {name!r}; choose from {', '.join(STAT_FIELDS)}")
    if not np.any(layer.entries > 0):
        raise EmptyLayerError(layer.year, layer.layer)
    if fam == "str":
        return getattr(strengths(layer), name)
    adj = binarize(layer)
    if fam == "deg":
        return getattr(degrees(adj), name)
    if fam == "ratio":
        r_in, r_out = strength_per_degree(degrees(adj), strengths(layer))
        return r_in if name == "ns_in_per_nd_in" else r_out
    if fam == "anns":
        return getattr(anns(layer, adj), name)
    if fam == "wcc":
        return getattr(weighted_clustering(layer, adj), name)
    return eigenvector_centrality(layer)


def rank_top(table: NodeStatsTable, name: str, k: int) -> list[tuple[str, float]]:
    """Top-k nodes by ``name`` descending; ties by node id; NaN excluded."""
    if k < 1:
        raise ValueError("k must be at least 1")
    col = table.column(name)
    items = [(table.nodes[i], float(v)) for i, v in enumerate(col) if not math.isnan(float(v))]
    items.sort(key=lambda p: (-p[1], p[0]))
    return items[:k]


def _mean_sd(values):
    v = [float(x) for x in values if not math.isnan(float(x))]
    if not v:
        return math.nan, math.nan, 0
    m = math.fsum(v) / len(v)
    sd = math.sqrt(math.fsum((x - m) ** 2 for x in v) / (len(v) - 1)) if len(v) > 1 else math.nan
    return m, sd, len(v)


@dataclass(frozen=True)
class MomentsRow:
    layer: str
    mean: float
    sd: float
    n: int
    pct_of_aggregate: float


def _layer_values(layer: LayerWeightMatrix, name: str, all_pairs: bool):
    from .model import density
    if name == "density":
        return [density(binarize(layer))]
    if name == "w":
        w = layer.entries
        if all_pairs:
            return w[~np.eye(w.shape[0], dtype=bool)]
        return w[w > 0]
    return statistic(layer, name)


def moments_report(panel: MultiNetworkPanel, year, name: str, all_pairs: bool = False,
                   layers=None) -> list[MomentsRow]:
    """Per-layer node mean and sd of a statistic, and the mean as a percentage
    of the aggregate-network mean.

    ``name`` is any node statistic, ``"density"`` or ``"w"`` (link weights;
    positive links only unless ``all_pairs``). The aggregate row comes first.
    Empty layers give NaN rows.
    """
    codes = list(panel.layers.codes) if layers is None else list(layers)
    agg_mean, agg_sd, agg_n = _mean_sd(_layer_values(panel.layer(year, AGGREGATE), name, all_pairs))
    rows = [MomentsRow(AGGREGATE, agg_mean, agg_sd, agg_n, 100.0)]
    for code in codes:
        if panel.is_empty(year, code):
            rows.append(MomentsRow(code, math.nan, math.nan, 0, math.nan))
            continue
        m, sd, n = _mean_sd(_layer_values(panel.layer(year, code), name, all_pairs))
        pct = 100.0 * (m / agg_mean) if agg_mean and not math.isnan(agg_mean) else math.nan
        rows.append(MomentsRow(code, m, sd, n, pct))
    if name == "density":
        rows = [MomentsRow(r.layer, r.mean, math.nan, r.n, r.pct_of_aggregate) for r in rows]
    return rows
