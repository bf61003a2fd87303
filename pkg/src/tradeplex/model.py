"""Multiplex network data model: layer matrices, catalogs and the panel.

A panel holds, for every year and commodity layer, an N x N matrix of
directed trade values together with its normalized version (entries divided
by the layer total) and the per-year aggregate obtained by summing layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyLayerError, StructuralError

#: Layer marker for the aggregate (all-commodity) network.
AGGREGATE = "aggregate"


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class NodeCatalog:
    ids: tuple
    labels: tuple = ()
    groups: Mapping[str, str] | None = None

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        if len(set(ids)) != len(ids):
            raise StructuralError("node ids must be unique")
        object.__setattr__(self, "ids", ids)
        labels = tuple(self.labels) if self.labels else ids
        if len(labels) != len(ids):
            raise StructuralError("one label per node required")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(ids)})

    def __len__(self):
        return len(self.ids)

    def index(self, node_id) -> int:
        return self._index[str(node_id)]

    def with_groups(self, groups: Mapping[str, str]) -> "NodeCatalog":
        return NodeCatalog(self.ids, self.labels, dict(groups))


@dataclass(frozen=True)
class LayerCatalog:
    codes: tuple
    descriptions: tuple = ()

    def __post_init__(self):
        codes = tuple(str(c) for c in self.codes)
        if len(set(codes)) != len(codes):
            raise StructuralError("layer codes must be unique")
        if AGGREGATE in codes:
            raise StructuralError(f"{AGGREGATE!r} is reserved and cannot be a layer code")
        object.__setattr__(self, "codes", codes)
        desc = tuple(self.descriptions) if self.descriptions else ("",) * len(codes)
        if len(desc) != len(codes):
            raise StructuralError("one description per layer required")
        object.__setattr__(self, "descriptions", desc)
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(codes)})

    def __len__(self):
        return len(self.codes)

    def index(self, code) -> int:
        return self._index[str(code)]


@dataclass(frozen=True, eq=False)
class LayerWeightMatrix:
    """Nonnegative N x N weights with zero diagonal for one layer-year."""

    entries: np.ndarray
    year: int = 0
    layer: str = ""

    def __post_init__(self):
        w = np.asarray(self.entries, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise StructuralError(f"weight matrix must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise StructuralError("weight matrix has non-finite entries")
        if np.any(w < 0):
            raise StructuralError("weight matrix has negative entries")
        if np.any(np.diagonal(w) != 0):
            raise StructuralError("weight matrix diagonal must be zero")
        if w.flags.writeable:
            w = _frozen(w)
        object.__setattr__(self, "entries", w)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def total(self) -> float:
        return math.fsum(self.entries.ravel())


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """Boolean N x N link indicators: ``entries[i, j]`` is a link i -> j."""

    entries: np.ndarray
    year: int = 0
    layer: str = ""
    threshold: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise StructuralError(f"adjacency must be square, got shape {a.shape}")
        if np.any(np.diagonal(a)):
            raise StructuralError("adjacency diagonal must be false")
        if a.flags.writeable:
            a = _frozen(a, bool)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def aggregate_layers(layers: Sequence[LayerWeightMatrix], year=None) -> LayerWeightMatrix:
    """Entrywise sum of the commodity layers of one year."""
    if not layers:
        raise StructuralError("no layers to aggregate")
    shapes = {l.entries.shape for l in layers}
    if len(shapes) != 1:
        raise StructuralError(f"layer shapes differ: {sorted(shapes)}")
    years = {l.year for l in layers}
    if len(years) != 1:
        raise StructuralError(f"layers span several years: {sorted(years)}")
    total = np.zeros(layers[0].entries.shape)
    for l in layers:
        total += l.entries
    return LayerWeightMatrix(total, layers[0].year if year is None else year, AGGREGATE)


def normalize_layer(raw: LayerWeightMatrix) -> LayerWeightMatrix:
    """Divide every entry by the layer total so the weights sum to one."""
    total = raw.total()
    if not total > 0:
        raise EmptyLayerError(raw.year, raw.layer)
    return LayerWeightMatrix(raw.entries / total, raw.year, raw.layer)


def binarize(layer: LayerWeightMatrix, threshold: float = 0.0) -> AdjacencyMatrix:
    """Links are the entries strictly larger than ``threshold``."""
    if not threshold >= 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    return AdjacencyMatrix(layer.entries > threshold, layer.year, layer.layer, float(threshold))


def positive_weights(layer: LayerWeightMatrix) -> np.ndarray:
    w = layer.entries
    return w[w > 0]


def percentile_threshold(layer: LayerWeightMatrix, p: float) -> float:
    """Nearest-rank p-th percentile of the positive weights of ``layer``.

    The smallest positive weight such that at least p percent of the positive
    weights are less than or equal to it.
    """
    if not 0 < p < 100:
        raise ValueError(f"percentile must lie in (0, 100), got {p}")
    v = np.sort(positive_weights(layer))
    if v.size == 0:
        raise EmptyLayerError(layer.year, layer.layer)
    k = min(max(math.ceil(p * v.size / 100), 1), v.size)
    return float(v[k - 1])


def density(adj: AdjacencyMatrix) -> float:
    n = adj.n
    if n < 2:
        raise ValueError("density needs at least two nodes")
    return int(np.count_nonzero(adj.entries)) / (n * (n - 1))


@dataclass(frozen=True, eq=False)
class MultiNetworkPanel:
    """A balanced T x C family of N x N layer matrices.

    ``raw`` has shape (T, C, N, N) in original value units. ``normalized``
    holds each layer divided by its total; empty layers stay all-zero and
    are flagged in ``empty``. ``aggregate_raw``/``aggregate_normalized`` have
    shape (T, N, N).
    """

    nodes: NodeCatalog
    layers: LayerCatalog
    years: tuple
    raw: np.ndarray
    normalized: np.ndarray
    aggregate_raw: np.ndarray
    aggregate_normalized: np.ndarray
    empty: np.ndarray
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, raw, nodes, layers, years, metadata=None) -> "MultiNetworkPanel":
        """Build a panel from a (T, C, N, N) array of raw values."""
        if not isinstance(nodes, NodeCatalog):
            nodes = NodeCatalog(tuple(nodes))
        if not isinstance(layers, LayerCatalog):
            layers = LayerCatalog(tuple(layers))
        years = tuple(int(y) for y in years)
        if len(set(years)) != len(years):
            raise StructuralError("years must be unique")
        raw = np.asarray(raw, dtype=np.float64)
        T, C, N = len(years), len(layers), len(nodes)
        if raw.shape != (T, C, N, N):
            raise StructuralError(f"raw array shape {raw.shape} != {(T, C, N, N)}")
        norm = np.zeros_like(raw)
        agg_raw = np.zeros((T, N, N))
        agg_norm = np.zeros((T, N, N))
        empty = np.zeros((T, C), dtype=bool)
        for t, year in enumerate(years):
            cells = [LayerWeightMatrix(raw[t, c], year, code) for c, code in enumerate(layers.codes)]
            for c, cell in enumerate(cells):
                try:
                    norm[t, c] = normalize_layer(cell).entries
                except EmptyLayerError:
                    empty[t, c] = True
            agg = aggregate_layers(cells, year)
            agg_raw[t] = agg.entries
            if agg.total() > 0:
                agg_norm[t] = normalize_layer(agg).entries
        return cls(
            nodes, layers, years,
            _frozen(raw), _frozen(norm), _frozen(agg_raw), _frozen(agg_norm),
            _frozen(empty, bool), dict(metadata or {}),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_years(self) -> int:
        return len(self.years)

    def year_index(self, year) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise KeyError(f"year {year} not in panel") from None

    def layer_index(self, code) -> int:
        try:
            return self.layers.index(code)
        except KeyError:
            raise KeyError(f"layer {code!r} not in panel") from None

    def is_empty(self, year, code) -> bool:
        if code == AGGREGATE:
            return not np.any(self.aggregate_raw[self.year_index(year)] > 0)
        return bool(self.empty[self.year_index(year), self.layer_index(code)])

    def raw_layer(self, year, code) -> LayerWeightMatrix:
        t = self.year_index(year)
        if code == AGGREGATE:
            return LayerWeightMatrix(self.aggregate_raw[t], int(year), AGGREGATE)
        return LayerWeightMatrix(self.raw[t, self.layer_index(code)], int(year), str(code))

    def layer(self, year, code) -> LayerWeightMatrix:
        """Normalized weights of layer ``code`` (or ``AGGREGATE``) in ``year``."""
        t = self.year_index(year)
        if code == AGGREGATE:
            return LayerWeightMatrix(self.aggregate_normalized[t], int(year), AGGREGATE)
        return LayerWeightMatrix(self.normalized[t, self.layer_index(code)], int(year), str(code))

    def adjacency(self, year, code, threshold=0.0) -> AdjacencyMatrix:
        return binarize(self.layer(year, code), threshold)

    def nonempty_codes(self, year) -> list:
        t = self.year_index(year)
        return [c for i, c in enumerate(self.layers.codes) if not self.empty[t, i]]
