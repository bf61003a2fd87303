"""Connected components under weak and strong (reciprocated-link) connectivity.

Two nodes are weakly connected when at least one directed link joins them
and strongly connected when the link is reciprocated. Strong here is about
edge reciprocation, not mutual reachability along directed paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyLayerError
from .model import AdjacencyMatrix, LayerWeightMatrix, positive_weights

MODES = ("weak", "strong")


@dataclass(frozen=True, eq=False)
class ComponentPartition:
    mode: str
    #: component id per node: the smallest node index in its component
    assignment: np.ndarray
    sizes: dict
    lcc_members: tuple

    @property
    def lcc_size(self) -> int:
        return len(self.lcc_members)

    def components(self) -> list[tuple]:
        """Member tuples ordered by component id."""
        groups = {}
        for i, c in enumerate(self.assignment.tolist()):
            groups.setdefault(c, []).append(i)
        return [tuple(groups[c]) for c in sorted(groups)]


def _undirected(adj: np.ndarray, mode: str) -> np.ndarray:
    if mode == "weak":
        return adj | adj.T
    if mode == "strong":
        return adj & adj.T
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def components(adj: AdjacencyMatrix, mode: str = "weak") -> ComponentPartition:
    """Partition the nodes into components.

    The largest component wins ties by smallest component id; a graph with
    no links has a singleton LCC.
    """
    und = _undirected(np.asarray(adj.entries, dtype=bool), mode)
    src, dst = np.nonzero(np.triu(und, 1))
    labels = _kernels.union_find_labels(
        und.shape[0], src.astype(np.int64), dst.astype(np.int64)
    )
    ids, counts = np.unique(labels, return_counts=True)
    sizes = dict(zip(ids.tolist(), counts.tolist()))
    if ids.size:
        best = ids[np.argmax(counts)]  # argmax returns the first, i.e. smallest id
        members = tuple(np.flatnonzero(labels == best).tolist())
    else:
        members = ()
    return ComponentPartition(mode, labels, sizes, members)


def largest_cut(layer: LayerWeightMatrix, largest: float) -> float:
    """Weight cut keeping the ``largest`` percent strongest positive links.

    Returns the k-th largest positive weight, k = ceil(largest * n / 100);
    links with weight >= the cut are kept, so ties at the cut may retain a
    little more than the requested share.
    """
    if not 0 < largest <= 100:
        raise ValueError(f"largest percentage must lie in (0, 100], got {largest}")
    v = np.sort(positive_weights(layer))[::-1]
    if v.size == 0:
        raise EmptyLayerError(layer.year, layer.layer)
    k = min(max(math.ceil(largest * v.size / 100), 1), v.size)
    return float(v[k - 1])


@dataclass(frozen=True)
class LccLevel:
    largest: float
    cut: float
    n_links: int
    lcc_size: int
    members: tuple


def lcc_profile(layer: LayerWeightMatrix, largest, mode: str = "weak") -> list[LccLevel]:
    """LCC size and members when only the strongest links are kept.

    ``largest`` lists percentages x: "largest x%" keeps the links whose
    weight is among the x% largest positive weights (x = 100 keeps all).
    """
    out = []
    w = layer.entries
    for x in largest:
        cut = largest_cut(layer, x)
        kept = w >= cut
        np.fill_diagonal(kept, False)
        part = components(AdjacencyMatrix(kept, layer.year, layer.layer, cut), mode)
        out.append(LccLevel(float(x), cut, int(np.count_nonzero(kept)), part.lcc_size, part.lcc_members))
    return out


@dataclass(frozen=True)
class GroupLcc:
    group: str
    size: int
    lcc_size: int

    @property
    def percentage(self) -> float:
        return 100.0 * self.lcc_size / self.size if self.size else math.nan


RESIDUAL_GROUP = "(ungrouped)"


def lcc_by_group(adj: AdjacencyMatrix, groups, node_ids, mode: str = "strong") -> list[GroupLcc]:
    """LCC of the subgraph induced by each group's nodes.

    ``groups`` maps node id to group label; nodes without a label form a
    residual group. Groups are reported in label order.
    """
    members = {}
    for i, node in enumerate(node_ids):
        members.setdefault(groups.get(node, RESIDUAL_GROUP), []).append(i)
    a = np.asarray(adj.entries, dtype=bool)
    out = []
    for g in sorted(members):
        ix = np.array(members[g])
        sub = AdjacencyMatrix(a[np.ix_(ix, ix)])
        out.append(GroupLcc(g, ix.size, components(sub, mode).lcc_size))
    return out

