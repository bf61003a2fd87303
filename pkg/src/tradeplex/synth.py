"""Seeded synthetic multi-networks for tests, demos and CI.

Layer 0 of each year draws every directed pair as a link with probability
``density[0]``. Layer c + 1 copies each pair's link state from layer c with
probability ``overlap`` and otherwise redraws it, with the redraw
probability chosen so that each layer's marginal density equals its target.
Weights are drawn independently per link. All draws come from a
counter-based hash of (seed, year, layer, stream, i, j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LayerCatalog, MultiNetworkPanel, NodeCatalog
from .rng import cell_uniform

WEIGHT_MODELS = {
    "lognormal": (10.0, 2.0),   # mu, sigma of log value
    "pareto": (1.5, 1000.0),    # alpha, xmin
    "uniform": (0.0, 1.0),      # low, high (values strictly above low)
}

_LINK, _KEEP, _REDRAW, _W1, _W2 = range(5)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_nodes: int = 30
    n_layers: int = 5
    n_years: int = 2
    #: scalar or one target per layer, in (0, 1]
    density: float | tuple = 0.1
    weight_model: str = "lognormal"
    weight_params: tuple | None = None
    #: scalar or one value per year, in [0, 1]
    interlayer_overlap: float | tuple = 0.5
    first_year: int = 2000

    def densities(self) -> tuple:
        d = self.density
        return tuple(float(d) for _ in range(self.n_layers)) if np.isscalar(d) else tuple(map(float, d))

    def overlaps(self) -> tuple:
        o = self.interlayer_overlap
        return tuple(float(o) for _ in range(self.n_years)) if np.isscalar(o) else tuple(map(float, o))

    def params(self) -> tuple:
        return tuple(self.weight_params) if self.weight_params is not None else WEIGHT_MODELS[self.weight_model]

    def validate(self) -> None:
        if self.n_nodes < 2 or self.n_layers < 1 or self.n_years < 1:
            raise ValueError("need n_nodes >= 2, n_layers >= 1, n_years >= 1")
        dens, ovl = self.densities(), self.overlaps()
        if len(dens) != self.n_layers:
            raise ValueError("one density per layer required")
        if len(ovl) != self.n_years:
            raise ValueError("one overlap per year required")
        if not all(0 < d <= 1 for d in dens):
            raise ValueError("densities must lie in (0, 1]")
        if not all(0 <= o <= 1 for o in ovl):
            raise ValueError("overlaps must lie in [0, 1]")
        if self.weight_model not in WEIGHT_MODELS:
            raise ValueError(f"weight_model must be one of {sorted(WEIGHT_MODELS)}")
        p = self.params()
        if len(p) != 2:
            raise ValueError("weight_params takes two values")
        if self.weight_model == "lognormal" and not p[1] > 0:
            raise ValueError("lognormal sigma must be positive")
        if self.weight_model == "pareto" and not (p[0] > 0 and p[1] > 0):
            raise ValueError("pareto alpha and xmin must be positive")
        if self.weight_model == "uniform" and not (0 <= p[0] < p[1]):
            raise ValueError("uniform needs 0 <= low < high")
        for o in ovl:
            for c in range(1, self.n_layers):
                redraw_probability(dens[c - 1], dens[c], o)


def redraw_probability(prev: float, target: float, overlap: float) -> float:
    """Redraw link probability q with overlap * prev + (1 - overlap) q = target."""
    if overlap >= 1:
        if not math.isclose(prev, target, rel_tol=0, abs_tol=1e-12):
            raise ValueError(
                f"overlap 1 cannot change density from {prev} to {target}"
            )
        return 0.0
    q = (target - overlap * prev) / (1 - overlap)
    if not -1e-12 <= q <= 1 + 1e-12:
        raise ValueError(
            f"density {target} unreachable from {prev} with overlap {overlap}"
        )
    return min(max(q, 0.0), 1.0)


def _weights(spec: SynthSpec, n: int, year: int, layer: int) -> np.ndarray:
    u1 = cell_uniform(n, spec.seed, year, layer, _W1)
    a, b = spec.params()
    if spec.weight_model == "lognormal":
        u2 = cell_uniform(n, spec.seed, year, layer, _W2)
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        return np.exp(a + b * z)
    if spec.weight_model == "pareto":
        return b * (1.0 - u1) ** (-1.0 / a)
    return b - (b - a) * u1  # in (low, high]


def generate_raw(spec: SynthSpec) -> np.ndarray:
    """(T, C, N, N) raw values."""
    spec.validate()
    n, C, T = spec.n_nodes, spec.n_layers, spec.n_years
    dens, ovl = spec.densities(), spec.overlaps()
    off = ~np.eye(n, dtype=bool)
    raw = np.zeros((T, C, n, n))
    for t in range(T):
        year = spec.first_year + t
        links = (cell_uniform(n, spec.seed, year, 0, _LINK) < dens[0]) & off
        for c in range(C):
            if c > 0:
                q = redraw_probability(dens[c - 1], dens[c], ovl[t])
                keep = cell_uniform(n, spec.seed, year, c, _KEEP) < ovl[t]
                fresh = cell_uniform(n, spec.seed, year, c, _REDRAW) < q
                links = np.where(keep, links, fresh) & off
            raw[t, c][links] = _weights(spec, n, year, c)[links]
    return raw


def node_ids(n: int) -> tuple:
    width = max(3, len(str(n - 1)))
    return tuple(f"N{i:0{width}d}" for i in range(n))


def layer_codes(c: int) -> tuple:
    width = max(2, len(str(c)))
    return tuple(f"{k:0{width}d}" for k in range(1, c + 1))


def generate_panel(spec: SynthSpec) -> MultiNetworkPanel:
    raw = generate_raw(spec)
    years = tuple(spec.first_year + t for t in range(spec.n_years))
    return MultiNetworkPanel.from_raw(
        raw, NodeCatalog(node_ids(spec.n_nodes)), LayerCatalog(layer_codes(spec.n_layers)), years,
        metadata={"synth": spec},
    )
