"""Edge-list ingestion: parse flow records and assemble a balanced panel.

Input files are comma- or tab-separated text with a header row naming the
columns ``year, layer, exporter, importer, value`` (any order, any case).
Each row is one directed flow exporter -> importer. Mirror-flow
reconciliation (e.g. keeping importer-reported flows only) belongs to
preprocessing; records arrive already oriented.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConflictError, IngestionError, ParseError, ValidationError
from .model import AGGREGATE, LayerCatalog, MultiNetworkPanel, NodeCatalog, binarize, density

COLUMNS = ("year", "layer", "exporter", "importer", "value")
DUPLICATE_POLICIES = ("sum", "last", "error")


@dataclass(frozen=True)
class EdgeRecord:
    year: int
    layer_code: str
    exporter: str
    importer: str
    value: float


@dataclass(frozen=True)
class IngestConfig:
    year_range: tuple | None = None
    balance_panel: bool = True
    duplicate_policy: str = "sum"

    def __post_init__(self):
        if self.year_range is not None:
            lo, hi = self.year_range
            if lo > hi:
                raise ValueError(f"empty year range {self.year_range}")
        if self.duplicate_policy not in DUPLICATE_POLICIES:
            raise ValueError(f"duplicate_policy must be one of {DUPLICATE_POLICIES}")


@dataclass(frozen=True)
class BalanceReport:
    """Which observed nodes were kept and which were dropped by balancing."""

    retained: tuple
    dropped: tuple
    missing_years: dict = field(default_factory=dict)
    duplicates_combined: int = 0

    def to_text(self) -> str:
        lines = [
            f"retained nodes: {len(self.retained)}",
            f"dropped nodes: {len(self.dropped)}",
        ]
        for node in self.dropped:
            years = ",".join(str(y) for y in self.missing_years.get(node, ()))
            lines.append(f"  {node}\tmissing in: {years}")
        lines.append(f"duplicate records combined: {self.duplicates_combined}")
        return "\n".join(lines) + "\n"


def code_sort_key(code: str):
    """Numeric codes in numeric order, then everything else lexicographically."""
    return (0, int(code), code) if code.isdigit() else (1, 0, code)


def _text_stream(stream):
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(bytes(stream).decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def parse_records(stream, delimiter: str | None = None) -> list[EdgeRecord]:
    """Parse delimiter-separated flow records.

    Parameters
    ----------
    stream : bytes, str, or a text/binary file object
        UTF-8 content with a header row.
    delimiter : str, optional
        ``","`` or ``"\\t"``. Detected from the header line when omitted.
    """
    f = _text_stream(stream)
    header_line = f.readline()
    if not header_line.strip():
        raise ParseError(1, None, "missing header row")
    header_line = header_line.lstrip("﻿")
    if delimiter is None:
        delimiter = "\t" if header_line.count("\t") > header_line.count(",") else ","
    header = [h.strip().lower() for h in next(csv.reader([header_line], delimiter=delimiter))]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise ParseError(1, missing[0], f"header lacks column(s) {missing}")
    pos = {c: header.index(c) for c in COLUMNS}
    width = len(header)

    records = []
    for offset, row in enumerate(csv.reader(f, delimiter=delimiter)):
        line = offset + 2
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise ParseError(line, None, f"expected {width} fields, got {len(row)}")
        cells = {c: row[pos[c]].strip() for c in COLUMNS}
        try:
            year = int(cells["year"])
        except ValueError:
            raise ParseError(line, "year", f"not an integer: {cells['year']!r}") from None
        for col in ("layer", "exporter", "importer"):
            if not cells[col]:
                raise ParseError(line, col, "empty field")
        try:
            value = float(cells["value"])
        except ValueError:
            raise ParseError(line, "value", f"not a number: {cells['value']!r}") from None
        if not math.isfinite(value):
            raise ParseError(line, "value", f"not finite: {cells['value']!r}")
        if value < 0:
            raise ValidationError(line, f"negative value {cells['value']}")
        if cells["exporter"] == cells["importer"]:
            raise ValidationError(line, f"self-flow {cells['exporter']} -> {cells['importer']}")
        if cells["layer"] == AGGREGATE:
            raise ValidationError(line, f"layer code {AGGREGATE!r} is reserved")
        records.append(EdgeRecord(year, cells["layer"], cells["exporter"], cells["importer"], value))
    return records


def write_records(records, stream, delimiter: str = ",") -> None:
    """Write records in the ingestion format; floats round-trip exactly."""
    w = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow((r.year, r.layer_code, r.exporter, r.importer, repr(float(r.value))))


def build_panel(records, config: IngestConfig | None = None) -> MultiNetworkPanel:
    """Assemble a :class:`MultiNetworkPanel` from flow records.

    Every record row (zero-valued ones included) marks its two nodes as
    observed in that year; zero values never create links. When balancing,
    only nodes observed in every retained year are kept. The
    :class:`BalanceReport` is stored under ``panel.metadata["balance"]``.
    """
    config = config or IngestConfig()
    recs = list(records)
    if config.year_range is not None:
        lo, hi = config.year_range
        recs = [r for r in recs if lo <= r.year <= hi]
    if not recs:
        raise IngestionError("no flow records (after year filtering)")

    years = sorted({r.year for r in recs})
    codes = sorted({r.layer_code for r in recs}, key=code_sort_key)
    seen = defaultdict(set)
    for r in recs:
        seen[r.exporter].add(r.year)
        seen[r.importer].add(r.year)
    observed = sorted(seen)
    if config.balance_panel:
        retained = [n for n in observed if len(seen[n]) == len(years)]
        dropped = [n for n in observed if len(seen[n]) != len(years)]
    else:
        retained, dropped = observed, []
    if not retained:
        raise IngestionError("no node is observed in every year; balanced panel is empty")
    missing = {n: tuple(y for y in years if y not in seen[n]) for n in dropped}

    node_ix = {n: i for i, n in enumerate(retained)}
    year_ix = {y: i for i, y in enumerate(years)}
    code_ix = {c: i for i, c in enumerate(codes)}

    cells = {}
    collisions = []
    for r in recs:
        i, j = node_ix.get(r.exporter), node_ix.get(r.importer)
        if i is None or j is None:
            continue
        key = (year_ix[r.year], code_ix[r.layer_code], i, j)
        if key in cells:
            collisions.append((r.year, r.layer_code, r.exporter, r.importer))
            if config.duplicate_policy == "sum":
                cells[key].append(r.value)
            elif config.duplicate_policy == "last":
                cells[key] = [r.value]
        else:
            cells[key] = [r.value]
    if collisions and config.duplicate_policy == "error":
        raise ConflictError(sorted(set(collisions)))

    raw = np.zeros((len(years), len(codes), len(retained), len(retained)))
    for (t, c, i, j), values in cells.items():
        raw[t, c, i, j] = math.fsum(values)

    report = BalanceReport(tuple(retained), tuple(dropped), missing, len(collisions))
    return MultiNetworkPanel.from_raw(
        raw, NodeCatalog(tuple(retained)), LayerCatalog(tuple(codes)), years,
        metadata={"balance": report},
    )


def panel_records(panel: MultiNetworkPanel) -> list[EdgeRecord]:
    """Positive raw flows of a panel as records, in (year, layer, i, j) order."""
    out = []
    ids = panel.nodes.ids
    for t, year in enumerate(panel.years):
        for c, code in enumerate(panel.layers.codes):
            ii, jj = np.nonzero(panel.raw[t, c] > 0)
            for i, j in zip(ii.tolist(), jj.tolist()):
                out.append(EdgeRecord(year, code, ids[i], ids[j], float(panel.raw[t, c, i, j])))
    return out


@dataclass(frozen=True)
class LayerSummaryRow:
    layer_code: str
    total_value: float
    link_count: int
    value_per_link: float | None
    share_of_aggregate: float


@dataclass(frozen=True)
class LayerSummary:
    year: int
    rows: tuple
    #: Pearson correlation across non-empty layers of log total value vs density
    log_value_density_corr: float | None

    def sorted_by_value(self) -> list[LayerSummaryRow]:
        return sorted(self.rows, key=lambda r: (-r.total_value, code_sort_key(r.layer_code)))


def layer_summary(panel: MultiNetworkPanel, year) -> LayerSummary:
    """Per-layer total value, link count, value per link and aggregate share."""
    from .correlation import pearson

    t = panel.year_index(year)
    agg_total = math.fsum(panel.aggregate_raw[t].ravel())
    rows, logv, dens = [], [], []
    for c, code in enumerate(panel.layers.codes):
        x = panel.raw[t, c]
        total = math.fsum(x.ravel())
        links = int(np.count_nonzero(x > 0))
        rows.append(LayerSummaryRow(
            code, total, links,
            total / links if links else None,
            total / agg_total if agg_total > 0 else 0.0,
        ))
        if links and panel.n_nodes >= 2:
            logv.append(math.log(total))
            dens.append(density(binarize(panel.raw_layer(year, code))))
    corr = pearson(logv, dens) if len(logv) >= 2 else None
    if corr is not None and math.isnan(corr):
        corr = None
    return LayerSummary(int(year), tuple(rows), corr)
