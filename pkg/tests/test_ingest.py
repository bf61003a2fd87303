import io
import math
from collections import defaultdict

import numpy as np
import pytest

from tradeplex.errors import ConflictError, IngestionError, ParseError, ValidationError
from tradeplex.ingest import (
    EdgeRecord,
    IngestConfig,
    build_panel,
    layer_summary,
    panel_records,
    parse_records,
    write_records,
)
from tradeplex.model import AGGREGATE
from tradeplex.synth import SynthSpec, generate_panel

HEADER = "year,layer,exporter,importer,value\n"


def test_parse_single_row():
    recs = parse_records(HEADER + "2003,84,DEU,USA,1000.5\n")
    assert recs == [EdgeRecord(2003, "84", "DEU", "USA", 1000.5)]


def test_parse_bytes_and_binary_stream():
    data = (HEADER + "2003,84,DEU,USA,1\n").encode()
    assert parse_records(data) == parse_records(io.BytesIO(data))


def test_parse_negative_value():
    with pytest.raises(ValidationError) as exc:
        parse_records(HEADER + "2003,84,DEU,USA,1\n2003,84,FRA,USA,-3\n")
    assert exc.value.line == 3


def test_parse_self_flow_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_records(HEADER + "2003,84,DEU,DEU,1\n")
    assert exc.value.line == 2


@pytest.mark.parametrize("row, column", [
    ("x,84,DEU,USA,1", "year"),
    ("2003,84,DEU,USA,abc", "value"),
    ("2003,,DEU,USA,1", "layer"),
    ("2003,84,DEU,USA,nan", "value"),
])
def test_parse_malformed_field(row, column):
    with pytest.raises(ParseError) as exc:
        parse_records(HEADER + row + "\n")
    assert exc.value.line == 2 and exc.value.column == column


def test_parse_wrong_width_and_missing_header():
    with pytest.raises(ParseError) as exc:
        parse_records(HEADER + "2003,84,DEU\n")
    assert exc.value.line == 2
    with pytest.raises(ParseError):
        parse_records("year,layer,exporter,value\n2003,84,DEU,1\n")
    with pytest.raises(ParseError):
        parse_records("")


def test_parse_tab_and_free_column_order():
    text = "Value\tIMPORTER\tYear\tExporter\tLayer\n2.5\tUSA\t2001\tDEU\t07\n"
    assert parse_records(text) == [EdgeRecord(2001, "07", "DEU", "USA", 2.5)]


def test_reserved_layer_code():
    with pytest.raises(ValidationError):
        parse_records(HEADER + f"2003,{AGGREGATE},DEU,USA,1\n")


def test_round_trip_10k_rows():
    rng = np.random.default_rng(0)
    nodes = [f"C{k:02d}" for k in range(40)]
    recs = []
    for _ in range(10_000):
        i, j = rng.choice(40, 2, replace=False)
        v = float(rng.lognormal(8, 3)) if rng.random() > 0.05 else 0.0
        recs.append(EdgeRecord(int(rng.integers(1995, 2005)), str(rng.integers(1, 98)),
                               nodes[i], nodes[j], v))
    buf = io.StringIO()
    write_records(recs, buf)
    assert parse_records(buf.getvalue()) == recs
    buf = io.StringIO()
    write_records(recs, buf, delimiter="\t")
    assert parse_records(buf.getvalue()) == recs


def test_build_two_nodes_one_link():
    p = build_panel([EdgeRecord(2000, "1", "A", "B", 3.0)])
    assert p.raw.shape == (1, 1, 2, 2)
    assert p.layer(2000, "1").entries[0, 1] == 1.0


def test_balancing_drops_and_reports():
    recs = [
        EdgeRecord(2000, "1", "A", "B", 1.0),
        EdgeRecord(2000, "1", "B", "C", 1.0),
        EdgeRecord(2001, "1", "A", "B", 2.0),
    ]
    p = build_panel(recs)
    rep = p.metadata["balance"]
    assert p.nodes.ids == ("A", "B")
    assert rep.dropped == ("C",) and rep.missing_years == {"C": (2001,)}
    assert set(rep.retained) | set(rep.dropped) == {"A", "B", "C"}
    assert not set(rep.retained) & set(rep.dropped)
    assert "C" in rep.to_text()
    q = build_panel(recs, IngestConfig(balance_panel=False))
    assert q.nodes.ids == ("A", "B", "C")


def test_zero_record_counts_as_observed_but_not_linked():
    recs = [
        EdgeRecord(2000, "1", "A", "B", 1.0),
        EdgeRecord(2001, "1", "A", "B", 1.0),
        EdgeRecord(2001, "1", "A", "C", 0.0),
        EdgeRecord(2000, "1", "C", "A", 2.0),
    ]
    p = build_panel(recs)
    assert p.nodes.ids == ("A", "B", "C")
    assert p.raw[1, 0, 0, 2] == 0.0


def _planted(seed):
    rng = np.random.default_rng(seed)
    nodes = list("ABCDEFGH")
    recs = []
    for _ in range(600):
        i, j = rng.choice(8, 2, replace=False)
        recs.append(EdgeRecord(2000 + int(rng.integers(0, 2)), str(rng.integers(1, 4)),
                               nodes[i], nodes[j], float(rng.integers(0, 1000)) / 7))
    recs += [EdgeRecord(y, "1", a, b, 1.0) for y in (2000, 2001) for a in nodes for b in nodes if a != b]
    return recs


def test_duplicates_sum_matches_group_by():
    recs = _planted(1)
    p = build_panel(recs)
    groups = defaultdict(list)
    for r in recs:
        groups[(r.year, r.layer_code, r.exporter, r.importer)].append(r.value)
    for (y, c, a, b), vals in groups.items():
        got = p.raw[p.year_index(y), p.layer_index(c), p.nodes.index(a), p.nodes.index(b)]
        assert got == pytest.approx(sum(vals), rel=1e-12)
    assert p.metadata["balance"].duplicates_combined == len(recs) - len(groups)


def test_duplicate_policies():
    recs = [EdgeRecord(2000, "1", "A", "B", 1.0), EdgeRecord(2000, "1", "A", "B", 5.0)]
    assert build_panel(recs).raw[0, 0, 0, 1] == 6.0
    assert build_panel(recs, IngestConfig(duplicate_policy="last")).raw[0, 0, 0, 1] == 5.0
    with pytest.raises(ConflictError) as exc:
        build_panel(recs, IngestConfig(duplicate_policy="error"))
    assert exc.value.keys == [(2000, "1", "A", "B")]
    with pytest.raises(ValueError):
        IngestConfig(duplicate_policy="mean")


def test_year_filter_and_empty():
    recs = _planted(2)
    p = build_panel(recs, IngestConfig(year_range=(2001, 2001)))
    assert p.years == (2001,)
    with pytest.raises(IngestionError):
        build_panel(recs, IngestConfig(year_range=(1990, 1991)))
    with pytest.raises(IngestionError):
        build_panel([])
    with pytest.raises(ValueError):
        IngestConfig(year_range=(2002, 2001))


def test_empty_layer_kept_and_flagged():
    recs = [EdgeRecord(2000, "1", "A", "B", 1.0), EdgeRecord(2000, "2", "A", "B", 0.0)]
    p = build_panel(recs)
    assert p.layers.codes == ("1", "2")
    assert p.is_empty(2000, "2")


def test_layer_codes_natural_order():
    recs = [EdgeRecord(2000, c, "A", "B", 1.0) for c in ("10", "2", "1a", "01")]
    assert build_panel(recs).layers.codes == ("01", "2", "10", "1a")


def test_build_deterministic():
    recs = _planted(3)
    a, b = build_panel(recs), build_panel(list(recs))
    assert a.raw.tobytes() == b.raw.tobytes()
    assert a.normalized.tobytes() == b.normalized.tobytes()


def test_panel_records_round_trip():
    p = generate_panel(SynthSpec(seed=4, n_nodes=10, n_layers=3, n_years=2, density=0.3))
    q = build_panel(panel_records(p))
    assert q.raw.tobytes() == p.raw.tobytes()


def test_layer_summary_examples():
    s = layer_summary(build_panel([
        EdgeRecord(2000, "1", "A", "B", 2.0), EdgeRecord(2000, "1", "B", "A", 3.0),
    ]), 2000)
    (row,) = s.rows
    assert (row.total_value, row.link_count, row.value_per_link, row.share_of_aggregate) == (5.0, 2, 2.5, 1.0)

    s = layer_summary(build_panel([
        EdgeRecord(2000, "1", "A", "B", 80.0), EdgeRecord(2000, "2", "A", "B", 20.0),
    ]), 2000)
    assert [r.share_of_aggregate for r in s.rows] == [0.8, 0.2]
    assert [r.layer_code for r in s.sorted_by_value()] == ["1", "2"]


def test_layer_summary_reaccumulation():
    recs = _planted(5)
    p = build_panel(recs)
    for year in p.years:
        s = layer_summary(p, year)
        tot = defaultdict(float)
        cells = defaultdict(float)
        for r in recs:
            if r.year == year:
                tot[r.layer_code] += r.value
                cells[(r.layer_code, r.exporter, r.importer)] += r.value
        for row in s.rows:
            assert row.total_value == pytest.approx(tot[row.layer_code], rel=1e-12)
            links = sum(1 for (c, _, _), v in cells.items() if c == row.layer_code and v > 0)
            assert row.link_count == links
            assert row.value_per_link == pytest.approx(tot[row.layer_code] / links, rel=1e-12)
        assert math.fsum(r.share_of_aggregate for r in s.rows) == pytest.approx(1, abs=1e-9)
        agg = math.fsum(p.aggregate_raw[p.year_index(year)].ravel())
        assert math.fsum(r.total_value for r in s.rows) == pytest.approx(agg, rel=1e-9)
        assert s.log_value_density_corr is None or -1 <= s.log_value_density_corr <= 1
