"""Command-line interface: deterministic file-in/file-out batch commands.

Every analysis command reads one or more edge-list files (``-`` for stdin),
builds the panel and writes its tables into ``--out``. Without ``--out`` the
command's main table goes to stdout. Exit status: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, _kernels
from .connectivity import components, lcc_by_group, lcc_profile
from .correlation import (
    MODES as CORR_MODES,
    WITHIN_PAIRS,
    LayerDistanceMatrix,
    corr_to_distance,
    cross_layer_stat_corr,
    evolution_series,
    interlayer_corr_unweighted,
    interlayer_corr_weighted,
    within_corr_table,
)
from .distributions import (
    DEFAULT_MC_REPS,
    DEFAULT_SEED,
    log_weight_histogram,
    lognormality_report,
    positive_log_weights,
    qq_points,
)
from .errors import DataError, EmptyLayerError
from .ingest import IngestConfig, build_panel, layer_summary, panel_records, parse_records, write_records
from .io import dumps_json, write_csv, write_matrix_csv
from .model import AGGREGATE
from .nodestats import STAT_FIELDS, moments_report, rank_top, stats_table, triangle_shares
from .synth import WEIGHT_MODELS, SynthSpec, generate_raw, layer_codes, node_ids
from .taxonomy import complete_linkage, cut_tree, to_newick

COMMANDS = (
    "ingest", "summary", "stats", "rank", "moments", "connectivity", "distributions",
    "within-corr", "cross-corr", "layer-corr", "taxonomy", "evolution", "synth",
)
MOMENT_STATS = ("density", "w", "nd_in", "nd_out", "ns_in", "ns_out", "ns_in_per_nd_in",
                "ns_out_per_nd_out", "anns_in_in", "anns_in_out", "anns_out_in", "anns_out_out",
                "wcc_all", "wcc_cyc", "wcc_mid", "wcc_in", "wcc_out", "wcentr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


class Sink:
    """Collects output files; with no directory only the primary table is
    echoed to stdout."""

    def __init__(self, out_dir, stdout):
        self.out_dir = out_dir
        self.stdout = stdout
        self.written = []
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    def text(self, name, content, primary=False):
        if self.out_dir:
            path = os.path.join(self.out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(content)
            self.written.append((name, hashlib.sha256(content.encode("utf-8")).hexdigest()))
        elif primary:
            self.stdout.write(content)

    def csv(self, name, header, rows, primary=False):
        buf = io.StringIO()
        write_csv(buf, header, rows)
        self.text(name, buf.getvalue(), primary)


def _floats(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _add_common(p, needs_input=True):
    if needs_input:
        p.add_argument("--input", action="append", required=True, metavar="PATH",
                       help="edge-list file (repeatable; '-' reads stdin)")
        p.add_argument("--year-range", nargs=2, type=int, metavar=("FIRST", "LAST"))
        p.add_argument("--no-balance", action="store_true", help="keep nodes missing in some year")
        p.add_argument("--duplicates", choices=("sum", "last", "error"), default="sum")
    p.add_argument("--out", metavar="DIR", help="output directory (default: main table to stdout)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-layer work")


def _add_year(p):
    p.add_argument("--year", type=int, help="year to analyse (default: first year)")


def _add_layers(p):
    p.add_argument("--layers", default="all",
                   help="comma-separated layer codes, 'all' (layers plus aggregate) or 'aggregate'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tradeplex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tradeplex {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate, balance and canonicalize edge lists")
    _add_common(p)

    p = sub.add_parser("summary", help="per-layer value and link totals")
    _add_common(p)
    _add_year(p)

    p = sub.add_parser("stats", help="node statistics tables")
    _add_common(p)
    _add_year(p)
    _add_layers(p)

    p = sub.add_parser("rank", help="top-k nodes by a statistic")
    _add_common(p)
    _add_year(p)
    _add_layers(p)
    p.add_argument("--stat", default="ns_tot", choices=STAT_FIELDS)
    p.add_argument("--top", type=int, default=20)

    p = sub.add_parser("moments", help="node means/sds relative to the aggregate, triangle shares")
    _add_common(p)
    _add_year(p)
    p.add_argument("--stat", action="append", choices=MOMENT_STATS,
                   help="statistic (repeatable; default all)")
    p.add_argument("--all-pairs", action="store_true",
                   help="average link weights over all pairs instead of positive links")

    p = sub.add_parser("connectivity", help="largest connected components")
    _add_common(p)
    _add_year(p)
    _add_layers(p)
    p.add_argument("--percentiles", type=_floats, default=[90.0, 95.0, 99.0],
                   help="weight percentiles p; links in the top (100 - p)%% are kept")
    p.add_argument("--mode", choices=("weak", "strong"), default="weak")
    p.add_argument("--groups", metavar="CSV", help="node,group file for per-group LCCs")

    p = sub.add_parser("distributions", help="KS and log-normality tests of link weights")
    _add_common(p)
    _add_year(p)
    p.add_argument("--mc-reps", type=int, default=DEFAULT_MC_REPS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--bins", type=int, default=20)

    p = sub.add_parser("within-corr", help="within-layer statistic correlations")
    _add_common(p)
    _add_year(p)
    p.add_argument("--corr", choices=CORR_MODES, default="product-moment")

    p = sub.add_parser("cross-corr", help="cross-layer correlations of one statistic")
    _add_common(p)
    _add_year(p)
    p.add_argument("--stat", default="ns_in", choices=STAT_FIELDS)
    p.add_argument("--corr", choices=CORR_MODES, default="product-moment")

    p = sub.add_parser("layer-corr", help="edge-level inter-layer correlation matrices")
    _add_common(p)
    _add_year(p)
    p.add_argument("--kind", choices=("weighted", "unweighted", "both"), default="both")

    p = sub.add_parser("taxonomy", help="complete-linkage layer dendrograms")
    _add_common(p)
    _add_year(p)
    p.add_argument("--kind", choices=("weighted", "unweighted"), default="unweighted")
    p.add_argument("--cut", type=float, help="also write the clusters below this height")

    p = sub.add_parser("evolution", help="average inter-layer correlation/distance per year")
    _add_common(p)

    p = sub.add_parser("synth", help="write a seeded synthetic edge list")
    _add_common(p, needs_input=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-nodes", type=int, default=60)
    p.add_argument("--n-layers", type=int, default=20)
    p.add_argument("--n-years", type=int, default=4)
    p.add_argument("--first-year", type=int, default=2000)
    p.add_argument("--density", type=_floats, default=[0.1],
                   help="one value, or one per layer")
    p.add_argument("--overlap", type=_floats, default=[0.5],
                   help="one value, or one per year")
    p.add_argument("--weight-model", choices=sorted(WEIGHT_MODELS), default="lognormal")
    p.add_argument("--weight-params", type=_floats)
    return parser


# -- panel and selectors -------------------------------------------------------

def _read_inputs(paths, stdin):
    blobs = []
    for path in paths:
        if path == "-":
            data = stdin.buffer.read() if hasattr(stdin, "buffer") else stdin.read().encode()
            blobs.append(("-", data))
        else:
            with open(path, "rb") as f:
                blobs.append((path, f.read()))
    return blobs


def _load_panel(args, blobs):
    records = []
    for _, data in blobs:
        records.extend(parse_records(data))
    cfg = IngestConfig(
        tuple(args.year_range) if args.year_range else None,
        not args.no_balance,
        args.duplicates,
    )
    return build_panel(records, cfg)


def _year(args, panel):
    year = panel.years[0] if args.year is None else args.year
    panel.year_index(year)
    return year


def _layers(args, panel, with_aggregate=True):
    sel = args.layers.strip()
    if sel == "all":
        return ([AGGREGATE] if with_aggregate else []) + list(panel.layers.codes)
    if sel == AGGREGATE:
        return [AGGREGATE]
    codes = [c.strip() for c in sel.split(",") if c.strip()]
    for c in codes:
        if c != AGGREGATE:
            panel.layer_index(c)
    return codes


def _analysable(args, panel, year):
    """Selected layers; empty ones are skipped under 'all' but rejected when named."""
    codes = _layers(args, panel)
    if args.layers.strip() == "all":
        return [c for c in codes if not panel.is_empty(year, c)]
    for c in codes:
        if panel.is_empty(year, c):
            raise EmptyLayerError(year, c)
    return codes


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- commands -------------------------------------------------------------------

def cmd_ingest(args, panel, sink):
    buf = io.StringIO()
    write_records(panel_records(panel), buf)
    sink.text("edges.csv", buf.getvalue(), primary=True)
    sink.text("balance_report.txt", panel.metadata["balance"].to_text())


def cmd_summary(args, panel, sink):
    year = _year(args, panel)
    s = layer_summary(panel, year)
    rows = [(r.layer_code, r.total_value, r.link_count, r.value_per_link, r.share_of_aggregate)
            for r in s.sorted_by_value()]
    sink.csv(f"layer_summary_{year}.csv",
             ("layer_code", "total_value", "link_count", "value_per_link", "share"), rows, primary=True)
    sink.text(f"summary_{year}.json", dumps_json({
        "year": year,
        "n_nodes": panel.n_nodes,
        "n_layers": panel.n_layers,
        "empty_layers": [c for c in panel.layers.codes if panel.is_empty(year, c)],
        "corr_log_value_density": s.log_value_density_corr,
    }))


def cmd_stats(args, panel, sink):
    year = _year(args, panel)
    codes = _analysable(args, panel, year)
    tables = _pmap(lambda c: stats_table(panel, year, c), codes, args.threads)
    for code, t in zip(codes, tables):
        buf = io.StringIO()
        t.write_csv(buf)
        sink.text(f"stats_{year}_{code}.csv", buf.getvalue(), primary=len(codes) == 1)


def cmd_rank(args, panel, sink):
    year = _year(args, panel)
    codes = _analysable(args, panel, year)
    tables = _pmap(lambda c: stats_table(panel, year, c), codes, args.threads)
    rows = []
    for code, t in zip(codes, tables):
        for k, (node, v) in enumerate(rank_top(t, args.stat, args.top), 1):
            rows.append((code, k, node, v))
    sink.csv(f"rank_{year}_{args.stat}.csv", ("layer", "rank", "node", "value"), rows, primary=True)


def cmd_moments(args, panel, sink):
    year = _year(args, panel)
    names = args.stat or list(MOMENT_STATS)
    reports = _pmap(lambda n: moments_report(panel, year, n, args.all_pairs), names, args.threads)
    rows = []
    for name, rep in zip(names, reports):
        rows.extend((name, r.layer, r.mean, r.sd, r.n, r.pct_of_aggregate) for r in rep)
    sink.csv(f"moments_{year}.csv", ("statistic", "layer", "mean", "sd", "n", "pct_of_aggregate"),
             rows, primary=True)
    tri = []
    for code in [AGGREGATE, *panel.layers.codes]:
        if panel.is_empty(year, code):
            tri.append((code, None, None, None, None))
        else:
            tri.append((code, *triangle_shares(panel.layer(year, code)).network))
    sink.csv(f"triangle_shares_{year}.csv", ("layer", "cyc", "mid", "in", "out"), tri)


def _read_groups(path):
    from csv import reader
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(reader(f))
    if rows and [c.strip().lower() for c in rows[0][:2]] == ["node", "group"]:
        rows = rows[1:]
    return {r[0].strip(): r[1].strip() for r in rows if len(r) >= 2}


def cmd_connectivity(args, panel, sink):
    year = _year(args, panel)
    codes = _analysable(args, panel, year)
    for p in args.percentiles:
        if not 0 <= p < 100:
            raise UsageError(f"percentile must lie in [0, 100), got {p}")
    levels = [100.0 - p for p in args.percentiles]
    ids = panel.nodes.ids

    def job(code):
        layer = panel.layer(year, code)
        base = components(panel.adjacency(year, code), args.mode)
        n0 = int(np.count_nonzero(layer.entries > 0))
        out = [(code, 0, 0.0, n0, base.lcc_size, ";".join(ids[i] for i in base.lcc_members))]
        for p, lv in zip(args.percentiles, lcc_profile(layer, levels, args.mode)):
            out.append((code, p, lv.cut, lv.n_links, lv.lcc_size, ";".join(ids[i] for i in lv.members)))
        return out

    rows = [r for block in _pmap(job, codes, args.threads) for r in block]
    sink.csv(f"lcc_profile_{year}_{args.mode}.csv",
             ("layer", "percentile", "cut", "n_links", "lcc_size", "members"), rows, primary=True)
    if args.groups:
        groups = _read_groups(args.groups)
        per_year = {}
        for y in panel.years:
            per_year[y] = lcc_by_group(panel.adjacency(y, AGGREGATE), groups, ids, args.mode)
        first = per_year[panel.years[0]]
        grows = []
        for k, g in enumerate(first):
            grows.append((g.group, g.size, *[per_year[y][k].percentage for y in panel.years]))
        sink.csv(f"lcc_groups_{args.mode}.csv", ("group", "n", *map(str, panel.years)), grows)


def cmd_distributions(args, panel, sink):
    year = _year(args, panel)
    rep = lognormality_report(panel, year, args.mc_reps, args.seed, threads=args.threads)
    buf = io.StringIO()
    write_matrix_csv(buf, rep.codes, rep.ks_pvalues)
    sink.text(f"ks_pvalues_{year}.csv", buf.getvalue())
    rows = []
    for r in rep.normality:
        L, K = r.lilliefors, r.ks
        rows.append((r.layer, r.n, L and L.statistic, L and L.p_value, K and K.statistic, K and K.p_value))
    sink.csv(f"normality_{year}.csv",
             ("layer", "n", "D_lilliefors", "p_lilliefors", "D_ks", "p_ks"), rows, primary=True)
    hist, qq = [], []
    for code in [AGGREGATE, *panel.layers.codes]:
        if panel.is_empty(year, code):
            continue
        layer = panel.layer(year, code)
        hist.extend((code, lo, hi, n) for lo, hi, n in log_weight_histogram(layer, args.bins))
        x = positive_log_weights(layer)
        if x.size >= 2 and x[-1] > x[0]:
            qq.extend((code, t, e) for t, e in qq_points(x))
    sink.csv(f"histogram_{year}.csv", ("layer", "bin_left", "bin_right", "count"), hist)
    sink.csv(f"qq_{year}.csv", ("layer", "theoretical", "empirical"), qq)
    sink.text(f"distributions_{year}.json", dumps_json({
        "year": year,
        "n_pairs": rep.n_pairs,
        "frac_pairs_p_gt_0.05": rep.frac_pairs_same,
        "frac_layers_reject_lilliefors": rep.frac_reject_lilliefors,
        "frac_layers_reject_ks": rep.frac_reject_ks,
        "skipped_layers": list(rep.skipped),
        "mc_reps": args.mc_reps,
        "seed": args.seed,
    }))


def cmd_within_corr(args, panel, sink):
    year = _year(args, panel)
    table = within_corr_table(panel, year, args.corr, args.threads)
    sink.csv(f"within_corr_{year}.csv", ("layer", *[p[0] for p in WITHIN_PAIRS]),
             [(r.layer, *r.values) for r in table], primary=True)


def _emit_matrix(sink, name, m, primary=False):
    buf = io.StringIO()
    write_matrix_csv(buf, m.codes, m.entries)
    sink.text(f"{name}.csv", buf.getvalue(), primary)
    sink.text(f"{name}.json", dumps_json(m.to_json()))


def cmd_cross_corr(args, panel, sink):
    year = _year(args, panel)
    m = cross_layer_stat_corr(panel, year, args.stat, args.corr, args.threads)
    _emit_matrix(sink, f"cross_corr_{year}_{args.stat}", m, primary=True)


def cmd_layer_corr(args, panel, sink):
    year = _year(args, panel)
    kinds = ("weighted", "unweighted") if args.kind == "both" else (args.kind,)
    for kind in kinds:
        m = (interlayer_corr_weighted if kind == "weighted" else interlayer_corr_unweighted)(panel, year)
        tag = "w" if kind == "weighted" else "u"
        _emit_matrix(sink, f"phi_{tag}_{year}", m, primary=kind == kinds[-1])
        _emit_matrix(sink, f"distance_{tag}_{year}", corr_to_distance(m))


def cmd_taxonomy(args, panel, sink):
    year = _year(args, panel)
    corr = (interlayer_corr_weighted if args.kind == "weighted" else interlayer_corr_unweighted)(panel, year)
    dist = corr_to_distance(corr)
    keep = [i for i, c in enumerate(dist.codes) if c not in corr.undefined]
    if len(keep) < 2:
        raise DataError("fewer than two layers with defined inter-layer distances")
    sub = LayerDistanceMatrix(dist.entries[np.ix_(keep, keep)], dist.kind, dist.year,
                              tuple(dist.codes[i] for i in keep))
    dendro = complete_linkage(sub)
    tag = f"taxonomy_{args.kind}_{year}"
    sink.text(f"{tag}.nwk", to_newick(dendro) + "\n", primary=True)
    sink.csv(f"{tag}_merges.csv", ("step", "cluster_a", "cluster_b", "height", "new_size"),
             dendro.merge_table())
    if corr.undefined:
        sink.text(f"{tag}_dropped.txt", "".join(c + "\n" for c in corr.undefined))
    if args.cut is not None:
        clusters = cut_tree(dendro, args.cut)
        sink.csv(f"{tag}_clusters.csv", ("cluster", "layer"),
                 [(k + 1, code) for k, cl in enumerate(clusters) for code in cl])


def cmd_evolution(args, panel, sink):
    series = evolution_series(panel, args.threads)
    sink.csv("evolution.csv", ("year", "phi_w", "phi_u", "d_w", "d_u"),
             [(r.year, r.phi_w, r.phi_u, r.d_w, r.d_u) for r in series.rows], primary=True)


def cmd_synth(args, sink):
    dens = args.density[0] if len(args.density) == 1 else tuple(args.density)
    ovl = args.overlap[0] if len(args.overlap) == 1 else tuple(args.overlap)
    spec = SynthSpec(
        seed=args.seed, n_nodes=args.n_nodes, n_layers=args.n_layers, n_years=args.n_years,
        density=dens, weight_model=args.weight_model,
        weight_params=tuple(args.weight_params) if args.weight_params else None,
        interlayer_overlap=ovl, first_year=args.first_year,
    )
    raw = generate_raw(spec)
    ids, codes = node_ids(spec.n_nodes), layer_codes(spec.n_layers)
    buf = io.StringIO()
    buf.write("year,layer,exporter,importer,value\n")
    for t in range(spec.n_years):
        for c in range(spec.n_layers):
            ii, jj = np.nonzero(raw[t, c] > 0)
            for i, j in zip(ii.tolist(), jj.tolist()):
                buf.write(f"{spec.first_year + t},{codes[c]},{ids[i]},{ids[j]},{float(raw[t, c, i, j])!r}\n")
    sink.text("edges.csv", buf.getvalue(), primary=True)


HANDLERS = {
    "ingest": cmd_ingest, "summary": cmd_summary, "stats": cmd_stats, "rank": cmd_rank,
    "moments": cmd_moments, "connectivity": cmd_connectivity, "distributions": cmd_distributions,
    "within-corr": cmd_within_corr, "cross-corr": cmd_cross_corr, "layer-corr": cmd_layer_corr,
    "taxonomy": cmd_taxonomy, "evolution": cmd_evolution,
}

_NOT_CONFIG = {"out", "threads", "input", "command"}


def _write_manifest(args, blobs, sink):
    if not sink.out_dir:
        return
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
    manifest = {
        "tool": "tradeplex",
        "version": __version__,
        "command": args.command,
        "config": config,
        "inputs": [{"name": os.path.basename(p) if p != "-" else "-",
                    "sha256": hashlib.sha256(d).hexdigest()} for p, d in blobs],
        "outputs": [{"name": n, "sha256": h} for n, h in sorted(sink.written)],
    }
    with open(os.path.join(sink.out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        f.write(dumps_json(manifest))
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(os.path.join(sink.out_dir, "manifest_time.txt"), "w", encoding="utf-8") as f:
        f.write(f"{stamp} kernels={_kernels.BACKEND}\n")


def run(argv=None, stdin=None, stdout=None, stderr=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "missing command; choose from " + ", ".join(COMMANDS))
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        sink = Sink(args.out, stdout)
        if args.command == "synth":
            blobs = []
            cmd_synth(args, sink)
        else:
            blobs = _read_inputs(args.input, stdin)
            panel = _load_panel(args, blobs)
            HANDLERS[args.command](args, panel, sink)
        _write_manifest(args, blobs, sink)
    except UsageError as e:
        print(str(e), file=stderr)
        return 1
    except (DataError, KeyError) as e:
        print(f"tradeplex: data error: {e}", file=stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"tradeplex: error: {e}", file=stderr)
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
