import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from tradeplex.cli import COMMANDS, run
from tradeplex.correlation import interlayer_corr_unweighted
from tradeplex.io import write_matrix_csv
from tradeplex.synth import SynthSpec, generate_panel
from tradeplex.taxonomy import newick_cophenetic


def call(argv, stdin_text=""):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdin=io.StringIO(stdin_text), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def edges(tmp_path_factory):
    code, text, _ = call(["synth", "--seed", "7", "--n-nodes", "20", "--n-layers", "5",
                          "--n-years", "2", "--density", "0.2", "--overlap", "0.6"])
    assert code == 0
    path = tmp_path_factory.mktemp("data") / "edges.csv"
    path.write_text(text)
    return path


def test_synth_output_format():
    code, text, _ = call(["synth", "--seed", "1", "--n-nodes", "5", "--n-layers", "2", "--n-years", "1",
                          "--density", "0.5"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "year,layer,exporter,importer,value"
    assert all(line.startswith("2000,") for line in lines[1:])


def test_pipeline_matches_library():
    _, synth_text, _ = call(["synth", "--seed", "7"])
    code, canon, _ = call(["ingest", "--input", "-"], synth_text)
    assert code == 0
    code, table, _ = call(["layer-corr", "--input", "-", "--kind", "unweighted"], canon)
    assert code == 0
    panel = generate_panel(SynthSpec(seed=7, n_nodes=60, n_layers=20, n_years=4))
    m = interlayer_corr_unweighted(panel, 2000)
    buf = io.StringIO()
    write_matrix_csv(buf, m.codes, m.entries)
    assert table == buf.getvalue()


def test_pipeline_through_processes():
    env = dict(os.environ)
    synth = subprocess.run([sys.executable, "-m", "tradeplex", "synth", "--seed", "3", "--n-nodes", "12",
                            "--n-layers", "4", "--n-years", "1", "--density", "0.3"],
                           capture_output=True, check=True, env=env)
    corr = subprocess.run([sys.executable, "-m", "tradeplex", "layer-corr", "--input", "-",
                           "--kind", "weighted"], input=synth.stdout, capture_output=True, env=env)
    assert corr.returncode == 0, corr.stderr
    rows = corr.stdout.decode().splitlines()
    assert len(rows) == 5


def test_taxonomy_outputs(edges, tmp_path):
    out = tmp_path / "tax"
    code, _, err = call(["taxonomy", "--input", str(edges), "--out", str(out), "--cut", "0.5"])
    assert code == 0, err
    nwk = (out / "taxonomy_unweighted_2000.nwk").read_text()
    assert nwk.endswith(";\n")
    merges = (out / "taxonomy_unweighted_2000_merges.csv").read_text().splitlines()
    assert merges[0] == "step,cluster_a,cluster_b,height,new_size"
    assert len(merges) == 1 + 4
    assert (out / "taxonomy_unweighted_2000_clusters.csv").exists()
    # the tree must encode the distances written by layer-corr into a valid ultrametric
    codes = tuple(f"{k:02d}" for k in range(1, 6))
    coph = newick_cophenetic(nwk.strip(), codes)
    assert np.all(np.diag(coph) == 0) and np.all(coph == coph.T)


def test_stdout_only_primary(edges):
    code, text, _ = call(["layer-corr", "--input", str(edges)])
    assert code == 0
    assert text.splitlines()[0].startswith("layer,") or text.splitlines()[0].startswith(",")
    assert "{" not in text


def test_manifest(edges, tmp_path):
    out = tmp_path / "m"
    assert call(["summary", "--input", str(edges), "--out", str(out)])[0] == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["tool"] == "tradeplex" and man["command"] == "summary"
    assert "threads" not in man["config"] and "out" not in man["config"]
    assert man["inputs"][0]["name"] == "edges.csv"
    names = sorted(p for p in os.listdir(out) if p not in ("manifest.json", "manifest_time.txt"))
    assert [o["name"] for o in man["outputs"]] == names
    assert "kernels=" in (out / "manifest_time.txt").read_text()


@pytest.mark.parametrize("cmd", [c for c in COMMANDS if c != "synth"])
def test_every_command_runs(cmd, edges, tmp_path):
    extra = {"distributions": ["--mc-reps", "50"]}.get(cmd, [])
    code, _, err = call([cmd, "--input", str(edges), "--out", str(tmp_path / cmd), *extra])
    assert code == 0, err
    assert (tmp_path / cmd / "manifest.json").exists()


def test_deterministic_across_threads(edges, tmp_path):
    trees = []
    for k, threads in enumerate(("1", "3", "1")):
        out = tmp_path / f"r{k}"
        assert call(["stats", "--input", str(edges), "--out", str(out), "--threads", threads])[0] == 0
        trees.append({p: (out / p).read_bytes() for p in os.listdir(out) if p != "manifest_time.txt"})
    assert trees[0] == trees[1] == trees[2]


def test_usage_errors(edges):
    code, _, err = call([])
    assert code == 1 and "usage" in err
    code, _, err = call(["frobnicate"])
    assert code == 1 and "usage" in err
    assert call(["stats", "--input", str(edges), "--threads", "0"])[0] == 1
    assert call(["stats"])[0] == 1
    assert call(["connectivity", "--input", str(edges), "--percentiles", "100"])[0] == 1
    assert call(["stats", "--input", "/nonexistent/edges.csv"])[0] == 1
    assert call(["--version"])[0] == 0


def test_data_errors(edges):
    code, _, err = call(["summary", "--input", "-"], "year,layer,exporter,importer,value\n2000,01,A,B,abc\n")
    assert code == 2 and "data error" in err
    assert call(["summary", "--input", str(edges), "--year", "1999"])[0] == 2
    assert call(["stats", "--input", str(edges), "--layers", "zz"])[0] == 2
    one = "year,layer,exporter,importer,value\n2000,01,A,B,1\n2000,01,B,C,2\n2000,02,C,A,0\n"
    code, _, err = call(["stats", "--input", "-", "--layers", "02"], one)
    assert code == 2 and "02" in err
    assert call(["stats", "--input", "-"], one)[0] == 0
    assert call(["taxonomy", "--input", "-"], one)[0] == 2
