"""End-to-end CLI runs through the console entry point."""

import json

import numpy as np
import pytest

from scotchtape.cli import main
from scotchtape.graph import read_annotations_tsv, read_graph_tsv, read_partition_tsv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def instance(tmp_path):
    """A small generated graph + planted partition on disk."""
    graph = tmp_path / "graph.tsv"
    part = tmp_path / "part.tsv"
    code = run(
        "generate", "--n", 400, "--c", 8, "--eps", 0.1, "--seed", 0,
        "--out", graph, "--partition-out", part,
    )
    assert code == 0
    return tmp_path, graph, part


def test_generate_outputs(instance):
    tmp, graph, part = instance
    g = read_graph_tsv(graph)
    assert g.n_nodes == 400
    assert g.n_edges == 1600  # exact edge budget c N / 2
    p = read_partition_tsv(part)
    assert p.n_groups == 2 and p.n_nodes == 400


def test_generate_rejects_odd_n(tmp_path):
    assert run("generate", "--n", 401, "--c", 8, "--eps", 0.1, "--out", tmp_path / "g") == 2


def test_annotate_kinds(instance):
    tmp, graph, part = instance
    uni = tmp / "uni.tsv"
    assert run("annotate", "--kind", "uniform", "--R", 2, "--partition", part, "--out", uni) == 0
    assert read_annotations_tsv(uni).n_labels == 2

    grp = tmp / "grp.tsv"
    assert run("annotate", "--kind", "group", "--partition", part, "--out", grp) == 0
    assert read_annotations_tsv(grp).n_labels == 2

    noisy = tmp / "noisy.tsv"
    assert (
        run(
            "annotate", "--kind", "noisy", "--R", 2, "--dstar", 50, "--xi", 0.2,
            "--seed", 1, "--partition", part, "--out", noisy,
        )
        == 0
    )
    ann = read_annotations_tsv(noisy)
    assert all(len(m) == 50 for m in ann.labels)


def test_spectral_csv(instance):
    tmp, graph, part = instance
    out = tmp / "spect.csv"
    assert run("spectral", "--graph", graph, "--k", 2, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "eigenvalue,component_index,phi,phi_primed"
    assert len(lines) == 1 + 2 * 400
    top = float(lines[1].split(",")[0])
    assert abs(top - 2.0) < 1e-8


def test_perturb_csv(tmp_path):
    # two 6-cliques plus a bridge: a gap large enough for the series to converge
    graph = tmp_path / "g.tsv"
    edges = [
        (b + i, b + j) for b in (0, 6) for i in range(6) for j in range(i + 1, 6)
    ] + [(5, 6)]
    graph.write_text("#nodes=12\n" + "".join(f"{i}\t{j}\n" for i, j in edges))
    ann = tmp_path / "a.tsv"
    ann.write_text("#nodes=12\nmark\t0\n")
    out = tmp_path / "series.csv"
    assert run(
        "perturb", "--graph", graph, "--annotations", ann, "--order", 4,
        "--method", "bw", "--out", out,
    ) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "method,k,order,residual,cosine"
    assert len(lines) == 6
    first = float(lines[1].split(",")[3])
    last = float(lines[-1].split(",")[3])
    assert last < first


def test_reduced_csv(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_per_group": 1000, "mean_degree": 12.0, "epsilon": 0.3}))
    out = tmp_path / "reduced.csv"
    assert run("reduced", "--spec", spec, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "index,lambda_untaped,lambda_taped,kind,kappa,lambda_shift"
    row1 = lines[1].split(",")
    assert abs(float(row1[1]) - 2.0) < 1e-9


def test_nmf_csv(instance, capsys):
    tmp, graph, part = instance
    out = tmp / "nmf.csv"
    assert run("nmf", "--graph", graph, "--iters", 50, "--restarts", 2, "--out", out) == 0
    assert "final loss" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0] == "node,label"
    assert len(lines) == 401
    labels = {line.split(",")[1] for line in lines[1:]}
    assert labels <= {"1", "2"}


def test_cavity_csv(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_per_group": 1000, "mean_degree": 12.0, "epsilon": 0.3}))
    prof = tmp_path / "prof.json"
    prof.write_text(json.dumps({"kind": "empty"}))
    out = tmp_path / "cavity.csv"
    assert run(
        "cavity", "--spec", spec, "--profile", prof, "--pop", 2000,
        "--sweeps", 60, "--seed", 0, "--out", out,
    ) == 0
    lines = out.read_text().splitlines()
    summary = {l.split(",")[2]: l.split(",")[3] for l in lines[1:6] if l.startswith("summary")}
    assert 1.5 < float(summary["lambda"]) < 1.8
    assert summary["undetectable"] == "0"
    assert float(summary["predicted_accuracy"]) > 0.9


def test_experiment_command_and_determinism(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "experiment": "uniform_scatter",
                "output_dir": str(tmp_path / "out"),
                "seeds": [0, 1],
                "n_per_group": 150,
                "mean_degree": 8.0,
                "eps": 0.2,
                "r_values": [0, 2],
            }
        )
    )
    assert run("experiment", "--config", cfg) == 0
    csv_path = tmp_path / "out" / "uniform_scatter" / "records.csv"
    first = csv_path.read_bytes()
    assert run("experiment", "--config", cfg) == 0
    assert csv_path.read_bytes() == first


def test_spectral_rerun_byte_identical(instance):
    tmp, graph, part = instance
    out1 = tmp / "s1.csv"
    out2 = tmp / "s2.csv"
    run("spectral", "--graph", graph, "--k", 2, "--out", out1)
    run("spectral", "--graph", graph, "--k", 2, "--out", out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_unknown_profile_kind(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_per_group": 1000, "mean_degree": 12.0, "epsilon": 0.3}))
    prof = tmp_path / "prof.json"
    prof.write_text(json.dumps({"kind": "bogus"}))
    assert run("cavity", "--spec", spec, "--profile", prof, "--out", tmp_path / "o") == 2
