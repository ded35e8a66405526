"""Deterministic experiment harness: parameter sweeps to CSV tables + SVG plots.

Each experiment samples planted-partition graphs, tapes annotations on,
measures spectra/accuracies, and writes one replayable record per
(parameter tuple, seed).  Reruns with the same config are byte-identical
at the CSV level.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .errors import ParameterError
from .graph import empty_annotations, tape
from .nmf import nmf_cluster
from .reduced import build_reduced, classify_taping, eigenvalue_shift, reduced_spectrum
from .sbm import SymmetricSpec, derive_seed, make_annotations, sample_sbm, symmetric_to_block
from .spectral import accuracy, bipartition, element_histogram, leading_spectrum

EXPERIMENTS = ("eigen_accuracy", "uniform_scatter", "histograms", "density_grid", "nmf_compare")

_FMT = "%.10g"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to replay one experiment run."""

    experiment: str
    output_dir: str
    seeds: tuple
    n_per_group: int = 1000
    mean_degree: float = 12.0
    eps: float = 0.3
    eps_values: tuple = ()
    r: int = 4
    r_values: tuple = ()
    d_star: int = 500
    dstar_values: tuple = ()
    xi: float = 0.1
    xi_values: tuple = ()
    n_bins: int = 40

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}")
        if not self.seeds:
            raise ParameterError("seeds list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ParameterError("seeds must be distinct")
        needs = {
            "eigen_accuracy": ("eps_values",),
            "histograms": ("r_values",),
            "uniform_scatter": ("r_values",),
            "density_grid": ("r_values", "dstar_values", "xi_values"),
            "nmf_compare": (),
        }[self.experiment]
        for name in needs:
            if not getattr(self, name):
                raise ParameterError(f"{self.experiment} needs a non-empty {name}")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        for key in ("seeds", "eps_values", "r_values", "dstar_values", "xi_values"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


@dataclass(frozen=True)
class ResultRecord:
    """One measured row; `params` carries the full replayable tuple."""

    experiment: str
    params: dict
    seed: int
    values: dict = field(default_factory=dict)

    def row(self):
        out = dict(self.params)
        out["seed"] = self.seed
        out.update(self.values)
        return out


def _spectrum_and_accuracy(stg, planted):
    spect = leading_spectrum(stg, k=2)
    acc = accuracy(bipartition(spect), planted)
    return float(spect.eigenvalues[1]), acc, spect


def _sbm_instance(cfg, eps, seed):
    block, planted = symmetric_to_block(
        SymmetricSpec(cfg.n_per_group, cfg.mean_degree, eps)
    )
    return block, planted, sample_sbm(block, seed)


def _crude_predictions(block, planted):
    """Untaped crude lambda2 and its type-1 / type-2 shifted values."""
    model0 = build_reduced(block, None, planted)
    lam0 = reduced_spectrum(model0, taped=False)[0][1]
    uni = make_annotations("uniform", planted, r=1)
    grp = make_annotations("group", planted)
    kap1 = classify_taping(build_reduced(block, uni, planted), np.array([1.0, -1.0]))[1]
    kap2 = classify_taping(build_reduced(block, grp, planted), np.array([1.0, -1.0]))[1]
    return (
        float(lam0),
        eigenvalue_shift("type1", lam0, kap1),
        eigenvalue_shift("type2", lam0, kap2),
    )


def _run_eigen_accuracy(cfg):
    records = []
    for eps in cfg.eps_values:
        for seed in cfg.seeds:
            block, planted, graph = _sbm_instance(cfg, eps, seed)
            raw = tape(graph, empty_annotations(graph.n_nodes))
            lam_raw, acc_raw, _ = _spectrum_and_accuracy(raw, planted)
            t1 = tape(graph, make_annotations("uniform", planted, r=1))
            lam_t1, acc_t1, _ = _spectrum_and_accuracy(t1, planted)
            t2 = tape(graph, make_annotations("group", planted))
            lam_t2, acc_t2, _ = _spectrum_and_accuracy(t2, planted)
            crude_raw, crude_t1, crude_t2 = _crude_predictions(block, planted)
            records.append(
                ResultRecord(
                    "eigen_accuracy",
                    {"eps": eps},
                    seed,
                    {
                        "lambda2_raw": lam_raw,
                        "lambda2_type1": lam_t1,
                        "lambda2_type2": lam_t2,
                        "crude_raw": crude_raw,
                        "crude_t1": crude_t1,
                        "crude_t2": crude_t2,
                        "acc_raw": acc_raw,
                        "acc_t1": acc_t1,
                        "acc_t2": acc_t2,
                        "connected": int(raw.is_connected()),
                    },
                )
            )
    return records


def _run_uniform_scatter(cfg):
    records = []
    for r in cfg.r_values:
        for seed in cfg.seeds:
            _, planted, graph = _sbm_instance(cfg, cfg.eps, seed)
            raw = tape(graph, empty_annotations(graph.n_nodes))
            lam_raw, acc_raw, _ = _spectrum_and_accuracy(raw, planted)
            if r > 0:
                taped = tape(graph, make_annotations("uniform", planted, r=r))
                lam_tp, acc_tp, _ = _spectrum_and_accuracy(taped, planted)
            else:
                lam_tp, acc_tp = lam_raw, acc_raw
            records.append(
                ResultRecord(
                    "uniform_scatter",
                    {"eps": cfg.eps, "r": r},
                    seed,
                    {
                        "lambda2_raw": lam_raw,
                        "lambda2_taped": lam_tp,
                        "acc_raw": acc_raw,
                        "acc_taped": acc_tp,
                    },
                )
            )
    return records


def _run_histograms(cfg):
    records = []
    for r in cfg.r_values:
        for seed in cfg.seeds:
            _, planted, graph = _sbm_instance(cfg, cfg.eps, seed)
            ann = (
                make_annotations("uniform", planted, r=r)
                if r > 0
                else empty_annotations(graph.n_nodes)
            )
            stg = tape(graph, ann)
            spect = leading_spectrum(stg, k=2)
            edges, counts = element_histogram(spect, planted, k=2, bins=cfg.n_bins)
            for group, cnt in sorted(counts.items()):
                for b in range(cfg.n_bins):
                    records.append(
                        ResultRecord(
                            "histograms",
                            {"eps": cfg.eps, "r": r},
                            seed,
                            {
                                "group": group,
                                "bin_left": float(edges[b]),
                                "bin_right": float(edges[b + 1]),
                                "count": int(cnt[b]),
                            },
                        )
                    )
    return records


def _run_density_grid(cfg):
    records = []
    for xi in cfg.xi_values:
        for r in cfg.r_values:
            for d_star in cfg.dstar_values:
                for seed in cfg.seeds:
                    _, planted, graph = _sbm_instance(cfg, cfg.eps, seed)
                    ann = make_annotations(
                        "noisy",
                        planted,
                        r=r,
                        d_star=d_star,
                        xi=xi,
                        seed=derive_seed(seed, 1),
                    )
                    stg = tape(graph, ann)
                    _, acc_tp, _ = _spectrum_and_accuracy(stg, planted)
                    records.append(
                        ResultRecord(
                            "density_grid",
                            {"eps": cfg.eps, "xi": xi, "r": r, "d_star": d_star},
                            seed,
                            {"acc": acc_tp},
                        )
                    )
    return records


def _run_nmf_compare(cfg):
    records = []
    for seed in cfg.seeds:
        _, planted, graph = _sbm_instance(cfg, cfg.eps, seed)
        raw = tape(graph, empty_annotations(graph.n_nodes))
        res_raw = nmf_cluster(raw.b, k=2, seed=derive_seed(seed, 2))
        taped = tape(graph, make_annotations("uniform", planted, r=cfg.r))
        res_tp = nmf_cluster(taped.b, k=2, seed=derive_seed(seed, 2))
        records.append(
            ResultRecord(
                "nmf_compare",
                {"eps": cfg.eps, "r": cfg.r},
                seed,
                {
                    "acc_raw": accuracy(res_raw.partition, planted),
                    "acc_taped": accuracy(res_tp.partition, planted),
                    "loss_raw": res_raw.loss,
                    "loss_taped": res_tp.loss,
                },
            )
        )
    return records


_RUNNERS = {
    "eigen_accuracy": _run_eigen_accuracy,
    "uniform_scatter": _run_uniform_scatter,
    "histograms": _run_histograms,
    "density_grid": _run_density_grid,
    "nmf_compare": _run_nmf_compare,
}


def write_records_csv(records, path):
    """Deterministic CSV: sorted rows, fixed column order, fixed float format."""
    rows = [r.row() for r in records]
    columns = list(rows[0].keys())
    keyed = sorted(rows, key=lambda row: tuple(str(row[c]) for c in columns))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in keyed:
            writer.writerow(
                [_FMT % v if isinstance(v, float) else v for v in (row[c] for c in columns)]
            )


def _mean_by(records, key_fields, value):
    """Group records by param fields and average one measured value."""
    groups = {}
    for rec in records:
        key = tuple(rec.row()[f] for f in key_fields)
        groups.setdefault(key, []).append(rec.values[value])
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


def emit_plots(records, kind, out_dir):
    """Render the experiment's figures as self-contained SVG files."""
    if not records:
        raise ParameterError("no records to plot")
    if any(r.experiment != kind for r in records):
        raise ParameterError("records mix experiment ids")
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    if kind == "eigen_accuracy":
        eps = sorted({r.params["eps"] for r in records})
        for fname, keys, ylab in (
            (
                "lambda2.svg",
                [
                    ("lambda2_raw", "crude_raw"),
                    ("lambda2_type1", "crude_t1"),
                    ("lambda2_type2", "crude_t2"),
                ],
                "second eigenvalue",
            ),
            ("accuracy.svg", [("acc_raw",), ("acc_t1",), ("acc_t2",)], "accuracy"),
        ):
            fig, ax = plt.subplots(figsize=(5, 4))
            for series in keys:
                for name in series:
                    means = _mean_by(records, ("eps",), name)
                    style = "--" if name.startswith("crude") else "-o"
                    ax.plot(eps, [means[(e,)] for e in eps], style, label=name, ms=3)
            ax.set_xlabel("eps")
            ax.set_ylabel(ylab)
            ax.legend(fontsize=7)
            path = os.path.join(out_dir, fname)
            fig.savefig(path, format="svg")
            plt.close(fig)
            paths.append(path)

    elif kind in ("uniform_scatter", "nmf_compare"):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        r_values = sorted({r.params["r"] for r in records})
        for r in r_values:
            xs = [rec.values["acc_raw"] for rec in records if rec.params["r"] == r]
            ys = [rec.values["acc_taped"] for rec in records if rec.params["r"] == r]
            ax.scatter(xs, ys, s=12, label=f"R={r}")
        ax.plot([0.5, 1.0], [0.5, 1.0], "k--", lw=0.8)  # y = x reference
        ax.set_xlabel("accuracy (raw graph)")
        ax.set_ylabel("accuracy (taped)")
        ax.legend(fontsize=7)
        path = os.path.join(out_dir, "scatter.svg")
        fig.savefig(path, format="svg")
        plt.close(fig)
        paths.append(path)

    elif kind == "histograms":
        combos = sorted({(r.params["eps"], r.params["r"]) for r in records})
        for eps, rr in combos:
            sub = [r for r in records if r.params["r"] == rr and r.params["eps"] == eps]
            fig, ax = plt.subplots(figsize=(5, 4))
            for group in sorted({r.values["group"] for r in sub}):
                grp = [r for r in sub if r.values["group"] == group]
                agg = {}
                for rec in grp:
                    key = (rec.values["bin_left"], rec.values["bin_right"])
                    agg[key] = agg.get(key, 0) + rec.values["count"]
                lefts = sorted(agg)
                ax.bar(
                    [0.5 * (a + b) for a, b in lefts],
                    [agg[k] for k in lefts],
                    width=(lefts[0][1] - lefts[0][0]) * 0.9,
                    alpha=0.6,
                    label=f"group {group}",
                )
            ax.set_xlabel("second eigenvector element")
            ax.set_ylabel("count")
            ax.legend(fontsize=7)
            path = os.path.join(out_dir, f"hist_eps{eps}_R{rr}.svg")
            fig.savefig(path, format="svg")
            plt.close(fig)
            paths.append(path)

    elif kind == "density_grid":
        xis = sorted({r.params["xi"] for r in records})
        for xi in xis:
            sub = [r for r in records if r.params["xi"] == xi]
            r_values = sorted({r.params["r"] for r in sub})
            d_values = sorted({r.params["d_star"] for r in sub})
            means = _mean_by(sub, ("r", "d_star"), "acc")
            grid = np.array(
                [[means[(rr, dd)] for dd in d_values] for rr in r_values]
            )
            fig, ax = plt.subplots(figsize=(5, 4))
            im = ax.imshow(
                grid, origin="lower", aspect="auto", vmin=0.5, vmax=1.0, cmap="viridis"
            )
            # iso-d*R curves: cells sharing the same product lie on one dashed line
            rr_g, dd_g = np.meshgrid(r_values, d_values, indexing="ij")
            prod = rr_g.astype(float) * dd_g
            levels = sorted({float(p) for p in prod.ravel()})[1:-1]
            if levels:
                ax.contour(
                    np.log(prod), levels=np.log(levels), colors="w", linestyles="dashed",
                    linewidths=0.7,
                )
            ax.set_xticks(range(len(d_values)), [str(d) for d in d_values])
            ax.set_yticks(range(len(r_values)), [str(r) for r in r_values])
            ax.set_xlabel("d*")
            ax.set_ylabel("R")
            fig.colorbar(im, ax=ax, label="accuracy")
            path = os.path.join(out_dir, f"grid_xi{xi}.svg")
            fig.savefig(path, format="svg")
            plt.close(fig)
            paths.append(path)
    else:
        raise ParameterError(f"unknown experiment {kind!r}")
    return paths


def run_experiment(cfg: ExperimentConfig, plots: bool = True):
    """Execute an experiment end to end; returns the records list.

    Writes <output_dir>/<experiment>/records.csv, meta.json, and the
    experiment's SVG plots under plots/.
    """
    records = _RUNNERS[cfg.experiment](cfg)
    base = os.path.join(cfg.output_dir, cfg.experiment)
    os.makedirs(base, exist_ok=True)
    write_records_csv(records, os.path.join(base, "records.csv"))
    meta = {
        "version": __version__,
        "experiment": cfg.experiment,
        "seeds": list(cfg.seeds),
        "n_per_group": cfg.n_per_group,
        "mean_degree": cfg.mean_degree,
        "eps": cfg.eps,
        "grids": {
            "eps_values": list(cfg.eps_values),
            "r_values": list(cfg.r_values),
            "dstar_values": list(cfg.dstar_values),
            "xi_values": list(cfg.xi_values),
        },
    }
    with open(os.path.join(base, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if plots:
        emit_plots(records, cfg.experiment, os.path.join(base, "plots"))
    return records
