"""Command-line interface: generation, taping, solvers, and experiments."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .cavity import AnnotationProfileDist, predicted_accuracy, solve_lambda
from .errors import ParameterError
from .experiments import ExperimentConfig, run_experiment
from .graph import (
    empty_annotations,
    read_annotations_tsv,
    read_graph_tsv,
    read_partition_tsv,
    tape,
    write_annotations_tsv,
    write_graph_tsv,
    write_partition_tsv,
)
from .nmf import nmf_cluster
from .perturbation import brillouin_wigner_series, lippmann_schwinger_series
from .reduced import build_reduced, classify_taping, eigenvalue_shift, reduced_spectrum
from .sbm import BlockSpec, SymmetricSpec, make_annotations, sample_sbm, symmetric_to_block
from .spectral import leading_spectrum

FMT = "%.12g"


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _fmt(value):
    if isinstance(value, float):
        return FMT % value
    return value


def _load_block_spec(path):
    """BlockSpec from JSON: symmetric parameters or explicit matrices."""
    with open(path) as fh:
        raw = json.load(fh)
    if "group_sizes" in raw:
        return BlockSpec(raw["group_sizes"], np.array(raw["edge_counts"])), None
    spec = SymmetricSpec(raw["n_per_group"], raw["mean_degree"], raw["epsilon"])
    block, part = symmetric_to_block(spec)
    return block, part


def _load_taped(args):
    graph = read_graph_tsv(args.graph)
    if getattr(args, "annotations", None):
        ann = read_annotations_tsv(args.annotations, n_nodes=graph.n_nodes)
    else:
        ann = empty_annotations(graph.n_nodes)
    return tape(graph, ann)


def _cmd_generate(args):
    if args.n % 2:
        raise ParameterError("--n must be even (two equal groups)")
    block, planted = symmetric_to_block(SymmetricSpec(args.n // 2, args.c, args.eps))
    graph = sample_sbm(block, args.seed)
    write_graph_tsv(graph, args.out)
    if args.partition_out:
        write_partition_tsv(planted, args.partition_out)


def _cmd_annotate(args):
    partition = read_partition_tsv(args.partition)
    kwargs = {}
    if args.kind == "uniform":
        kwargs["r"] = args.R
    elif args.kind == "group":
        if args.r_per_group:
            kwargs["r_per_group"] = [int(x) for x in args.r_per_group.split(",")]
    elif args.kind == "noisy":
        kwargs.update(r=args.R, d_star=args.dstar, xi=args.xi, seed=args.seed)
    ann = make_annotations(args.kind, partition, **kwargs)
    write_annotations_tsv(ann, args.out)


def _cmd_spectral(args):
    stg = _load_taped(args)
    spect = leading_spectrum(stg, k=args.k)
    fh, out = _writer(args.out)
    with fh:
        out.writerow(["eigenvalue", "component_index", "phi", "phi_primed"])
        for j in range(spect.k):
            lam = spect.eigenvalues[j]
            for i in range(stg.n_nodes):
                out.writerow(
                    [
                        _fmt(float(lam)),
                        i,
                        _fmt(float(spect.unprimed_vectors[i, j])),
                        _fmt(float(spect.primed_vectors[i, j])),
                    ]
                )


def _cmd_perturb(args):
    stg = _load_taped(args)
    series_fn = {"ls": lippmann_schwinger_series, "bw": brillouin_wigner_series}[args.method]
    res = series_fn(stg, k=args.k, order=args.order)
    exact = leading_spectrum(stg, k=args.k, method="dense")
    ref = exact.primed_vectors[:, args.k - 1] if res.primed else exact.unprimed_vectors[:, args.k - 1]
    fh, out = _writer(args.out)
    with fh:
        out.writerow(["method", "k", "order", "residual", "cosine"])
        for p in range(args.order + 1):
            approx = res.approximations[p]
            cos = abs(approx @ ref) / (np.linalg.norm(approx) * np.linalg.norm(ref))
            out.writerow([args.method, args.k, p, _fmt(float(res.residuals[p])), _fmt(float(cos))])


def _cmd_reduced(args):
    block, planted = _load_block_spec(args.spec)
    if planted is None:
        planted = block.default_partition()
    if args.annotations:
        ann = read_annotations_tsv(args.annotations, n_nodes=block.n_nodes)
    else:
        ann = None
    model = build_reduced(block, ann, planted)
    lam0, vecs0 = reduced_spectrum(model, taped=False)
    lam1, _ = reduced_spectrum(model, taped=True)
    kind, kappa = classify_taping(model, vecs0[:, 1]) if model.k_groups > 1 else ("generic", None)
    fh, out = _writer(args.out)
    with fh:
        out.writerow(["index", "lambda_untaped", "lambda_taped", "kind", "kappa", "lambda_shift"])
        for j in range(model.k_groups):
            shift = ""
            if kind in ("type1", "type2") and j == 1:
                shift = _fmt(eigenvalue_shift(kind, float(lam0[j]), kappa))
            out.writerow(
                [
                    j + 1,
                    _fmt(float(lam0[j])),
                    _fmt(float(lam1[j])),
                    kind if j == 1 else "",
                    _fmt(kappa) if (kappa is not None and j == 1) else "",
                    shift,
                ]
            )


def _load_profile(path, block, planted):
    with open(path) as fh:
        raw = json.load(fh)
    kind = raw["kind"]
    sizes = block.group_sizes
    if kind == "empty":
        return AnnotationProfileDist.empty(sizes)
    if kind == "type1":
        return AnnotationProfileDist.type1(raw["r"], sizes)
    if kind == "type2":
        return AnnotationProfileDist.type2(raw.get("r_per_group", [1] * len(sizes)), sizes)
    if kind == "annotations":
        ann = read_annotations_tsv(raw["annotations"], n_nodes=block.n_nodes)
        part = read_partition_tsv(raw["partition"]) if "partition" in raw else planted
        return AnnotationProfileDist.from_annotations(ann, part)
    raise ParameterError(f"unknown profile kind {kind!r}")


def _cmd_cavity(args):
    block, planted = _load_block_spec(args.spec)
    if planted is None:
        planted = block.default_partition()
    model = build_reduced(block, None, planted)
    profile = _load_profile(args.profile, block, planted)
    bracket = tuple(args.bracket) if args.bracket else None
    state = solve_lambda(
        model,
        profile,
        pop_size=args.pop,
        n_sweeps=args.sweeps,
        bracket=bracket,
        seed=args.seed,
    )
    acc = predicted_accuracy(state)
    fh, out = _writer(args.out)
    with fh:
        out.writerow(["record", "group", "index", "a", "h"])
        out.writerow(["summary", "", "lambda", _fmt(state.lam), ""])
        out.writerow(["summary", "", "undetectable", int(state.undetectable), ""])
        out.writerow(["summary", "", "predicted_accuracy", _fmt(acc), ""])
        if state.norm_check is not None:
            out.writerow(["summary", "", "norm_check", _fmt(state.norm_check), ""])
        for r in range(state.m.size):
            out.writerow(["summary", "", f"m_{r}", _fmt(float(state.m[r])), ""])
        for s, pop in enumerate(state.populations, start=1):
            for i in range(pop.size):
                out.writerow(
                    ["member", s, i, _fmt(float(pop.a[i])), _fmt(float(pop.h[i]))]
                )


def _cmd_nmf(args):
    stg = _load_taped(args)
    res = nmf_cluster(stg.b, k=args.k, iters=args.iters, seed=args.seed, restarts=args.restarts)
    fh, out = _writer(args.out)
    with fh:
        out.writerow(["node", "label"])
        for i, lab in enumerate(res.partition.labels):
            out.writerow([i, int(lab)])
    print(f"final loss: {res.loss:.6g}")


def _cmd_experiment(args):
    cfg = ExperimentConfig.from_json(args.config)
    records = run_experiment(cfg)
    print(f"{len(records)} records written under {cfg.output_dir}/{cfg.experiment}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scotchtape",
        description="Spectral clustering of annotated graphs via factor-graph encoding.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a symmetric planted-partition graph")
    p.add_argument("--n", type=int, required=True, help="total number of nodes (even)")
    p.add_argument("--c", type=float, required=True, help="mean degree")
    p.add_argument("--eps", type=float, required=True, help="structure strength e_out/(2 e_in)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--partition-out", dest="partition_out", default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("annotate", help="generate an annotation set for a partition")
    p.add_argument("--kind", choices=["uniform", "group", "noisy"], required=True)
    p.add_argument("--R", type=int, default=None)
    p.add_argument("--r-per-group", dest="r_per_group", default=None)
    p.add_argument("--dstar", type=int, default=None)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partition", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("spectral", help="leading eigenpairs of the taped operator")
    p.add_argument("--graph", required=True)
    p.add_argument("--annotations", default=None)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("perturb", help="perturbation-series approximations")
    p.add_argument("--graph", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--method", choices=["ls", "bw"], default="ls")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("reduced", help="group-level eigenvalues and taping classification")
    p.add_argument("--spec", required=True, help="block-model JSON file")
    p.add_argument("--annotations", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reduced)

    p = sub.add_parser("cavity", help="population-dynamics eigenvalue solver")
    p.add_argument("--spec", required=True)
    p.add_argument("--profile", required=True, help="annotation profile JSON file")
    p.add_argument("--pop", type=int, default=10000)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--bracket", type=float, nargs=2, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cavity)

    p = sub.add_parser("nmf", help="nonnegative factorization clustering")
    p.add_argument("--graph", required=True)
    p.add_argument("--annotations", default=None)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_nmf)

    p = sub.add_parser("experiment", help="run a configured experiment sweep")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
