"""Acceptance gate: twelve end-to-end criteria, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines
as they complete.  The whole file is heavier than the unit tests (full
paper-scale instances at N = 2000); expect several minutes.
"""

import json

import numpy as np
import scipy.sparse.linalg as spla
import scipy.stats

from scotchtape.cavity import (
    AnnotationProfileDist,
    ema_solve,
    field_norm,
    predicted_accuracy,
    small_fluct_solve,
    solve_lambda,
)
from scotchtape.cli import main as cli_main
from scotchtape.graph import (
    AnnotationSet,
    Graph,
    empty_annotations,
    projection_operator,
    tape,
)
from scotchtape.nmf import nmf_cluster
from scotchtape.perturbation import brillouin_wigner_series, lippmann_schwinger_series
from scotchtape.reduced import build_reduced, reduced_spectrum
from scotchtape.sbm import (
    SymmetricSpec,
    derive_seed,
    make_annotations,
    sample_sbm,
    symmetric_to_block,
)
from scotchtape.spectral import accuracy, bipartition, leading_spectrum

N_PER_GROUP = 1000  # N = 2000 throughout unless a criterion says otherwise
SEEDS = (0, 1, 2, 3, 4)

_cache = {}


def _report(num, name, ok, detail):
    print(f"criterion {num:02d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def _instance(eps, seed, c=12.0, n=N_PER_GROUP):
    key = ("inst", eps, seed, c, n)
    if key not in _cache:
        block, part = symmetric_to_block(SymmetricSpec(n, c, eps))
        _cache[key] = (sample_sbm(block, seed), part, block)
    return _cache[key]


def _measure(eps, graph_seed, kind, c=12.0, **kw):
    """(lambda2, accuracy, spectrum) for one taped instance; cached.

    kw is forwarded to make_annotations (so it may carry its own `seed`
    for the noisy family, independent of the graph seed).
    """
    key = ("meas", eps, graph_seed, kind, c, tuple(sorted(kw.items())))
    if key not in _cache:
        graph, part, _ = _instance(eps, graph_seed, c=c)
        if kind is None:
            ann = empty_annotations(graph.n_nodes)
        else:
            ann = make_annotations(kind, part, **kw)
        stg = tape(graph, ann)
        spect = leading_spectrum(stg, k=2)
        acc = accuracy(bipartition(spect), part)
        _cache[key] = (float(spect.eigenvalues[1]), acc, spect, part)
    return _cache[key]


def two_clique_instance():
    edges = [
        (b + i, b + j) for b in (0, 6) for i in range(6) for j in range(i + 1, 6)
    ] + [(5, 6)]
    return tape(Graph(12, edges), AnnotationSet(12, [[0]]))


# ---------------------------------------------------------------------------

def test_criterion_01_trivial_eigenpair():
    """lambda_1 = 2 and phi'_1 ~ D_U^{1/2} 1 on 20 mixed connected instances."""
    cases = []
    for i in range(20):
        n = (200, 500, 1000)[i % 3]
        c = (8.0, 12.0)[i % 2]
        eps = (0.1, 0.3, 0.6, 1.0)[i % 4]
        kind = (None, "uniform", "group", "noisy")[i % 4]
        kw = {}
        if kind == "uniform":
            kw = {"r": 1 + i % 3}
        elif kind == "noisy":
            kw = {"r": 4, "d_star": n // 4, "xi": 0.2, "seed": i}
        cases.append((n, c, eps, kind, kw, i))
    worst_lam, worst_cos = 0.0, 1.0
    n_checked = 0
    for n, c, eps, kind, kw, seed in cases:
        block, part = symmetric_to_block(SymmetricSpec(n, c, eps))
        for attempt in range(10):  # re-sample until connected
            graph = sample_sbm(block, seed + 100 * attempt)
            ann = (
                empty_annotations(graph.n_nodes)
                if kind is None
                else make_annotations(kind, part, **kw)
            )
            stg = tape(graph, ann)
            if stg.is_connected():
                break
        else:
            continue
        n_checked += 1
        op = projection_operator(stg)
        vals, vecs = spla.eigsh(op.aslinearoperator(), k=1, which="LA")
        v1 = np.sqrt(stg.d_u)
        v1 /= np.linalg.norm(v1)
        worst_lam = max(worst_lam, abs(float(vals[0]) - 2.0))
        worst_cos = min(worst_cos, abs(float(vecs[:, 0] @ v1)))
    ok = n_checked == 20 and worst_lam < 1e-8 and worst_cos >= 1.0 - 1e-10
    _report(1, "trivial eigenpair", ok,
            f"{n_checked}/20 instances, max |lambda1 - 2| = {worst_lam:.2e}, "
            f"min cosine deficit = {1 - worst_cos:.2e}")


def test_criterion_02_crude_eigenvalue():
    """Crude lambda2 = 2/(1+eps) holds at eps = 0.05; plateau above it at 0.9."""
    lam_strong = np.mean([_measure(0.05, s, None)[0] for s in SEEDS])
    crude_strong = 2.0 / 1.05
    lam_weak = np.mean([_measure(0.9, s, None)[0] for s in SEEDS])
    crude_weak = 2.0 / 1.9
    ok = abs(lam_strong - crude_strong) < 0.05 and lam_weak - crude_weak >= 0.1
    _report(2, "crude second eigenvalue", ok,
            f"eps=0.05: {lam_strong:.4f} vs {crude_strong:.4f}; "
            f"eps=0.9: {lam_weak:.4f} exceeds {crude_weak:.4f} by {lam_weak - crude_weak:.3f}")


def test_criterion_03_type1_shift():
    """One uniform hyperedge (kappa = 1/12) rescales lambda2 by 1/(1 + 1/12)."""
    worst = 0.0
    for eps in (0.05, 0.1, 0.2):
        for s in SEEDS:
            lam_raw = _measure(eps, s, None)[0]
            lam_t1 = _measure(eps, s, "uniform", r=1)[0]
            worst = max(worst, abs(lam_t1 - lam_raw / (1.0 + 1.0 / 12.0)))
    ok = worst < 0.05
    _report(3, "type-1 eigenvalue shift", ok, f"max |measured - shifted| = {worst:.4f}")


def test_criterion_04_type1_accuracy_invariance():
    """R = 1 uniform taping leaves clustering accuracy essentially unchanged."""
    diffs = []
    for eps in (0.1, 0.2, 0.3, 0.4, 0.5):
        for s in SEEDS:
            diffs.append(abs(_measure(eps, s, None)[1] - _measure(eps, s, "uniform", r=1)[1]))
    mean_diff = float(np.mean(diffs))
    ok = mean_diff <= 0.03
    _report(4, "type-1 accuracy invariance", ok, f"mean |acc_raw - acc_type1| = {mean_diff:.4f}")


def test_criterion_05_type2_improvement():
    """Group-aligned taping helps at weak structure, not at strong."""
    gains = {}
    for eps in (0.05, 0.5, 0.6, 0.7):
        gains[eps] = float(np.mean(
            [_measure(eps, s, "group")[1] - _measure(eps, s, None)[1] for s in SEEDS]
        ))
    ok = all(gains[e] >= 0.1 for e in (0.5, 0.6, 0.7)) and gains[0.05] <= 0.03
    _report(5, "type-2 accuracy improvement", ok,
            "gain " + ", ".join(f"eps={e}: {gains[e]:+.3f}" for e in sorted(gains)))


def test_criterion_06_large_r_degradation():
    """Many uniform hyperedges compress the structure into the bulk.

    Bimodality at R = 0 is confirmed by the two-sample t-test on the group
    means (p < 1e-6) together with a mode separation above 2 pooled
    standard deviations (separated modes).  At R = 48 the same t-test
    still rejects at N = 2000 — any nonzero finite-size correlation does
    with 1000 elements per group — so unimodality is asserted through the
    separation statistic: well under 1 pooled standard deviation means
    the two group histograms merge into a single mode.
    """
    acc0 = [_measure(0.3, s, None)[1] for s in SEEDS]
    acc48 = [_measure(0.3, s, "uniform", r=48)[1] for s in SEEDS]
    drop = float(np.mean(acc0) - np.mean(acc48))
    p0, sep = {None: [], 48: []}, {None: [], 48: []}
    for s in SEEDS:
        for r in (None, 48):
            kind = None if r is None else "uniform"
            kw = {} if r is None else {"r": r}
            _, _, spect, part = _measure(0.3, s, kind, **kw)
            phi = spect.unprimed_vectors[:, 1]
            g1 = phi[part.group_members(1)]
            g2 = phi[part.group_members(2)]
            p0[r].append(scipy.stats.ttest_ind(g1, g2).pvalue)
            sep[r].append(
                abs(g1.mean() - g2.mean()) / np.sqrt(0.5 * (g1.var() + g2.var()))
            )
    ok = (
        drop >= 0.1
        and max(p0[None]) < 1e-6
        and min(sep[None]) > 2.0
        and max(sep[48]) < 1.0
    )
    _report(6, "large-R degradation", ok,
            f"accuracy drop {drop:.3f}; R=0: max p = {max(p0[None]):.1e}, "
            f"min separation = {min(sep[None]):.2f} sd; "
            f"R=48: max separation = {max(sep[48]):.2f} sd")


def test_criterion_07_dstar_r_invariance():
    """Only the product d* R matters for noisy annotations at fixed total mass."""
    means = []
    for d_star, r in ((1000, 8), (500, 16), (250, 32)):
        accs = []
        for s in SEEDS:
            _, acc, _, _ = _measure(
                0.6, s, "noisy", r=r, d_star=d_star, xi=0.1, seed=derive_seed(s, 1)
            )
            accs.append(acc)
        means.append(float(np.mean(accs)))
    spread = max(means) - min(means)
    ok = spread <= 0.05
    _report(7, "d*R invariance", ok,
            f"mean accuracies {['%.3f' % m for m in means]}, spread {spread:.3f}")


def test_criterion_08_perturbation_series():
    """Order-8 LS and BW series recover the exact taped eigenvector."""
    stg = two_clique_instance()
    exact = leading_spectrum(stg, k=2, method="dense")
    results = {}
    for name, fn in (("LS", lippmann_schwinger_series), ("BW", brillouin_wigner_series)):
        res = fn(stg, k=2, order=8)
        ref = exact.primed_vectors[:, 1] if res.primed else exact.unprimed_vectors[:, 1]
        approx = res.approximations[8]
        cos = abs(approx @ ref) / (np.linalg.norm(approx) * np.linalg.norm(ref))
        results[name] = (cos, res.residuals[0], res.residuals[8])
    ok = all(c >= 0.99 and r8 < r0 for c, r0, r8 in results.values())
    _report(8, "perturbation series", ok,
            "; ".join(f"{n}: cos={c:.6f}, residual {r0:.2e} -> {r8:.2e}"
                      for n, (c, r0, r8) in results.items()))


def test_criterion_09_cavity_spectral_agreement():
    """Population dynamics reproduces the finite-N eigenvalue and accuracy."""
    details, ok = [], True
    for eps in (0.2, 0.3, 0.4):
        block, part = symmetric_to_block(SymmetricSpec(N_PER_GROUP, 12.0, eps))
        model = build_reduced(block, None, part)
        profile = AnnotationProfileDist.empty(model.group_sizes)
        state = solve_lambda(model, profile, pop_size=10000, n_sweeps=200, seed=0)
        _cache[("cavity_state", eps)] = state
        lam_spec = float(np.mean([_measure(eps, s, None)[0] for s in SEEDS]))
        acc_spec = float(np.mean([_measure(eps, s, None)[1] for s in SEEDS]))
        acc_cav = predicted_accuracy(state)
        d_lam = abs(state.lam - lam_spec)
        d_acc = abs(acc_cav - acc_spec)
        ok = ok and not state.undetectable and d_lam < 0.05 and d_acc < 0.05
        details.append(f"eps={eps}: lambda {state.lam:.4f} vs {lam_spec:.4f}, "
                       f"acc {acc_cav:.3f} vs {acc_spec:.3f}")
    _report(9, "cavity-spectral agreement", ok, "; ".join(details))


def test_criterion_10_cavity_limits():
    """Closed-form and mean-field limits of the cavity equations."""
    # (a) constant-precision solution: closed form + monotone in R
    lam = 1.6
    a_vals = [ema_solve(12.0, r, lam) for r in (0, 2, 8, 32)]
    a0 = ema_solve(12.0, 0, lam)
    closed = (6.6 + np.sqrt(12.84)) / 2.0  # hand-solved quadratic at c=12, lam=1.6
    ok_a = abs(a0 - closed) < 1e-12 and all(x < y for x, y in zip(a_vals, a_vals[1:]))

    # (b) small-fluctuation limit solves the K x K eigenrelation at R = 0
    block, part = symmetric_to_block(SymmetricSpec(N_PER_GROUP, 12.0, 0.3))
    model = build_reduced(block, None, part)
    lam0 = reduced_spectrum(model, taped=False)[0]
    h = small_fluct_solve(model, float(lam0[1]), np.zeros(0))
    resid = float(np.linalg.norm(model.f @ h - (lam0[1] - 1.0) * h))
    ok_b = resid <= 1e-8

    # (c) orthogonality + normalization on a converged population
    state = _cache.get(("cavity_state", 0.3))
    if state is None:
        profile = AnnotationProfileDist.empty(model.group_sizes)
        state = solve_lambda(model, profile, pop_size=10000, n_sweeps=200, seed=0)
    p = state.pop_size
    sizes = state.model.group_sizes / state.model.n_nodes
    ortho = sum(
        float(ns * c * pop.h.mean())
        for ns, c, pop in zip(sizes, state.model.c_sigma, state.populations)
    ) / field_norm(state)
    norm_err = abs(state.norm_check - 1.0)
    tol = 3.0 / np.sqrt(p)
    ok_c = abs(ortho) <= tol and norm_err <= tol

    ok = ok_a and ok_b and ok_c
    _report(10, "cavity limits", ok,
            f"ema |a - closed| = {abs(a0 - closed):.1e}, crude residual {resid:.1e}, "
            f"ortho {ortho:+.4f}, |norm - 1| = {norm_err:.4f} (tol {tol:.3f})")


def test_criterion_11_nmf_disruption():
    """A few uniform hyperedges wreck incidence-matrix NMF clustering.

    Averaged over ten fixed seeds: the per-instance raw-NMF accuracy is
    strongly bimodal, so the mean over a larger fixed seed set is the
    stable quantity the threshold is checked against.
    """
    acc_raw, acc_taped = [], []
    for seed in range(10):
        block, part = symmetric_to_block(SymmetricSpec(N_PER_GROUP, 8.0, 0.05))
        graph = sample_sbm(block, seed)
        raw = tape(graph, empty_annotations(graph.n_nodes))
        taped = tape(graph, make_annotations("uniform", part, r=4))
        nmf_seed = derive_seed(seed, 2)
        acc_raw.append(accuracy(nmf_cluster(raw.b, k=2, seed=nmf_seed, restarts=5).partition, part))
        acc_taped.append(accuracy(nmf_cluster(taped.b, k=2, seed=nmf_seed, restarts=5).partition, part))
    gap = float(np.mean(acc_raw) - np.mean(acc_taped))
    ok = gap >= 0.2
    _report(11, "nmf disruption", ok,
            f"mean acc raw {np.mean(acc_raw):.3f} - taped {np.mean(acc_taped):.3f} = {gap:.3f}")


def test_criterion_12_cli_determinism(tmp_path):
    """Every CLI command, rerun with the same inputs, is byte-identical."""

    def run_all(base):
        base.mkdir()
        graph, part = base / "g.tsv", base / "p.tsv"
        cli_main(["generate", "--n", "400", "--c", "8", "--eps", "0.1",
                  "--seed", "0", "--out", str(graph), "--partition-out", str(part)])
        ann = base / "a.tsv"
        cli_main(["annotate", "--kind", "noisy", "--R", "2", "--dstar", "50",
                  "--xi", "0.2", "--seed", "1", "--partition", str(part), "--out", str(ann)])
        cli_main(["spectral", "--graph", str(graph), "--annotations", str(ann),
                  "--k", "2", "--out", str(base / "spect.csv")])
        clique, mark = base / "clique.tsv", base / "mark.tsv"
        edges = [(b + i, b + j) for b in (0, 6) for i in range(6)
                 for j in range(i + 1, 6)] + [(5, 6)]
        clique.write_text("#nodes=12\n" + "".join(f"{i}\t{j}\n" for i, j in edges))
        mark.write_text("#nodes=12\nmark\t0\n")
        cli_main(["perturb", "--graph", str(clique), "--annotations", str(mark),
                  "--order", "6", "--out", str(base / "series.csv")])
        spec = base / "spec.json"
        spec.write_text(json.dumps({"n_per_group": 1000, "mean_degree": 12.0, "epsilon": 0.3}))
        cli_main(["reduced", "--spec", str(spec), "--out", str(base / "reduced.csv")])
        prof = base / "prof.json"
        prof.write_text(json.dumps({"kind": "empty"}))
        cli_main(["cavity", "--spec", str(spec), "--profile", str(prof), "--pop", "2000",
                  "--sweeps", "60", "--seed", "0", "--out", str(base / "cavity.csv")])
        cli_main(["nmf", "--graph", str(graph), "--iters", "100", "--restarts", "2",
                  "--out", str(base / "nmf.csv")])
        cfg = base / "cfg.json"
        cfg.write_text(json.dumps({
            "experiment": "uniform_scatter", "output_dir": str(base / "exp"),
            "seeds": [0, 1], "n_per_group": 150, "mean_degree": 8.0,
            "eps": 0.2, "r_values": [0, 2],
        }))
        cli_main(["experiment", "--config", str(cfg)])
        names = ["g.tsv", "p.tsv", "a.tsv", "spect.csv", "series.csv",
                 "reduced.csv", "cavity.csv", "nmf.csv"]
        out = {n: (base / n).read_bytes() for n in names}
        out["records.csv"] = (base / "exp" / "uniform_scatter" / "records.csv").read_bytes()
        return out

    first = run_all(tmp_path / "run1")
    second = run_all(tmp_path / "run2")
    mismatched = [n for n in first if first[n] != second[n]]
    ok = not mismatched
    _report(12, "cli determinism", ok,
            "all outputs byte-identical" if ok else f"mismatch in {mismatched}")
