"""Population-dynamics solver for the second-eigenvector element distribution.

Each physical node carries a Gaussian message (precision A, mean H); the
self-consistent equation couples the messages through the graph (Poisson
degrees, group mixing f) and through the annotation profile distribution.
The eigenvalue is located by an outer bisection on the growth rate of the
H-field: the linear H-update has a stationary nontrivial distribution
exactly when its growth rate is one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import poisson

from .errors import (
    ConvergenceError,
    InstabilityError,
    NoSolutionError,
    ParameterError,
)
from .graph import AnnotationSet, Partition
from .reduced import ReducedModel, reduced_spectrum

EPS_A = 1e-9


@dataclass(frozen=True)
class PopulationMember:
    """One Gaussian message: precision A (positive) and mean H."""

    precision_a: float
    mean_h: float


@dataclass(frozen=True)
class AnnotationProfileDist:
    """Empirical distribution of per-node annotation indicator patterns.

    ``patterns[s]`` is an (n_patterns, R) 0/1 array, ``probs[s]`` the
    matching probabilities, for group s (0-based).  ``label_degrees`` are
    the annotation factor degrees d^v_r and ``n_nodes`` is N.
    """

    patterns: tuple
    probs: tuple
    label_degrees: np.ndarray
    n_nodes: int

    def __post_init__(self):
        for pats, p in zip(self.patterns, self.probs):
            if pats.shape[0] != p.size:
                raise ParameterError("pattern/probability length mismatch")
            if abs(p.sum() - 1.0) > 1e-9:
                raise ParameterError("pattern probabilities must sum to 1")
            if pats.shape[0] != np.unique(pats, axis=0).shape[0]:
                raise ParameterError("patterns must be distinct within a group")
        if any(pats.shape[1] != self.n_labels for pats in self.patterns):
            raise ParameterError("pattern width must equal the number of labels")

    @property
    def n_groups(self):
        return len(self.patterns)

    @property
    def n_labels(self):
        return self.label_degrees.size

    @classmethod
    def empty(cls, group_sizes):
        """No annotations at all (R = 0)."""
        k = len(group_sizes)
        return cls(
            patterns=tuple(np.zeros((1, 0)) for _ in range(k)),
            probs=tuple(np.ones(1) for _ in range(k)),
            label_degrees=np.zeros(0),
            n_nodes=int(np.sum(group_sizes)),
        )

    @classmethod
    def type1(cls, r, group_sizes):
        """R identical labels covering every node (uniform annotations)."""
        n = int(np.sum(group_sizes))
        k = len(group_sizes)
        return cls(
            patterns=tuple(np.ones((1, r)) for _ in range(k)),
            probs=tuple(np.ones(1) for _ in range(k)),
            label_degrees=np.full(r, float(n)),
            n_nodes=n,
        )

    @classmethod
    def type2(cls, r_per_group, group_sizes):
        """Group-aligned labels: group s carries its own r_per_group[s] labels."""
        k = len(group_sizes)
        if len(r_per_group) != k:
            raise ParameterError("r_per_group must have one entry per group")
        r_tot = int(np.sum(r_per_group))
        patterns, degrees = [], np.zeros(r_tot)
        start = 0
        for s in range(k):
            pat = np.zeros((1, r_tot))
            pat[0, start : start + r_per_group[s]] = 1.0
            degrees[start : start + r_per_group[s]] = float(group_sizes[s])
            patterns.append(pat)
            start += r_per_group[s]
        return cls(
            patterns=tuple(patterns),
            probs=tuple(np.ones(1) for _ in range(k)),
            label_degrees=degrees,
            n_nodes=int(np.sum(group_sizes)),
        )

    @classmethod
    def from_annotations(cls, annotations: AnnotationSet, partition: Partition):
        """Exact empirical profile of a sampled annotation set."""
        if annotations.n_nodes != partition.n_nodes:
            raise ParameterError("annotations and partition node counts differ")
        ind = annotations.indicator_matrix().toarray()
        patterns, probs = [], []
        for s in range(1, partition.n_groups + 1):
            rows = ind[partition.group_members(s)]
            uniq, counts = np.unique(rows, axis=0, return_counts=True)
            patterns.append(uniq.astype(np.float64))
            probs.append(counts / counts.sum())
        degrees = np.array([len(m) for m in annotations.labels], dtype=np.float64)
        return cls(
            patterns=tuple(patterns),
            probs=tuple(probs),
            label_degrees=degrees,
            n_nodes=annotations.n_nodes,
        )


@dataclass(frozen=True)
class GroupPopulation:
    """Vectorized population for one group: arrays over P members."""

    a: np.ndarray
    h: np.ndarray
    pattern_idx: np.ndarray  # index into the group's profile patterns

    @property
    def size(self):
        return self.a.size

    def members(self):
        return [PopulationMember(float(a), float(h)) for a, h in zip(self.a, self.h)]


@dataclass(frozen=True)
class CavityState:
    """Populations plus the global order parameters (lambda, m, m_hat).

    gamma is structurally zero: the orthogonality multiplier vanishes at
    the saddle and is enforced here by explicit projection instead.
    """

    model: ReducedModel
    profile: AnnotationProfileDist
    populations: tuple  # GroupPopulation per group
    lam: float
    m: np.ndarray
    m_hat: np.ndarray
    gamma: float = 0.0
    undetectable: bool = False
    rejection_rate: float = 0.0
    norm_check: float | None = field(default=None, compare=False)

    @property
    def pop_size(self):
        return self.populations[0].size

    def group_h(self, sigma):
        return self.populations[sigma - 1].h

    def group_a(self, sigma):
        return self.populations[sigma - 1].a


def _pattern_sums(profile, sigma, idx):
    """Per-member annotation degree sum_r h^r for pattern indices idx."""
    if profile.n_labels == 0:
        return np.zeros(idx.size)
    return profile.patterns[sigma].sum(axis=1)[idx]


def initial_state(
    model: ReducedModel,
    profile: AnnotationProfileDist,
    pop_size: int,
    lam: float,
    seed: int = 0,
    symmetric: bool = False,
) -> CavityState:
    """Fresh populations; H aligned with the group structure unless symmetric.

    The symmetry-broken start follows the sign pattern of the second
    reduced eigenvector so the detectable fixed point is reachable.
    """
    if pop_size < 1000:
        raise ParameterError("population size must be >= 1000")
    if profile.n_groups != model.k_groups:
        raise ParameterError("profile and model group counts differ")
    rng = np.random.default_rng(seed)
    k = model.k_groups
    if k > 1:
        _, vecs = reduced_spectrum(model, taped=False)
        signs = np.where(vecs[:, 1] >= 0, 1.0, -1.0)
    else:
        signs = np.ones(1)
    pops = []
    for s in range(k):
        a = np.full(pop_size, max(model.c_sigma[s], 2.0))
        if symmetric:
            h = 1e-3 * rng.standard_normal(pop_size)
        else:
            h = signs[s] * np.ones(pop_size)
        idx = rng.choice(profile.probs[s].size, size=pop_size, p=profile.probs[s])
        pops.append(GroupPopulation(a=a, h=h, pattern_idx=idx))
    r = profile.n_labels
    return CavityState(
        model=model,
        profile=profile,
        populations=tuple(pops),
        lam=float(lam),
        m=np.zeros(r),
        m_hat=np.zeros(r),
    )


def _draw_group(rng, profile, model, state, sigma, size, lam, fixed_degree):
    """Draw `size` new (A, H, pattern) triples for group sigma (0-based)."""
    probs = profile.probs[sigma]
    idx = rng.choice(probs.size, size=size, p=probs) if probs.size > 1 else np.zeros(size, dtype=np.int64)
    if profile.n_labels:
        pats = profile.patterns[sigma]
        hsum = pats.sum(axis=1)[idx]
        ann = (pats @ (2.0 * profile.n_nodes * state.m / profile.label_degrees))[idx]
    else:
        hsum = np.zeros(size)
        ann = np.zeros(size)
    c = model.c_sigma[sigma]
    if fixed_degree is None:
        d_max = int(np.ceil(c + 10.0 * np.sqrt(c)))
        d = np.minimum(rng.poisson(c, size=size), d_max)
    else:
        d = np.full(size, int(fixed_degree))
    total = int(d.sum())
    owner = np.repeat(np.arange(size), d)
    gidx = rng.choice(model.k_groups, size=total, p=model.f[sigma])
    midx = rng.integers(0, state.pop_size, size=total)
    a_n = np.empty(total)
    h_n = np.empty(total)
    for g in range(model.k_groups):
        mask = gidx == g
        a_n[mask] = state.populations[g].a[midx[mask]]
        h_n[mask] = state.populations[g].h[midx[mask]]
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = lam + a_n - 1.0
        t_a = (lam + a_n) / denom
        t_h = a_n * h_n / denom
        sum_a = np.bincount(owner, weights=t_a, minlength=size)
        sum_h = np.bincount(owner, weights=t_h, minlength=size)
        a_new = lam * (d + hsum) - sum_a
        h_new = (ann + sum_h) / a_new
    return a_new, h_new, idx


def sweep(state: CavityState, seed: int, fixed_degree=None) -> CavityState:
    """One full population update at fixed lambda.

    Members whose new precision falls below EPS_A (or whose mean is not
    finite) are rejected and redrawn; a rejection rate above 10% means
    lambda sits inside the bulk and the sweep aborts.
    """
    rng = np.random.default_rng(seed)
    lam = state.lam
    p = state.pop_size
    new_pops = []
    rejections = 0
    for s in range(state.model.k_groups):
        a, h, idx = _draw_group(
            rng, state.profile, state.model, state, s, p, lam, fixed_degree
        )
        bad = np.flatnonzero((a <= EPS_A) | ~np.isfinite(a) | ~np.isfinite(h))
        attempts = 0
        while bad.size:
            rejections += bad.size
            if rejections > 0.1 * p * state.model.k_groups:
                raise InstabilityError(lam, rejections / (p * state.model.k_groups))
            attempts += 1
            if attempts > 200:
                raise InstabilityError(lam, rejections / (p * state.model.k_groups))
            a2, h2, i2 = _draw_group(
                rng, state.profile, state.model, state, s, bad.size, lam, fixed_degree
            )
            a[bad], h[bad], idx[bad] = a2, h2, i2
            bad = bad[(a[bad] <= EPS_A) | ~np.isfinite(a[bad]) | ~np.isfinite(h[bad])]
        new_pops.append(GroupPopulation(a=a, h=h, pattern_idx=idx))
    return replace(
        state,
        populations=tuple(new_pops),
        rejection_rate=rejections / (p * state.model.k_groups),
    )


def update_fields(state: CavityState, damping: float = 0.5) -> CavityState:
    """Re-estimate m_r from the current populations (damped) and sync m_hat.

    m_r is the group-weighted population average of h^r * H, using the
    pattern each member drew during its sweep; m_hat follows the exact
    identity m_hat_r = 2 N m_r / d^v_r.
    """
    profile = state.profile
    if profile.n_labels == 0:
        return state
    weights = state.model.group_sizes / state.model.n_nodes
    m_est = np.zeros(profile.n_labels)
    for s, pop in enumerate(state.populations):
        pats = profile.patterns[s][pop.pattern_idx]  # P x R
        m_est += weights[s] * (pats.T @ pop.h) / pop.size
    m_new = (1.0 - damping) * state.m + damping * m_est
    m_hat = 2.0 * profile.n_nodes * m_new / profile.label_degrees
    return replace(state, m=m_new, m_hat=m_hat)


def _degree_weights(state):
    """Per-member total degree weights c_sigma + sum_r h^r (the d^u proxy)."""
    out = []
    for s, pop in enumerate(state.populations):
        out.append(state.model.c_sigma[s] + _pattern_sums(state.profile, s, pop.pattern_idx))
    return out


def orthogonality_project(state: CavityState) -> CavityState:
    """Remove the degree-weighted mean of H (the lambda_1 = 2 direction).

    This enforces sum_i d^u_i x_i = 0 explicitly, playing the role the
    gamma multiplier would play; at the saddle the shift averages to zero.
    """
    w = _degree_weights(state)
    sizes = state.model.group_sizes.astype(np.float64)
    num = sum(n * np.mean(wi * pop.h) for n, wi, pop in zip(sizes, w, state.populations))
    den = sum(n * np.mean(wi) for n, wi in zip(sizes, w))
    mu = num / den
    pops = tuple(replace(pop, h=pop.h - mu) for pop in state.populations)
    return replace(state, populations=pops)


def field_norm(state: CavityState) -> float:
    """sqrt of the degree-weighted second moment sum_sigma (N_s/N) E[(c+sum h) H^2]."""
    w = _degree_weights(state)
    sizes = state.model.group_sizes / state.model.n_nodes
    total = sum(
        ns * np.mean(wi * pop.h**2) for ns, wi, pop in zip(sizes, w, state.populations)
    )
    return float(np.sqrt(total))


def _rescale(state: CavityState, factor: float) -> CavityState:
    """Multiply every H and every m by factor (the update is linear in both)."""
    pops = tuple(replace(pop, h=pop.h * factor) for pop in state.populations)
    return replace(
        state, populations=pops, m=state.m * factor, m_hat=state.m_hat * factor
    )


def normalization_functional(state: CavityState, seed: int = 0) -> float:
    """Monte-Carlo estimate of the eigenvector-normalization saddle condition.

    Term 1 averages (sum_r h^r) H^2 over physical-node draws; term 2
    composes edge messages from independent population pairs.  At a
    converged, correctly normalized state the total is 1.
    """
    lam = state.lam
    model = state.model
    rng = np.random.default_rng(seed)
    sizes = model.group_sizes / model.n_nodes
    t1 = 0.0
    for s, pop in enumerate(state.populations):
        hsum = _pattern_sums(state.profile, s, pop.pattern_idx)
        t1 += sizes[s] * np.mean(hsum * pop.h**2)
    t2 = 0.0
    for s, pop in enumerate(state.populations):
        for t in range(model.k_groups):
            other = state.populations[t]
            i = rng.integers(0, pop.size, size=pop.size)
            j = rng.integers(0, other.size, size=other.size)
            a_q, h_q = pop.a[i], pop.h[i]
            a_o, h_o = other.a[j], other.h[j]
            # edge message composed from the neighbor-side population
            a_p = (lam + a_o - 1.0) / (lam + a_o)
            h_p = a_o * h_o / (lam + a_o - 1.0)
            ratio = a_p * (a_q * h_q + h_p) / (1.0 - a_p * (lam + a_q))
            t2 += sizes[s] * model.c_sigma[s] * model.f[s, t] * np.mean(ratio**2)
    return float(t1 + t2)


def _relax(state, seed, n_sweeps, n_avg, damping):
    """Run sweeps with projection + renormalization; return state and growth."""
    logs = []
    for t in range(n_sweeps):
        state = sweep(state, seed=seed * 100003 + t)
        # project before re-estimating m: for annotation patterns shared by
        # every node the projection zeroes the m estimate exactly, which is
        # the orthogonality condition the multiplier gamma encodes
        state = orthogonality_project(state)
        state = update_fields(state, damping=damping)
        s = field_norm(state)
        if s < 1e-12:
            return state, 0.0
        logs.append(np.log(s))
        state = _rescale(state, 1.0 / s)
    tail = logs[-n_avg:] if n_avg < len(logs) else logs
    return state, float(np.exp(np.mean(tail)))


def default_bracket(model: ReducedModel):
    """(just above the bulk edge, just below the trivial eigenvalue 2)."""
    c = float(model.mean_degree())
    lo = 1.0 + 2.0 * np.sqrt(c) / (1.0 + c) + 5e-3
    return lo, 1.995


def solve_lambda(
    model: ReducedModel,
    profile: AnnotationProfileDist,
    pop_size: int = 10000,
    n_sweeps: int = 200,
    bracket=None,
    seed: int = 0,
    symmetric_start: bool = False,
    bisect_tol: float = 2e-3,
    damping: float = 0.5,
) -> CavityState:
    """Locate the second eigenvalue and the stationary H-distribution.

    Bisection on lambda against the per-sweep growth rate of the
    (projected, renormalized) H-field: growth > 1 means lambda is below
    the eigenvalue, < 1 above.  Instability of the A-population at a
    trial lambda means lambda sits inside the bulk, hence also too low.
    If even the lower bracket endpoint shows no growth the structure is
    undetectable and a collapsed symmetric state is returned.
    """
    if bracket is None:
        bracket = default_bracket(model)
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (1.0 < lo < hi < 2.0):
        raise ParameterError("bracket must satisfy 1 < lo < hi < 2")
    relax_sweeps = max(30, n_sweeps // 5)
    n_avg = relax_sweeps // 2

    def growth(lam, seed_offset):
        st = initial_state(
            model, profile, pop_size, lam, seed=seed + seed_offset, symmetric=symmetric_start
        )
        try:
            return _relax(st, seed + seed_offset, relax_sweeps, n_avg, damping)
        except InstabilityError:
            return None, np.inf  # inside the bulk: lambda too low

    def undetectable_state():
        collapsed = initial_state(model, profile, pop_size, lo, seed=seed, symmetric=True)
        collapsed = _rescale(collapsed, 0.0)
        return replace(collapsed, undetectable=True)

    state_lo, g_lo = growth(lo, 1)
    state_hi, g_hi = growth(hi, 2)
    if g_lo < 1.0:
        # decay already at the lower endpoint: undetectable phase
        return undetectable_state()
    if not np.isfinite(g_hi) or g_hi > 1.0:
        raise NoSolutionError({lo: g_lo, hi: g_hi})
    best_state, g_at_hi = state_hi, g_hi
    it = 3
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        st, g = growth(mid, it)
        it += 1
        if g > 1.0:
            lo = mid
        else:
            hi = mid
            g_at_hi = g
            if st is not None:
                best_state = st
    # The growth rate is continuous in lambda wherever the sweep is stable,
    # so a genuine crossing leaves the last stable estimate close to 1.  A
    # value far below 1 means bisection collapsed onto the stability edge
    # of the A-recursion with no crossing above it: the eigenvalue sits
    # inside the bulk and the structure is undetectable.
    if g_at_hi < 0.9:
        return undetectable_state()
    lam = 0.5 * (lo + hi)
    final = replace(best_state, lam=lam)
    try:
        final, g = _relax(final, seed + 1000, n_sweeps, max(1, n_sweeps // 4), damping)
    except InstabilityError:
        return undetectable_state()
    if g == 0.0:
        final = _rescale(final, 0.0)
        return replace(final, undetectable=True)
    final = orthogonality_project(final)
    s = field_norm(final)
    final = _rescale(final, 1.0 / s)
    check = normalization_functional(final, seed=seed + 7)
    if check > 0:
        final = _rescale(final, 1.0 / np.sqrt(check))
    return replace(final, norm_check=normalization_functional(final, seed=seed + 8))


def ema_solve(c: float, r: int, lam: float) -> float:
    """Constant-precision self-consistency: a + c/(lam-1+a) = c(lam-1) + lam R.

    Returns the positive root of the cleared quadratic.  No positive real
    root means the uniform-precision ansatz breaks down at this lambda.
    """
    if not (1.0 < lam <= 2.0):
        raise ParameterError("lambda must lie in (1, 2]")
    if r < 0:
        raise ParameterError("R must be non-negative")
    if c <= 0:
        raise ParameterError("c must be positive")
    rhs = c * (lam - 1.0) + lam * r
    # a^2 + (lam - 1 - rhs) a + c - rhs (lam - 1) = 0
    b = lam - 1.0 - rhs
    q = c - rhs * (lam - 1.0)
    disc = b * b - 4.0 * q
    if disc < 0:
        raise ParameterError(
            f"no real root at c={c}, R={r}, lambda={lam}: below the bulk edge"
        )
    root = 0.5 * (-b + np.sqrt(disc))
    if root <= 0:
        raise ParameterError(f"no positive root at c={c}, R={r}, lambda={lam}")
    return float(root)


def _deterministic_patterns(model: ReducedModel):
    """Per-group indicator patterns when every hbar entry is 0 or 1."""
    hb = model.hbar
    if hb.size and not np.all((hb < 1e-12) | (np.abs(hb - 1.0) < 1e-12)):
        raise ParameterError(
            "small-fluctuation solver needs deterministic per-group patterns; "
            "pass an explicit profile for mixed annotations"
        )
    return np.round(hb).T  # K x R


def small_fluct_solve(
    model: ReducedModel,
    lam: float,
    m: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10000,
    damping: float = 0.5,
):
    """Group-mean field equation in the infinite-precision limit.

    With a nonzero source (m != 0) this is a damped affine fixed-point
    iteration.  With m = 0 the map is linear and the nontrivial solution
    is its leading eigenvector on the complement of the uniform direction
    (degree-weighted), returned at unit Euclidean norm.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.size != model.n_labels:
        raise ParameterError("m must have one entry per label")
    pats = _deterministic_patterns(model)  # K x R
    hsum = pats.sum(axis=1) if pats.size else np.zeros(model.k_groups)
    if model.n_labels:
        source = pats @ (2.0 * model.n_nodes * m / model.label_degrees)
    else:
        source = np.zeros(model.k_groups)
    k = model.k_groups
    c = model.c_sigma
    d_max = int(np.ceil(c.max() + 10.0 * np.sqrt(c.max())))
    d = np.arange(d_max + 1)
    pmf = np.stack([poisson.pmf(d, c[s]) for s in range(k)])  # K x (d_max+1)
    denom = lam * hsum[:, None] + d[None, :] * (lam - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w_src = np.where(denom > 0, pmf / denom, 0.0)  # d = 0, R = 0 term vanishes
        w_nbr = np.where(denom > 0, pmf * d[None, :] / denom, 0.0)
    coef_src = w_src.sum(axis=1) * source  # constant term per group
    coef_nbr = w_nbr.sum(axis=1)  # multiplies sum_s' f[s, s'] <H>_s'

    homogeneous = not np.any(np.abs(source) > 0)
    # the physical solution is orthogonal to the uniform (lambda_1 = 2)
    # direction in the degree-weighted metric; deflate it each iteration
    weights = (c + hsum) * model.group_sizes
    uniform = np.ones(k)

    def deflate(x):
        return x - (weights @ x) / (weights @ uniform) * uniform

    if homogeneous:
        h = deflate(np.random.default_rng(0).standard_normal(k))
    else:
        h = np.zeros(k)
    for _ in range(max_iter):
        h_new = deflate(coef_src + coef_nbr * (model.f @ h))
        if homogeneous:
            nrm = np.linalg.norm(h_new)
            if nrm < 1e-300:
                raise ConvergenceError("mean-field iteration collapsed to zero")
            h_new /= nrm
            if min(np.linalg.norm(h_new - h), np.linalg.norm(h_new + h)) < tol:
                return h_new
        else:
            h_new = (1.0 - damping) * h + damping * h_new
            if np.linalg.norm(h_new - h) < tol * max(1.0, np.linalg.norm(h_new)):
                return h_new
        h = h_new
    raise ConvergenceError(f"mean-field iteration did not reach {tol} in {max_iter} steps")


def predicted_accuracy(state: CavityState) -> float:
    """Expected sign-agreement of the inferred bipartition with the groups.

    In the zero-temperature limit each eigenvector element concentrates at
    its member's mean H, so a member is classified correctly when H falls
    on its group's side of zero; the population fraction with the right
    sign is the predicted accuracy.  Undetectable states score 0.5.
    """
    if state.undetectable:
        return 0.5
    means = np.array([pop.h.mean() for pop in state.populations])
    if np.all(np.abs(means) < 1e-12):
        return 0.5
    signs = np.where(means >= 0, 1.0, -1.0)
    sizes = state.model.group_sizes / state.model.n_nodes
    acc = sum(
        ns * np.mean(sg * pop.h > 0)
        for ns, sg, pop in zip(sizes, signs, state.populations)
    )
    return float(max(acc, 1.0 - acc))
