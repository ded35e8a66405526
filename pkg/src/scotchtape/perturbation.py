"""Formal series solutions for the taped eigenvectors, validated numerically.

Both expansions treat the annotation columns as a perturbation of the
original graph's generalized eigenproblem and require the taped and raw
eigenvalues as inputs.  Everything here is dense: the point is numerical
validation on small instances, not scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, IllPosedError, ParameterError
from .graph import Graph, ScotchTapedGraph, laplacian
from .spectral import leading_spectrum

KERNEL_TOL = 1e-6


@dataclass(frozen=True)
class SeriesResult:
    """Partial sums of a formal eigenvector series and their residuals.

    ``approximations[p]`` is the order-p partial sum; ``residuals[p]`` its
    relative residual in the taped eigenvalue equation.  approximations[0]
    is the unperturbed eigenvector.  Divergence is reported, not hidden:
    callers inspect the residual sequence.
    """

    order: int
    approximations: np.ndarray  # (order + 1, N)
    residuals: np.ndarray
    lambda_k: float
    lambda0_k: float
    primed: bool


def raw_generalized_eigh(graph: Graph):
    """All generalized eigenpairs of the original graph, descending.

    Returns (lambdas, primed_vectors, unprimed_vectors); primed vectors are
    the orthonormal eigenvectors of D0^{-1/2} (2 D0 - L) D0^{-1/2}.
    """
    d0 = graph.degrees().astype(np.float64)
    if (d0 == 0).any():
        raise ParameterError("raw spectrum undefined with isolated nodes")
    l_mat = laplacian(graph).toarray()
    isq = 1.0 / np.sqrt(d0)
    h0 = isq[:, None] * (2.0 * np.diag(d0) - l_mat) * isq[None, :]
    h0 = 0.5 * (h0 + h0.T)
    vals, vecs = np.linalg.eigh(h0)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    return vals, vecs, vecs * isq[:, None]


class PerturbationOperator:
    """The taped-minus-raw perturbation in unprimed (generalized) form.

    Application: lambda_k D^h x + dlambda D0 x - sum_r (2 / d_r) h <h, x>.
    """

    def __init__(self, stg: ScotchTapedGraph, lambda_k: float, lambda0_k: float):
        self.lambda_k = float(lambda_k)
        self.delta_lambda = float(lambda_k - lambda0_k)
        self.d_u0 = stg.d_u0
        self.d_uh = stg.d_uh
        self.labels = stg.annotations.labels
        self.d_v_r = stg.label_degrees()

    def apply(self, x):
        out = self.lambda_k * self.d_uh * x + self.delta_lambda * self.d_u0 * x
        for members, dv in zip(self.labels, self.d_v_r):
            out[members] -= (2.0 / dv) * x[members].sum()
        return out

    __call__ = apply


class _SingularSolver:
    """Pseudo-inverse of the singular matrix (2 - lambda0) D0 - L.

    The kernel direction (the raw eigenvector itself) is projected away;
    any additional near-null direction carrying right-hand-side weight is
    an error, not a silent drop.
    """

    def __init__(self, graph: Graph, lambda0_k: float, varphi_k: np.ndarray):
        d0 = graph.degrees().astype(np.float64)
        s = (2.0 - lambda0_k) * np.diag(d0) - laplacian(graph).toarray()
        v = np.asarray(varphi_k, dtype=np.float64)
        kr = np.linalg.norm(s @ v) / np.linalg.norm(v)
        self.scale = max(np.abs(s).max(), 1.0)
        if kr > KERNEL_TOL * self.scale:
            raise ParameterError(
                f"varphi_k is not in the kernel of the Green's function inverse "
                f"(residual {kr:.2e})"
            )
        self.mu, self.vecs = np.linalg.eigh(s)
        self.kernel_idx = int(np.argmax(np.abs(self.vecs.T @ (v / np.linalg.norm(v)))))

    def solve(self, rhs):
        coef = self.vecs.T @ rhs
        out = np.zeros_like(rhs)
        for j in range(self.mu.size):
            if j == self.kernel_idx:
                continue
            if abs(self.mu[j]) < 1e-10 * self.scale:
                if abs(coef[j]) > 1e-8 * np.linalg.norm(rhs):
                    raise IllPosedError(
                        "right-hand side loads a second near-null direction"
                    )
                continue
            out += self.vecs[:, j] * (coef[j] / self.mu[j])
        return out


def greens_apply(graph: Graph, lambda0_k: float, varphi_k, rhs):
    """Minimum-norm solution of ((2 - lambda0) D0 - L) x = P rhs.

    P projects the right-hand side onto the range of the singular matrix
    (the complement of the raw eigenvector direction).
    """
    return _SingularSolver(graph, lambda0_k, np.asarray(varphi_k, float)).solve(
        np.asarray(rhs, dtype=np.float64)
    )


def _branch_eigenvalues(stg: ScotchTapedGraph, k: int, tol: float):
    """Raw and taped eigenvalues/vectors for branch k (1-based)."""
    lam0, primed0, unprimed0 = raw_generalized_eigh(stg.graph)
    if k < 1 or k > lam0.size:
        raise ParameterError(f"branch k={k} outside 1..{lam0.size}")
    gaps = np.abs(np.delete(lam0, k - 1) - lam0[k - 1])
    if gaps.size and gaps.min() < 10 * tol:
        raise DegeneracyError(
            f"raw eigenvalue {lam0[k - 1]:.6f} is degenerate (gap {gaps.min():.2e})"
        )
    taped = leading_spectrum(stg, k=k, method="dense")
    return lam0, primed0, unprimed0, float(taped.eigenvalues[k - 1])


def _taped_residual_unprimed(stg, lambda_k, x):
    l_mat = laplacian(stg.graph).toarray()
    lhs = l_mat @ x
    for members, dv in zip(stg.annotations.labels, stg.label_degrees()):
        lhs[members] -= (2.0 / dv) * x[members].sum()
    rhs = (2.0 - lambda_k) * stg.d_u0 * x - lambda_k * stg.d_uh * x
    return np.linalg.norm(lhs - rhs) / np.linalg.norm(x)


def lippmann_schwinger_series(stg: ScotchTapedGraph, k: int, order: int, tol=1e-10):
    """Partial sums of phi = varphi + G0 Htilde varphi + (G0 Htilde)^2 varphi + ...

    Works in unprimed space.  The taped eigenvalue for branch k comes from
    exact diagonalization of the taped operator.
    """
    lam0, _, unprimed0, lam_k = _branch_eigenvalues(stg, k, tol)
    varphi = unprimed0[:, k - 1]
    htilde = PerturbationOperator(stg, lam_k, lam0[k - 1])
    solver = _SingularSolver(stg.graph, lam0[k - 1], varphi)
    approx = np.empty((order + 1, varphi.size))
    term = varphi.copy()
    approx[0] = term
    for p in range(1, order + 1):
        term = solver.solve(htilde(term))
        approx[p] = approx[p - 1] + term
    residuals = np.array(
        [_taped_residual_unprimed(stg, lam_k, approx[p]) for p in range(order + 1)]
    )
    return SeriesResult(order, approx, residuals, lam_k, float(lam0[k - 1]), primed=False)


def brillouin_wigner_series(stg: ScotchTapedGraph, k: int, order: int, tol=1e-10):
    """Partial sums of the projected-resolvent expansion, in primed space.

    Each term applies Htilde' = H' - H0', projects off the raw eigenvector,
    and applies the resolvent (lambda_k - H0')^{-1} on that complement.
    """
    lam0, primed0, _, lam_k = _branch_eigenvalues(stg, k, tol)
    phi0 = primed0[:, k - 1]

    d0 = stg.d_u0
    isq0 = 1.0 / np.sqrt(d0)
    l_mat = laplacian(stg.graph).toarray()
    h0_core = -l_mat + 2.0 * np.diag(d0)
    h0p = isq0[:, None] * h0_core * isq0[None, :]

    core = h0_core.copy()
    for members, dv in zip(stg.annotations.labels, stg.label_degrees()):
        core[np.ix_(members, members)] += 2.0 / dv
    isq = 1.0 / np.sqrt(stg.d_u)
    hp = isq[:, None] * core * isq[None, :]
    hp = 0.5 * (hp + hp.T)
    htp = hp - h0p

    w = lam0  # eigenvalues of H0'; primed0 are its eigenvectors
    gap = np.abs(np.delete(w, k - 1) - lam_k)
    if gap.size and gap.min() < tol:
        raise IllPosedError(
            f"taped eigenvalue {lam_k:.6f} hits the raw spectrum on the projected range"
        )

    def resolvent_theta(y):
        y = y - phi0 * (phi0 @ y)  # Theta
        coef = primed0.T @ y
        coef[k - 1] = 0.0
        return primed0 @ (coef / (lam_k - w))

    approx = np.empty((order + 1, phi0.size))
    term = phi0.copy()
    approx[0] = term
    for p in range(1, order + 1):
        term = resolvent_theta(htp @ term)
        approx[p] = approx[p - 1] + term
    residuals = np.array(
        [
            np.linalg.norm(hp @ approx[p] - lam_k * approx[p]) / np.linalg.norm(approx[p])
            for p in range(order + 1)
        ]
    )
    return SeriesResult(order, approx, residuals, lam_k, float(lam0[k - 1]), primed=True)
