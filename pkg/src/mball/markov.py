"""Worst-case and average-case Markov factors.

The L2 worst case is an exact symmetric eigenvalue problem in the
differentiation matrices; general p is reported strictly as a lower
bound found by multi-start projected ascent (the supremum is not claimed).
The average case pairs a seeded Monte Carlo estimate over Gaussian
coefficients with the trace formula it is expected to track.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .errors import ConsistencyError, InvalidArgumentError
from .polyspace import (
    DiffMatrix,
    OrthoBasis,
    differentiation_matrices,
    get_basis,
    jacobi_values_1d,
    poly_space_dim,
)
from .quadrature import norm_rule_for
from .weights import Weight, jacobi_weight

# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WorstCaseResult:
    n: int
    p: float
    weight: Weight
    value: float
    method: str  # "eigen-exact" | "irls-ascent" | "lifted"
    extremal: np.ndarray | None = None


@dataclass(frozen=True)
class AverageCaseResult:
    n: int
    weight: Weight
    sigma: float
    sample_count: int
    monte_carlo_mean: float
    monte_carlo_stderr: float
    trace_formula_value: float


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def basis_pair(n: int, w: Weight) -> tuple[OrthoBasis, OrthoBasis, list[DiffMatrix]]:
    """Bases of degrees n and n-1 plus the differentiation matrices."""
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    b_n = get_basis(n, w)
    b_m = b_n.subbasis(n - 1)
    return b_n, b_m, differentiation_matrices(b_n, b_m)


def gradient_gram(diffs: list[DiffMatrix]) -> np.ndarray:
    """The matrix sum of D_i^T D_i whose top eigenvalue is the squared L2 factor."""
    M = diffs[0].matrix.T @ diffs[0].matrix
    for D in diffs[1:]:
        M = M + D.matrix.T @ D.matrix
    return M


# ---------------------------------------------------------------------------
# worst case
# ---------------------------------------------------------------------------


def worst_case_l2(diffs: list[DiffMatrix], n: int | None = None) -> WorstCaseResult:
    """Exact L2 worst-case factor: the top singular value of the stacked
    differentiation matrices."""
    if n is None:
        n = diffs[0].degree
    if n == 0:
        return WorstCaseResult(n=0, p=2.0, weight=diffs[0].weight, value=0.0, method="eigen-exact")
    M = gradient_gram(diffs)
    vals, vecs = np.linalg.eigh(M)
    top = float(vals[-1])
    return WorstCaseResult(
        n=n,
        p=2.0,
        weight=diffs[0].weight,
        value=math.sqrt(max(top, 0.0)),
        method="eigen-exact",
        extremal=vecs[:, -1],
    )


def worst_l2_curve(n_values, w: Weight) -> list[WorstCaseResult]:
    """Worst-case L2 factors for a whole degree range, sharing one basis."""
    n_values = sorted(int(n) for n in n_values)
    n_max = n_values[-1]
    _, _, diffs = basis_pair(n_max, w)
    d = w.dim
    out = []
    for n in n_values:
        N_n = poly_space_dim(n, d)
        N_m = poly_space_dim(n - 1, d)
        sliced = [
            DiffMatrix(axis=D.axis, matrix=D.matrix[:N_m, :N_n], weight=w, degree=n)
            for D in diffs
        ]
        out.append(worst_case_l2(sliced, n=n))
    return out


def _ascend_ratio(objective, c0: np.ndarray, max_iter: int = 120, h: float = 1e-6) -> tuple[np.ndarray, float]:
    """Projected ascent on the unit coefficient sphere with a numerical
    gradient of the smooth ratio and a backtracking step."""
    c = c0 / np.linalg.norm(c0)
    val = objective(c)
    N = len(c)
    for _ in range(max_iter):
        grad = np.empty(N)
        for i in range(N):
            e = np.zeros(N)
            e[i] = h
            grad[i] = (objective((c + e) / np.linalg.norm(c + e)) - val) / h
        grad -= (grad @ c) * c  # tangent projection
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-12:
            break
        step = 1.0
        improved = False
        while step > 1e-8:
            cand = c + step * grad / gnorm
            cand /= np.linalg.norm(cand)
            cand_val = objective(cand)
            if cand_val > val + 1e-14:
                c, val = cand, cand_val
                improved = True
                break
            step *= 0.25
        if not improved:
            break
    return c, val


def worst_case_lp(
    n: int,
    p: float,
    w: Weight,
    restarts: int = 6,
    seed: int = 0,
) -> WorstCaseResult:
    """Lower-bound estimate of the Lp worst-case factor by multi-start ascent.

    The start set always contains the lifted univariate candidate and the
    L2 extremal vector, so the result dominates both; it is never claimed
    to be the supremum.
    """
    if p < 1.0:
        raise InvalidArgumentError("p must be at least 1")
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    basis_n, basis_m, diffs = basis_pair(n, w)
    rule = norm_rule_for(w, n)
    V = basis_n.eval(rule.nodes)
    Wq = rule.weights
    grads = [basis_m.eval(rule.nodes) @ D.matrix for D in diffs]

    def objective(c):
        g2 = np.zeros(len(Wq))
        for G in grads:
            g2 += (G @ c) ** 2
        num = float(Wq @ g2 ** (p / 2.0)) ** (1.0 / p)
        den = float(Wq @ np.abs(V @ c) ** p) ** (1.0 / p)
        return num / den

    starts = [_lifted_candidate_coeffs(n, p, w, basis_n)]
    l2 = worst_case_l2(diffs, n=n)
    if l2.extremal is not None:
        starts.append(l2.extremal)
    rng_count = max(0, restarts - len(starts))
    for i in range(rng_count):
        rng = np.random.default_rng(np.random.Philox(key=[seed, i]))
        starts.append(rng.standard_normal(basis_n.size))
    best_c, best_val = None, -np.inf
    for c0 in starts[: max(restarts, 2)]:
        c, val = _ascend_ratio(objective, np.asarray(c0, dtype=float))
        if val > best_val:
            best_c, best_val = c, val
    return WorstCaseResult(n=n, p=p, weight=w, value=best_val, method="irls-ascent", extremal=best_c)


# ---------------------------------------------------------------------------
# one-dimensional reference problem
# ---------------------------------------------------------------------------


def _jacobi_norms_1d(kmax: int, a: float, b: float) -> np.ndarray:
    """L2 norms of the classical Jacobi polynomials against (1-t)^a (1+t)^b."""
    norms = np.empty(kmax + 1)
    for k in range(kmax + 1):
        if k == 0:
            log_h = (a + b + 1) * math.log(2.0) + gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2)
        else:
            log_h = (
                (a + b + 1) * math.log(2.0)
                + gammaln(k + a + 1)
                + gammaln(k + b + 1)
                - gammaln(k + 1)
                - gammaln(k + a + b + 1)
                - math.log(2 * k + a + b + 1)
            )
        norms[k] = math.exp(0.5 * log_h)
    return norms


def _jacobi_orthonormal_1d(t: np.ndarray, kmax: int, a: float, b: float) -> np.ndarray:
    """Orthonormal Jacobi polynomials (weight (1-t)^a (1+t)^b) at samples."""
    raw = jacobi_values_1d(np.asarray(t, dtype=float), kmax, a, b)
    return raw / _jacobi_norms_1d(kmax, a, b)[None, :]


def _jacobi_orthonormal_derivative_1d(t: np.ndarray, kmax: int, a: float, b: float) -> np.ndarray:
    """Derivatives of the orthonormal family, via the shifted-parameter identity."""
    t = np.asarray(t, dtype=float)
    out = np.zeros((t.size, kmax + 1))
    if kmax >= 1:
        shifted = jacobi_values_1d(t, kmax - 1, a + 1.0, b + 1.0)
        for k in range(1, kmax + 1):
            out[:, k] = 0.5 * (k + a + b + 1.0) * shifted[:, k - 1]
    return out / _jacobi_norms_1d(kmax, a, b)[None, :]


def diff_matrix_1d(n: int, a: float, b: float) -> np.ndarray:
    """Differentiation matrix between orthonormal Jacobi coefficient vectors."""
    m = n + 2
    nodes, wts = roots_jacobi(m, a, b)
    P = _jacobi_orthonormal_1d(nodes, n, a, b)
    dP = _jacobi_orthonormal_derivative_1d(nodes, n, a, b)
    return (P[:, :n] * wts[:, None]).T @ dP


def worst_case_1d(n: int, p: float, lam: float, restarts: int = 5, seed: int = 0) -> float:
    """Worst-case factor on [-1, 1] against the weight (1-t^2)^(lam - 1/2).

    p = 2 is the exact eigenvalue route; other p use the same multi-start
    ascent as the ball case, so the value is a certified lower bound.
    """
    if n == 0:
        return 0.0
    if lam < 0:
        raise InvalidArgumentError("lam must be nonnegative")
    a = b = lam - 0.5
    D = diff_matrix_1d(n, a, b)
    if p == 2.0:
        vals = np.linalg.eigvalsh(D.T @ D)
        return math.sqrt(max(float(vals[-1]), 0.0))
    m = n + 11
    nodes, wts = roots_jacobi(m, a, b)
    P = _jacobi_orthonormal_1d(nodes, n, a, b)
    dP = _jacobi_orthonormal_derivative_1d(nodes, n, a, b)

    def objective(c):
        num = float(wts @ np.abs(dP @ c) ** p) ** (1.0 / p)
        den = float(wts @ np.abs(P @ c) ** p) ** (1.0 / p)
        return num / den

    M = D.T @ D
    evals, evecs = np.linalg.eigh(M)
    starts = [evecs[:, -1]]
    for i in range(max(0, restarts - 1)):
        rng = np.random.default_rng(np.random.Philox(key=[seed, 7_000 + i]))
        starts.append(rng.standard_normal(n + 1))
    best = -np.inf
    for c0 in starts:
        _, val = _ascend_ratio(objective, np.asarray(c0, dtype=float))
        best = max(best, val)
    return best


def _extremal_1d_coeffs(n: int, p: float, lam: float, seed: int = 0) -> np.ndarray:
    """Coefficients (orthonormal 1D basis) of the best univariate competitor."""
    a = b = lam - 0.5
    D = diff_matrix_1d(n, a, b)
    if p == 2.0:
        _, vecs = np.linalg.eigh(D.T @ D)
        return vecs[:, -1]
    m = n + 11
    nodes, wts = roots_jacobi(m, a, b)
    P = _jacobi_orthonormal_1d(nodes, n, a, b)
    dP = _jacobi_orthonormal_derivative_1d(nodes, n, a, b)

    def objective(c):
        num = float(wts @ np.abs(dP @ c) ** p) ** (1.0 / p)
        den = float(wts @ np.abs(P @ c) ** p) ** (1.0 / p)
        return num / den

    _, vecs = np.linalg.eigh(D.T @ D)
    best_c, best_val = vecs[:, -1], objective(vecs[:, -1])
    for i in range(4):
        rng = np.random.default_rng(np.random.Philox(key=[seed, 9_000 + i]))
        c, val = _ascend_ratio(objective, rng.standard_normal(n + 1))
        if val > best_val:
            best_c, best_val = c, val
    return best_c


def _lifted_candidate_coeffs(n: int, p: float, w: Weight, basis_n: OrthoBasis) -> np.ndarray:
    """Ball coefficients of the univariate competitor f(x_1), by projection."""
    if w.kind == "jacobi":
        lam = w.mu + (w.dim - 1.0) / 2.0
    else:
        lam = 0.5 + (w.dim - 1.0) / 2.0
    c1d = _extremal_1d_coeffs(n, p, lam)
    a = b = lam - 0.5
    rule = basis_n.rule
    f_vals = _jacobi_orthonormal_1d(rule.nodes[:, 0], n, a, b) @ c1d
    return (basis_n.eval(rule.nodes) * rule.weights[:, None]).T @ f_vals


def lifted_lower_bound(
    n: int,
    p: float,
    mu: float,
    d: int,
    verify_identity: bool = True,
    seed: int = 3,
) -> float:
    """Worst-case lower bound from univariate competitors f(x_i).

    Separating one coordinate reduces the ball problem to the interval
    with parameter lam = mu + (d-1)/2; the reduction constant is verified
    to be independent of f (a quadrature consistency check).
    """
    lam = mu + (d - 1.0) / 2.0
    if verify_identity:
        lifting_constant(n, p, mu, d, seed=seed)
    return worst_case_1d(n, p, lam)


def lifting_constant(n: int, p: float, mu: float, d: int, seed: int = 3, samples: int = 4) -> float:
    """The f-independent ratio of ball to interval integrals for f(x_1).

    The reduction constant is a property of the projected measure, so it
    is verified on squared test polynomials (exactly integrable by both
    rules, which pins quadrature bugs far below the tolerance); the same
    constant then serves every p.
    """
    lam = mu + (d - 1.0) / 2.0
    a = b = lam - 0.5
    w = jacobi_weight(mu, d)
    from .quadrature import ball_rule_for

    rule = ball_rule_for(w, 2 * n)
    nodes_1d, wts_1d = roots_jacobi(n + 2, a, b)
    P1 = _jacobi_orthonormal_1d(nodes_1d, n, a, b)
    Pball = _jacobi_orthonormal_1d(rule.nodes[:, 0], n, a, b)
    rng = np.random.default_rng(np.random.Philox(key=[seed, 0]))
    ratios = []
    for _ in range(samples):
        c = rng.standard_normal(n + 1)
        ball_val = float(rule.weights @ (Pball @ c) ** 2)
        line_val = float(wts_1d @ (P1 @ c) ** 2)
        ratios.append(ball_val / line_val)
    ratios = np.asarray(ratios)
    spread = float(ratios.max() / ratios.min()) - 1.0
    if spread > 1e-7:
        raise ConsistencyError(
            f"lifting identity violated: constant varies by {spread:.2e} across test functions"
        )
    return float(ratios.mean())


# ---------------------------------------------------------------------------
# trace formula and the average case
# ---------------------------------------------------------------------------


def trace_formula(diffs: list[DiffMatrix], n: int, d: int) -> float:
    """n^(-d/2) sum_i sqrt(tr(D_i^T D_i)), with the trace verified against
    the quadrature sum of squared derivative norms."""
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    w = diffs[0].weight
    basis_n = get_basis(n, w)
    rule = basis_n.subbasis(max(n - 1, 0)).rule
    total = 0.0
    for D in diffs:
        tr_matrix = float(np.sum(D.matrix * D.matrix))
        dvals = basis_n.eval_derivative(rule.nodes, D.axis)
        tr_quad = float(rule.weights @ np.sum(dvals * dvals, axis=1))
        if abs(tr_matrix - tr_quad) > 1e-8 * max(abs(tr_quad), 1e-300):
            raise ConsistencyError(
                f"trace disagreement on axis {D.axis}: {tr_matrix} vs {tr_quad}"
            )
        total += math.sqrt(tr_matrix)
    return float(n ** (-d / 2.0) * total)


def average_case_monte_carlo(
    diffs: list[DiffMatrix],
    sigma: float = 1.0,
    samples: int = 2000,
    seed: int = 0,
    n: int | None = None,
    stream: int = 0,
) -> AverageCaseResult:
    """Monte Carlo mean of the gradient-to-norm ratio over Gaussian coefficients.

    Draws use a counter-based generator keyed by (seed, stream, draw index),
    so shards are order-independent and sigma only rescales each draw.
    """
    if sigma <= 0:
        raise InvalidArgumentError("sigma must be positive")
    if samples < 100:
        raise InvalidArgumentError("need at least 100 samples")
    if n is None:
        n = diffs[0].degree
    w = diffs[0].weight
    M = gradient_gram(diffs)
    N = M.shape[0]
    ratios = np.empty(samples)
    for i in range(samples):
        rng = np.random.default_rng(np.random.Philox(key=[seed, (stream << 32) + i]))
        a = sigma * rng.standard_normal(N)
        ratios[i] = math.sqrt(max(float(a @ (M @ a)), 0.0)) / float(np.linalg.norm(a))
    mean = float(np.mean(ratios))
    stderr = float(np.std(ratios, ddof=1)) / math.sqrt(samples)
    tf = trace_formula(diffs, n, w.dim)
    return AverageCaseResult(
        n=n,
        weight=w,
        sigma=sigma,
        sample_count=samples,
        monte_carlo_mean=mean,
        monte_carlo_stderr=stderr,
        trace_formula_value=tf,
    )


def average_1d(n: int, lam: float, samples: int = 2000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo average Markov factor for the interval reference problem."""
    D = diff_matrix_1d(n, lam - 0.5, lam - 0.5)
    M = D.T @ D
    ratios = np.empty(samples)
    for i in range(samples):
        rng = np.random.default_rng(np.random.Philox(key=[seed, i]))
        a = rng.standard_normal(n + 1)
        ratios[i] = math.sqrt(max(float(a @ (M @ a)), 0.0)) / float(np.linalg.norm(a))
    return float(np.mean(ratios)), float(np.std(ratios, ddof=1)) / math.sqrt(samples)


# ---------------------------------------------------------------------------
# scaling-exponent fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    max_residual: float


def exponent_fit(points) -> FitResult:
    """Least-squares slope of log(value) against log(n)."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise InvalidArgumentError("need at least 3 points to fit an exponent")
    if any(v <= 0 for _, v in pts):
        raise InvalidArgumentError("values must be positive for a log-log fit")
    logs_n = np.log([n for n, _ in pts])
    logs_v = np.log([v for _, v in pts])
    A = np.stack([logs_n, np.ones_like(logs_n)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, logs_v, rcond=None)
    resid = logs_v - A @ np.array([slope, intercept])
    return FitResult(slope=float(slope), intercept=float(intercept), max_residual=float(np.max(np.abs(resid))))
