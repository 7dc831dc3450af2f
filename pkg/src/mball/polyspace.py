"""Polynomial spaces on the ball.

Orthonormal bases are produced by blockwise modified Gram-Schmidt (one
full re-orthogonalization pass) on weighted quadrature node values of a
structured graded initial family, and are stored as coefficient matrices
over that family.

The family must stay well conditioned on the ball up to high degree, so
d=2 uses a disk-harmonic family (harmonic angular factors times bounded
radial Jacobi factors in 2 rho^2 - 1; angular blocks are exactly
orthogonal under any radial weight) and d=3 uses graded tensor-Chebyshev
products, whose conditioning is comfortable at the lower degrees
supported there.  Both families evaluate values and first derivatives by
stable recurrences.

Double precision is comfortable through degree 30 (d=2, user bases; the
kernel machinery internally goes further) and 16 (d=3); a conditioning
guard aborts construction cleanly if a degree block degenerates.

A separate dict-based monomial type supports exact small-degree algebra.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DimensionMismatchError, InvalidArgumentError
from .quadrature import QuadratureRule, ball_moment, ball_rule_for
from .weights import Weight, jacobi_weight


def poly_space_dim(n: int, d: int) -> int:
    """Dimension of the space of d-variate polynomials of total degree <= n."""
    if n < 0:
        raise InvalidArgumentError("degree must be nonnegative")
    return math.comb(n + d, d)


def graded_indices(n: int, d: int) -> np.ndarray:
    """Multi-indices with |alpha| <= n, sorted by (degree, lexicographic);
    the list for a smaller degree is a prefix of the list for a larger one."""
    out = []
    for total in range(n + 1):
        block = []
        if d == 2:
            for a in range(total + 1):
                block.append((a, total - a))
        else:
            for a in range(total + 1):
                for b in range(total - a + 1):
                    block.append((a, b, total - a - b))
        out.extend(sorted(block))
    return np.asarray(out, dtype=int)


def cheb_values_1d(x: np.ndarray, degree: int) -> np.ndarray:
    """Chebyshev T_0..T_degree at the sample points."""
    x = np.asarray(x, dtype=float)
    vals = np.empty((x.size, degree + 1))
    vals[:, 0] = 1.0
    if degree >= 1:
        vals[:, 1] = x
    for k in range(2, degree + 1):
        vals[:, k] = 2.0 * x * vals[:, k - 1] - vals[:, k - 2]
    return vals


def cheb_derivative_values_1d(x: np.ndarray, degree: int) -> np.ndarray:
    """T_0'..T_degree' at the sample points, via T_k' = k U_{k-1}."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((x.size, degree + 1))
    if degree >= 1:
        U = np.empty((x.size, degree))
        U[:, 0] = 1.0
        if degree >= 2:
            U[:, 1] = 2.0 * x
        for k in range(2, degree):
            U[:, k] = 2.0 * x * U[:, k - 1] - U[:, k - 2]
        out[:, 1:] = U * np.arange(1, degree + 1)[None, :]
    return out


# ---------------------------------------------------------------------------
# structured evaluation families
# ---------------------------------------------------------------------------


class TensorChebFamily:
    """Graded tensor products of Chebyshev polynomials (used for d=3)."""

    def __init__(self, degree: int, dim: int):
        self.degree = int(degree)
        self.dim = int(dim)
        self.indices = graded_indices(degree, dim)
        self.member_degrees = self.indices.sum(axis=1)

    @property
    def size(self) -> int:
        return len(self.indices)

    def prefix(self, k: int) -> "TensorChebFamily":
        return TensorChebFamily(k, self.dim)

    def values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        top = int(self.indices.max())
        per_axis = [cheb_values_1d(X[:, i], top) for i in range(self.dim)]
        V = per_axis[0][:, self.indices[:, 0]]
        for i in range(1, self.dim):
            V = V * per_axis[i][:, self.indices[:, i]]
        return V

    def derivative_values(self, X: np.ndarray, axis: int) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        top = int(self.indices.max())
        per_axis = [cheb_values_1d(X[:, i], top) for i in range(self.dim)]
        der = cheb_derivative_values_1d(X[:, axis], top)
        cols = []
        for i in range(self.dim):
            src = der if i == axis else per_axis[i]
            cols.append(src[:, self.indices[:, i]])
        V = cols[0]
        for c in cols[1:]:
            V = V * c
        return V

    def labels(self) -> list[tuple]:
        return [tuple(int(v) for v in row) for row in self.indices]

    def member_poly(self, j: int) -> "Poly":
        from numpy.polynomial import chebyshev as C

        alpha = self.indices[j]
        out = Poly.constant(1.0, self.dim)
        for i, k in enumerate(alpha):
            mono = C.cheb2poly(np.eye(int(self.indices.max()) + 1)[k])
            axis_poly = Poly(self.dim, {})
            for power, coef in enumerate(mono):
                if coef != 0.0:
                    key = [0] * self.dim
                    key[i] = power
                    axis_poly = axis_poly + Poly(self.dim, {tuple(key): float(coef)})
            out = out * axis_poly
        return out


def jacobi_values_1d(t: np.ndarray, kmax: int, alpha: float, beta: float) -> np.ndarray:
    """Jacobi polynomials P_0..P_kmax at the sample points, by recurrence."""
    t = np.asarray(t, dtype=float)
    vals = np.empty((t.size, kmax + 1))
    vals[:, 0] = 1.0
    if kmax >= 1:
        vals[:, 1] = 0.5 * ((alpha + beta + 2.0) * t + (alpha - beta))
    for k in range(2, kmax + 1):
        c = 2.0 * k + alpha + beta
        a1 = 2.0 * k * (k + alpha + beta) * (c - 2.0)
        a2 = (c - 1.0) * (alpha * alpha - beta * beta)
        a3 = (c - 1.0) * c * (c - 2.0)
        a4 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * c
        vals[:, k] = ((a2 + a3 * t) * vals[:, k - 1] - a4 * vals[:, k - 2]) / a1
    return vals


class DiskHarmonicFamily:
    """Harmonic angular factors times bounded radial Jacobi factors (d=2).

    Member (m, k, s) is P_k^(0, m)(2 rho^2 - 1) * Re/Im((x1 + i x2)^m), a
    polynomial of exact degree m + 2k with values bounded by 1 on the disk.
    Angular frequencies decouple under any radial weight and the radial
    factors match the (1+t)^m concentration of the radial measure, which
    keeps Gram-Schmidt well conditioned at degrees where tensor-Chebyshev
    products on the disk degenerate.
    """

    def __init__(self, degree: int):
        self.degree = int(degree)
        self.dim = 2
        members = []
        for total in range(degree + 1):
            for m in range(total, -1, -2):
                k = (total - m) // 2
                members.append((m, k, 0))
                if m > 0:
                    members.append((m, k, 1))
        self.members = members
        self.member_degrees = np.array([m + 2 * k for m, k, _ in members])

    @property
    def size(self) -> int:
        return len(self.members)

    def prefix(self, k: int) -> "DiskHarmonicFamily":
        return DiskHarmonicFamily(k)

    def _pieces(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        z = X[:, 0] + 1j * X[:, 1]
        top_m = self.degree
        zp = np.empty((len(X), top_m + 1), dtype=complex)
        zp[:, 0] = 1.0
        for m in range(1, top_m + 1):
            zp[:, m] = zp[:, m - 1] * z
        t = 2.0 * (X[:, 0] ** 2 + X[:, 1] ** 2) - 1.0
        radial = {}
        for m in range(top_m + 1):
            kmax = (self.degree - m) // 2
            if kmax >= 0:
                radial[m] = jacobi_values_1d(t, kmax, 0.0, float(m))
        return X, zp, t, radial

    def values(self, X: np.ndarray) -> np.ndarray:
        X, zp, _, radial = self._pieces(X)
        V = np.empty((len(X), self.size))
        for j, (m, k, s) in enumerate(self.members):
            ang = zp[:, m].imag if s else zp[:, m].real
            V[:, j] = radial[m][:, k] * ang
        return V

    def derivative_values(self, X: np.ndarray, axis: int) -> np.ndarray:
        X, zp, t, radial = self._pieces(X)
        deriv = {}
        for m in range(self.degree + 1):
            kmax = (self.degree - m) // 2
            if kmax >= 1:
                # d/dt P_k^(0, m) = (k + m + 1)/2 * P_{k-1}^(1, m+1)
                deriv[m] = jacobi_values_1d(t, kmax - 1, 1.0, float(m + 1))
        xi = X[:, axis]
        V = np.empty((len(X), self.size))
        for j, (m, k, s) in enumerate(self.members):
            ang = zp[:, m].imag if s else zp[:, m].real
            # d/dx_i of Re/Im(z^m): m times the degree-(m-1) harmonic partner
            if m == 0:
                d_ang = np.zeros(len(X))
            elif s == 0:
                d_ang = m * (zp[:, m - 1].real if axis == 0 else -zp[:, m - 1].imag)
            else:
                d_ang = m * (zp[:, m - 1].imag if axis == 0 else zp[:, m - 1].real)
            term = radial[m][:, k] * d_ang
            if k >= 1:
                term = term + 0.5 * (k + m + 1) * deriv[m][:, k - 1] * 4.0 * xi * ang
            V[:, j] = term
        return V

    def labels(self) -> list[tuple]:
        return list(self.members)

    def member_poly(self, j: int) -> "Poly":
        from scipy.special import jacobi as jacobi_poly

        m, k, s = self.members[j]
        # angular: Re/Im((x + i y)^m) by binomial expansion
        ang = Poly(2, {})
        for jj in range(m + 1):
            coef = math.comb(m, jj) * (1j**jj)
            val = coef.imag if s else coef.real
            if val != 0.0:
                ang = ang + Poly(2, {(m - jj, jj): float(val)})
        if m == 0:
            ang = Poly.constant(1.0, 2)
        # radial: P_k^(0, m)(2(x^2 + y^2) - 1)
        mono = jacobi_poly(k, 0.0, float(m)).coefficients[::-1]  # ascending in t
        rad = Poly(2, {})
        rr = Poly(2, {(2, 0): 2.0, (0, 2): 2.0, (0, 0): -1.0})
        power = Poly.constant(1.0, 2)
        for coef in mono:
            if coef != 0.0:
                rad = rad + power.scale(float(coef))
            power = power * rr
        return rad * ang


def _family_for(degree: int, dim: int):
    return DiskHarmonicFamily(degree) if dim == 2 else TensorChebFamily(degree, dim)


# ---------------------------------------------------------------------------
# exact monomial algebra (small degrees)
# ---------------------------------------------------------------------------


class Poly:
    """Multivariate polynomial as a multi-index -> coefficient map."""

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim: int, coeffs: dict | None = None):
        self.dim = int(dim)
        self.coeffs = {}
        if coeffs:
            for key, val in coeffs.items():
                if val != 0.0:
                    key = tuple(int(k) for k in key)
                    if len(key) != self.dim:
                        raise DimensionMismatchError("multi-index length mismatch")
                    self.coeffs[key] = float(val)

    @staticmethod
    def constant(value: float, dim: int) -> "Poly":
        return Poly(dim, {tuple([0] * dim): value})

    @staticmethod
    def coordinate(axis: int, dim: int) -> "Poly":
        key = [0] * dim
        key[axis] = 1
        return Poly(dim, {tuple(key): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=0)

    def __add__(self, other: "Poly") -> "Poly":
        if self.dim != other.dim:
            raise DimensionMismatchError("polynomial dimensions differ")
        out = dict(self.coeffs)
        for key, val in other.coeffs.items():
            out[key] = out.get(key, 0.0) + val
        return Poly(self.dim, out)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1.0)

    def scale(self, factor: float) -> "Poly":
        return Poly(self.dim, {k: v * factor for k, v in self.coeffs.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        if self.dim != other.dim:
            raise DimensionMismatchError("polynomial dimensions differ")
        out: dict = {}
        for ka, va in self.coeffs.items():
            for kb, vb in other.coeffs.items():
                key = tuple(a + b for a, b in zip(ka, kb))
                out[key] = out.get(key, 0.0) + va * vb
        return Poly(self.dim, out)

    def differentiate(self, axis: int) -> "Poly":
        out = {}
        for key, val in self.coeffs.items():
            if key[axis] > 0:
                new = list(key)
                new[axis] -= 1
                out[tuple(new)] = out.get(tuple(new), 0.0) + val * key[axis]
        return Poly(self.dim, out)

    def eval(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        vals = np.zeros(len(X))
        for key, coef in self.coeffs.items():
            term = np.full(len(X), coef)
            for i, k in enumerate(key):
                if k:
                    term = term * X[:, i] ** k
            vals += term
        return vals

    def max_abs_coeff(self) -> float:
        return max((abs(v) for v in self.coeffs.values()), default=0.0)

    def __repr__(self) -> str:
        return f"Poly(dim={self.dim}, terms={len(self.coeffs)}, degree={self.degree})"


def differentiate(P: Poly, axis: int) -> Poly:
    """Exact coefficient-level partial derivative."""
    return P.differentiate(axis)


def apply_jacobi_operator(P: Poly, mu: float) -> Poly:
    """Second-order operator Laplacian - (x.grad)^2 - (2 mu + d - 1) x.grad.

    Its eigenspaces are the degree blocks of the jacobi-weight orthogonal
    decomposition, with eigenvalue -k (k + 2 mu + d - 1) on block k.
    """
    d = P.dim
    lap: dict = {}
    for key, val in P.coeffs.items():
        for i in range(d):
            if key[i] >= 2:
                new = list(key)
                new[i] -= 2
                lap[tuple(new)] = lap.get(tuple(new), 0.0) + val * key[i] * (key[i] - 1)
    out = dict(lap)
    shift = 2.0 * mu + d - 1.0
    for key, val in P.coeffs.items():
        total = sum(key)
        # x.grad is diagonal on monomials with eigenvalue |alpha|
        out[key] = out.get(key, 0.0) - val * (total * total + shift * total)
    return Poly(d, out)


def jacobi_moment(alpha, mu: float, d: int) -> float:
    """Exact monomial moment against the jacobi weight on the ball."""
    return ball_moment(alpha, jacobi_weight(mu, d))


# ---------------------------------------------------------------------------
# orthonormal bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrthoBasis:
    """Degree-graded orthonormal basis stored over a structured family."""

    weight: Weight
    degree: int
    family: object
    coeffs: np.ndarray  # (N, N); column j holds element j over the family
    rule: QuadratureRule
    gram_residual: float

    @property
    def dim(self) -> int:
        return int(self.weight.dim)

    @property
    def size(self) -> int:
        return int(self.coeffs.shape[1])

    def block_degrees(self) -> np.ndarray:
        """Exact degree of each element (its graded block index)."""
        return self.family.member_degrees[: self.size]

    def eval(self, X) -> np.ndarray:
        """Values (m, N) of all elements at the rows of X."""
        return self.family.values(X) @ self.coeffs

    def eval_derivative(self, X, axis: int) -> np.ndarray:
        """Values (m, N) of the partial derivatives of all elements."""
        return self.family.derivative_values(X, axis) @ self.coeffs

    def subbasis(self, k: int) -> "OrthoBasis":
        """The orthonormal basis of the degree-k subspace (a prefix view)."""
        if not (0 <= k <= self.degree):
            raise InvalidArgumentError("subbasis degree out of range")
        if k == self.degree:
            return self
        Nk = poly_space_dim(k, self.dim)
        return OrthoBasis(
            weight=self.weight,
            degree=k,
            family=self.family.prefix(k),
            coeffs=self.coeffs[:Nk, :Nk],
            rule=self.rule,
            gram_residual=self.gram_residual,
        )

    def element_poly(self, j: int) -> Poly:
        """Monomial form of element j (intended for small degrees)."""
        out = Poly(self.dim, {})
        for row in range(self.size):
            c = self.coeffs[row, j]
            if c != 0.0:
                out = out + self.family.member_poly(row).scale(float(c))
        return out

    def to_csv(self, path) -> None:
        labels = self.family.labels()
        width = len(labels[0])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["element_index"] + [f"alpha_{i}" for i in range(width)] + ["coefficient"]
            )
            for j in range(self.size):
                for row in range(self.size):
                    c = self.coeffs[row, j]
                    if c != 0.0:
                        writer.writerow([j] + list(labels[row]) + [repr(float(c))])


def orthonormal_basis(
    n: int,
    w: Weight,
    rule: QuadratureRule | None = None,
    shuffle_seed: int | None = None,
) -> OrthoBasis:
    """Degree-graded orthonormal basis of the degree-n polynomial space in L2(w).

    Parameters
    ----------
    n : total degree of the spanned space
    w : catalog weight defining the inner product
    rule : quadrature rule with exactness >= 2n against w (built if omitted)
    shuffle_seed : optional; permutes the initial family inside each degree
        block, producing a basis that differs by a block-orthogonal transform
    """
    d = w.dim
    if rule is None:
        rule = ball_rule_for(w, 2 * n)
    if rule.exactness_degree < 2 * n:
        raise InvalidArgumentError("rule exactness must be at least twice the degree")
    family = _family_for(n, d)
    N = family.size
    A = np.sqrt(rule.weights)[:, None] * family.values(rule.nodes)
    perm = np.arange(N)
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
        for k in range(n + 1):
            lo = poly_space_dim(k - 1, d) if k else 0
            hi = poly_space_dim(k, d)
            block = np.arange(lo, hi)
            perm[lo:hi] = block[rng.permutation(hi - lo)]
    A = A[:, perm]
    col_norms = np.linalg.norm(A, axis=0)

    Q = np.empty_like(A)
    R = np.zeros((N, N))
    for k in range(n + 1):
        lo = poly_space_dim(k - 1, d) if k else 0
        hi = poly_space_dim(k, d)
        block = A[:, lo:hi].copy()
        if lo:
            c1 = Q[:, :lo].T @ block
            block -= Q[:, :lo] @ c1
            c2 = Q[:, :lo].T @ block
            block -= Q[:, :lo] @ c2
            R[:lo, lo:hi] = c1 + c2
        qb, rb = np.linalg.qr(block)
        signs = np.sign(np.diag(rb))
        signs[signs == 0.0] = 1.0
        qb *= signs[None, :]
        rb *= signs[:, None]
        ratios = np.abs(np.diag(rb)) / col_norms[lo:hi]
        if np.any(ratios < 1e-14):
            raise ConditioningError(
                f"degree block {k} is numerically singular (min ratio {ratios.min():.2e})",
                degree_block=k,
            )
        Q[:, lo:hi] = qb
        R[lo:hi, lo:hi] = rb

    from scipy.linalg import solve_triangular

    Rinv = solve_triangular(R, np.eye(N), lower=False)
    coeffs = np.zeros((N, N))
    coeffs[perm, :] = Rinv
    gram = Q.T @ Q
    gram_residual = float(np.max(np.abs(gram - np.eye(N))))
    return OrthoBasis(
        weight=w,
        degree=n,
        family=family,
        coeffs=coeffs,
        rule=rule,
        gram_residual=gram_residual,
    )


_BASIS_CACHE: dict = {}
_BASIS_LOCK = threading.Lock()


def get_basis(n: int, w: Weight) -> OrthoBasis:
    """Cached orthonormal basis; larger cached bases are reused as prefixes."""
    with _BASIS_LOCK:
        best = None
        for (cw, cn), basis in _BASIS_CACHE.items():
            if cw == w and cn >= n and (best is None or cn < best.degree):
                best = basis
        if best is not None:
            return best.subbasis(n)
    basis = orthonormal_basis(n, w)
    with _BASIS_LOCK:
        _BASIS_CACHE[(w, n)] = basis
    return basis


# ---------------------------------------------------------------------------
# differentiation matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffMatrix:
    """Matrix of the partial-derivative operator between coefficient vectors."""

    axis: int
    matrix: np.ndarray  # (N_{n-1}, N_n)
    weight: Weight
    degree: int  # n of the source basis

    def apply(self, coeff_vec: np.ndarray) -> np.ndarray:
        return self.matrix @ coeff_vec


def differentiation_matrix(basis_n: OrthoBasis, basis_nm1: OrthoBasis, axis: int) -> DiffMatrix:
    """Entries <d_i P_j, P_k>_w: derivatives are evaluated by the family's
    exact pointwise recurrences and projected with the lower basis's rule."""
    if basis_n.weight != basis_nm1.weight:
        raise InvalidArgumentError("bases must share the weight")
    if basis_n.degree != basis_nm1.degree + 1:
        raise InvalidArgumentError("bases must have degrees n and n-1")
    if not (0 <= axis < basis_n.dim):
        raise InvalidArgumentError("axis out of range")
    rule = basis_nm1.rule
    lower_vals = basis_nm1.eval(rule.nodes)  # (m, N_{n-1})
    deriv_vals = basis_n.eval_derivative(rule.nodes, axis)  # (m, N_n)
    M = (lower_vals * rule.weights[:, None]).T @ deriv_vals
    return DiffMatrix(axis=axis, matrix=M, weight=basis_n.weight, degree=basis_n.degree)


def differentiation_matrices(basis_n: OrthoBasis, basis_nm1: OrthoBasis) -> list[DiffMatrix]:
    return [differentiation_matrix(basis_n, basis_nm1, i) for i in range(basis_n.dim)]
