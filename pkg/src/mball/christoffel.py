"""Christoffel functions on the ball and their comparison with ball measures."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .errors import InvalidArgumentError
from .geometry import as_coords
from .polyspace import OrthoBasis, get_basis, poly_space_dim
from .quadrature import QuadratureRule, ball_rule_for, norm_rule_for
from .weights import Weight, ball_measure, ball_measure_batch, jacobi_weight


def christoffel_l2(basis: OrthoBasis, x) -> float:
    """Reciprocal of the squared pointwise sum over the orthonormal basis."""
    xv = as_coords(x, basis.dim)
    vals = basis.eval(xv[None, :])[0]
    return 1.0 / float(vals @ vals)


def christoffel_l2_many(basis: OrthoBasis, X: np.ndarray) -> np.ndarray:
    vals = basis.eval(np.atleast_2d(X))
    return 1.0 / np.sum(vals * vals, axis=1)


def christoffel_l2_variational(n: int, w: Weight, x, rule: QuadratureRule | None = None) -> float:
    """Independent route: minimize the quadratic objective over the affine
    constraint P(x) = 1 in the raw structured family (no orthonormalization)."""
    from .polyspace import _family_for

    xv = as_coords(x, w.dim)
    if rule is None:
        rule = ball_rule_for(w, 2 * n)
    family = _family_for(n, w.dim)
    V = family.values(rule.nodes)
    G = (V * rule.weights[:, None]).T @ V
    a = family.values(xv[None, :])[0]
    sol = np.linalg.solve(G, a)
    return 1.0 / float(a @ sol)


@dataclass(frozen=True)
class LpChristoffel:
    value: float
    p: float
    converged: bool
    iterations: int


def christoffel_lp(
    n: int,
    p: float,
    w: Weight,
    x,
    rule: QuadratureRule | None = None,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> LpChristoffel:
    """Minimal p-th power norm over degree-n polynomials pinned to 1 at x.

    Iteratively reweighted least squares on the convex objective, started
    from the p = 2 minimizer; reweighting factors |P|^(p-2) are floored at
    1e-12 and steps are damped whenever the objective would increase.
    """
    if p < 1.0:
        raise InvalidArgumentError("p must be at least 1")
    xv = as_coords(x, w.dim)
    basis = get_basis(n, w)
    if rule is None:
        rule = norm_rule_for(w, n)
    V = basis.eval(rule.nodes)
    W = rule.weights
    a = basis.eval(xv[None, :])[0]
    c = a / float(a @ a)  # the p = 2 minimizer in orthonormal coordinates

    def objective(coef):
        return float(W @ np.abs(V @ coef) ** p)

    obj = objective(c)
    if p == 2.0:
        return LpChristoffel(value=obj, p=p, converged=True, iterations=0)
    best = obj
    best_c = c
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        u = np.maximum(np.abs(V @ c), 1e-12) ** (p - 2.0)
        M = (V * (W * u)[:, None]).T @ V
        M[np.diag_indices_from(M)] += 1e-14 * np.trace(M) / len(M)
        z = np.linalg.solve(M, a)
        cand = z / float(a @ z)
        step = 1.0
        new_obj = objective(cand)
        while new_obj > obj and step > 1e-4:
            step *= 0.5
            mid = c + step * (cand - c)
            mid = mid / float(a @ mid)
            new_obj = objective(mid)
            cand = mid
        if new_obj < best:
            best, best_c = new_obj, cand
        if abs(new_obj - obj) <= tol * max(obj, 1e-300):
            c, obj = cand, new_obj
            converged = True
            break
        c, obj = cand, new_obj
    return LpChristoffel(value=min(best, obj), p=p, converged=converged, iterations=iterations)


@dataclass(frozen=True)
class ChristoffelScan:
    """Comparison table of Christoffel values against ball measures at scale 1/n."""

    weight: Weight
    p: float
    rows: list  # (n, x, lambda_value, ball_measure_value, ratio)
    summary: dict = field(default_factory=dict)

    def to_csv(self, path, config_hash: str = "") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["n", "p", "x_norm", "lambda", "ball_measure", "ratio"]
            if config_hash:
                header.append("config_hash")
            writer.writerow(header)
            for n, x, lam, meas, ratio in self.rows:
                row = [n, repr(self.p), repr(float(np.linalg.norm(x))), repr(lam), repr(meas), repr(ratio)]
                if config_hash:
                    row.append(config_hash)
                writer.writerow(row)


def radial_probe_points(n: int, dim: int) -> np.ndarray:
    """Probe points along a radius, including the 1 - 1/n^2 boundary cell."""
    fractions = list(defaults.CHRISTOFFEL_RADIAL_FRACTIONS) + [1.0 - 1.0 / n**2]
    fractions = sorted(set(f for f in fractions if 0.0 <= f < 1.0))
    pts = np.zeros((len(fractions), dim))
    pts[:, 0] = fractions
    return pts


def christoffel_scan(
    w: Weight,
    p: float,
    n_set,
    x_set=None,
    measure_method: str | None = None,
) -> ChristoffelScan:
    """Tabulate Christoffel values against w(B(x, 1/n)) over (n, x) cells."""
    rows = []
    for n in n_set:
        X = radial_probe_points(n, w.dim) if x_set is None else np.atleast_2d(x_set)
        if p == 2.0:
            basis = get_basis(n, w)
            lam_vals = christoffel_l2_many(basis, X)
        else:
            lam_vals = np.array([christoffel_lp(n, p, w, x).value for x in X])
        method = measure_method or w.default_measure_method
        if method == "quadrature":
            meas = ball_measure_batch(w, X, 1.0 / n)
        else:
            meas = np.array([ball_measure(w, x, 1.0 / n, method=method, seed=17) for x in X])
        for i in range(len(X)):
            ratio = float(lam_vals[i] / meas[i])
            rows.append((int(n), X[i].copy(), float(lam_vals[i]), float(meas[i]), ratio))
    ratios = np.array([r[-1] for r in rows])
    summary = {
        "min_ratio": float(ratios.min()),
        "max_ratio": float(ratios.max()),
        "window": float(ratios.max() / ratios.min()),
    }
    return ChristoffelScan(weight=w, p=p, rows=rows, summary=summary)
