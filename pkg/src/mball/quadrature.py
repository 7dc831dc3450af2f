"""Integration rules: Gauss-Jacobi lines, product rules on disk and ball
exact against the weight catalog, sphere rules, and weighted Lp norms.

Every constructed rule is validated at build time: positive weights, the
correct total mass, and exactness against the closed-form moment oracle.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, roots_jacobi

from . import defaults
from .errors import ConsistencyError, InvalidArgumentError
from .weights import Weight, ball_power_mass, jacobi_weight

# ---------------------------------------------------------------------------
# moment oracles (closed forms, independent of any node construction)
# ---------------------------------------------------------------------------


def jacobi_interval_mass(alpha: float, beta: float) -> float:
    """Integral of (1-t)^alpha (1+t)^beta over [-1, 1]."""
    return float(
        np.exp(
            (alpha + beta + 1.0) * math.log(2.0)
            + gammaln(alpha + 1.0)
            + gammaln(beta + 1.0)
            - gammaln(alpha + beta + 2.0)
        )
    )


def symmetric_interval_moment(k: int, c: float) -> float:
    """Integral of t^k (1-t^2)^c over [-1, 1]."""
    if k % 2 == 1:
        return 0.0
    j = k // 2
    return float(np.exp(gammaln(j + 0.5) + gammaln(c + 1.0) - gammaln(j + c + 1.5)))


def ball_moment(alpha, w: Weight) -> float:
    """Integral of the monomial x^alpha against a catalog weight over the ball."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != w.dim:
        raise InvalidArgumentError("multi-index length does not match the weight dimension")
    if any(a % 2 for a in alpha):
        return 0.0
    if w.kind == "jacobi":
        return ball_power_mass(alpha, w.mu)
    if w.kind == "product":
        exps = [a + g for a, g in zip(alpha, w.gammas)]
        return ball_power_mass(exps, w.mu)
    a, c = w.params
    d = w.dim
    k = sum(alpha) + d
    sphere_factor = sphere_moment(alpha, d) * 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    return sphere_factor * (a**k / k + c * (1.0 - a**k) / k)


def sphere_moment(alpha, ambient_dim: int) -> float:
    """Monomial moment against the normalized surface measure of the unit sphere."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != ambient_dim:
        raise InvalidArgumentError("multi-index length does not match the ambient dimension")
    if any(a % 2 for a in alpha):
        return 0.0
    b = [a // 2 for a in alpha]
    total = sum(b)
    log_val = (
        gammaln(ambient_dim / 2.0)
        - total * math.log(2.0)
        - gammaln(ambient_dim / 2.0 + total)
    )
    for bi in b:
        # (2 b - 1)!! = 2^b Gamma(b + 1/2) / sqrt(pi)
        log_val += bi * math.log(2.0) + gammaln(bi + 0.5) - 0.5 * math.log(math.pi)
    return float(np.exp(log_val))


# ---------------------------------------------------------------------------
# rule container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights with a declared exactness degree against a target weight."""

    domain: str  # "interval" | "ball" | "sphere"
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    target: object  # Weight for ball rules, (alpha, beta) for interval, "sphere-S{k}" string

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise ConsistencyError("quadrature weights must be strictly positive")

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def total_weight(self) -> float:
        return float(np.sum(self.weights))


def _check_total(rule: QuadratureRule, expected: float):
    if abs(rule.total_weight() - expected) > 1e-10 * max(1.0, abs(expected)):
        raise ConsistencyError(
            f"rule total weight {rule.total_weight()} != target mass {expected}"
        )


def _self_test_ball(rule: QuadratureRule, w: Weight, seed: int = 12345):
    """Exactness spot check against the moment oracle."""
    rng = np.random.default_rng(seed)
    d = w.dim
    deg = rule.exactness_degree
    exps = [tuple([0] * d)]
    for _ in range(4):
        cut = rng.integers(0, deg + 1)
        if d == 2:
            a = int(rng.integers(0, cut + 1))
            exps.append((a, int(cut - a)))
        else:
            a = int(rng.integers(0, cut + 1))
            b = int(rng.integers(0, cut - a + 1))
            exps.append((a, b, int(cut - a - b)))
    for alpha in exps:
        vals = np.prod(rule.nodes ** np.asarray(alpha, dtype=float)[None, :], axis=1)
        got = rule.integrate(vals)
        want = ball_moment(alpha, w)
        scale = max(abs(want), ball_moment([0] * d, w))
        if abs(got - want) > 1e-10 * scale:
            raise ConsistencyError(
                f"ball rule failed moment self-test at {alpha}: {got} vs {want}"
            )


# ---------------------------------------------------------------------------
# one-dimensional Gauss-Jacobi
# ---------------------------------------------------------------------------


def gauss_jacobi_1d(m: int, alpha: float, beta: float) -> QuadratureRule:
    """m-node Gauss rule for the weight (1-t)^alpha (1+t)^beta on [-1, 1]."""
    if m < 1:
        raise InvalidArgumentError("node count must be at least 1")
    if alpha <= -1.0 or beta <= -1.0:
        raise InvalidArgumentError("Jacobi exponents must exceed -1")
    nodes, weights = roots_jacobi(m, alpha, beta)
    order = np.argsort(nodes)
    rule = QuadratureRule(
        domain="interval",
        nodes=nodes[order],
        weights=weights[order],
        exactness_degree=2 * m - 1,
        target=(float(alpha), float(beta)),
    )
    _check_total(rule, jacobi_interval_mass(alpha, beta))
    return rule


# ---------------------------------------------------------------------------
# ball rules
# ---------------------------------------------------------------------------

_BALL_RULE_CACHE: dict = {}
_SPHERE_RULE_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def ball_rule(degree: int, mu: float, d: int = 2) -> QuadratureRule:
    """Product rule exact for total degree <= degree against the jacobi weight."""
    return ball_rule_for(jacobi_weight(mu, d), degree)


def ball_rule_for(w: Weight, degree: int) -> QuadratureRule:
    """Rule exact to the requested total degree against any catalog weight."""
    if degree < 0:
        raise InvalidArgumentError("degree must be nonnegative")
    key = (w, int(degree))
    with _CACHE_LOCK:
        if key in _BALL_RULE_CACHE:
            return _BALL_RULE_CACHE[key]
    if w.kind == "jacobi":
        rule = _ball_rule_jacobi(degree, w)
    elif w.kind == "product":
        if w.dim != 2:
            raise InvalidArgumentError("exact product-weight rules are implemented for d=2")
        rule = _ball_rule_product_d2(degree, w)
    else:
        rule = _ball_rule_step(degree, w)
    _check_total(rule, w.total_mass())
    _self_test_ball(rule, w)
    with _CACHE_LOCK:
        _BALL_RULE_CACHE[key] = rule
    return rule


def _ball_rule_jacobi(degree: int, w: Weight) -> QuadratureRule:
    mu, d = w.mu, w.dim
    m_r = degree // 2 + 1
    if d == 2:
        radial = roots_jacobi(m_r, mu - 0.5, 0.0)
        scale = 2.0 ** (-(mu - 0.5)) / 4.0
        m_phi = degree + 1
        phi = 2.0 * math.pi * np.arange(m_phi) / m_phi
        rho = np.sqrt((1.0 + radial[0]) / 2.0)
        nodes = np.empty((m_r * m_phi, 2))
        weights = np.empty(m_r * m_phi)
        for i in range(m_r):
            sl = slice(i * m_phi, (i + 1) * m_phi)
            nodes[sl, 0] = rho[i] * np.cos(phi)
            nodes[sl, 1] = rho[i] * np.sin(phi)
            weights[sl] = scale * radial[1][i] * (2.0 * math.pi / m_phi)
        return QuadratureRule("ball", nodes, weights, degree, w)
    radial = roots_jacobi(m_r, mu - 0.5, 0.5)
    scale = 2.0 ** (-mu) / 4.0
    sphere = sphere_rule(degree, 3)
    rho = np.sqrt((1.0 + radial[0]) / 2.0)
    n_s = len(sphere)
    nodes = np.empty((m_r * n_s, 3))
    weights = np.empty(m_r * n_s)
    sphere_area = 4.0 * math.pi
    for i in range(m_r):
        sl = slice(i * n_s, (i + 1) * n_s)
        nodes[sl] = rho[i] * sphere.nodes
        weights[sl] = scale * radial[1][i] * sphere.weights * sphere_area
    return QuadratureRule("ball", nodes, weights, degree, w)


def _ball_rule_product_d2(degree: int, w: Weight) -> QuadratureRule:
    g1, g2 = w.gammas
    mu = w.mu
    gsum = g1 + g2
    # azimuth: fold the circle onto the first quadrant; the folded integrand
    # is a polynomial in sin^2(phi), handled by a Gauss-Jacobi rule
    m_s = (degree + 1) // 2 + 1
    zs, vs = roots_jacobi(m_s, (g1 - 1.0) / 2.0, (g2 - 1.0) / 2.0)
    s = (1.0 + zs) / 2.0
    phi_base = np.arcsin(np.sqrt(s))
    v_tilde = vs * 2.0 ** (-gsum / 2.0)
    phis, wphis = [], []
    for i in range(m_s):
        p = phi_base[i]
        for image in (p, math.pi - p, math.pi + p, 2.0 * math.pi - p):
            phis.append(image)
            wphis.append(v_tilde[i] / 2.0)
    phis = np.asarray(phis)
    wphis = np.asarray(wphis)
    # radial rule picks up the rho^(g1+g2) factor
    m_r = degree // 2 + 1
    tr, vr = roots_jacobi(m_r, mu - 0.5, gsum / 2.0)
    rho = np.sqrt((1.0 + tr) / 2.0)
    w_r = vr * 2.0 ** (-(mu - 0.5 + gsum / 2.0)) / 4.0
    nodes = np.empty((m_r * len(phis), 2))
    weights = np.empty(m_r * len(phis))
    for i in range(m_r):
        sl = slice(i * len(phis), (i + 1) * len(phis))
        nodes[sl, 0] = rho[i] * np.cos(phis)
        nodes[sl, 1] = rho[i] * np.sin(phis)
        weights[sl] = w_r[i] * wphis
    return QuadratureRule("ball", nodes, weights, degree, w)


def _ball_rule_step(degree: int, w: Weight) -> QuadratureRule:
    a, c = w.params
    d = w.dim
    m_r = (degree + d) // 2 + 1
    glx, glw = np.polynomial.legendre.leggauss(m_r)
    segments = []
    for lo, hi, factor in ((0.0, a, 1.0), (a, 1.0, c)):
        rho = lo + (glx + 1.0) * 0.5 * (hi - lo)
        wr = glw * 0.5 * (hi - lo) * factor * rho ** (d - 1)
        segments.append((rho, wr))
    if d == 2:
        m_phi = degree + 1
        phi = 2.0 * math.pi * np.arange(m_phi) / m_phi
        direct = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        wdir = np.full(m_phi, 2.0 * math.pi / m_phi)
    else:
        sphere = sphere_rule(degree, 3)
        direct = sphere.nodes
        wdir = sphere.weights * 4.0 * math.pi
    nodes, weights = [], []
    for rho, wr in segments:
        for i in range(len(rho)):
            nodes.append(rho[i] * direct)
            weights.append(wr[i] * wdir)
    return QuadratureRule("ball", np.concatenate(nodes), np.concatenate(weights), degree, w)


# ---------------------------------------------------------------------------
# sphere rules (normalized surface measure, total weight 1)
# ---------------------------------------------------------------------------


def sphere_rule(degree: int, ambient_dim: int) -> QuadratureRule:
    """Rule exact for spherical polynomials of the given degree; total weight 1."""
    if degree < 0:
        raise InvalidArgumentError("degree must be nonnegative")
    if ambient_dim not in (2, 3, 4):
        raise InvalidArgumentError("ambient dimension must be 2, 3, or 4")
    key = (int(degree), int(ambient_dim))
    with _CACHE_LOCK:
        if key in _SPHERE_RULE_CACHE:
            return _SPHERE_RULE_CACHE[key]
    if ambient_dim == 2:
        m = degree + 1
        ang = 2.0 * math.pi * np.arange(m) / m
        nodes = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        weights = np.full(m, 1.0 / m)
    elif ambient_dim == 3:
        m_u = degree // 2 + 1
        u, wu = np.polynomial.legendre.leggauss(m_u)
        m_phi = degree + 1
        phi = 2.0 * math.pi * np.arange(m_phi) / m_phi
        sin_psi = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
        nodes = np.empty((m_u * m_phi, 3))
        weights = np.empty(m_u * m_phi)
        for i in range(m_u):
            sl = slice(i * m_phi, (i + 1) * m_phi)
            nodes[sl, 0] = sin_psi[i] * np.cos(phi)
            nodes[sl, 1] = sin_psi[i] * np.sin(phi)
            nodes[sl, 2] = u[i]
            weights[sl] = (wu[i] / 2.0) / m_phi
    else:
        m_u = degree // 2 + 1
        u, wu = roots_jacobi(m_u, 0.5, 0.5)
        inner = sphere_rule(degree, 3)
        sin_chi = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
        n_i = len(inner)
        nodes = np.empty((m_u * n_i, 4))
        weights = np.empty(m_u * n_i)
        for i in range(m_u):
            sl = slice(i * n_i, (i + 1) * n_i)
            nodes[sl, :3] = sin_chi[i] * inner.nodes
            nodes[sl, 3] = u[i]
            weights[sl] = (2.0 / math.pi) * wu[i] * inner.weights
    rule = QuadratureRule("sphere", nodes, weights, degree, f"sphere-S{ambient_dim - 1}")
    _check_total(rule, 1.0)
    _self_test_sphere(rule, ambient_dim)
    with _CACHE_LOCK:
        _SPHERE_RULE_CACHE[key] = rule
    return rule


def _self_test_sphere(rule: QuadratureRule, ambient: int, seed: int = 999):
    rng = np.random.default_rng(seed)
    deg = rule.exactness_degree
    exps = [tuple([0] * ambient)]
    for _ in range(4):
        rest = deg
        alpha = []
        for _ in range(ambient - 1):
            a = int(rng.integers(0, rest + 1))
            alpha.append(a)
            rest -= a
        alpha.append(int(rng.integers(0, rest + 1)))
        exps.append(tuple(alpha))
    for alpha in exps:
        vals = np.prod(rule.nodes ** np.asarray(alpha, dtype=float)[None, :], axis=1)
        got = rule.integrate(vals)
        want = sphere_moment(alpha, ambient)
        if abs(got - want) > 1e-10:
            raise ConsistencyError(
                f"sphere rule failed moment self-test at {alpha}: {got} vs {want}"
            )


# ---------------------------------------------------------------------------
# weighted Lp norms
# ---------------------------------------------------------------------------


def weighted_norm(
    f,
    w: Weight,
    p: float,
    rule: QuadratureRule,
    pointwise_weight: bool = False,
) -> float:
    """(integral |f|^p w)^(1/p) over the rule's nodes.

    Exact when |f|^p * w matches the rule; for sign-changing polynomials
    or non-integer p, pass an oversampled rule (see norm_rule_for).
    """
    if p < 1.0:
        raise InvalidArgumentError("p must be at least 1")
    vals = np.abs(np.asarray(f(rule.nodes), dtype=float)) ** p
    if pointwise_weight:
        vals = vals * w.evaluate(rule.nodes)
    elif rule.target != w:
        raise InvalidArgumentError(
            "rule targets a different weight; pass pointwise_weight=True to reweight"
        )
    return float(rule.weights @ vals) ** (1.0 / p)


def norm_rule_for(w: Weight, poly_degree: int) -> QuadratureRule:
    """Oversampled rule for norms of non-polynomial integrands built from
    degree-poly_degree polynomials."""
    return ball_rule_for(w, 2 * poly_degree + defaults.NORM_RULE_EXTRA_DEGREE)
