import math

import numpy as np
import pytest
from scipy.integrate import quad

from mball import quadrature as Q
from mball import weights as wts
from mball.errors import InvalidArgumentError


def quadpack_jacobi_moment(k, alpha, beta):
    """Independent 1D oracle: QUADPACK's algebraic-endpoint algorithm."""
    val, _ = quad(lambda t: t**k, -1.0, 1.0, weight="alg", wvar=(beta, alpha))
    return val


def test_gauss_jacobi_midpoint():
    rule = Q.gauss_jacobi_1d(1, 0.0, 0.0)
    assert rule.nodes[0] == pytest.approx(0.0, abs=1e-15)
    assert rule.weights[0] == pytest.approx(2.0, rel=1e-15)


def test_gauss_jacobi_symmetry():
    rule = Q.gauss_jacobi_1d(7, 1.3, 1.3)
    assert np.max(np.abs(rule.nodes + rule.nodes[::-1])) < 1e-12


def test_gauss_jacobi_parameter_validation():
    with pytest.raises(InvalidArgumentError):
        Q.gauss_jacobi_1d(3, -1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        Q.gauss_jacobi_1d(0, 0.0, 0.0)


@pytest.mark.parametrize("m,alpha,beta", [(4, 0.0, 0.0), (6, -0.5, -0.5), (5, 1.0, 0.5), (8, 2.5, 0.0)])
def test_gauss_jacobi_moments_vs_quadpack(m, alpha, beta):
    rule = Q.gauss_jacobi_1d(m, alpha, beta)
    for k in range(0, 2 * m):
        got = rule.integrate(rule.nodes**k)
        want = quadpack_jacobi_moment(k, alpha, beta)
        assert got == pytest.approx(want, abs=1e-11 * max(1.0, abs(want)))


def test_gauss_jacobi_symmetric_closed_form():
    # moments of (1 - t^2)^(mu - 1) match the Beta-function closed form
    mu = 1.7
    m = 9
    rule = Q.gauss_jacobi_1d(m, mu - 1.0, mu - 1.0)
    for k in range(0, 2 * m, 2):
        want = Q.symmetric_interval_moment(k, mu - 1.0)
        assert rule.integrate(rule.nodes**k) == pytest.approx(want, abs=1e-11)


def test_ball_rule_disk_area_and_moment():
    rule = Q.ball_rule(10, 0.5, 2)
    assert rule.integrate(np.ones(len(rule))) == pytest.approx(math.pi, abs=1e-12)
    assert rule.integrate(rule.nodes[:, 0] ** 2) == pytest.approx(math.pi / 4, abs=1e-12)


def test_ball_moment_against_nested_quadrature():
    # independent oracle for the closed-form disk moment: iterated 1D integrals
    def nested(alpha, mu):
        def inner(x):
            g = lambda y: x ** alpha[0] * y ** alpha[1] * (1 - x * x - y * y) ** (mu - 0.5)
            lim = math.sqrt(max(0.0, 1 - x * x))
            return quad(g, -lim, lim)[0]

        return quad(inner, -1.0, 1.0, limit=200)[0]

    w = wts.jacobi_weight(1.0, 2)
    for alpha in ((0, 0), (2, 0), (2, 4)):
        assert Q.ball_moment(alpha, w) == pytest.approx(nested(alpha, 1.0), rel=1e-8)
    assert Q.ball_moment((1, 2), w) == 0.0


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0, 2.0])
def test_ball_rule_random_polynomial_exactness(mu):
    degree = 14
    w = wts.jacobi_weight(mu, 2)
    rule = Q.ball_rule(degree, mu, 2)
    rng = np.random.default_rng(42)
    terms = [(int(a), int(b)) for a in range(degree + 1) for b in range(degree + 1 - a)]
    pick = rng.choice(len(terms), size=25, replace=False)
    coeffs = rng.standard_normal(25)
    vals = np.zeros(len(rule))
    want = 0.0
    for c, idx in zip(coeffs, pick):
        a, b = terms[idx]
        vals += c * rule.nodes[:, 0] ** a * rule.nodes[:, 1] ** b
        want += c * Q.ball_moment((a, b), w)
    scale = Q.ball_moment((0, 0), w)
    assert rule.integrate(vals) == pytest.approx(want, abs=1e-10 * scale)


def test_ball_rule_d3_exactness():
    w = wts.jacobi_weight(1.5, 3)
    rule = Q.ball_rule(8, 1.5, 3)
    for alpha in ((0, 0, 0), (2, 0, 0), (2, 2, 2), (4, 2, 0)):
        vals = np.prod(rule.nodes ** np.array(alpha, dtype=float), axis=1)
        assert rule.integrate(vals) == pytest.approx(Q.ball_moment(alpha, w), rel=1e-11)


def test_product_weight_rule_exactness():
    w = wts.product_weight([0.5, 1.5], 1.0)
    rule = Q.ball_rule_for(w, 12)
    for alpha in ((0, 0), (2, 0), (0, 2), (4, 6), (2, 3)):
        vals = rule.nodes[:, 0] ** alpha[0] * rule.nodes[:, 1] ** alpha[1]
        want = Q.ball_moment(alpha, w)
        assert rule.integrate(vals) == pytest.approx(want, abs=1e-11 * w.total_mass())


def test_step_weight_rule_exactness():
    w = wts.step_weight(0.5, 100.0, 2)
    rule = Q.ball_rule_for(w, 9)
    for alpha in ((0, 0), (2, 0), (4, 4), (3, 2)):
        vals = rule.nodes[:, 0] ** alpha[0] * rule.nodes[:, 1] ** alpha[1]
        want = Q.ball_moment(alpha, w)
        assert rule.integrate(vals) == pytest.approx(want, abs=1e-11 * w.total_mass())


def test_sphere_rule_basics():
    rule = Q.sphere_rule(8, 3)
    assert rule.total_weight() == pytest.approx(1.0, abs=1e-13)
    assert rule.integrate(rule.nodes[:, 0]) == pytest.approx(0.0, abs=1e-13)
    assert rule.integrate(rule.nodes[:, 0] ** 2) == pytest.approx(1.0 / 3.0, abs=1e-13)


def test_sphere_moment_matches_monte_carlo():
    rng = np.random.default_rng(11)
    g = rng.standard_normal((400_000, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    mc = float(np.mean(g[:, 0] ** 2))
    assert Q.sphere_moment((2, 0, 0), 3) == pytest.approx(mc, abs=3e-3)
    assert Q.sphere_moment((2, 0, 0), 3) == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_sphere_rule_s3():
    rule = Q.sphere_rule(6, 4)
    assert rule.total_weight() == pytest.approx(1.0, abs=1e-12)
    for alpha in ((2, 0, 0, 0), (0, 0, 0, 2), (2, 2, 0, 0)):
        vals = np.prod(rule.nodes ** np.array(alpha, dtype=float), axis=1)
        assert rule.integrate(vals) == pytest.approx(Q.sphere_moment(alpha, 4), abs=1e-12)


def test_weighted_norm_trivials(lebesgue2):
    rule = Q.ball_rule(8, 0.5, 2)
    assert Q.weighted_norm(lambda X: np.ones(len(X)), lebesgue2, 2.0, rule) == pytest.approx(
        math.sqrt(math.pi), rel=1e-14
    )
    assert Q.weighted_norm(lambda X: X[:, 0], lebesgue2, 2.0, rule) == pytest.approx(
        math.sqrt(math.pi / 4), rel=1e-14
    )


def test_weighted_norm_validation(lebesgue2):
    rule = Q.ball_rule(8, 0.5, 2)
    with pytest.raises(InvalidArgumentError):
        Q.weighted_norm(lambda X: X[:, 0], lebesgue2, 0.5, rule)
    other = wts.jacobi_weight(1.0, 2)
    with pytest.raises(InvalidArgumentError):
        Q.weighted_norm(lambda X: X[:, 0], other, 2.0, rule)
    # reweighting against a Lebesgue rule is allowed with the explicit flag;
    # a half-integer shift keeps the pointwise factor polynomial, so exact
    poly_shift = wts.jacobi_weight(1.5, 2)
    val = Q.weighted_norm(
        lambda X: X[:, 0], poly_shift, 2.0, Q.ball_rule(12, 0.5, 2), pointwise_weight=True
    )
    want = math.sqrt(Q.ball_moment((2, 0), poly_shift))
    assert val == pytest.approx(want, rel=1e-12)


def test_cauchy_schwarz_between_norms(lebesgue2):
    from mball.polyspace import get_basis

    basis = get_basis(6, lebesgue2)
    rule = Q.norm_rule_for(lebesgue2, 6)
    rng = np.random.default_rng(3)
    total_mass = math.sqrt(lebesgue2.total_mass())
    for _ in range(100):
        c = rng.standard_normal(basis.size)
        f = lambda X: basis.eval(X) @ c
        n1 = Q.weighted_norm(f, lebesgue2, 1.0, rule)
        n2 = Q.weighted_norm(f, lebesgue2, 2.0, rule)
        assert n1 <= total_mass * n2 * (1.0 + 1e-12)


def test_norm_stability_under_budget_doubling(lebesgue2):
    from mball.polyspace import get_basis

    n = 7
    basis = get_basis(n, lebesgue2)
    c = np.random.default_rng(5).standard_normal(basis.size)
    f = lambda X: basis.eval(X) @ c
    r1 = Q.ball_rule_for(lebesgue2, 2 * n + 20)
    r2 = Q.ball_rule_for(lebesgue2, 2 * (2 * n + 20))
    v1 = Q.weighted_norm(f, lebesgue2, 2.0, r1)
    v2 = Q.weighted_norm(f, lebesgue2, 2.0, r2)
    assert abs(v1 - v2) < 1e-10 * abs(v1)


def test_rule_weights_positive_and_interior():
    rule = Q.ball_rule(20, 0.0, 2)
    assert np.all(rule.weights > 0)
    assert np.max(np.linalg.norm(rule.nodes, axis=1)) < 1.0
