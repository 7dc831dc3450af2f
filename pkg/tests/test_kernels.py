import math

import numpy as np
import pytest

from mball import kernels as K
from mball import polyspace as ps
from mball import quadrature as Q
from mball import weights as wts
from mball.errors import InvalidArgumentError, ResolutionError
from mball.geometry import ball_grid, dist_many, lift, random_ball_points


def test_gegenbauer_low_degrees():
    lam = 1.7
    t = np.linspace(-1, 1, 11)
    assert K.gegenbauer(0, lam, t) == pytest.approx(np.ones_like(t))
    assert K.gegenbauer(1, lam, t) == pytest.approx(2 * lam * t)
    # one recurrence step gives 2 lam (lam + 1) t^2 - lam; cross-check at t = 0, +-1
    c2 = K.gegenbauer(2, lam, np.array([0.0, 1.0, -1.0]))
    want = 2 * lam * (lam + 1) * np.array([0.0, 1.0, 1.0]) - lam
    assert c2 == pytest.approx(want, rel=1e-13)


def test_gegenbauer_parity_and_validation():
    t = np.linspace(-1, 1, 7)
    for n in (3, 6):
        assert K.gegenbauer(n, 0.8, -t) == pytest.approx((-1.0) ** n * K.gegenbauer(n, 0.8, t))
    with pytest.raises(InvalidArgumentError):
        K.gegenbauer(2, 0.0, 0.5)


def test_reproducing_kernel_degree_zero():
    val = K.reproducing_kernel(0, 0.5, [0.1, 0.2], [0.5, -0.1])
    assert val == pytest.approx(1.0 / math.pi, rel=1e-13)


def test_reproducing_kernel_symmetry():
    X = random_ball_points(30, 2, seed=1)
    Y = random_ball_points(30, 2, seed=2)
    for mu in (0.0, 0.5, 1.0):
        for x, y in zip(X[:10], Y[:10]):
            a = K.reproducing_kernel(4, mu, x, y)
            b = K.reproducing_kernel(4, mu, y, x)
            assert abs(a - b) < 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_reproducing_kernel_matches_basis_blocks(mu):
    w = wts.jacobi_weight(mu, 2)
    basis = ps.get_basis(10, w)
    blocks = basis.block_degrees()
    X = random_ball_points(8, 2, seed=3)
    Y = random_ball_points(8, 2, seed=4)
    for n in (0, 1, 4, 10):
        mask = blocks == n
        for x, y in zip(X, Y):
            via_basis = float((basis.eval(x[None, :])[0] * mask) @ basis.eval(y[None, :])[0])
            via_formula = K.reproducing_kernel(n, mu, x, y)
            assert abs(via_basis - via_formula) < 1e-7 * max(1.0, abs(via_basis))


def test_cutoff_values_and_shape():
    assert K.smooth_cutoff(0.5) == 1.0
    assert K.smooth_cutoff(3.0) == 0.0
    assert K.smooth_cutoff(1.5) == pytest.approx(0.5, rel=1e-14)
    t = np.linspace(0.0, 2.5, 200)
    vals = K.smooth_cutoff(t)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
    assert np.all(np.diff(vals) <= 1e-15)
    with pytest.raises(InvalidArgumentError):
        K.smooth_cutoff(-0.1)


def test_smoothed_kernel_unit_integral(lebesgue2):
    n = 5
    rule = Q.ball_rule(3 * n, 0.5, 2)
    for x in ([0.0, 0.0], [0.7, -0.3]):
        vals = K.smoothed_kernel_many(n, 0.5, np.asarray(x), rule.nodes)
        assert float(rule.weights @ vals) == pytest.approx(1.0, abs=1e-10)


def test_smoothed_kernel_symmetry():
    X = random_ball_points(10, 2, seed=5)
    Y = random_ball_points(10, 2, seed=6)
    for x, y in zip(X, Y):
        a = K.smoothed_kernel(4, 1.0, x, y)
        b = K.smoothed_kernel(4, 1.0, y, x)
        assert abs(a - b) < 1e-9 * max(1.0, abs(a))


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_smoothed_kernel_method_consistency(mu):
    X = random_ball_points(6, 2, seed=7)
    Y = random_ball_points(6, 2, seed=8)
    for n in (2, 5, 10):
        for x, y in zip(X, Y):
            a = K.smoothed_kernel(n, mu, x, y, method="gegenbauer")
            b = K.smoothed_kernel(n, mu, x, y, method="basis")
            assert abs(a - b) < 1e-7 * max(1.0, abs(a))


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_reproducing_identity(mu):
    w = wts.jacobi_weight(mu, 2)
    for n in (4, 10):
        basis = ps.get_basis(n, w)
        rule = Q.ball_rule_for(w, 3 * n + 2)
        rng = np.random.default_rng(10 + n)
        c = rng.standard_normal(basis.size)
        p_nodes = basis.eval(rule.nodes) @ c
        X = random_ball_points(10, 2, seed=11)
        p_x = basis.eval(X) @ c
        sup = float(np.max(np.abs(p_nodes)))
        for i, x in enumerate(X):
            recon = float(
                (K.smoothed_kernel_many(n, mu, x, rule.nodes) * rule.weights) @ p_nodes
            )
            assert abs(recon - p_x[i]) < 1e-8 * sup


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_derivative_representation(mu):
    w = wts.jacobi_weight(mu, 2)
    n = 6
    basis = ps.get_basis(n, w)
    rule = Q.ball_rule_for(w, 3 * n + 2)
    rng = np.random.default_rng(12)
    c = rng.standard_normal(basis.size)
    p_nodes = basis.eval(rule.nodes) @ c
    X = random_ball_points(8, 2, seed=13)
    for axis in (0, 1):
        d_x = basis.eval_derivative(X, axis) @ c
        sup = max(float(np.max(np.abs(d_x))), 1e-12)
        for i, x in enumerate(X):
            kernel_vals = K.smoothed_kernel_partial(n, mu, axis, x, rule.nodes)
            recon = float((kernel_vals * rule.weights) @ p_nodes)
            assert abs(recon - d_x[i]) < 1e-7 * sup


def test_partial_kernel_axis_symmetry_zero():
    # x = y on the x2-axis: the kernel is even in x1 there, so the x1-partial vanishes
    for n in (3, 6):
        x = np.array([0.0, 0.55])
        val = K.smoothed_kernel_partial(n, 0.5, 0, x, x[None, :])[0]
        assert abs(val) < 1e-8


def test_partial_kernel_matches_finite_differences():
    n, mu = 5, 1.0
    x = np.array([0.21, -0.33])
    Y = random_ball_points(5, 2, seed=14)
    h = 1e-5
    for axis in (0, 1):
        shift = np.zeros(2)
        shift[axis] = h
        fd = (
            K.smoothed_kernel_many(n, mu, x + shift, Y) - K.smoothed_kernel_many(n, mu, x - shift, Y)
        ) / (2 * h)
        an = K.smoothed_kernel_partial(n, mu, axis, x, Y)
        assert np.max(np.abs(fd - an)) < 1e-5 * max(1.0, float(np.max(np.abs(an))))


def test_derivative_envelope_ratio_bounded():
    # Theorem-style envelope: |d L_n| against the boundary-aware decay profile
    mu, d, k_exp = 0.5, 2, 4
    X = np.array([[f, 0.0] for f in (0.0, 0.5, 0.9, 0.99)])
    Y = np.array([[0.0, 0.0], [0.6, 0.1], [0.0, 0.95]])
    worst = {}
    for n in (4, 8, 16):
        ratios = []
        for y in Y:
            dvals = np.abs(K.smoothed_kernel_partial_grid(n, mu, 0, X, y))
            wx = np.sqrt(wts.boundary_weight_factor_many(mu, n, X))
            wy = math.sqrt(wts.boundary_weight_factor_many(mu, n, y[None, :])[0])
            dist_xy = dist_many(X, y[None, :])[:, 0]
            hx = np.sqrt(np.clip(1.0 - np.sum(X * X, axis=1), 0.0, None))
            cap = np.minimum(1.0 / np.maximum(hx, 1e-15), float(n))
            env = cap * n ** (d + 1) / (wx * wy * (1.0 + n * dist_xy) ** k_exp)
            ratios.append(np.max(dvals / env))
        worst[n] = max(ratios)
    vals = np.array(list(worst.values()))
    assert np.all(np.isfinite(vals))
    assert vals.max() / vals.min() < 50.0


def test_kernel_lipschitz_constant_recorded():
    # nearby first arguments move the kernel by at most ~ n^(d+1) d(y, z)
    # against the boundary-aware decay envelope; record the constant
    mu, k_exp = 0.5, 4
    rng = np.random.default_rng(15)
    worst = 0.0
    for n in (4, 8):
        for _ in range(40):
            y = random_ball_points(1, 2, seed=int(rng.integers(1e6)))[0]
            u = random_ball_points(1, 2, seed=int(rng.integers(1e6)))[0]
            z = y + rng.uniform(-0.2 / n, 0.2 / n, size=2)
            if np.linalg.norm(z) >= 1.0:
                z = z / np.linalg.norm(z) * 0.999
            dyz = dist_many(y[None, :], z[None, :])[0, 0]
            if dyz < 1e-12:
                continue
            delta = abs(K.smoothed_kernel(n, mu, y, u) - K.smoothed_kernel(n, mu, z, u))
            wu = wts.boundary_weight_factor_many(mu, n, u[None, :])[0]
            wxi = wts.boundary_weight_factor_many(mu, n, y[None, :])[0]
            duxi = dist_many(u[None, :], y[None, :])[0, 0]
            ratio = delta * math.sqrt(wu * wxi) * (1 + n * duxi) ** k_exp / (n**3 * dyz)
            worst = max(worst, ratio)
    assert 0.0 < worst < 1e3


def test_partial_l1_norm_basics():
    val = K.partial_kernel_l1_norm(1, 0.5, 0, [0.2, 0.1])
    assert np.isfinite(val) and val > 0.0


def test_partial_l1_norm_growth_small_set():
    ratios = []
    for n in (4, 8):
        worst = 0.0
        for y in ([0.0, 0.0], [0.9, 0.0]):
            for axis in (0, 1):
                worst = max(worst, K.partial_kernel_l1_norm(n, 0.5, axis, y) / n**2)
        ratios.append(worst)
    assert max(ratios) / min(ratios) < 20.0


def test_partial_l1_norm_argument_orders_agree():
    # L1 in the first argument vs L1 in the second argument at matched points:
    # the kernel is symmetric, so these are literally equal; compare the
    # x-integral against a direct quadrature over the second slot
    n, mu, y = 4, 0.5, np.array([0.5, 0.2])
    first = K.partial_kernel_l1_norm(n, mu, 0, y)
    w = wts.jacobi_weight(mu, 2)
    rule = Q.ball_rule_for(w, 2 * (2 * n - 1) + 20)
    vals = np.abs(K.smoothed_kernel_partial(n, mu, 0, y, rule.nodes))
    second = float(rule.weights @ vals)
    # partial in the x-slot integrated over x vs partial at fixed x = y over
    # the other slot; orders of magnitude must match
    assert 1.0 / 20.0 < first / second < 20.0


def test_fejer_kernel_normalization_and_values():
    for n, m, dim in ((8, 2, 3), (16, 4, 3), (12, 3, 4)):
        n1 = n // (2 * m)
        nodes, wts_g = np.polynomial.legendre.leggauss(400)
        theta = (nodes + 1.0) * math.pi / 2.0
        vals = K.fejer_kernel(n, m, theta, dim) * np.sin(theta) ** (dim - 2)
        integral = float(wts_g @ vals) * math.pi / 2.0
        assert integral == pytest.approx(1.0, abs=1e-9)
        assert np.all(K.fejer_kernel(n, m, theta, dim) >= 0.0)
        at_zero = K.fejer_kernel(n, m, 0.0, dim)
        gamma = at_zero / (2 * n1 + 1) ** (2 * m)
        assert at_zero == pytest.approx(gamma * (2 * n1 + 1) ** (2 * m), rel=1e-12)


def test_fejer_kernel_validation():
    with pytest.raises(InvalidArgumentError):
        K.fejer_kernel(3, 2, 0.5, 3)


def test_lift_restrict_round_trip():
    f = lambda X: 1.0 + 2.0 * X[:, 0] - X[:, 1] ** 2
    lifted = K.lift_to_sphere(f)
    probe = np.random.default_rng(16).standard_normal((50, 3))
    probe /= np.linalg.norm(probe, axis=1, keepdims=True)
    flipped = probe.copy()
    flipped[:, 2] = -flipped[:, 2]
    assert lifted(probe) == pytest.approx(lifted(flipped))
    back = K.restrict_to_ball(lifted, dim=2)
    X = random_ball_points(30, 2, seed=17)
    assert back(X) == pytest.approx(f(X))


def test_restrict_rejects_odd_functions():
    g = lambda Xbar: Xbar[:, 2]
    with pytest.raises(InvalidArgumentError):
        K.restrict_to_ball(g, dim=2)


def test_needle_default_m_requires_large_n():
    with pytest.raises(InvalidArgumentError):
        K.needle_polynomial([0.0, 0.0], 8, p=1.0, decay=5.0)  # default m = 9 needs n >= 18


def test_needle_small_case():
    res = K.needle_polynomial(
        [0.9, 0.0], 8, p=1.0, decay=5.0, m_override=2, grid_resolution=4000, resolution_tol=0.2
    )
    assert res.min_value >= -1e-9
    assert res.c_lo <= 1.0 <= res.c_hi or res.c_lo <= res.c_hi  # window brackets measured ratios
    # the center ratio h(center)^p must sit inside the measured window
    h_center = float(res.evaluator(np.array([[0.9, 0.0]]))[0])
    assert res.c_lo - 1e-12 <= h_center**res.p <= res.c_hi + 1e-12
    assert res.window() < 1e3


def test_needle_resolution_guard_fires():
    with pytest.raises(ResolutionError):
        K.needle_polynomial(
            [0.5, 0.0], 16, p=1.0, decay=5.0, m_override=4, grid_resolution=2000, resolution_tol=1e-9
        )


def test_maximal_function_constant_and_lower_bound(basis_of, lebesgue2):
    grid = ball_grid(2, 2000)
    one = lambda X: np.ones(len(X))
    x = np.array([0.2, 0.1])
    grid_with_x = np.vstack([grid, x[None, :]])
    assert K.maximal_function(one, 2.0, 4, x, grid_with_x) == pytest.approx(1.0)
    basis = basis_of(5, lebesgue2)
    c = np.random.default_rng(18).standard_normal(basis.size)
    f = lambda X: basis.eval(X) @ c
    val = K.maximal_function(f, 2.0, 5, x, grid_with_x)
    assert val >= abs(f(x[None, :])[0]) - 1e-12


def test_maximal_function_norm_equivalence(basis_of, lebesgue2):
    # the damped maximal function has comparable Lp norms for polynomials
    s_w = 2.0
    grid = ball_grid(2, 4000)
    rng = np.random.default_rng(19)
    for p in (1.0, 2.0):
        beta = 2.0 * s_w / p + 1.0
        for n in (4, 8, 12):
            basis = ps.get_basis(n, lebesgue2)
            rule = Q.norm_rule_for(lebesgue2, n)
            c = rng.standard_normal(basis.size)
            f_nodes = basis.eval(rule.nodes) @ c
            f_grid = basis.eval(grid) @ c
            fstar = K.maximal_function_many(f_grid, beta, n, rule.nodes, grid)
            fstar = np.maximum(fstar, np.abs(f_nodes))
            norm_f = float(rule.weights @ np.abs(f_nodes) ** p) ** (1 / p)
            norm_star = float(rule.weights @ fstar**p) ** (1 / p)
            assert norm_f <= norm_star + 1e-12
            assert norm_star <= 1e3 * norm_f


def test_maximal_function_validation():
    with pytest.raises(InvalidArgumentError):
        K.maximal_function(lambda X: np.ones(len(X)), 2.0, 4, [0.0, 0.0], np.empty((0, 2)))


def test_decay_integral_hypothesis_validation():
    with pytest.raises(InvalidArgumentError):
        K.kernel_decay_integral(4, 0.5, 2.0, 0.9, [0.0, 0.0])  # threshold is d/p = 1


def test_decay_integral_monotone_for_flat_weight():
    vals = [K.kernel_decay_integral(n, 0.0, 2.0, 2.0, [0.3, 0.1]).value for n in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_decay_integral_diagnostic_bounded():
    diags = []
    for n in (4, 8, 16, 32):
        for x in ([0.0, 0.0], [0.9, 0.0], [0.9999, 0.0]):
            diags.append(K.kernel_decay_integral(n, 0.5, 2.0, 3.0, x).diagnostic_ratio)
    diags = np.array(diags)
    assert np.all(np.isfinite(diags)) and np.all(diags > 0)
    assert diags.max() / diags.min() < 50.0


def test_decay_integral_budget_stability():
    for x in ([0.0, 0.0], [0.9, 0.0]):
        v1 = K.kernel_decay_integral(16, 0.5, 2.0, 3.0, x, n_theta=32).value
        v2 = K.kernel_decay_integral(16, 0.5, 2.0, 3.0, x, n_theta=64).value
        assert abs(v1 - v2) < 1e-6 * abs(v1)
