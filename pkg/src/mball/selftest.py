"""Fast cross-module invariant battery behind the `selftest` CLI subcommand.

Each check is a condensed version of an invariant the full pytest suite
exercises at scale; the battery is meant to finish in well under a minute
on a clean build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import christoffel as chris
from . import geometry as geo
from . import kernels as ker
from . import markov as mkv
from . import polyspace as ps
from . import quadrature as quad
from . import weights as wts


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _chord_identity() -> CheckResult:
    X = geo.random_ball_points(500, 2, seed=11)
    Y = geo.random_ball_points(500, 2, seed=12)
    worst = 0.0
    for x, y in zip(X, Y):
        worst = max(worst, abs(geo.dist_tilde(x, y) - 2.0 * math.sin(geo.dist(x, y) / 2.0)))
    return CheckResult("geometry.chord_identity", worst < 1e-12, f"max dev {worst:.2e}")


def _quasi_triangle() -> CheckResult:
    X = geo.random_ball_points(800, 2, seed=21)
    Y = geo.random_ball_points(800, 2, seed=22)
    Z = geo.random_ball_points(800, 2, seed=23)
    worst = 0.0
    for n in (1, 16):
        dxy = np.array([geo.dist(x, y) for x, y in zip(X, Y)])
        dxz = np.array([geo.dist(x, z) for x, z in zip(X, Z)])
        dyz = np.array([geo.dist(y, z) for y, z in zip(Y, Z)])
        gap = (1 + n * dxy) - (1 + n * dxz) * (1 + n * dyz)
        worst = max(worst, float(gap.max()))
    return CheckResult("geometry.quasi_triangle", worst < 1e-10, f"max violation {worst:.2e}")


def _ball_measure_closed_form() -> CheckResult:
    w = wts.jacobi_weight(0.5, 2)
    v = wts.ball_measure(w, [0.3, -0.2], math.pi)
    err = abs(v - math.pi)
    return CheckResult("weights.disk_mass", err < 1e-8, f"err {err:.2e}")


def _rule_exactness() -> CheckResult:
    rule = quad.ball_rule(12, 1.0, 2)
    got = rule.integrate(rule.nodes[:, 0] ** 4 * rule.nodes[:, 1] ** 2)
    want = quad.ball_moment((4, 2), wts.jacobi_weight(1.0, 2))
    err = abs(got - want)
    return CheckResult("quadrature.moment", err < 1e-12, f"err {err:.2e}")


def _basis_gram() -> CheckResult:
    w = wts.jacobi_weight(0.5, 2)
    b = ps.get_basis(8, w)
    rule = quad.ball_rule_for(w, 20)
    V = b.eval(rule.nodes)
    res = float(np.max(np.abs((V * rule.weights[:, None]).T @ V - np.eye(b.size))))
    return CheckResult("polyspace.gram", res < 1e-8, f"independent residual {res:.2e}")


def _hand_values() -> CheckResult:
    w = wts.jacobi_weight(0.5, 2)
    _, _, diffs = mkv.basis_pair(1, w)
    worst = mkv.worst_case_l2(diffs).value
    trace = float(np.sum(diffs[0].matrix ** 2))
    ok = abs(worst - 2.0) < 1e-10 and abs(trace - 4.0) < 1e-10
    return CheckResult("markov.hand_values", ok, f"worst {worst:.12f}, trace {trace:.12f}")


def _kernel_consistency() -> CheckResult:
    mu, n = 0.5, 4
    x = np.array([0.35, -0.2])
    y = np.array([-0.15, 0.55])
    a = ker.smoothed_kernel(n, mu, x, y, method="gegenbauer")
    b = ker.smoothed_kernel(n, mu, x, y, method="basis")
    rel = abs(a - b) / max(abs(a), 1.0)
    return CheckResult("kernels.method_consistency", rel < 1e-7, f"rel dev {rel:.2e}")


def _christoffel_constant() -> CheckResult:
    w = wts.jacobi_weight(0.5, 2)
    v = chris.christoffel_l2(ps.get_basis(0, w), [0.2, 0.2])
    err = abs(v - math.pi)
    return CheckResult("christoffel.degree_zero", err < 1e-10, f"err {err:.2e}")


def _separated_set() -> CheckResult:
    ss = geo.maximal_separated_set(math.pi / 4, seed=1, resolution=2000)
    probes = geo.ball_grid(2, 2000)
    rep = ss.covering_report(probes)
    ok = rep["covered"] and ss.min_pairwise_dist() >= ss.epsilon
    return CheckResult("geometry.separated_set", ok, f"centers {len(ss)}, overlap {rep['max_overlap']}")


CHECKS = [
    _chord_identity,
    _quasi_triangle,
    _ball_measure_closed_form,
    _rule_exactness,
    _basis_gram,
    _hand_values,
    _kernel_consistency,
    _christoffel_constant,
    _separated_set,
]


def run_selftest() -> list[CheckResult]:
    return [check() for check in CHECKS]
