"""Weight catalog on the ball, metric-ball measures, and doubling diagnostics.

Measures of metric balls are computed in cap coordinates on the lifted
hemisphere: the metric ball around x is exactly a geodesic cap around
the lift of x, and the region above the equator is cut out analytically
(an azimuthal interval in d=2, a polar cap in d=3), so the quadrature
never sees an indicator discontinuity.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import defaults
from .errors import BoundarySingularityError, InvalidArgumentError
from .geometry import Point, as_coords, ball_grid

_LEG_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n: int):
    if n not in _LEG_CACHE:
        _LEG_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _LEG_CACHE[n]


@dataclass(frozen=True)
class Weight:
    """A member of the weight catalog: jacobi(mu), product(gammas; mu), step(a, c)."""

    kind: str
    params: tuple
    dim: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidArgumentError("weights are defined for dimensions 2 and 3")
        if self.kind == "jacobi":
            (mu,) = self.params
            if mu < 0:
                raise InvalidArgumentError("jacobi weight requires mu >= 0")
        elif self.kind == "product":
            *gammas, mu = self.params
            if len(gammas) != self.dim:
                raise InvalidArgumentError("product weight needs one exponent per coordinate")
            if any(g < 0 for g in gammas) or mu < 0:
                raise InvalidArgumentError("product weight requires gamma_i >= 0 and mu >= 0")
        elif self.kind == "step":
            a, c = self.params
            if not (0.0 < a < 1.0) or c <= 0:
                raise InvalidArgumentError("step weight requires 0 < a < 1 and c > 0")
        else:
            raise InvalidArgumentError(f"unknown weight kind {self.kind!r}")

    # --- catalog parameters ---
    @property
    def mu(self) -> float:
        if self.kind == "jacobi":
            return float(self.params[0])
        if self.kind == "product":
            return float(self.params[-1])
        raise InvalidArgumentError(f"{self.kind} weight has no mu parameter")

    @property
    def gammas(self) -> tuple:
        if self.kind != "product":
            raise InvalidArgumentError("only product weights carry coordinate exponents")
        return tuple(self.params[:-1])

    @property
    def default_measure_method(self) -> str:
        return "montecarlo" if self.kind == "step" else "quadrature"

    def spec_string(self) -> str:
        if self.kind == "jacobi":
            return f"jacobi:mu={self.params[0]:g}"
        if self.kind == "product":
            gam = ",".join(f"{g:g}" for g in self.gammas)
            return f"product:g={gam};mu={self.mu:g}"
        a, c = self.params
        return f"step:a={a:g};c={c:g}"

    # --- evaluation ---
    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Vectorized pointwise values; rows of X are ball points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        one_minus = np.clip(1.0 - np.sum(X * X, axis=1), 0.0, None)
        if self.kind == "jacobi":
            return _radial_power(one_minus, self.mu)
        if self.kind == "product":
            vals = _radial_power(one_minus, self.mu)
            for i, g in enumerate(self.gammas):
                if g != 0.0:
                    vals = vals * np.abs(X[:, i]) ** g
            return vals
        a, c = self.params
        return np.where(np.sqrt(np.sum(X * X, axis=1)) <= a, 1.0, c)

    def __call__(self, x) -> float:
        xv = as_coords(x, self.dim)
        one_minus = max(0.0, 1.0 - float(xv @ xv))
        if self.kind in ("jacobi", "product"):
            exponent = self.mu - 0.5
            if one_minus == 0.0 and exponent < 0.0:
                raise BoundarySingularityError(
                    "weight is singular on the boundary for mu < 1/2"
                )
        return float(self.evaluate(xv[None, :])[0])

    def total_mass(self) -> float:
        """Closed-form integral of the weight over the whole ball."""
        if self.kind == "jacobi":
            return ball_power_mass([0.0] * self.dim, self.mu)
        if self.kind == "product":
            return ball_power_mass(list(self.gammas), self.mu)
        a, c = self.params
        d = self.dim
        sphere_area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
        return sphere_area * (a**d / d + c * (1.0 - a**d) / d)


def _radial_power(one_minus: np.ndarray, mu: float) -> np.ndarray:
    exponent = mu - 0.5
    if exponent == 0.0:
        return np.ones_like(one_minus)
    with np.errstate(divide="ignore"):
        return np.where(one_minus > 0.0, one_minus**exponent, np.inf if exponent < 0 else 0.0)


def ball_power_mass(exponents, mu: float) -> float:
    """Closed form of the integral of prod |x_i|^{c_i} (1-|x|^2)^{mu-1/2} over the ball."""
    c = np.asarray(exponents, dtype=float)
    log_val = (
        gammaln(mu + 0.5)
        + np.sum(gammaln((c + 1.0) / 2.0))
        - gammaln(mu + 0.5 + np.sum((c + 1.0) / 2.0))
    )
    return float(np.exp(log_val))


def jacobi_weight(mu: float, dim: int = 2) -> Weight:
    return Weight(kind="jacobi", params=(float(mu),), dim=dim)


def product_weight(gammas, mu: float) -> Weight:
    gammas = tuple(float(g) for g in gammas)
    return Weight(kind="product", params=gammas + (float(mu),), dim=len(gammas))


def step_weight(a: float, c: float, dim: int = 2) -> Weight:
    return Weight(kind="step", params=(float(a), float(c)), dim=dim)


def parse_weight(spec: str, dim: int | None = None) -> Weight:
    """Parse catalog strings like "jacobi:mu=1.0", "product:g=0.5,0.5;mu=0.5",
    "step:a=0.5;c=100"."""
    try:
        kind, _, body = spec.strip().partition(":")
        fields = {}
        for item in body.split(";"):
            key, _, val = item.partition("=")
            fields[key.strip()] = val.strip()
        if kind == "jacobi":
            return jacobi_weight(float(fields["mu"]), dim or 2)
        if kind == "product":
            gammas = [float(v) for v in fields["g"].split(",")]
            if dim is not None and len(gammas) != dim:
                raise InvalidArgumentError(
                    f"product weight has {len(gammas)} exponents but dimension is {dim}"
                )
            return product_weight(gammas, float(fields["mu"]))
        if kind == "step":
            return step_weight(float(fields["a"]), float(fields["c"]), dim or 2)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"cannot parse weight spec {spec!r}: {exc}") from exc
    raise InvalidArgumentError(f"unknown weight kind in spec {spec!r}")


# ---------------------------------------------------------------------------
# metric-ball measures
# ---------------------------------------------------------------------------


def _frame_d2(centers: np.ndarray):
    """Lifted centers plus an orthonormal frame (u, v) of the tangent with v_3 = 0."""
    h = np.sqrt(np.clip(1.0 - np.sum(centers * centers, axis=1), 0.0, None))
    xbar = np.concatenate([centers, h[:, None]], axis=1)
    R = np.linalg.norm(centers, axis=1)
    u = np.empty_like(xbar)
    ok = R > 1e-14
    # u = (e3 - h*xbar)/R points "toward the pole" within the tangent plane
    u[ok, :2] = -h[ok, None] * centers[ok] / R[ok, None]
    u[ok, 2] = R[ok]
    u[~ok] = np.array([1.0, 0.0, 0.0])
    v = np.cross(xbar, u)
    return xbar, u, v, h, R


def _integrand_times_height(w: Weight, Y: np.ndarray, ylast: np.ndarray) -> np.ndarray:
    """w(y) * y_last evaluated stably (the jacobi factor is y_last^(2 mu))."""
    ylast = np.clip(ylast, 0.0, None)
    if w.kind == "jacobi":
        return ylast ** (2.0 * w.mu)
    if w.kind == "product":
        vals = ylast ** (2.0 * w.mu)
        for i, g in enumerate(w.gammas):
            if g != 0.0:
                vals = vals * np.abs(Y[..., i]) ** g
        return vals
    a, c = w.params
    r2 = np.sum(Y * Y, axis=-1)
    return np.where(r2 <= a * a, 1.0, c) * ylast


def _theta_panels(h: np.ndarray, R: np.ndarray, theta_max: float, inner_breaks=()):
    """Panel (start, end) arrays, splitting at the full-circle and
    equator-exit angles where the azimuthal interval has derivative kinks,
    plus optional caller-supplied radial breakpoints (for peaked factors)."""
    safe_R = np.where(R > 1e-14, R, 1.0)
    t_full = np.where(R > 1e-14, np.arctan(h / safe_R), math.pi / 2)
    t_star = np.where(R > 1e-14, math.pi - np.arctan(h / safe_R), math.pi / 2)
    cuts = [np.zeros_like(h)]
    for brk in sorted(b for b in inner_breaks if 0.0 < b < theta_max):
        cuts.append(np.full_like(h, brk))
    cuts.append(np.minimum(t_full, theta_max))
    cuts.append(np.minimum(t_star, theta_max))
    cuts.append(np.full_like(h, theta_max))
    stacked = np.sort(np.stack(cuts, axis=1), axis=1)
    return stacked[:, :-1], stacked[:, 1:]


def ball_measure_batch(
    w: Weight,
    centers: np.ndarray,
    r: float,
    n_theta: int | None = None,
    n_phi: int | None = None,
) -> np.ndarray:
    """Quadrature values of the weighted measure of metric balls B(x, r), batched over x."""
    return cap_integral_batch(w, centers, r, n_theta=n_theta, n_phi=n_phi)


def cap_integral_batch(
    w: Weight,
    centers: np.ndarray,
    r: float,
    factor=None,
    inner_breaks=(),
    n_theta: int | None = None,
    n_phi: int | None = None,
) -> np.ndarray:
    """Integral of w(y) [* factor(y, y_last, theta)] over the metric ball B(x, r).

    Cap coordinates around the lifted center keep every piece smooth: the
    metric distance to the center is the polar angle itself, so radially
    peaked factors (pass inner_breaks at their scale) integrate accurately.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != w.dim:
        raise InvalidArgumentError("center dimension does not match the weight")
    if r <= 0:
        raise InvalidArgumentError("radius must be positive")
    theta_max = min(float(r), math.pi)
    n_theta = n_theta or defaults.MEASURE_THETA_NODES
    n_phi = n_phi or defaults.MEASURE_PHI_NODES
    if w.dim == 2:
        return _cap_quad_d2(w, centers, theta_max, n_theta, n_phi, factor, inner_breaks)
    return _cap_quad_d3(w, centers, theta_max, n_theta, n_phi, factor=factor, inner_breaks=inner_breaks)


def _cap_quad_d2(w, centers, theta_max, n_theta, n_phi, factor=None, inner_breaks=()):
    xbar, u, v, h, R = _frame_d2(centers)
    starts, ends = _theta_panels(h, R, theta_max, inner_breaks)
    tg, tw = _leggauss(n_theta)
    pg, pw = _leggauss(n_phi)
    total = np.zeros(len(centers))
    for panel in range(starts.shape[1]):
        a, b = starts[:, panel], ends[:, panel]  # (B,)
        length = np.clip(b - a, 0.0, None)
        if np.all(length <= 1e-15):
            continue
        theta = a[:, None] + (tg[None, :] + 1.0) * 0.5 * length[:, None]  # (B, nt)
        wt = 0.5 * length[:, None] * tw[None, :]
        sin_t, cos_t = np.sin(theta), np.cos(theta)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = cos_t * h[:, None] / np.maximum(sin_t * R[:, None], 1e-300)
        phi_max = np.arccos(np.clip(-s, -1.0, 1.0))
        # phi symmetric interval [-phi_max, phi_max]
        phi = phi_max[:, :, None] * pg[None, None, :]  # (B, nt, np)
        wphi = phi_max[:, :, None] * pw[None, None, :]
        cos_p, sin_p = np.cos(phi), np.sin(phi)
        ybar = (
            cos_t[:, :, None, None] * xbar[:, None, None, :]
            + sin_t[:, :, None, None]
            * (cos_p[:, :, :, None] * u[:, None, None, :] + sin_p[:, :, :, None] * v[:, None, None, :])
        )  # (B, nt, np, 3)
        vals = _integrand_times_height(w, ybar[..., :2], ybar[..., 2])
        if factor is not None:
            vals = vals * factor(ybar[..., :2], np.clip(ybar[..., 2], 0.0, None), theta[:, :, None])
        total += np.sum(vals * wphi * (wt * sin_t)[:, :, None], axis=(1, 2))
    return total


def _complement_frame_d3(center: np.ndarray):
    """Orthonormal (q, q1, q2) of the lifted tangent with q1, q2 having zero height."""
    h = math.sqrt(max(0.0, 1.0 - float(center @ center)))
    xbar = np.array([*center, h])
    R = float(np.linalg.norm(center))
    if R > 1e-14:
        q = np.array([*(-h * center / R), R])
        x0n = center / R
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(x0n)))] = 1.0
        z1 = np.cross(x0n, axis)
        z1 /= np.linalg.norm(z1)
        z2 = np.cross(x0n, z1)
        q1 = np.array([*z1, 0.0])
        q2 = np.array([*z2, 0.0])
    else:
        q = np.array([1.0, 0.0, 0.0, 0.0])
        q1 = np.array([0.0, 1.0, 0.0, 0.0])
        q2 = np.array([0.0, 0.0, 1.0, 0.0])
    return xbar, q, q1, q2, h, R


def _cap_quad_d3(w, centers, theta_max, n_theta, n_psi, n_alpha=24, factor=None, inner_breaks=()):
    tg, tw = _leggauss(n_theta)
    sg, sw = _leggauss(n_psi)
    alpha = 2.0 * math.pi * np.arange(n_alpha) / n_alpha
    ca, sa = np.cos(alpha), np.sin(alpha)
    out = np.empty(len(centers))
    for b, center in enumerate(centers):
        xbar, q, q1, q2, h, R = _complement_frame_d3(center)
        t_full = math.atan2(h, R) if R > 1e-14 else math.pi / 2
        t_star = math.pi - t_full if R > 1e-14 else math.pi / 2
        breaks = sorted(
            {0.0, theta_max, min(t_full, theta_max), min(max(t_star, t_full), theta_max)}
            | {b for b in inner_breaks if 0.0 < b < theta_max}
        )
        acc = 0.0
        for a, bb in zip(breaks[:-1], breaks[1:]):
            if bb - a <= 1e-15:
                continue
            theta = a + (tg + 1.0) * 0.5 * (bb - a)
            wt = 0.5 * (bb - a) * tw
            sin_t, cos_t = np.sin(theta), np.cos(theta)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                s = cos_t * h / np.maximum(sin_t * R, 1e-300)
            psi_max = np.arccos(np.clip(-s, -1.0, 1.0))
            psi = psi_max[:, None] * 0.5 * (sg[None, :] + 1.0)  # (nt, ns)
            wpsi = psi_max[:, None] * 0.5 * sw[None, :]
            sin_s, cos_s = np.sin(psi), np.cos(psi)
            omega = (
                cos_s[:, :, None, None] * q[None, None, None, :]
                + sin_s[:, :, None, None]
                * (ca[None, None, :, None] * q1[None, None, None, :] + sa[None, None, :, None] * q2[None, None, None, :])
            )  # (nt, ns, na, 4)
            ybar = cos_t[:, None, None, None] * xbar[None, None, None, :] + sin_t[:, None, None, None] * omega
            vals = _integrand_times_height(w, ybar[..., :3], ybar[..., 3])
            if factor is not None:
                vals = vals * factor(
                    ybar[..., :3], np.clip(ybar[..., 3], 0.0, None), theta[:, None, None]
                )
            inner = np.sum(vals, axis=2) * (2.0 * math.pi / n_alpha)  # (nt, ns)
            acc += float(np.sum(inner * wpsi * sin_s, axis=1) @ (wt * sin_t**2))
        out[b] = acc
    return out


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float


def ball_measure_mc(w: Weight, x, r: float, budget: int = None, seed: int = 0) -> MCEstimate:
    """Monte Carlo measure of B(x, r): cap-restricted sampling with the
    lifted-height reweighting, so boundary-singular weights stay bounded."""
    budget = budget or defaults.MC_DEFAULT_BUDGET
    if budget < 100:
        raise InvalidArgumentError("Monte Carlo budget must be at least 100")
    xv = as_coords(x, w.dim)
    if r <= 0:
        raise InvalidArgumentError("radius must be positive")
    theta_max = min(float(r), math.pi)
    rng = np.random.default_rng(np.random.Philox(key=seed))
    if w.dim == 2:
        xbar, u, v, h, R = _frame_d2(xv[None, :])
        xbar, u, v = xbar[0], u[0], v[0]
        cos_max = math.cos(theta_max)
        cos_t = 1.0 - rng.random(budget) * (1.0 - cos_max)
        sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
        phi = 2.0 * math.pi * rng.random(budget)
        ybar = (
            cos_t[:, None] * xbar[None, :]
            + sin_t[:, None] * (np.cos(phi)[:, None] * u[None, :] + np.sin(phi)[:, None] * v[None, :])
        )
        area = 2.0 * math.pi * (1.0 - cos_max)
        g = np.where(ybar[:, 2] >= 0.0, _integrand_times_height(w, ybar[:, :2], ybar[:, 2]), 0.0)
    else:
        xbar, q, q1, q2, h, R = _complement_frame_d3(xv)
        # theta with density ~ sin^2 on [0, theta_max], by inverse CDF lookup
        ts = np.linspace(0.0, theta_max, 4096)
        cdf = ts - np.sin(ts) * np.cos(ts)
        cdf /= cdf[-1]
        theta = np.interp(rng.random(budget), cdf, ts)
        cos_u = 2.0 * rng.random(budget) - 1.0
        sin_u = np.sqrt(np.clip(1.0 - cos_u**2, 0.0, None))
        alpha = 2.0 * math.pi * rng.random(budget)
        omega = (
            cos_u[:, None] * q[None, :]
            + sin_u[:, None] * (np.cos(alpha)[:, None] * q1[None, :] + np.sin(alpha)[:, None] * q2[None, :])
        )
        ybar = np.cos(theta)[:, None] * xbar[None, :] + np.sin(theta)[:, None] * omega
        area = 2.0 * math.pi * (theta_max - math.sin(theta_max) * math.cos(theta_max))
        g = np.where(ybar[:, 3] >= 0.0, _integrand_times_height(w, ybar[:, :3], ybar[:, 3]), 0.0)
    value = area * float(np.mean(g))
    stderr = area * float(np.std(g, ddof=1)) / math.sqrt(budget)
    return MCEstimate(value=value, stderr=stderr)


def ball_measure(
    w: Weight,
    x,
    r: float,
    method: str | None = None,
    budget: int | None = None,
    seed: int = 0,
) -> float:
    """Weighted measure of the metric ball B(x, r)."""
    method = method or w.default_measure_method
    if method == "quadrature":
        xv = as_coords(x, w.dim)
        return float(ball_measure_batch(w, xv[None, :], r)[0])
    if method == "montecarlo":
        return ball_measure_mc(w, x, r, budget=budget, seed=seed).value
    raise InvalidArgumentError(f"unknown measure method {method!r}")


# ---------------------------------------------------------------------------
# boundary factor, mollified weight, doubling diagnostics
# ---------------------------------------------------------------------------


def boundary_weight_factor(mu: float, n: int, x) -> float:
    """(sqrt(1-|x|^2) + 1/n)^(2 mu): the boundary-sensitive ball-measure factor."""
    if n < 1:
        raise InvalidArgumentError("n must be a positive integer")
    xv = np.asarray(x.array if isinstance(x, Point) else x, dtype=float)
    h = math.sqrt(max(0.0, 1.0 - float(np.sum(xv * xv))))
    return (h + 1.0 / n) ** (2.0 * mu)


def boundary_weight_factor_many(mu: float, n: int, X: np.ndarray) -> np.ndarray:
    if n < 1:
        raise InvalidArgumentError("n must be a positive integer")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = np.sqrt(np.clip(1.0 - np.sum(X * X, axis=1), 0.0, None))
    return (h + 1.0 / n) ** (2.0 * mu)


_MOLLIFIED_CACHE: dict = {}
_MOLLIFIED_LOCK = threading.Lock()


def mollified_weight(w: Weight, n: int, x) -> float:
    """Ball-average weight at scale 1/n, normalized by the plain ball measure."""
    xv = as_coords(x, w.dim)
    key = (w, int(n), xv.tobytes())
    with _MOLLIFIED_LOCK:
        if key in _MOLLIFIED_CACHE:
            return _MOLLIFIED_CACHE[key]
    val = float(mollified_weight_many(w, n, xv[None, :])[0])
    with _MOLLIFIED_LOCK:
        _MOLLIFIED_CACHE[key] = val
    return val


def mollified_weight_many(w: Weight, n: int, X: np.ndarray) -> np.ndarray:
    if n < 1:
        raise InvalidArgumentError("n must be a positive integer")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lebesgue = jacobi_weight(0.5, w.dim)
    denom = ball_measure_batch(lebesgue, X, 1.0 / n)
    if w.default_measure_method == "quadrature":
        numer = ball_measure_batch(w, X, 1.0 / n)
    else:
        numer = np.array(
            [ball_measure_mc(w, X[i], 1.0 / n, seed=7).value for i in range(len(X))]
        )
    return numer / denom


@dataclass(frozen=True)
class DoublingReport:
    estimated_L: float
    estimated_s_w: float
    sample_count: int
    worst_pair: tuple  # (Point, radius)


def doubling_estimate(w: Weight, sample_count: int = 50, seed: int = 0) -> DoublingReport:
    """Empirical lower estimate of the doubling constant.

    Samples x from the standard probe grid and r log-uniformly; the
    sampled pair stream is a deterministic function of the seed, so the
    estimate is monotone in sample_count for a fixed seed.
    """
    if sample_count < 10:
        raise InvalidArgumentError("sample_count must be at least 10")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    grid = ball_grid(w.dim, 2000 if w.dim == 2 else 8000)
    best = 1.0
    worst_pair = (Point(tuple(grid[0])), 1.0)
    for i in range(sample_count):
        x = grid[int(rng.integers(len(grid)))]
        r = float(np.exp(rng.uniform(math.log(1e-3), math.log(math.pi))))
        if w.default_measure_method == "quadrature":
            small = float(ball_measure_batch(w, x[None, :], r)[0])
            big = float(ball_measure_batch(w, x[None, :], 2.0 * r)[0])
        else:
            small = ball_measure_mc(w, x, r, seed=seed * 1_000_003 + 2 * i).value
            big = ball_measure_mc(w, x, 2.0 * r, seed=seed * 1_000_003 + 2 * i + 1).value
        if small <= 0:
            continue
        ratio = big / small
        if ratio > best:
            best = ratio
            worst_pair = (Point(tuple(x)), r)
    best = max(best, 1.0)
    return DoublingReport(
        estimated_L=best,
        estimated_s_w=math.log2(best),
        sample_count=sample_count,
        worst_pair=worst_pair,
    )
