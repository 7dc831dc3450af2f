"""Experiment orchestration and the `mball` command line.

Config files are line-oriented `key = value` (a JSON object with the
same keys is also accepted).  Every experiment writes a CSV whose rows
carry the config hash, plus a JSON summary sidecar; the CSV bytes are a
deterministic function of the effective config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import defaults
from ._parallel import parallel_map
from .errors import ConfigError, InvalidArgumentError, MballError
from .geometry import dist_many
from .weights import boundary_weight_factor_many, doubling_estimate, parse_weight

KINDS = ("worst", "average", "christoffel", "kernel-check", "needle", "fit", "selftest")

_KEYS = {
    "experiment",
    "d",
    "weight",
    "n",
    "n_min",
    "n_max",
    "p",
    "samples",
    "seed",
    "restarts",
    "sigma",
    "budget",
    "out",
    "input",
    "k",
    "m",
    "grid",
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    d: int = 2
    weight: str = "jacobi:mu=0.5"
    n_values: tuple = ()
    p: float = 2.0
    samples: int = defaults.AVERAGE_SAMPLES
    seed: int = 0
    restarts: int = 6
    sigma: float = 1.0
    budget: int = defaults.MC_DEFAULT_BUDGET
    out: str = "."
    input_csv: str | None = None
    k_decay: float | None = None
    m_override: int | None = None
    grid: int | None = None

    def serialize(self) -> str:
        lines = [f"experiment = {self.kind}", f"d = {self.d}", f"weight = {self.weight}"]
        if self.n_values:
            lines.append(f"n = {_format_n(self.n_values)}")
        lines.append(f"p = {self.p:g}")
        lines.append(f"samples = {self.samples}")
        lines.append(f"seed = {self.seed}")
        lines.append(f"restarts = {self.restarts}")
        lines.append(f"sigma = {self.sigma:g}")
        lines.append(f"budget = {self.budget}")
        lines.append(f"out = {self.out}")
        if self.input_csv is not None:
            lines.append(f"input = {self.input_csv}")
        if self.k_decay is not None:
            lines.append(f"k = {self.k_decay:g}")
        if self.m_override is not None:
            lines.append(f"m = {self.m_override}")
        if self.grid is not None:
            lines.append(f"grid = {self.grid}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:12]


def _format_n(values) -> str:
    values = list(values)
    if len(values) > 1 and values == list(range(values[0], values[-1] + 1)):
        return f"{values[0]}..{values[-1]}"
    return ",".join(str(v) for v in values)


def _parse_n(text: str) -> tuple:
    text = text.strip()
    if ".." in text:
        lo, _, hi = text.partition("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(","))


def parse_config(text: str) -> ExperimentConfig:
    """Parse the line-oriented `key = value` format (or an equivalent JSON
    object); unknown keys are rejected with their line number."""
    raw: dict = {}
    lines_for_key: dict = {}
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON config: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("JSON config must be an object")
        for key, val in obj.items():
            raw[str(key)] = str(val)
            lines_for_key[str(key)] = None
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"expected `key = value`, got {line!r}", line=lineno)
            key, _, val = body.partition("=")
            key, val = key.strip(), val.strip()
            if key in raw:
                raise ConfigError(f"duplicate key {key!r}", line=lineno)
            raw[key] = val
            lines_for_key[key] = lineno
    for key in raw:
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lines_for_key.get(key))

    def grab(key, conv, default):
        if key not in raw:
            return default
        try:
            return conv(raw[key])
        except (ValueError, InvalidArgumentError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lines_for_key.get(key)) from exc

    kind = grab("experiment", str, None)
    if kind is None:
        raise ConfigError("missing `experiment` key")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", line=lines_for_key.get("experiment"))
    d = grab("d", int, 2)
    if d not in (2, 3):
        raise ConfigError("d must be 2 or 3", line=lines_for_key.get("d"))
    weight_spec = grab("weight", str, "jacobi:mu=0.5")
    try:
        parse_weight(weight_spec, d)
    except InvalidArgumentError as exc:
        raise ConfigError(f"bad weight: {exc}", line=lines_for_key.get("weight")) from exc
    n_values = grab("n", _parse_n, ())
    if ("n_min" in raw) or ("n_max" in raw):
        if n_values:
            raise ConfigError("give either n or n_min/n_max, not both")
        lo = grab("n_min", int, None)
        hi = grab("n_max", int, None)
        if lo is None or hi is None:
            raise ConfigError("n_min and n_max must be given together")
        n_values = tuple(range(lo, hi + 1))
    if kind not in ("fit", "selftest") and not n_values:
        raise ConfigError("n range must be nonempty")
    if n_values and min(n_values) < 0:
        raise ConfigError("degrees must be nonnegative")
    p = grab("p", float, 2.0)
    if p < 1.0:
        raise ConfigError("p must be at least 1", line=lines_for_key.get("p"))
    cfg = ExperimentConfig(
        kind=kind,
        d=d,
        weight=weight_spec,
        n_values=tuple(n_values),
        p=p,
        samples=grab("samples", int, defaults.AVERAGE_SAMPLES),
        seed=grab("seed", int, 0),
        restarts=grab("restarts", int, 6),
        sigma=grab("sigma", float, 1.0),
        budget=grab("budget", int, defaults.MC_DEFAULT_BUDGET),
        out=grab("out", str, "."),
        input_csv=grab("input", str, None),
        k_decay=grab("k", float, None),
        m_override=grab("m", int, None),
        grid=grab("grid", int, None),
    )
    if cfg.budget < 100:
        raise ConfigError("budget must be at least 100", line=lines_for_key.get("budget"))
    if cfg.kind == "fit" and not cfg.input_csv:
        raise ConfigError("fit experiments need `input = path.csv`")
    return cfg


@dataclass
class ExperimentRecord:
    kind: str
    config: ExperimentConfig
    header: list
    rows: list
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0
    passed: bool = True

    def csv_bytes(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.header + ["config_hash"])
        h = self.config.config_hash()
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row] + [h])
        return buf.getvalue().encode()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _run_worst(cfg: ExperimentConfig):
    from .markov import exponent_fit, lifted_lower_bound, worst_case_lp, worst_l2_curve

    w = parse_weight(cfg.weight, cfg.d)
    rows = []
    values = []
    if cfg.p == 2.0:
        results = worst_l2_curve([n for n in cfg.n_values if n >= 1], w)
        for res in results:
            rows.append([res.n, cfg.p, cfg.weight, res.method, res.value, ""])
            values.append((res.n, res.value))
    else:
        ns = [n for n in cfg.n_values if n >= 1]
        results = parallel_map(
            lambda n: worst_case_lp(n, cfg.p, w, restarts=cfg.restarts, seed=cfg.seed), ns
        )
        for res in results:
            rows.append([res.n, cfg.p, cfg.weight, res.method, res.value, ""])
            values.append((res.n, res.value))
    fit = exponent_fit(values) if len(values) >= 3 else None
    ratios = [v / n**2 for n, v in values if n >= 1]
    spread = max(ratios) / min(ratios) if ratios else math.inf
    summary = {
        "slope": fit.slope if fit else None,
        "intercept": fit.intercept if fit else None,
        "ratio_spread_vs_n2": spread,
    }
    checks = {}
    if cfg.p == 2.0 and fit is not None:
        lo, hi = defaults.WORST_L2_SLOPE_WINDOW
        checks["slope_in_window"] = bool(lo <= fit.slope <= hi)
        checks["ratio_spread_below_10"] = bool(spread < defaults.WORST_L2_RATIO_SPREAD)
    elif fit is not None:
        lifted = [lifted_lower_bound(n, cfg.p, w.mu, cfg.d, verify_identity=False) for n, _ in values]
        checks["dominates_lifted"] = bool(
            all(lv <= v + defaults.LIFTED_VS_WORST_TOL for lv, (_, v) in zip(lifted, values))
        )
    summary["checks"] = checks
    return ["n", "p", "weight", "method", "value", "stderr"], rows, summary, all(checks.values())


def _run_average(cfg: ExperimentConfig):
    from .markov import average_case_monte_carlo, basis_pair, exponent_fit
    from .polyspace import DiffMatrix, poly_space_dim

    w = parse_weight(cfg.weight, cfg.d)
    ns = sorted(n for n in cfg.n_values if n >= 1)
    _, _, diffs = basis_pair(max(ns), w)
    rows = []
    points = []
    window_ok = True
    lo, hi = defaults.AVERAGE_TRACE_WINDOW
    for n in ns:
        N_n = poly_space_dim(n, cfg.d)
        N_m = poly_space_dim(n - 1, cfg.d)
        sliced = [
            DiffMatrix(axis=D.axis, matrix=D.matrix[:N_m, :N_n], weight=w, degree=n) for D in diffs
        ]
        res = average_case_monte_carlo(
            sliced, sigma=cfg.sigma, samples=cfg.samples, seed=cfg.seed, stream=n
        )
        ratio = res.monte_carlo_mean / res.trace_formula_value
        window_ok = window_ok and (lo <= ratio <= hi)
        rows.append([n, cfg.p, cfg.weight, "monte-carlo", res.monte_carlo_mean, res.monte_carlo_stderr])
        rows.append([n, cfg.p, cfg.weight, "trace-formula", res.trace_formula_value, ""])
        points.append((n, res.monte_carlo_mean))
    fit = exponent_fit(points) if len(points) >= 3 else None
    checks = {
        "trace_window": bool(window_ok),
    }
    if fit is not None:
        checks["slope_below_cap"] = bool(fit.slope <= defaults.AVERAGE_SLOPE_MAX)
    summary = {"slope": fit.slope if fit else None, "checks": checks}
    return ["n", "p", "weight", "method", "value", "stderr"], rows, summary, all(checks.values())


def _run_christoffel(cfg: ExperimentConfig):
    from .christoffel import christoffel_scan

    w = parse_weight(cfg.weight, cfg.d)
    scan = christoffel_scan(w, cfg.p, cfg.n_values)
    rows = [
        [n, cfg.p, float(np.linalg.norm(x)), lam, meas, ratio]
        for n, x, lam, meas, ratio in scan.rows
    ]
    window_cap = defaults.CHRISTOFFEL_P2_WINDOW if cfg.p == 2.0 else defaults.CHRISTOFFEL_P1_WINDOW
    ok = scan.summary["window"] < window_cap
    summary = dict(scan.summary)
    summary["checks"] = {"ratio_window": bool(ok)}
    return ["n", "p", "x_norm", "lambda", "ball_measure", "ratio"], rows, summary, ok


def _run_kernel_check(cfg: ExperimentConfig):
    from .kernels import (
        kernel_decay_integral,
        partial_kernel_l1_norm,
        smoothed_kernel_partial_grid,
    )

    w = parse_weight(cfg.weight, cfg.d)
    if w.kind != "jacobi":
        raise ConfigError("kernel-check requires a jacobi weight")
    mu, d = w.mu, cfg.d
    rows = []
    y_samples = np.zeros((4, d))
    y_samples[:, 0] = (0.0, 0.5, 0.9, 0.99)

    l1_ratios = {}
    for n in cfg.n_values:
        worst = 0.0
        for y in y_samples:
            for axis in range(d):
                worst = max(worst, partial_kernel_l1_norm(n, mu, axis, y, dim=d) / n**2)
        l1_ratios[n] = worst
    spread = max(l1_ratios.values()) / min(l1_ratios.values())
    l1_ok = spread < defaults.DERIV_L1_SPREAD
    for n, ratio in l1_ratios.items():
        rows.append([n, mu, "cor38_l1_over_n2", ratio, l1_ok])

    k_exp = d + 2
    env_ratios = {}
    X = np.zeros((4, d))
    X[:, 0] = (0.0, 0.5, 0.9, 0.99)
    for n in cfg.n_values:
        worst = 0.0
        for y in y_samples:
            dvals = np.abs(smoothed_kernel_partial_grid(n, mu, 0, X, y))
            wx = np.sqrt(boundary_weight_factor_many(mu, n, X))
            wy = math.sqrt(boundary_weight_factor_many(mu, n, y[None, :])[0])
            dist_xy = dist_many(X, y[None, :])[:, 0]
            hx = np.sqrt(np.clip(1.0 - np.sum(X * X, axis=1), 0.0, None))
            cap = np.minimum(1.0 / np.maximum(hx, 1e-15), float(n))
            envelope = cap * n ** (d + 1) / (wx * wy * (1.0 + n * dist_xy) ** k_exp)
            worst = max(worst, float(np.max(dvals / envelope)))
        env_ratios[n] = worst
    env_spread = max(env_ratios.values()) / min(env_ratios.values())
    env_ok = env_spread < defaults.BOUNDED_RATIO_SPREAD
    for n, ratio in env_ratios.items():
        rows.append([n, mu, "thm36_envelope", ratio, env_ok])

    jp_ratios = {}
    sigma_exp = d + 1.0  # exceeds the p = 2 hypothesis threshold d/2
    for n in cfg.n_values:
        worst = 0.0
        for x in X[:2]:
            res = kernel_decay_integral(n, mu, 2.0, sigma_exp, x, dim=d)
            worst = max(worst, res.diagnostic_ratio)
        jp_ratios[n] = worst
    jp_spread = max(jp_ratios.values()) / min(jp_ratios.values())
    jp_ok = jp_spread < defaults.BOUNDED_RATIO_SPREAD
    for n, ratio in jp_ratios.items():
        rows.append([n, mu, "jp_ratio", ratio, jp_ok])

    ok = l1_ok and env_ok and jp_ok
    summary = {
        "cor38_spread": spread,
        "thm36_spread": env_spread,
        "jp_spread": jp_spread,
        "checks": {"cor38": bool(l1_ok), "thm36": bool(env_ok), "jp": bool(jp_ok)},
    }
    return ["n", "mu", "check_name", "ratio", "bound_holds"], rows, summary, ok


def _run_needle(cfg: ExperimentConfig):
    from .kernels import needle_polynomial

    w = parse_weight(cfg.weight, cfg.d)
    d = cfg.d
    if cfg.k_decay is not None:
        k = cfg.k_decay
    else:
        rep = doubling_estimate(w, sample_count=30, seed=cfg.seed)
        k = rep.estimated_s_w + d + 1
    centers = np.zeros((2, d))
    centers[1, 0] = 0.9
    cells = []
    for n in cfg.n_values:
        m_default = int(math.floor(k / cfg.p)) + d + 2
        # cap m so the inner Fejer degree n1 = n // (2m) stays at least 2;
        # the default m delocalizes the kernel at desk-scale degrees
        m = cfg.m_override if cfg.m_override is not None else max(1, min(m_default, n // 4))
        for center in centers:
            cells.append((n, m, center))

    def one(cell):
        n, m, center = cell
        return needle_polynomial(
            center,
            n,
            p=cfg.p,
            decay=k,
            m_override=m,
            dim=d,
            grid_resolution=cfg.grid,
            resolution_tol=0.2,
        )

    rows = []
    ok = True
    for (n, m, center), res in zip(cells, parallel_map(one, cells)):
        window = res.window()
        passed = window < defaults.NEEDLE_WINDOW and res.min_value >= defaults.NEEDLE_NONNEG_FLOOR
        ok = ok and passed
        rows.append(
            [n, float(np.linalg.norm(center)), cfg.p, k, m, res.c_lo, res.c_hi, res.min_value, window, passed]
        )
    summary = {"decay_exponent": k, "checks": {"needle_windows": bool(ok)}}
    header = ["n", "center_norm", "p", "k", "m", "c_lo", "c_hi", "min_h", "window", "passed"]
    return header, rows, summary, ok


def _run_fit(cfg: ExperimentConfig):
    from .markov import exponent_fit

    points = []
    with open(cfg.input_csv, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row:
                continue
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header row
    fit = exponent_fit(points)
    rows = [[n, v] for n, v in points]
    summary = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "max_residual": fit.max_residual,
        "checks": {},
    }
    return ["n", "value"], rows, summary, True


def _run_selftest(cfg: ExperimentConfig):
    from .selftest import run_selftest

    results = run_selftest()
    rows = [[r.name, r.ok, r.detail] for r in results]
    ok = all(r.ok for r in results)
    summary = {"checks": {r.name: bool(r.ok) for r in results}}
    return ["check", "ok", "detail"], rows, summary, ok


_PIPELINES = {
    "worst": _run_worst,
    "average": _run_average,
    "christoffel": _run_christoffel,
    "kernel-check": _run_kernel_check,
    "needle": _run_needle,
    "fit": _run_fit,
    "selftest": _run_selftest,
}


def run(cfg: ExperimentConfig) -> ExperimentRecord:
    """Execute one experiment; deterministic given the effective config."""
    t0 = time.time()
    header, rows, summary, passed = _PIPELINES[cfg.kind](cfg)
    record = ExperimentRecord(
        kind=cfg.kind,
        config=cfg,
        header=header,
        rows=rows,
        summary=summary,
        wall_time=time.time() - t0,
        passed=passed,
    )
    return record


def write_outputs(record: ExperimentRecord, dump_rule: bool = False) -> tuple[str, str]:
    import os

    cfg = record.config
    os.makedirs(cfg.out, exist_ok=True)
    h = cfg.config_hash()
    stem = cfg.kind.replace("-", "_")
    csv_path = os.path.join(cfg.out, f"{stem}_{h}.csv")
    json_path = os.path.join(cfg.out, f"{stem}_{h}.json")
    with open(csv_path, "wb") as fh:
        fh.write(record.csv_bytes())
    sidecar = {
        "kind": record.kind,
        "config": cfg.serialize(),
        "config_hash": h,
        "summary": record.summary,
        "passed": record.passed,
        "wall_time_seconds": record.wall_time,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if dump_rule and record.kind in ("worst", "average", "christoffel") and cfg.n_values:
        from .quadrature import ball_rule_for

        w = parse_weight(cfg.weight, cfg.d)
        rule = ball_rule_for(w, 2 * max(cfg.n_values))
        rule_path = os.path.join(cfg.out, f"rule_{h}.csv")
        with open(rule_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"coord_{i}" for i in range(cfg.d)] + ["weight"])
            for node, wt in zip(rule.nodes, rule.weights):
                writer.writerow([repr(float(v)) for v in node] + [repr(float(wt))])
    return csv_path, json_path


def _emit_basis(args) -> int:
    from .polyspace import orthonormal_basis

    text = open(args.config).read() if args.config else "experiment = selftest\n"
    cfg = parse_config(text) if args.config else None
    weight_spec = cfg.weight if cfg else "jacobi:mu=0.5"
    d = cfg.d if cfg else 2
    n = max(cfg.n_values) if (cfg and cfg.n_values) else 4
    out = args.out or (cfg.out if cfg else ".")
    w = parse_weight(weight_spec, d)
    basis = orthonormal_basis(n, w)
    import os

    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"basis_n{n}_{w.spec_string().replace(':', '_').replace(';', '_')}.csv")
    basis.to_csv(path)
    print(f"wrote {path} (gram residual {basis.gram_residual:.2e})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mball", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("basis",):
        sp = sub.add_parser(kind)
        sp.add_argument("--config", default=None, help="config file path")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="override the output directory")
        sp.add_argument("--dump-rule", action="store_true", help="also write the primary rule nodes")
        if kind == "fit":
            sp.add_argument("--input", default=None, help="CSV of (n, value) points")
    args = parser.parse_args(argv)

    if args.command == "basis":
        return _emit_basis(args)

    if args.config:
        try:
            text = open(args.config).read()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
    else:
        if args.command == "selftest":
            text = "experiment = selftest\n"
        elif args.command == "fit" and getattr(args, "input", None):
            text = f"experiment = fit\ninput = {args.input}\n"
        else:
            print("error: --config is required for this subcommand", file=sys.stderr)
            return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.kind != args.command:
        print(
            f"error: config says experiment = {cfg.kind} but the subcommand is {args.command}",
            file=sys.stderr,
        )
        return 2
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if getattr(args, "input", None):
        cfg = replace(cfg, input_csv=args.input)

    try:
        record = run(cfg)
    except MballError as exc:
        print(f"error [{cfg.kind}]: {exc}", file=sys.stderr)
        return 1
    csv_path, json_path = write_outputs(record, dump_rule=args.dump_rule)
    for name, ok in record.summary.get("checks", {}).items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    print(f"wrote {csv_path} and {json_path} ({record.wall_time:.1f}s)")
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
