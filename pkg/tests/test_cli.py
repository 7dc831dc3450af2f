import json
import math

import numpy as np
import pytest

from mball import cli
from mball.errors import ConfigError


BASIC = """\
experiment = worst
weight = jacobi:mu=1.0
n = 2..16
p = 2
"""


def test_parse_basic_config():
    cfg = cli.parse_config(BASIC)
    assert cfg.kind == "worst"
    assert cfg.weight == "jacobi:mu=1.0"
    assert cfg.n_values == tuple(range(2, 17))
    assert cfg.p == 2.0


def test_parse_rejects_bad_weight():
    with pytest.raises(ConfigError):
        cli.parse_config("experiment = worst\nweight = jacobi:mu=-1\nn = 2..4\n")


def test_parse_rejects_unknown_key_with_line_number():
    text = "experiment = worst\nn = 2..4\nbogus = 1\n"
    with pytest.raises(ConfigError) as err:
        cli.parse_config(text)
    assert "line 3" in str(err.value)
    assert "bogus" in str(err.value)


def test_parse_rejects_malformed_line():
    with pytest.raises(ConfigError) as err:
        cli.parse_config("experiment = worst\nn 2..4\n")
    assert "line 2" in str(err.value)


def test_parse_comma_list_and_single():
    cfg = cli.parse_config("experiment = worst\nn = 4,8,16\n")
    assert cfg.n_values == (4, 8, 16)
    cfg = cli.parse_config("experiment = worst\nn = 8\n")
    assert cfg.n_values == (8,)


def test_parse_n_min_max_spelling():
    cfg = cli.parse_config("experiment = average\nn_min = 2\nn_max = 5\n")
    assert cfg.n_values == (2, 3, 4, 5)
    with pytest.raises(ConfigError):
        cli.parse_config("experiment = average\nn = 2..4\nn_min = 2\nn_max = 5\n")


def test_parse_json_object():
    cfg = cli.parse_config('{"experiment": "worst", "n": "2..6", "p": "2"}')
    assert cfg.kind == "worst" and cfg.n_values == (2, 3, 4, 5, 6)


def test_parse_requires_nonempty_range():
    with pytest.raises(ConfigError):
        cli.parse_config("experiment = worst\np = 2\n")


def test_round_trip_serialization():
    rng = np.random.default_rng(0)
    kinds = ("worst", "average", "christoffel", "needle")
    weights = ("jacobi:mu=0.5", "jacobi:mu=2", "product:g=0.5,0.5;mu=0.5", "step:a=0.5;c=100")
    for trial in range(25):
        kind = kinds[int(rng.integers(len(kinds)))]
        lo = int(rng.integers(1, 6))
        hi = lo + int(rng.integers(0, 12))
        text = "\n".join(
            [
                f"experiment = {kind}",
                f"weight = {weights[int(rng.integers(len(weights)))]}",
                f"n = {lo}..{hi}",
                f"p = {int(rng.integers(1, 5))}",
                f"seed = {int(rng.integers(0, 1000))}",
                f"samples = {int(rng.integers(100, 5000))}",
            ]
        )
        cfg = cli.parse_config(text)
        again = cli.parse_config(cfg.serialize())
        assert again == cfg
        assert again.config_hash() == cfg.config_hash()


def test_run_worst_pipeline(tmp_path):
    cfg = cli.parse_config(
        f"experiment = worst\nweight = jacobi:mu=0.5\nn = 2..6\np = 2\nout = {tmp_path}\n"
    )
    record = cli.run(cfg)
    assert len(record.rows) == 5
    assert record.header[:2] == ["n", "p"]
    assert record.summary["ratio_spread_vs_n2"] < 10.0
    # the eigen values themselves are exact; the growth-window check reflects
    # the configured range honestly
    assert "slope_in_window" in record.summary["checks"]
    csv_path, json_path = cli.write_outputs(record)
    text = open(csv_path).read()
    assert text.splitlines()[0] == "n,p,weight,method,value,stderr,config_hash"
    assert cfg.config_hash() in text
    sidecar = json.load(open(json_path))
    assert sidecar["config_hash"] == cfg.config_hash()


def test_run_outputs_are_deterministic(tmp_path):
    text = f"experiment = average\nweight = jacobi:mu=0.5\nn = 2..5\nsamples = 300\nseed = 7\nout = {tmp_path}\n"
    a = cli.run(cli.parse_config(text))
    b = cli.run(cli.parse_config(text))
    assert a.csv_bytes() == b.csv_bytes()


def test_run_average_pipeline(tmp_path):
    cfg = cli.parse_config(
        f"experiment = average\nweight = jacobi:mu=1.0\nn = 2..8\nsamples = 300\nout = {tmp_path}\n"
    )
    record = cli.run(cfg)
    assert record.passed
    methods = {row[3] for row in record.rows}
    assert methods == {"monte-carlo", "trace-formula"}
    assert record.summary["checks"]["trace_window"]


def test_run_christoffel_pipeline(tmp_path):
    cfg = cli.parse_config(
        f"experiment = christoffel\nweight = jacobi:mu=0.5\nn = 4,8\np = 2\nout = {tmp_path}\n"
    )
    record = cli.run(cfg)
    assert record.passed
    assert record.header == ["n", "p", "x_norm", "lambda", "ball_measure", "ratio"]


def test_run_fit_pipeline(tmp_path):
    data = tmp_path / "points.csv"
    data.write_text("n,value\n" + "\n".join(f"{n},{2.5 * n * n}" for n in (2, 4, 8, 16)) + "\n")
    cfg = cli.parse_config(f"experiment = fit\ninput = {data}\nout = {tmp_path}\n")
    record = cli.run(cfg)
    assert record.summary["slope"] == pytest.approx(2.0, abs=1e-12)


def test_main_exit_codes(tmp_path):
    data = tmp_path / "points.csv"
    data.write_text("\n".join(f"{n},{n ** 2}" for n in (2, 4, 8)) + "\n")
    code = cli.main(["fit", "--input", str(data), "--out", str(tmp_path)])
    assert code == 0
    assert cli.main(["worst"]) == 2  # missing config
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = worst\nbogus = 1\n")
    assert cli.main(["worst", "--config", str(bad)]) == 2
    mismatch = tmp_path / "mismatch.cfg"
    mismatch.write_text("experiment = worst\nn = 2..4\n")
    assert cli.main(["average", "--config", str(mismatch)]) == 2


def test_main_seed_and_out_overrides(tmp_path):
    cfg_file = tmp_path / "avg.cfg"
    cfg_file.write_text(
        "experiment = average\nweight = jacobi:mu=0.5\nn = 2..4\nsamples = 200\nseed = 1\n"
    )
    out = tmp_path / "results"
    code = cli.main(["average", "--config", str(cfg_file), "--seed", "9", "--out", str(out)])
    assert code == 0
    written = list(out.glob("average_*.json"))
    assert len(written) == 1
    sidecar = json.loads(written[0].read_text())
    assert "seed = 9" in sidecar["config"]


def test_dump_rule_writes_nodes(tmp_path):
    cfg_file = tmp_path / "w.cfg"
    cfg_file.write_text(
        f"experiment = worst\nweight = jacobi:mu=0.5\nn = 2..4\np = 2\nout = {tmp_path}\n"
    )
    cli.main(["worst", "--config", str(cfg_file), "--dump-rule"])
    rule_files = list(tmp_path.glob("rule_*.csv"))
    assert len(rule_files) == 1
    header = rule_files[0].read_text().splitlines()[0]
    assert header == "coord_0,coord_1,weight"


def test_kernel_check_pipeline(tmp_path):
    cfg = cli.parse_config(
        f"experiment = kernel-check\nweight = jacobi:mu=0.5\nn = 2,4\nout = {tmp_path}\n"
    )
    record = cli.run(cfg)
    names = {row[2] for row in record.rows}
    assert names == {"cor38_l1_over_n2", "thm36_envelope", "jp_ratio"}
    assert record.header == ["n", "mu", "check_name", "ratio", "bound_holds"]


def test_needle_pipeline_small(tmp_path):
    cfg = cli.parse_config(
        f"experiment = needle\nweight = jacobi:mu=0.5\nn = 8\np = 1\nk = 5\ngrid = 2000\nout = {tmp_path}\n"
    )
    record = cli.run(cfg)
    assert record.passed
    assert all(row[-1] for row in record.rows)


def test_basis_subcommand(tmp_path):
    cfg_file = tmp_path / "b.cfg"
    cfg_file.write_text(f"experiment = selftest\nweight = jacobi:mu=1.0\nn = 3\nout = {tmp_path}\n")
    code = cli.main(["basis", "--config", str(cfg_file)])
    assert code == 0
    files = list(tmp_path.glob("basis_*.csv"))
    assert len(files) == 1
