from __future__ import annotations

import csv
import math
import statistics
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavfutures.cli import (
    TRADES_HEADER,
    ConfigError,
    ExperimentConfig,
    main,
    parse_config,
    render_config,
    run_experiment,
)
from uavfutures.core import ValidationError


def _rows(path: Path) -> list[dict]:
    with path.open(newline="") as handle:
        return list(csv.DictReader(handle))


def test_empty_file_needs_mode():
    with pytest.raises(ConfigError, match="mode is required"):
        parse_config("")


def test_figure_setup_parses():
    config = parse_config("dp = 0.005\nmode = futures_b\ntradings = 100")
    assert config.mode == "futures_b" and config.tradings == 100
    assert config.ranges.dp == (0.005, 0.005)


def test_zero_vms_rejected():
    with pytest.raises(ValidationError, match="V must be an integer"):
        parse_config("mode = futures_b\nV = 0\n")


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 3: unknown key 'colour'"):
        parse_config("mode = futures_b\n# comment\ncolour = red\n")


def test_malformed_line_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("mode = onsite_b\njust words\n")


def test_units_and_ranges():
    config = parse_config(
        "mode = onsite_s\nq_max_w = 500mW..1000mW\nD_bits = 3Mb..4Mb\nW_hz = 6MHz\nt_nl = 20ms\n"
        "eps1 = 1e1..2e1  # scientific notation, no unit\n"
    )
    r = config.ranges
    assert r.q_max_w == (0.5, 1.0)
    assert r.D_bits == (3e6, 4e6)
    assert r.W_hz == (6e6, 6e6)
    assert r.t_nl == pytest.approx((0.02, 0.02))
    assert r.eps1 == (10.0, 20.0)


def test_overrides_win():
    config = parse_config("mode = onsite_s\ntradings = 5\n", {"tradings": "7", "mode": "futures_s"})
    assert (config.mode, config.tradings) == ("futures_s", 7)


def test_bad_range_order():
    with pytest.raises(ConfigError, match="lower end"):
        parse_config("mode = onsite_b\nomega1 = 0.5..0.3\n")


def test_render_round_trip_defaults():
    config = parse_config("mode = futures_s\nseeds = 3 4 5\nsweep_dp = 0.01, 0.02\n")
    assert parse_config(render_config(config)) == config


float_in = st.floats(0.31, 0.49, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(
    mode=st.sampled_from(["futures_b", "futures_s", "onsite_b", "onsite_s"]),
    tradings=st.integers(1, 10_000),
    seeds=st.lists(st.integers(0, 2**31), min_size=1, max_size=4).map(tuple),
    omega=st.tuples(float_in, float_in).map(sorted).map(tuple),
    v=st.integers(30, 33),
    tau_b=st.lists(st.floats(0.2, 2.0), max_size=3).map(tuple),
    fold=st.booleans(),
)
def test_render_round_trip(mode, tradings, seeds, omega, v, tau_b, fold):
    config = ExperimentConfig(
        mode=mode, tradings=tradings, seeds=seeds, overrides={"omega1": omega, "V": (v, v)},
        sweep_tau_b=tau_b, fold_negotiation_latency=fold, out="some/dir",
    )
    assert parse_config(render_config(config)) == config


def test_run_writes_expected_files(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--mode", "futures_b", "--tradings", "100", "--seed", "1", "--out", str(out)]) == 0
    rows = _rows(out / "trades_futures_b_seed1.csv")
    assert len(rows) == 100
    assert list(rows[0]) == TRADES_HEADER
    assert (out / "transcript_futures_b_seed1.csv").exists()
    summary = _rows(out / "summary_futures_b.csv")
    assert [r["seed"] for r in summary] == ["1", "mean"]


def test_summary_recomputes_from_csv(tmp_path):
    for mode in ("futures_s", "onsite_b"):
        out = tmp_path / mode
        code = main(["run", "--mode", mode, "--tradings", "25", "--seed", "2", "--seed", "3",
                     "--set", "scenario=sample", "--out", str(out)])
        assert code == 0
        summary = {r["seed"]: r for r in _rows(out / f"summary_{mode}.csv")}
        for seed in ("2", "3"):
            rows = _rows(out / f"trades_{mode}_seed{seed}.csv")
            transcript = out / f"transcript_{mode}_seed{seed}.csv"
            extra_rounds = len(_rows(transcript)) if transcript.exists() else 0
            s = summary[seed]

            def close(column, value):
                assert abs(float(s[column]) - value) <= 1e-9 * max(1.0, abs(value))

            close("sum_seller_utility", math.fsum(float(r["seller_utility"]) for r in rows))
            close("sum_buyer_utility", math.fsum(float(r["buyer_utility"]) for r in rows))
            close("sum_buyer_net_utility", math.fsum(float(r["buyer_net_utility"]) for r in rows))
            close("sum_t_comp_s", math.fsum(float(r["t_comp_s"]) for r in rows))
            prices = [float(r["price"]) for r in rows if r["failed"] == "0"]
            close("ufair", statistics.pstdev(prices) if prices else 0.0)
            close("tfail", sum(r["failed"] == "1" for r in rows))
            close("sum_nc", sum(int(r["nc"]) for r in rows) + extra_rounds)
            if extra_rounds == 0:
                close("sum_nl_s", math.fsum(float(r["nl_s"]) for r in rows))


def test_sweep_grid_rows(tmp_path):
    out = tmp_path / "sweep"
    code = main([
        "sweep", "--mode", "onsite_b", "--tradings", "2", "--out", str(out),
        "--set", "sweep_dp=0.001,0.005,0.01,0.02", "--set", "sweep_tau_b=0.45,0.8,1.6",
    ])
    assert code == 0
    rows = _rows(out / "sweep_onsite_b.csv")
    assert len(rows) == 12
    assert {(r["dp"], r["tau_b"]) for r in rows} == {
        (dp, tau) for dp in ("0.001", "0.005", "0.01", "0.02") for tau in ("0.45", "0.8", "1.6")
    }


def test_power_study_columns(tmp_path):
    out = tmp_path / "power"
    assert main(["power-study", "--tradings", "50", "--gamma-range", "10", "200", "--out", str(out)]) == 0
    rows = _rows(out / "power_study.csv")
    assert len(rows) == 50
    for r in rows:
        assert 10 <= float(r["gamma"]) <= 200
        assert float(r["difference"]) == pytest.approx(float(r["f_q_max"]) - float(r["f_q_star"]), abs=1e-11)
        assert float(r["difference"]) >= 0


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("mode = futures_b\nr_l = 0.5\np_l = 0.3\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["run", "--tradings", "3"]) == 1
    blocked = tmp_path / "file"
    blocked.write_text("")
    assert main(["run", "--mode", "futures_b", "--tradings", "2", "--out", str(blocked / "sub")]) == 2


def test_parallel_jobs_match_serial(tmp_path):
    args = ["run", "--mode", "onsite_s", "--tradings", "4", "--seed", "1", "--seed", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    for name in ("summary_onsite_s.csv", "trades_onsite_s_seed2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_experiment_rejects_unknown_command(tmp_path):
    config = parse_config(f"mode = futures_b\nout = {tmp_path}\n")
    assert run_experiment(config, "plot") == 1
