"""Command line front end: config parsing, experiment orchestration, CSV output.

Config files are flat ``key = value`` lines with ``#`` comments.  Parameter
keys take a scalar or an inclusive range ``lo..hi`` and accept unit
suffixes (``500mW``, ``3.5Mb``, ``6MHz``, ``20ms``).  Unset parameters
keep the default simulation ranges.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import ValidationError, make_rng
from .market_sim import (
    INTEGER_KEYS,
    RunResult,
    ScenarioRanges,
    SimulationConfig,
    draw_scenario,
    run_futures,
    run_onsite,
)
from .power import f_metric, optimal_power

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "MODES",
    "TRADES_HEADER",
    "parse_config",
    "render_config",
    "run_experiment",
    "main",
]

MODES = ("futures_b", "futures_s", "onsite_b", "onsite_s")
PARAM_KEYS = tuple(ScenarioRanges.__dataclass_fields__)

TRADES_HEADER = [
    "trading", "n_l", "n_b", "gamma", "amount", "price", "q_watts",
    "seller_utility", "buyer_utility", "buyer_net_utility", "nc", "nl_s",
    "t_comp_s", "failed",
]
TRANSCRIPT_HEADER = [
    "round", "price", "seller_set", "buyer_set", "candidate_amount", "candidate_price",
]
SUMMARY_HEADER = [
    "mode", "seed", "tradings", "sum_seller_utility", "sum_buyer_utility",
    "sum_buyer_net_utility", "sum_t_comp_s", "ufair", "tfail", "sum_nc", "sum_nl_s",
]
SWEEP_HEADER = ["mode", "dp", "tau_b", "seeds"] + [f"mean_{c}" for c in SUMMARY_HEADER[3:]] + [
    "mean_nc_per_trading"
]
POWER_HEADER = ["trading", "gamma", "q_star_w", "clipped", "f_q_star", "f_q_max", "difference"]

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

_UNITS = {
    "q_max_w": {"w": 1.0, "mw": 1e-3},
    "D_bits": {"b": 1.0, "kb": 1e3, "mb": 1e6},
    "W_hz": {"hz": 1.0, "khz": 1e3, "mhz": 1e6},
    "t_nl": {"s": 1.0, "ms": 1e-3},
    "tau_s": {"s": 1.0, "ms": 1e-3},
    "tau_b": {"s": 1.0, "ms": 1e-3},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    tradings: int = 100
    seeds: tuple[int, ...] = (1,)
    overrides: dict[str, tuple[float, float]] = field(default_factory=dict)
    sweep_dp: tuple[float, ...] = ()
    sweep_tau_b: tuple[float, ...] = ()
    scenario: str = "midpoint"
    fold_negotiation_latency: bool = False
    ufair_include_failed: bool = False
    out: str = "out"

    @property
    def ranges(self) -> ScenarioRanges:
        return ScenarioRanges().with_values(**self.overrides)

    def simulation(self, **pins) -> SimulationConfig:
        ranges = self.ranges.with_values(**pins) if pins else self.ranges
        return SimulationConfig(
            ranges=ranges,
            sample_scenario=self.scenario == "sample",
            fold_negotiation_latency=self.fold_negotiation_latency,
            ufair_include_failed=self.ufair_include_failed,
        )


def _number(key: str, text: str, line: int | None) -> float:
    raw = text.strip()
    units = _UNITS.get(key, {})
    scale = 1.0
    lowered = raw.lower()
    # longest suffix first so "mw" wins over "w"
    for suffix in sorted(units, key=len, reverse=True):
        if lowered.endswith(suffix) and not lowered[: -len(suffix)].endswith("e"):
            raw, scale = raw[: -len(suffix)], units[suffix]
            break
    try:
        value = float(raw) * scale
    except ValueError:
        raise ConfigError(f"{key}: cannot parse number {text.strip()!r}", line) from None
    if key in INTEGER_KEYS:
        if value != int(value):
            raise ConfigError(f"{key} must be an integer", line)
        return int(value)
    return value


def _parse_bool(key: str, text: str, line: int | None) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text.strip()!r}", line)


def _parse_list(text: str) -> list[str]:
    return [t for t in text.replace(",", " ").split() if t]


def _apply(values: dict, key: str, text: str, line: int | None) -> None:
    if key == "mode":
        mode = text.strip().lower()
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}", line)
        values["mode"] = mode
    elif key == "tradings":
        try:
            values["tradings"] = int(text)
        except ValueError:
            raise ConfigError("tradings must be an integer", line) from None
    elif key == "seeds":
        try:
            values["seeds"] = tuple(int(t) for t in _parse_list(text))
        except ValueError:
            raise ConfigError("seeds must be integers", line) from None
    elif key in ("sweep_dp", "sweep_tau_b"):
        unit_key = "tau_b" if key == "sweep_tau_b" else "dp"
        values[key] = tuple(_number(unit_key, t, line) for t in _parse_list(text))
    elif key == "scenario":
        choice = text.strip().lower()
        if choice not in ("midpoint", "sample"):
            raise ConfigError("scenario must be 'midpoint' or 'sample'", line)
        values["scenario"] = choice
    elif key in ("fold_negotiation_latency", "ufair_include_failed"):
        values[key] = _parse_bool(key, text, line)
    elif key == "out":
        values["out"] = text.strip()
    elif key in PARAM_KEYS:
        if ".." in text:
            lo_text, hi_text = text.split("..", 1)
            lo, hi = _number(key, lo_text, line), _number(key, hi_text, line)
        else:
            lo = hi = _number(key, text, line)
        values.setdefault("overrides", {})[key] = (lo, hi)
    else:
        raise ConfigError(f"unknown key {key!r}", line)


def _validate(config: ExperimentConfig) -> None:
    if config.tradings < 1:
        raise ConfigError("tradings must be at least 1")
    if not config.seeds:
        raise ConfigError("at least one seed is required")
    ranges = config.ranges
    for key in PARAM_KEYS:
        lo, hi = getattr(ranges, key)
        if lo > hi:
            raise ConfigError(f"{key}: range lower end exceeds upper end")
    if ranges.r_l[0] > ranges.p_l[1]:
        raise ValidationError("r_l ≤ p_l required")
    # M and N are drawn above the drawn V, so compare against V's top end
    for key in ("M", "N"):
        if getattr(ranges, key)[1] <= ranges.V[1]:
            raise ValidationError(f"{key} must exceed V")
    # both corners of the box, and the midpoint, must be valid scenarios
    for pick in (0, 1, None):
        if pick is None:
            pinned = ranges
        else:
            pinned = ranges.with_values(
                **{k: getattr(ranges, k)[pick] for k in PARAM_KEYS if k not in ("M", "N")}
            )
        draw_scenario(SimulationConfig(ranges=pinned))
    for dp in config.sweep_dp:
        draw_scenario(SimulationConfig(ranges=ranges.with_values(dp=dp)))
    for tau_b in config.sweep_tau_b:
        draw_scenario(SimulationConfig(ranges=ranges.with_values(tau_b=tau_b)))


def parse_config(text: str, overrides: dict[str, str] | None = None, *, require_mode: bool = True
                 ) -> ExperimentConfig:
    """Parse ``key = value`` text; ``overrides`` (raw strings) win over file values.

    Raises :class:`ConfigError` for syntax problems and
    :class:`~uavfutures.core.ValidationError` for out-of-range parameters.
    """
    values: dict = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError("expected 'key = value'", number)
        _apply(values, key, value, number)
    for key, value in (overrides or {}).items():
        _apply(values, key, value, None)
    if "mode" not in values:
        if require_mode:
            raise ConfigError("mode is required")
        values["mode"] = "futures_b"
    config = ExperimentConfig(**values)
    _validate(config)
    return config


def _render_number(key: str, value) -> str:
    if key in INTEGER_KEYS:
        return str(int(value))
    return repr(float(value))


def render_config(config: ExperimentConfig) -> str:
    lines = [
        f"mode = {config.mode}",
        f"tradings = {config.tradings}",
        "seeds = " + ", ".join(str(s) for s in config.seeds),
        f"scenario = {config.scenario}",
        f"fold_negotiation_latency = {str(config.fold_negotiation_latency).lower()}",
        f"ufair_include_failed = {str(config.ufair_include_failed).lower()}",
        f"out = {config.out}",
    ]
    if config.sweep_dp:
        lines.append("sweep_dp = " + ", ".join(repr(float(v)) for v in config.sweep_dp))
    if config.sweep_tau_b:
        lines.append("sweep_tau_b = " + ", ".join(repr(float(v)) for v in config.sweep_tau_b))
    for key in sorted(config.overrides):
        lo, hi = config.overrides[key]
        if lo == hi:
            lines.append(f"{key} = {_render_number(key, lo)}")
        else:
            lines.append(f"{key} = {_render_number(key, lo)}..{_render_number(key, hi)}")
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _run_one(args) -> RunResult:
    mode, sim, seed, tradings = args
    runner = run_futures if mode.startswith("futures") else run_onsite
    final = "buyer" if mode.endswith("_b") else "seller"
    return runner(sim, seed, tradings, final)


def _run_seeds(mode, sim, seeds, tradings, jobs) -> list[RunResult]:
    tasks = [(mode, sim, seed, tradings) for seed in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def trade_rows(result: RunResult):
    for r in result.records:
        yield [
            r.index, r.env.n_l, r.env.n_b, r.env.gamma, r.amount, r.price, r.q,
            r.seller_utility, r.buyer_utility, r.buyer_net_utility, r.nc, r.nl,
            r.t_comp, r.failed,
        ]


def transcript_rows(result: RunResult):
    neg = result.negotiation
    if neg is None:
        return
    for rnd in neg.transcript:
        cand = rnd.candidate
        yield [
            rnd.index,
            rnd.price,
            " ".join(str(a) for a in sorted(rnd.seller_set)),
            "" if rnd.buyer_set is None else " ".join(str(a) for a in sorted(rnd.buyer_set)),
            "" if cand is None else str(cand[0]),
            "" if cand is None else _fmt(cand[1]),
        ]


def _summary_values(s) -> list:
    return [
        s.sum_seller_utility, s.sum_buyer_utility, s.sum_buyer_net_utility,
        s.sum_t_comp, s.ufair, s.tfail, s.sum_nc, s.sum_nl,
    ]


def _means(results: list[RunResult]) -> list[float]:
    cols = np.array([_summary_values(r.summary) for r in results], dtype=float)
    return [float(v) for v in cols.mean(axis=0)]


def _cmd_run(config: ExperimentConfig, out: Path, jobs: int) -> None:
    results = _run_seeds(config.mode, config.simulation(), config.seeds, config.tradings, jobs)
    rows = []
    for seed, result in zip(config.seeds, results):
        _write_csv(out / f"trades_{config.mode}_seed{seed}.csv", TRADES_HEADER, trade_rows(result))
        if result.negotiation is not None:
            _write_csv(
                out / f"transcript_{config.mode}_seed{seed}.csv",
                TRANSCRIPT_HEADER,
                transcript_rows(result),
            )
        rows.append([config.mode, str(seed), result.summary.tradings] + _summary_values(result.summary))
    rows.append([config.mode, "mean", config.tradings] + _means(results))
    _write_csv(out / f"summary_{config.mode}.csv", SUMMARY_HEADER, rows)


def _cmd_sweep(config: ExperimentConfig, out: Path, jobs: int) -> None:
    base = config.ranges
    dps = config.sweep_dp or (base.dp[0],)
    taus = config.sweep_tau_b or (None,)
    rows = []
    for dp, tau_b in itertools.product(dps, taus):
        pins = {"dp": dp}
        if tau_b is not None:
            pins["tau_b"] = tau_b
        results = _run_seeds(config.mode, config.simulation(**pins), config.seeds, config.tradings, jobs)
        means = _means(results)
        nc_per_trading = means[6] / config.tradings
        rows.append(
            [config.mode, dp, "range" if tau_b is None else _fmt(tau_b), len(config.seeds)]
            + [config.tradings]
            + means
            + [nc_per_trading]
        )
    header = SWEEP_HEADER[:4] + ["tradings"] + SWEEP_HEADER[4:]
    _write_csv(out / f"sweep_{config.mode}.csv", header, rows)


def power_study(config: ExperimentConfig, seed: int):
    """Rows of ``f(q**, γ)`` against ``f(q_max, γ)`` for ``γ ~ U(eps1, eps2)``."""
    sim = replace(config.simulation(), sample_scenario=False)
    buyer = draw_scenario(sim).buyer
    rng = make_rng(seed)
    gammas = rng.uniform(buyer.eps1, buyer.eps2, size=config.tradings)
    rows = []
    for i, gamma in enumerate(gammas, start=1):
        sol = optimal_power(float(gamma), buyer)
        f_star = f_metric(sol.q_star, gamma, buyer.omega2)
        f_max = f_metric(buyer.q_max, gamma, buyer.omega2)
        rows.append([i, float(gamma), sol.q_star, sol.clipped, f_star, f_max, f_max - f_star])
    return rows


def _cmd_power(config: ExperimentConfig, out: Path) -> None:
    rows = power_study(config, config.seeds[0])
    _write_csv(out / "power_study.csv", POWER_HEADER, rows)
    gap = math.fsum(r[-1] for r in rows) / len(rows)
    print(f"mean f(q_max) - f(q**) = {gap:.6g} over {len(rows)} tradings")


def run_experiment(config: ExperimentConfig, command: str = "run", jobs: int = 1) -> int:
    """Execute ``command`` (run, sweep, power-study) and write its CSV files."""
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if command == "run":
            _cmd_run(config, out, jobs)
        elif command == "sweep":
            _cmd_sweep(config, out, jobs)
        elif command == "power-study":
            _cmd_power(config, out)
        else:
            raise ConfigError(f"unknown command {command!r}")
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavfutures", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "simulate one mechanism for each seed"),
        ("sweep", "grid over dp x tau_b, seed-averaged"),
        ("power-study", "compare f(q**) with f(q_max) over sampled channels"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", nargs="?", help="key = value config file")
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--seed", type=int, action="append", help="repeatable; replaces seeds")
        p.add_argument("--tradings", type=int)
        p.add_argument("--out")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
        p.add_argument("--jobs", type=int, default=1, help="parallel seeds")
        if name == "power-study":
            p.add_argument("--gamma-range", nargs=2, type=float, metavar=("LO", "HI"))
    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.add_argument("--quick", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest

        return run_selftest(quick=args.quick)

    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    flags: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_VALIDATION
        key, value = item.split("=", 1)
        flags[key.strip()] = value.strip()
    if args.mode:
        flags["mode"] = args.mode
    if args.seed:
        flags["seeds"] = ",".join(str(s) for s in args.seed)
    if args.tradings is not None:
        flags["tradings"] = str(args.tradings)
    if args.out:
        flags["out"] = args.out
    if getattr(args, "gamma_range", None):
        lo, hi = args.gamma_range
        flags["eps1"], flags["eps2"] = repr(lo), repr(hi)
    try:
        config = parse_config(text, flags, require_mode=args.command != "power-study")
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run_experiment(config, args.command, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
