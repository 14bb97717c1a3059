"""Command-line entry point: scenario files in, CSV reports out.

Every subcommand reads one YAML scenario, writes one CSV (schema v1, UTF-8,
comma-separated, LF endings, header row, numbers at 6 significant digits) and
prints a one-line summary to standard output.  ``--plot`` additionally
renders a PNG next to the CSV.  Exit codes: 0 success, 1 configuration or
usage error, 2 runtime precondition failure.
"""

import argparse
import math
import os
import sys

from .analysis import (chain_shared_rate, hbt_coincidences, hbt_port_probs,
                       max_distance, pdl_compensate, pdl_penalty_sweep,
                       zero_rate_limit_45)
from .channel import FiberSpan, SplitterPort, build_topology
from .config import (ConfigError, InvariantViolation, ScenarioConfig,
                     default_scenario_yaml, load_config)
from .protocol import qber_extrapolate
from .runner import derive_rng, run_link, sweep_clock, sweep_distance

__all__ = ["main", "build_parser", "run_subcommand"]

_MC_COMMANDS = ("simulate", "sweep-distance", "sweep-clock", "shared-bits")


def _fmt(value) -> str:
    """Serialize one CSV field: ints verbatim, floats at 6 significant digits."""
    if isinstance(value, bool):
        raise TypeError("booleans do not belong in the CSV schema")
    if isinstance(value, int):
        return str(value)
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.6g}"


def _write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _require_seed(args, config: ScenarioConfig) -> int:
    seed = args.seed if args.seed is not None else config.run.seed
    if seed is None:
        raise InvariantViolation(
            f"{args.command} is a Monte Carlo subcommand: set run.seed in the "
            "config or pass --seed (wall-clock seeding is not supported)")
    if seed < 0:
        raise InvariantViolation(f"--seed must be >= 0, got {seed}")
    return seed


def _link_row(stats, rates):
    return [stats.sifted_rate_bps, stats.qber, stats.qber_leak, stats.qber_dark,
            stats.qber_jitter, rates.net_rate_bps]


def _cmd_simulate(config, args):
    seed = _require_seed(args, config)
    res = run_link(config, seed=seed)
    header = ["receiver", "n_slots", "trials", "sifted_count", "sifted_bps",
              "qber", "qber_leak", "qber_dark", "qber_jitter",
              "conclusive_fraction", "net_bps"]
    rows = [[res.receiver, res.n_slots, res.trials, res.stats.sifted_count,
             res.stats.sifted_rate_bps, res.stats.qber, res.stats.qber_leak,
             res.stats.qber_dark, res.stats.qber_jitter,
             res.conclusive_fraction, res.rates.net_rate_bps]]
    summary = (f"simulate: receiver {res.receiver}, {res.stats.sifted_count} sifted bits "
               f"({_fmt(res.stats.sifted_rate_bps)} bit/s), QBER {_fmt(100 * res.stats.qber)}%, "
               f"net {_fmt(res.rates.net_rate_bps)} bit/s")

    def plotter(png):
        from . import figures
        figures.plot_simulate(res, png)

    return header, rows, summary, plotter


def _cmd_sweep_distance(config, args):
    seed = _require_seed(args, config)
    points = sweep_distance(config, seed=seed)
    header = ["distance_km", "sifted_bps", "qber", "qber_leak", "qber_dark",
              "qber_jitter", "net_bps"]
    rows = [[d] + _link_row(r.stats, r.rates) for d, r in points]
    summary = (f"sweep-distance: {len(points)} points over "
               f"{_fmt(points[0][0])}-{_fmt(points[-1][0])} km, net "
               f"{_fmt(points[0][1].rates.net_rate_bps)} -> "
               f"{_fmt(points[-1][1].rates.net_rate_bps)} bit/s")

    def plotter(png):
        from . import figures
        figures.plot_distance_sweep(points, png)

    return header, rows, summary, plotter


def _cmd_sweep_clock(config, args):
    seed = _require_seed(args, config)
    points = sweep_clock(config, seed=seed)
    header = ["clock_hz", "sifted_bps", "qber", "qber_leak", "qber_dark",
              "qber_jitter", "net_bps"]
    rows = [[c] + _link_row(r.stats, r.rates) for c, r in points]
    jit = [100 * r.stats.qber_jitter for _, r in points]
    summary = (f"sweep-clock: {len(points)} points over "
               f"{_fmt(points[0][0] / 1e9)}-{_fmt(points[-1][0] / 1e9)} GHz, "
               f"jitter QBER {_fmt(jit[0])}% -> {_fmt(jit[-1])}%")

    def plotter(png):
        from . import figures
        figures.plot_clock_sweep(points, png)

    return header, rows, summary, plotter


def _cmd_pdl_sweep(config, args):
    opt = config.analysis
    formula = args.pdl_formula or opt.pdl_formula
    alpha0 = config.source.separation_deg
    kwargs = dict(qber=opt.qber, pdl_db=opt.pdl_db, alpha0_deg=alpha0,
                  grid_deg=opt.grid_deg, axis_deg=opt.pdl_axis_deg)
    result = pdl_penalty_sweep(formula=formula, **kwargs)
    other = "verbatim" if formula == "corrected" else "corrected"
    other_avg = pdl_penalty_sweep(formula=other, **kwargs).average_decrease_pct
    header = ["a_deg", "b_deg", "alpha_prime_deg", "intensity1", "intensity0",
              "net_rate_relative"]
    rows = [[p.a_deg, p.b_deg, p.alpha_prime_deg, p.intensity1, p.intensity0,
             p.net_rate_relative] for p in result.points]
    summary = (f"pdl-sweep ({formula}): average net-rate decrease "
               f"{_fmt(result.average_decrease_pct)}% over {len(rows)} orientations, "
               f"{result.clipped_points} clipped ({other}: {_fmt(other_avg)}%); "
               f"PDL {_fmt(opt.pdl_db)} dB at QBER {_fmt(100 * opt.qber)}%")

    def plotter(png):
        from . import figures
        figures.plot_pdl_sweep(result, png)

    return header, rows, summary, plotter


def _cmd_compensate(config, args):
    opt = config.analysis
    formula = args.pdl_formula or opt.pdl_formula
    alpha0 = config.source.separation_deg
    header = ["qber", "uncompensated_decrease_pct", "compensated_decrease_pct",
              "best_a_deg", "best_b_deg", "best_alpha_prime_deg",
              "loss_min_decrease_pct"]
    rows = []
    for q in opt.qber_values:
        sweep = pdl_penalty_sweep(q, opt.pdl_db, alpha0, opt.grid_deg,
                                  opt.pdl_axis_deg, formula)
        comp = pdl_compensate(q, opt.pdl_db, alpha0, opt.grid_deg, formula)
        rows.append([q, sweep.average_decrease_pct, comp.best_decrease_pct,
                     comp.best_a_deg, comp.best_b_deg, comp.best_alpha_prime_deg,
                     comp.loss_min_decrease_pct])
    gain_idx = next((k for k, r in enumerate(rows) if r[2] < 0), None)
    if gain_idx is None:
        tail = "no net gain within the scanned QBER range"
    elif gain_idx == 0:
        tail = f"net gain already at QBER {_fmt(100 * rows[0][0])}%"
    else:
        tail = (f"net gain appears between QBER {_fmt(100 * rows[gain_idx - 1][0])}% "
                f"and {_fmt(100 * rows[gain_idx][0])}%")
    summary = f"compensate ({formula}): {len(rows)} QBER points, {tail}"

    def plotter(png):
        from . import figures
        figures.plot_compensation([(r[0], r[1], r[2]) for r in rows], png)

    return header, rows, summary, plotter


def _cmd_shared_bits(config, args):
    seed = _require_seed(args, config)
    opt = config.analysis
    topology = build_topology(config.topology)
    clock = config.source.clock_hz
    eta = config.detector.efficiency
    header = ["mu", "n_slots", "single_rate_cps", "shared_rate_cps",
              "shared_se_cps", "pairwise_percent", "network_percent",
              "analytic_rate_cps", "analytic_percent"]
    rows = []
    last = None
    for k, mu in enumerate(opt.mu_values):
        rng = derive_rng(seed, "shared-bits", k)
        rep = hbt_coincidences(topology, opt.hbt_ports, mu, opt.hbt_slots, rng,
                               clock_hz=clock, detector_efficiency=eta)
        probs = hbt_port_probs(topology, opt.hbt_ports, mu, eta)
        analytic = chain_shared_rate(clock, probs)
        analytic_pct = 100.0 * analytic / (clock * probs[0]) if probs[0] > 0 else 0.0
        rows.append([rep.mu, rep.n_slots, rep.single_receiver_rate_cps,
                     rep.pairwise_shared_rate_cps, rep.shared_rate_se_cps,
                     rep.pairwise_percent, rep.network_percent, analytic,
                     analytic_pct])
        last = (rep, analytic_pct)
    i, j = opt.hbt_ports
    summary = (f"shared-bits: ports {i} and {j} of a 1x{topology.splitter.n_ports} "
               f"splitter, pairwise {_fmt(rows[0][5])}% at mu={_fmt(rows[0][0])} -> "
               f"{_fmt(last[0].pairwise_percent)}% at mu={_fmt(last[0].mu)} "
               f"(closed form {_fmt(last[1])}%)")
    plot_rows = [(r[0], r[5], 100.0 * r[4] / r[2] if r[2] > 0 else 0.0, r[8])
                 for r in rows]

    def plotter(png):
        from . import figures
        figures.plot_shared_bits(plot_rows, png)

    return header, rows, summary, plotter


def _port_only_loss_db(topology, receiver: int) -> float:
    """Scalar path loss excluding fiber spans (splitter port IL + PDL excess)."""
    total = 0.0
    for elem in topology.paths[receiver].elements:
        if isinstance(elem, SplitterPort):
            total += elem.insertion_loss_db + elem.pdl.excess_loss_db
        elif not isinstance(elem, FiberSpan):
            raise TypeError(f"unknown path element {elem!r}")
    return total


def _cmd_max_distance(config, args):
    opt = config.analysis
    cal = opt.calibration
    if cal is None:
        raise InvariantViolation("max-distance requires analysis.calibration "
                                 "(kappa, dark_noise_cps, reference_rate_bps)")
    limit = opt.qber_limit if opt.qber_limit is not None else zero_rate_limit_45()
    topology = build_topology(config.topology)
    atten = config.topology.atten_db_per_km
    clock = config.source.clock_hz
    header = ["receiver", "port_loss_db", "max_distance_km", "qber_limit"]
    rows = []
    for r in range(topology.n_receivers):
        port_db = _port_only_loss_db(topology, r)
        km = max_distance(cal, port_db, atten, clock_hz=clock, qber_limit=limit)
        rows.append([r, port_db, km, limit])
    kms = [row[2] for row in rows]
    summary = (f"max-distance: {_fmt(min(kms))}-{_fmt(max(kms))} km across "
               f"{len(rows)} receiver(s) (spread {_fmt(max(kms) - min(kms))} km) "
               f"at QBER limit {_fmt(100 * limit)}%")

    worst = max(range(len(rows)), key=lambda r: rows[r][1])

    def plotter(png):
        from . import figures
        port_db = rows[worst][1]
        gain = clock / cal.reference_clock_hz
        grid = [kms[worst] * k / 120.0 for k in range(121)]
        curve = []
        for km in grid:
            delta_db = (port_db - cal.reference_port_loss_db
                        + atten * (km - cal.reference_distance_km))
            rate = cal.reference_rate_bps * gain * 10.0 ** (-delta_db / 10.0)
            curve.append((km, qber_extrapolate(cal, rate)))
        figures.plot_max_distance(curve, kms[worst], limit, png)

    return header, rows, summary, plotter


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep-distance": _cmd_sweep_distance,
    "sweep-clock": _cmd_sweep_clock,
    "pdl-sweep": _cmd_pdl_sweep,
    "compensate": _cmd_compensate,
    "shared-bits": _cmd_shared_bits,
    "max-distance": _cmd_max_distance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ponqkd",
        description="Simulator and rate analysis for multi-user two-state QKD "
                    "over passive optical networks.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    helps = {
        "simulate": "one Monte Carlo link run -> sifted-key and net-rate report",
        "sweep-distance": "Monte Carlo link runs over analysis.distances_km",
        "sweep-clock": "Monte Carlo link runs over analysis.clocks_hz",
        "pdl-sweep": "closed-form net-rate penalty over PDL orientations",
        "compensate": "closed-form launch-orientation compensation over QBER",
        "shared-bits": "coincidence Monte Carlo of multi-photon bit sharing",
        "max-distance": "calibrated QBER extrapolation to the zero-rate distance",
    }
    for name, help_text in helps.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides run.seed)")
        p.add_argument("--plot", action="store_true",
                       help="also render <out>.png next to the CSV")
        if name in ("pdl-sweep", "compensate"):
            p.add_argument("--pdl-formula", choices=("corrected", "verbatim"),
                           default=None, help="intensity law (overrides config)")

    p = sub.add_parser("default-scenario",
                       help="write the fully commented default scenario YAML")
    p.add_argument("--out", default=None, help="destination (default: stdout)")
    return parser


def run_subcommand(name: str, config: ScenarioConfig, out_path: str,
                   args) -> str:
    """Execute one subcommand: write its CSV (and optional PNG), return the summary."""
    header, rows, summary, plotter = _COMMANDS[name](config, args)
    _write_csv(out_path, header, rows)
    if getattr(args, "plot", False):
        plotter(os.path.splitext(out_path)[0] + ".png")
    return summary


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return 0 if code == 0 else 1

    try:
        if args.command == "default-scenario":
            text = default_scenario_yaml()
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                print(f"default-scenario: wrote {args.out}")
            else:
                sys.stdout.write(text)
            return 0
        config = load_config(args.config)
        summary = run_subcommand(args.command, config, args.out, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
