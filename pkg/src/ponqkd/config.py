"""Scenario configuration: a strict, documented YAML schema.

Every run is described by one YAML file with four sections (``source``,
``detector``, ``topology``, ``run``) plus an optional ``analysis`` section
for the sweep subcommands.  Parsing is strict: unknown keys, wrong types and
physically inconsistent values are rejected with the offending field named.
"""

import math
from dataclasses import dataclass, field

import yaml

from .channel import (FIBER_ATTEN_DB_PER_KM, SplitterModel, TopologySpec,
                      default_port_losses)
from .photonics import DetectorModel, SourceModel
from .polarization import PdlElement
from .protocol import LinkCalibration

__all__ = [
    "ConfigError",
    "MissingConfigFile",
    "SchemaViolation",
    "InvariantViolation",
    "AnalysisOptions",
    "RunOptions",
    "ScenarioConfig",
    "load_config",
    "parse_config",
    "default_scenario_yaml",
]


class ConfigError(Exception):
    """Base class for configuration problems (CLI exit code 1)."""


class MissingConfigFile(ConfigError):
    pass


class SchemaViolation(ConfigError):
    pass


class InvariantViolation(ConfigError):
    pass


_MISSING = object()


def _mapping(node, path):
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise SchemaViolation(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node, path, allowed):
    unknown = set(node) - set(allowed)
    if unknown:
        raise SchemaViolation(f"{path}: unknown key {sorted(unknown)[0]!r} "
                              f"(allowed: {', '.join(sorted(allowed))})")


def _get(node, key, path, kind, default=_MISSING):
    if key not in node or node[key] is None:
        if default is _MISSING:
            raise SchemaViolation(f"{path}.{key}: required field is missing")
        return default
    value = node[key]
    if kind is float:
        # YAML 1.1 parses "1e9" (unsigned exponent) as a string; accept
        # numeric strings so that spelling remains usable.
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise SchemaViolation(
                    f"{path}.{key}: expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(f"{path}.{key}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation(f"{path}.{key}: expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise SchemaViolation(f"{path}.{key}: expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise SchemaViolation(f"{path}.{key}: expected a list, got {value!r}")
        return value
    raise TypeError(kind)


def _float_list(node, key, path, default=_MISSING):
    raw = _get(node, key, path, list, default)
    if raw is default and not isinstance(raw, list):
        return raw
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, str):
            try:
                out.append(float(v))
                continue
            except ValueError:
                raise SchemaViolation(
                    f"{path}.{key}[{i}]: expected a number, got {v!r}") from None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaViolation(f"{path}.{key}[{i}]: expected a number, got {v!r}")
        out.append(float(v))
    return out


@dataclass(frozen=True)
class RunOptions:
    n_slots: int = 1_000_000
    seed: int | None = None
    receiver: int = 0
    trials: int = 1


@dataclass(frozen=True)
class AnalysisOptions:
    """Knobs for the sweep and closed-form subcommands."""

    distances_km: tuple = (2.0, 4.0, 6.0, 8.0, 10.0)
    clocks_hz: tuple = (1e9, 2e9, 3e9)
    mu_values: tuple = (0.1, 0.5, 1.0, 2.0, 3.0)
    hbt_ports: tuple = (0, 1)
    hbt_slots: int = 10_000_000
    qber: float = 0.0359
    qber_values: tuple = tuple(q / 200.0 for q in range(1, 19))  # 0.5% .. 9%
    pdl_db: float = 2.23
    pdl_axis_deg: float = 0.0
    grid_deg: float = 1.0
    pdl_formula: str = "corrected"
    qber_limit: float | None = None
    calibration: LinkCalibration | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    source: SourceModel
    detector: DetectorModel
    topology: TopologySpec
    run: RunOptions
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)

    def window_s(self, clock_hz: float | None = None) -> float:
        """Detector acceptance window; defaults to half the clock period."""
        clock = clock_hz or self.source.clock_hz
        if self.detector.window_s is not None:
            return self.detector.window_s
        return 0.5 / clock


def _parse_source(node) -> SourceModel:
    node = _mapping(node, "source")
    _check_keys(node, "source", {"clock_hz", "mu", "jitter_fwhm_s", "polarization_leak",
                                 "launch_efficiency", "angle_bit1_deg", "angle_bit0_deg"})
    try:
        return SourceModel(
            clock_hz=_get(node, "clock_hz", "source", float, 1e9),
            mu=_get(node, "mu", "source", float, 0.1),
            jitter_fwhm_s=_get(node, "jitter_fwhm_s", "source", float, 60e-12),
            polarization_leak=_get(node, "polarization_leak", "source", float, 0.0),
            launch_efficiency=_get(node, "launch_efficiency", "source", float, 0.99),
            angle_bit1_deg=_get(node, "angle_bit1_deg", "source", float, -22.5),
            angle_bit0_deg=_get(node, "angle_bit0_deg", "source", float, 22.5),
        )
    except ValueError as exc:
        raise InvariantViolation(f"source: {exc}") from exc


def _parse_detector(node) -> DetectorModel:
    node = _mapping(node, "detector")
    _check_keys(node, "detector", {"efficiency", "dark_rate_cps", "jitter_fwhm_s",
                                   "window_s", "dead_time_s"})
    try:
        return DetectorModel(
            efficiency=_get(node, "efficiency", "detector", float, 0.12),
            dark_rate_cps=_get(node, "dark_rate_cps", "detector", float, 0.0),
            jitter_fwhm_s=_get(node, "jitter_fwhm_s", "detector", float, 350e-12),
            window_s=_get(node, "window_s", "detector", float, None),
            dead_time_s=_get(node, "dead_time_s", "detector", float, 0.0),
        )
    except ValueError as exc:
        raise InvariantViolation(f"detector: {exc}") from exc


def _parse_splitter(node) -> SplitterModel:
    node = _mapping(node, "topology.splitter")
    _check_keys(node, "topology.splitter",
                {"n_ports", "insertion_loss_db", "mean_loss_db", "spread_db",
                 "pdl_db", "pdl_axis_deg"})
    n_ports = _get(node, "n_ports", "topology.splitter", int)
    losses = _float_list(node, "insertion_loss_db", "topology.splitter", None)
    if losses is None:
        mean = _get(node, "mean_loss_db", "topology.splitter", float, None)
        spread = _get(node, "spread_db", "topology.splitter", float, None)
        losses = default_port_losses(n_ports, mean, spread)
    elif "mean_loss_db" in node or "spread_db" in node:
        raise SchemaViolation("topology.splitter: give either insertion_loss_db "
                              "or mean_loss_db/spread_db, not both")

    pdl_raw = node.get("pdl_db", 0.0)
    axis_raw = node.get("pdl_axis_deg", 0.0)
    if isinstance(pdl_raw, (int, float)) and not isinstance(pdl_raw, bool):
        pdl_values = [float(pdl_raw)] * n_ports
    else:
        pdl_values = _float_list(node, "pdl_db", "topology.splitter")
    if isinstance(axis_raw, (int, float)) and not isinstance(axis_raw, bool):
        axis_values = [float(axis_raw)] * n_ports
    else:
        axis_values = _float_list(node, "pdl_axis_deg", "topology.splitter")
    if len(pdl_values) != n_ports:
        raise SchemaViolation(f"topology.splitter.pdl_db: expected {n_ports} entries, "
                              f"got {len(pdl_values)}")
    if len(axis_values) != n_ports:
        raise SchemaViolation(f"topology.splitter.pdl_axis_deg: expected {n_ports} "
                              f"entries, got {len(axis_values)}")
    try:
        pdl = tuple(PdlElement(p, a) for p, a in zip(pdl_values, axis_values))
        return SplitterModel(n_ports, tuple(losses), pdl)
    except ValueError as exc:
        raise InvariantViolation(f"topology.splitter: {exc}") from exc


def _parse_topology(node, default_mu: float) -> TopologySpec:
    node = _mapping(node, "topology")
    _check_keys(node, "topology", {"kind", "mu_convention", "mu", "fiber_km",
                                   "feeder_km", "atten_db_per_km", "splitter"})
    kind = _get(node, "kind", "topology", str, "single_receiver")
    raw_fiber = node.get("fiber_km", 0.0)
    if isinstance(raw_fiber, (int, float)) and not isinstance(raw_fiber, bool):
        drop_kms = (float(raw_fiber),)
    else:
        drop_kms = tuple(_float_list(node, "fiber_km", "topology"))
    splitter = None
    if node.get("splitter") is not None:
        splitter = _parse_splitter(node["splitter"])
        if isinstance(raw_fiber, (int, float)) and not isinstance(raw_fiber, bool):
            # A scalar fiber length fans out to every port.
            drop_kms = tuple([float(raw_fiber)] * splitter.n_ports)
    try:
        return TopologySpec(
            kind=kind,
            mu_convention=_get(node, "mu_convention", "topology", str, "per_arm"),
            mu_value=_get(node, "mu", "topology", float, default_mu),
            drop_kms=drop_kms,
            feeder_km=_get(node, "feeder_km", "topology", float, 0.0),
            atten_db_per_km=_get(node, "atten_db_per_km", "topology", float,
                                 FIBER_ATTEN_DB_PER_KM),
            splitter=splitter,
        )
    except ValueError as exc:
        raise InvariantViolation(f"topology: {exc}") from exc


def _parse_run(node) -> RunOptions:
    node = _mapping(node, "run")
    _check_keys(node, "run", {"n_slots", "seed", "receiver", "trials"})
    n_slots = _get(node, "n_slots", "run", int, 1_000_000)
    if n_slots < 1:
        raise InvariantViolation(f"run.n_slots must be >= 1, got {n_slots}")
    seed = _get(node, "seed", "run", int, None)
    if seed is not None and seed < 0:
        raise InvariantViolation(f"run.seed must be >= 0, got {seed}")
    receiver = _get(node, "receiver", "run", int, 0)
    trials = _get(node, "trials", "run", int, 1)
    if trials < 1:
        raise InvariantViolation(f"run.trials must be >= 1, got {trials}")
    return RunOptions(n_slots, seed, receiver, trials)


def _parse_calibration(node) -> LinkCalibration:
    node = _mapping(node, "analysis.calibration")
    _check_keys(node, "analysis.calibration",
                {"kappa", "dark_noise_cps", "reference_rate_bps", "reference_distance_km",
                 "reference_port_loss_db", "reference_clock_hz", "note"})
    try:
        return LinkCalibration(
            kappa=_get(node, "kappa", "analysis.calibration", float),
            dark_noise_cps=_get(node, "dark_noise_cps", "analysis.calibration", float),
            reference_rate_bps=_get(node, "reference_rate_bps", "analysis.calibration", float),
            reference_distance_km=_get(node, "reference_distance_km",
                                       "analysis.calibration", float, 0.0),
            reference_port_loss_db=_get(node, "reference_port_loss_db",
                                        "analysis.calibration", float, 0.0),
            reference_clock_hz=_get(node, "reference_clock_hz",
                                    "analysis.calibration", float, 1e9),
            note=_get(node, "note", "analysis.calibration", str, ""),
        )
    except ValueError as exc:
        raise InvariantViolation(f"analysis.calibration: {exc}") from exc


def _parse_analysis(node) -> AnalysisOptions:
    node = _mapping(node, "analysis")
    _check_keys(node, "analysis",
                {"distances_km", "clocks_hz", "mu_values", "hbt_ports", "hbt_slots",
                 "qber", "qber_values", "pdl_db", "pdl_axis_deg", "grid_deg",
                 "pdl_formula", "qber_limit", "calibration"})
    defaults = AnalysisOptions()
    formula = _get(node, "pdl_formula", "analysis", str, defaults.pdl_formula)
    if formula not in ("corrected", "verbatim"):
        raise SchemaViolation(
            f"analysis.pdl_formula: must be 'corrected' or 'verbatim', got {formula!r}")
    ports_raw = _get(node, "hbt_ports", "analysis", list, None)
    if ports_raw is None:
        ports = defaults.hbt_ports
    else:
        if len(ports_raw) != 2 or not all(isinstance(p, int) and not isinstance(p, bool)
                                          for p in ports_raw):
            raise SchemaViolation("analysis.hbt_ports: expected two integer port indices")
        ports = tuple(ports_raw)
    grid = _get(node, "grid_deg", "analysis", float, defaults.grid_deg)
    if not (0 < grid <= 90):
        raise InvariantViolation(f"analysis.grid_deg must be in (0, 90], got {grid}")
    qber = _get(node, "qber", "analysis", float, defaults.qber)
    if not (0 <= qber < 0.5):
        raise InvariantViolation(f"analysis.qber must be in [0, 0.5), got {qber}")
    calibration = None
    if node.get("calibration") is not None:
        calibration = _parse_calibration(node["calibration"])
    return AnalysisOptions(
        distances_km=tuple(_float_list(node, "distances_km", "analysis",
                                       list(defaults.distances_km))),
        clocks_hz=tuple(_float_list(node, "clocks_hz", "analysis",
                                    list(defaults.clocks_hz))),
        mu_values=tuple(_float_list(node, "mu_values", "analysis",
                                    list(defaults.mu_values))),
        hbt_ports=ports,
        hbt_slots=_get(node, "hbt_slots", "analysis", int, defaults.hbt_slots),
        qber=qber,
        qber_values=tuple(_float_list(node, "qber_values", "analysis",
                                      list(defaults.qber_values))),
        pdl_db=_get(node, "pdl_db", "analysis", float, defaults.pdl_db),
        pdl_axis_deg=_get(node, "pdl_axis_deg", "analysis", float, defaults.pdl_axis_deg),
        grid_deg=grid,
        pdl_formula=formula,
        qber_limit=_get(node, "qber_limit", "analysis", float, None),
        calibration=calibration,
    )


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a parsed YAML document into a ScenarioConfig."""
    raw = _mapping(raw, "config")
    _check_keys(raw, "config", {"source", "detector", "topology", "run", "analysis"})
    source = _parse_source(raw.get("source"))
    cfg = ScenarioConfig(
        source=source,
        detector=_parse_detector(raw.get("detector")),
        topology=_parse_topology(raw.get("topology"), source.mu),
        run=_parse_run(raw.get("run")),
        analysis=_parse_analysis(raw.get("analysis")),
    )
    if cfg.run.receiver >= (cfg.topology.splitter.n_ports if cfg.topology.splitter else 1):
        raise InvariantViolation(
            f"run.receiver = {cfg.run.receiver} is out of range for this topology")
    if cfg.detector.window_s is not None and cfg.detector.window_s > 1.0 / cfg.source.clock_hz:
        raise InvariantViolation(
            f"detector.window_s = {cfg.detector.window_s} exceeds one clock period "
            f"({1.0 / cfg.source.clock_hz:.3e} s)")
    return cfg


def load_config(path: str) -> ScenarioConfig:
    """Read and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise MissingConfigFile(f"config file not found: {path}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaViolation(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(raw)


def default_scenario_yaml() -> str:
    """A fully commented scenario documenting every default value."""
    return """\
# Default scenario for the PON QKD simulator.  Every value below is the
# built-in default; delete any line to fall back to it.  Unknown keys are
# rejected.  Angles are degrees, times are seconds, rates are Hz / counts/s.

source:
  clock_hz: 1.0e+9            # pulse repetition rate
  mu: 0.1                    # mean photon number per pulse (see topology.mu_convention)
  jitter_fwhm_s: 60.0e-12    # source timing jitter, Gaussian FWHM
  polarization_leak: 0.0     # probability of emitting the orthogonal state
  launch_efficiency: 0.99    # scalar launch coupling (fundamental-mode fraction)
  angle_bit1_deg: -22.5      # encoding angle for bit 1
  angle_bit0_deg: 22.5       # encoding angle for bit 0 (45 deg separation)

detector:
  efficiency: 0.12           # photon detection efficiency
  dark_rate_cps: 0.0         # total dark-count rate of the receiver
  jitter_fwhm_s: 350.0e-12   # detector timing jitter, Gaussian FWHM
  window_s: null             # acceptance window; null = half a clock period
  dead_time_s: 0.0           # detector dead time (0 disables)

topology:
  kind: single_receiver      # single_receiver | pon_p2p | p2mp_pon
  mu_convention: per_arm     # per_arm (set after the splitter) | aggregate (at splitter input)
  mu: null                   # mean photon number at the convention's reference
                             # point; null inherits source.mu
  fiber_km: 0.0              # drop length(s); scalar fans out to every port
  feeder_km: 0.0             # feeder length (p2mp_pon only)
  atten_db_per_km: 2.2       # fiber attenuation
  splitter: null             # e.g. {n_ports: 8} for pon_p2p / p2mp_pon topologies
  # splitter.insertion_loss_db defaults to a documented quadratic ramp:
  #   1x8  -> mean 13.28 dB, port spread 1.1 dB
  #   1x32 -> mean 17.99 dB, port spread 9.52 dB
  #   else -> 10*log10(N) + 0.5 dB on every port
  # splitter.pdl_db / pdl_axis_deg attach a per-port PDL element (scalar or list).

run:
  n_slots: 1000000           # clock slots per trial
  seed: null                 # REQUIRED (or pass --seed) for Monte Carlo subcommands
  receiver: 0                # which port/receiver the simulate subcommand reports
  trials: 1                  # independent repetitions aggregated into one report

analysis:
  distances_km: [2, 4, 6, 8, 10]   # sweep-distance grid
  clocks_hz: [1.0e+9, 2.0e+9, 3.0e+9] # sweep-clock grid
  mu_values: [0.1, 0.5, 1, 2, 3]   # shared-bits grid
  hbt_ports: [0, 1]                # observed splitter ports for shared-bits
  hbt_slots: 10000000              # slots per shared-bits point
  qber: 0.0359                     # operating QBER for pdl-sweep
  qber_values: [0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045,
                0.05, 0.055, 0.06, 0.065, 0.07, 0.075, 0.08, 0.085, 0.09]
  pdl_db: 2.23                     # PDL under study for pdl-sweep / compensate
  pdl_axis_deg: 0.0                # orientation of that element's high-loss axis
  grid_deg: 1.0                    # orientation grid for pdl-sweep / compensate
  pdl_formula: corrected           # corrected | verbatim intensity law
  qber_limit: null                 # max-distance limit; null = zero-rate QBER at 45 deg
  calibration: null                # required by max-distance, e.g.:
  #   kappa: 0.01                  # rate-independent error floor
  #   dark_noise_cps: 400.0        # dark noise entering the sifted key
  #   reference_rate_bps: 10000.0  # sifted rate at the reference receiver
  #   reference_distance_km: 2.0
  #   reference_port_loss_db: 13.28
  #   reference_clock_hz: 1.0e+9
"""
