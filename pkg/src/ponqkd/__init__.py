"""Desk-scale simulator and rate analysis for multi-user two-state QKD
over passive optical networks.

The package splits into polarization algebra (:mod:`ponqkd.polarization`),
network topology and propagation (:mod:`ponqkd.channel`), sources, detectors
and timing (:mod:`ponqkd.photonics`), the protocol and its rate formulas
(:mod:`ponqkd.protocol`), closed-form and coincidence analyses
(:mod:`ponqkd.analysis`), the end-to-end Monte Carlo driver
(:mod:`ponqkd.runner`) and the CLI (:mod:`ponqkd.cli`).
"""

from .analysis import (CompensationResult, PdlSweepPoint, PdlSweepResult,
                       SharedBitReport, chain_shared_rate, hbt_coincidences,
                       hbt_port_probs, max_distance, multiphoton_rate,
                       pa_shared_discount, pdl_compensate, pdl_penalty_sweep,
                       zero_rate_limit_45)
from .channel import (FIBER_ATTEN_DB_PER_KM, ChannelPath, FiberSpan,
                      SplitterModel, SplitterPort, Topology, TopologySpec,
                      build_topology, default_port_losses, effective_mu,
                      path_loss_db, propagate, route_splitter)
from .config import (AnalysisOptions, ConfigError, InvariantViolation,
                     MissingConfigFile, RunOptions, ScenarioConfig,
                     SchemaViolation, default_scenario_yaml, load_config,
                     parse_config)
from .photonics import (DetectionBatch, DetectorModel, PhotonBatch,
                        QberBreakdown, SourceModel, detect, emit_pulse,
                        emit_pulses, qber_components, temporal_filter)
from .polarization import (PdlElement, PolarizationState, pdl_attenuate,
                           pdl_intensity_factor, pdl_intensity_pair,
                           pdl_rotate_angle, pdl_separation, relative_angle,
                           relative_angle_deg)
from .protocol import (LinkCalibration, RateReport, SiftedKeyStats,
                       alice_sequence, bob_measure, eve_info, measure_batch,
                       net_rate, net_rate_factor, qber_extrapolate,
                       resolve_slots, sift, sifted_rate_pdl, zero_rate_qber)
from .runner import (LinkRunResult, delivered_states, derive_rng, run_link,
                     sweep_clock, sweep_distance)

__version__ = "0.1.0"
