"""Seeded Monte Carlo of the full device: light source, routing, detectors, tagger.

Photons are routed quasi-statically: each one sees the modulator phase at
its arrival time.  By default only the detector-bound part of the photon
stream is materialized.  Routing of a Poisson stream is a thinning, so
drawing the detector-bound photons directly at the bounding rate
``rate * max(p_det1 + p_det2)`` and then splitting them with the
time-dependent conditional probabilities gives the same detector statistics
as routing every photon; ``mode="per_photon"`` routes every photon to one of
the five destinations and is kept as the reference path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .config import from_dict, to_jsonable
from .electrooptic import (
    Condition,
    DriftModel,
    DriveWaveform,
    EomSpec,
    effective_voltage_ps,
    phase_from_voltage,
)
from .errors import ConfigError, require
from .optics import DET1, DET2, PORT_NAMES, CircuitSpec, port_fractions
from .snspd import ClickStream, DetectorSpec, detection_efficiency, process_arrivals
from .timetag import make_tags, merge_streams

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299792458.0

TRIGGER_CHANNEL = 0
DET_CHANNELS = (1, 2)
LASER_CHANNEL = 3


def photon_energy_j(wavelength_nm: float) -> float:
    return PLANCK * LIGHT_SPEED / (wavelength_nm * 1e-9)


@dataclass(frozen=True)
class SourceSpec:
    """CW or pulsed attenuated laser.

    ``flux_photons_per_s`` (CW) and ``mean_photons_per_pulse`` (pulsed) are
    given at ``reference_plane``.  ``detector_input`` means the flux a
    detector receives when the MZI sends all light into its arm, which is
    how the calibration formula defines it.
    """

    kind: str = "cw"
    wavelength_nm: float = 1550.0
    flux_photons_per_s: float = 1e6
    reference_plane: str = "detector_input"
    rep_rate_hz: float = 40e6
    mean_photons_per_pulse: float = 0.025
    pulse_sigma_ps: float = 1.0

    def __post_init__(self):
        require(self.kind in ("cw", "pulsed"), "kind", "must be cw or pulsed")
        require(
            self.reference_plane in ("chip_input", "detector_input"),
            "reference_plane",
            "must be chip_input or detector_input",
        )
        require(self.wavelength_nm > 0, "wavelength_nm", "must be > 0")
        require(self.flux_photons_per_s > 0, "flux_photons_per_s", "must be > 0")
        require(self.rep_rate_hz > 0, "rep_rate_hz", "must be > 0")
        require(self.mean_photons_per_pulse >= 0, "mean_photons_per_pulse", "must be >= 0")
        require(self.pulse_sigma_ps >= 0, "pulse_sigma_ps", "must be >= 0")

    @property
    def period_ps(self) -> int:
        return int(round(1e12 / self.rep_rate_hz))

    @property
    def mean_rate(self) -> float:
        if self.kind == "cw":
            return self.flux_photons_per_s
        return self.mean_photons_per_pulse * self.rep_rate_hz


@dataclass(frozen=True)
class Scenario:
    circuit: CircuitSpec = field(default_factory=CircuitSpec)
    source: SourceSpec = field(default_factory=SourceSpec)
    drive: DriveWaveform = field(default_factory=DriveWaveform)
    drift: DriftModel = field(default_factory=DriftModel)
    eom: EomSpec = field(default_factory=EomSpec)
    condition: Condition | None = None
    detectors: tuple[DetectorSpec, DetectorSpec] = field(
        default_factory=lambda: (
            DetectorSpec.calibrated(14.0, 0.24, jitter_fwhm_ps=50.0),
            DetectorSpec.calibrated(12.5, 0.27, jitter_fwhm_ps=17.0),
        )
    )
    duration_s: float = 1.0
    seed: int = 0
    trigger_divider: int = 1
    laser_reference_delay_ps: int | None = None

    def __post_init__(self):
        require(self.duration_s > 0, "duration_s", "must be > 0")
        require(self.seed >= 0, "seed", "must be >= 0")
        require(self.trigger_divider >= 1, "trigger_divider", "must be >= 1")
        require(len(self.detectors) == 2, "detectors", "exactly two detectors")

    @property
    def resolved_condition(self) -> Condition:
        if self.condition is not None:
            return Condition(self.condition)
        return Condition.CRYO_DC if self.drive.kind == "dc" else Condition.CRYO_AC

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration_s * 1e12))

    def to_dict(self) -> dict:
        return to_jsonable(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return from_dict(cls, data)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=2, sort_keys=True) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON file; a report ``params.json`` is accepted too."""
    data = json.loads(Path(path).read_text())
    if "scenario" in data and isinstance(data["scenario"], dict):
        data = data["scenario"]
    return Scenario.from_dict(data)


# --- light source ------------------------------------------------------------


def _poisson_times(rate_per_ps: float, start_ps: int, end_ps: int, g: np.random.Generator) -> np.ndarray:
    span = end_ps - start_ps
    if span <= 0 or rate_per_ps <= 0:
        return np.empty(0, dtype=np.int64)
    mean = rate_per_ps * span
    pieces = []
    t = 0.0
    while True:
        n = int(mean + 6.0 * math.sqrt(mean) + 16) if not pieces else int(0.1 * mean + 16)
        gaps = g.exponential(1.0 / rate_per_ps, n)
        acc = t + np.cumsum(gaps)
        pieces.append(acc[acc < span])
        if acc[-1] >= span:
            break
        t = float(acc[-1])
    return start_ps + np.floor(np.concatenate(pieces)).astype(np.int64)


def _pulsed_times(src: SourceSpec, scale: float, start_ps: int, end_ps: int, g: np.random.Generator) -> np.ndarray:
    period = src.period_ps
    k0 = -(-start_ps // period)
    k1 = -(-end_ps // period)
    n_pulses = max(k1 - k0, 0)
    mu = src.mean_photons_per_pulse * scale
    if n_pulses == 0 or mu <= 0:
        return np.empty(0, dtype=np.int64)
    # Poisson per pulse == Poisson total scattered uniformly over the pulses
    n = g.poisson(mu * n_pulses)
    k = np.sort(g.integers(k0, k1, size=n))
    t = k * period
    if src.pulse_sigma_ps > 0:
        t = t + np.rint(g.normal(0.0, src.pulse_sigma_ps, n)).astype(np.int64)
        t.sort()
    return np.maximum(t, 0)


def _arrivals(src: SourceSpec, scale: float, start_ps: int, end_ps: int, g: np.random.Generator) -> np.ndarray:
    if src.kind == "cw":
        return _poisson_times(src.flux_photons_per_s * scale * 1e-12, start_ps, end_ps, g)
    return _pulsed_times(src, scale, start_ps, end_ps, g)


def generate_arrivals(src: SourceSpec, duration_s: float, seed: int) -> np.ndarray:
    """Sorted photon arrival times (integer ps) over ``[0, duration)``."""
    return _arrivals(src, 1.0, 0, int(round(duration_s * 1e12)), _rng.stream(seed, "arrivals"))


def pulse_times(src: SourceSpec, duration_s: float) -> np.ndarray:
    return np.arange(0, int(round(duration_s * 1e12)), src.period_ps, dtype=np.int64)


# --- routing -----------------------------------------------------------------


def chip_rate_scale(s: Scenario) -> float:
    """Factor converting the declared source flux to photons in the input fiber."""
    if s.source.reference_plane == "chip_input":
        return 1.0
    t = s.circuit.detector_reference_transmission(s.source.wavelength_nm)
    if not t > 0:
        raise ConfigError("source.wavelength_nm", "no transmission to the detectors at this wavelength")
    return 1.0 / t


def eo_phase_at(s: Scenario, t_ps) -> np.ndarray:
    v = effective_voltage_ps(s.drive, s.drift, s.eom, t_ps)
    return phase_from_voltage(s.eom, v, s.resolved_condition)


def routing_probabilities(s: Scenario, t_ps) -> np.ndarray:
    """Destination probabilities ``[det1, det2, out1, out2, lost]`` at ``t_ps``."""
    return port_fractions(s.circuit, s.source.wavelength_nm, eo_phase_at(s, t_ps))


def _sample_destinations(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    edges = np.cumsum(probs[..., :-1], axis=-1)
    return (u[..., None] >= edges).sum(axis=-1)


def route_photons(times_ps, s: Scenario, u: np.ndarray) -> np.ndarray:
    """Destination index per photon given uniform variates ``u`` (one per photon)."""
    return _sample_destinations(routing_probabilities(s, times_ps), np.asarray(u, dtype=float))


def route_photon(t_ps: int, s: Scenario, index: int = 0) -> str:
    """Destination name for one photon; the variate comes from the
    ``(seed, "route-single", index)`` stream so the result is reproducible."""
    u = _rng.stream(s.seed, "route-single", index).random(1)
    return PORT_NAMES[int(route_photons(np.array([t_ps]), s, u)[0])]


# --- scenario execution ------------------------------------------------------


@dataclass
class ScenarioResult:
    duration_ps: int
    tags: dict[int, np.ndarray]
    clicks: dict[int, ClickStream]
    photons_at_detector: dict[int, int]
    monitor_power_w: dict[str, float]
    mean_fractions: dict[str, float]

    def merged(self, channels=None) -> np.ndarray:
        chans = sorted(self.tags) if channels is None else [c for c in channels if c in self.tags]
        return merge_streams(*(self.tags[c] for c in chans))

    def counts(self) -> dict[int, int]:
        return {c: int(t.size) for c, t in self.tags.items()}


def mean_routing_fractions(s: Scenario, n_time: int = 2048, n_phase: int = 256) -> np.ndarray:
    """Time-averaged routing probabilities over the run."""
    T = s.duration_ps
    if s.drive.periodic:
        period = s.drive.period_ps
        cyc = (np.arange(n_phase) + 0.5) / n_phase * period
        if s.drift.mode == "cryo_stable" or s.drive.offset_volts == 0:
            t = cyc
        else:
            starts = np.floor((np.arange(n_time) + 0.5) / n_time * T / period) * period
            t = (starts[:, None] + cyc[None, :]).ravel()
    else:
        t = (np.arange(n_time) + 0.5) / n_time * T
    return routing_probabilities(s, np.rint(t).astype(np.int64)).mean(axis=0)


def run_scenario(s: Scenario, *, mode: str = "thinned", chunk_s: float = 1.0) -> ScenarioResult:
    """Execute a scenario and return all tag streams.

    Output is fully determined by the scenario (including its seed).
    """
    if mode not in ("thinned", "per_photon"):
        raise ValueError("mode must be 'thinned' or 'per_photon'")
    for i, d in enumerate(s.detectors):
        detection_efficiency(d, d.bias_current_ua)  # latching check up front
        if not d.operable:
            raise ConfigError(f"detectors[{i}].bias_current_ua", "detector not operable")

    T = s.duration_ps
    chunk = max(int(round(chunk_s * 1e12)), 1)
    scale = chip_rate_scale(s)
    bound = s.circuit.max_detector_fraction if mode == "thinned" else 1.0

    det_times: dict[int, list[np.ndarray]] = {1: [], 2: []}
    for c, start in enumerate(range(0, T, chunk)):
        end = min(start + chunk, T)
        t = _arrivals(s.source, scale * bound, start, end, _rng.stream(s.seed, mode, "arrivals", c))
        if t.size == 0:
            continue
        p = routing_probabilities(s, t)
        u = _rng.stream(s.seed, mode, "route", c).random(t.size)
        if mode == "thinned":
            to1 = u < p[:, DET1] / bound
            to2 = ~to1 & (u < (p[:, DET1] + p[:, DET2]) / bound)
        else:
            dest = _sample_destinations(p, u)
            to1, to2 = dest == DET1, dest == DET2
        det_times[1].append(t[to1])
        det_times[2].append(t[to2])

    tags: dict[int, np.ndarray] = {}
    clicks: dict[int, ClickStream] = {}
    photons: dict[int, int] = {}
    for ch, spec in zip(DET_CHANNELS, s.detectors):
        arr = np.concatenate(det_times[ch]) if det_times[ch] else np.empty(0, dtype=np.int64)
        # pulse-width offsets can straddle a chunk boundary
        arr.sort(kind="stable")
        photons[ch] = int(arr.size)
        clicks[ch] = process_arrivals(spec, arr, (0, T), s.seed, channel=ch)
        tags[ch] = make_tags(ch, clicks[ch].sorted_recorded())

    if s.drive.periodic:
        step = s.drive.period_ps * s.trigger_divider
        tags[TRIGGER_CHANNEL] = make_tags(TRIGGER_CHANNEL, np.arange(0, T, step, dtype=np.int64))
    if s.source.kind == "pulsed" and s.laser_reference_delay_ps is not None:
        ref = pulse_times(s.source, s.duration_s) + s.laser_reference_delay_ps
        tags[LASER_CHANNEL] = make_tags(LASER_CHANNEL, ref[ref < T])

    frac = mean_routing_fractions(s)
    rate = s.source.mean_rate * scale
    energy = photon_energy_j(s.source.wavelength_nm)
    monitor = {name: float(rate * frac[i] * energy) for i, name in ((2, "out1"), (3, "out2"))}
    return ScenarioResult(
        duration_ps=T,
        tags=tags,
        clicks=clicks,
        photons_at_detector=photons,
        monitor_power_w=monitor,
        mean_fractions={name: float(frac[i]) for i, name in enumerate(PORT_NAMES)},
    )


def expected_detector_rates(s: Scenario, t_ps) -> np.ndarray:
    """Mean click rate (cps) of both detectors at each time, dead time included.

    Uses the instantaneous photon rate; valid when the rate changes slowly
    on the dead-time scale or when only period averages are needed.
    """
    p = routing_probabilities(s, t_ps)
    rate = s.source.mean_rate * chip_rate_scale(s)
    out = []
    for k, spec in zip((DET1, DET2), s.detectors):
        r = rate * p[..., k] * detection_efficiency(spec, spec.bias_current_ua) + spec.dark_rate_cps
        out.append(r / (1.0 + r * spec.dead_time_ns * 1e-9))
    return np.stack(out, axis=-1)


def run_binned(s: Scenario, bin_s: float, *, samples_per_bin: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Fast path for long runs: Poisson counts per time bin for both detectors.

    The expected count of each bin is the bin-averaged click rate, so this is
    only valid for observables that do not resolve structure inside a bin.
    Returns ``(bin_start_s, counts)`` with ``counts`` of shape ``(n_bins, 2)``.
    """
    bin_ps = int(round(bin_s * 1e12))
    n_bins = s.duration_ps // bin_ps
    starts = np.arange(n_bins, dtype=np.int64) * bin_ps
    if n_bins == 0:
        return starts * 1e-12, np.zeros((0, 2), dtype=np.int64)
    if s.drive.periodic and s.drive.period_ps < bin_ps:
        offs = (np.arange(samples_per_bin) + 0.5) / samples_per_bin * s.drive.period_ps
    else:
        offs = (np.arange(samples_per_bin) + 0.5) / samples_per_bin * bin_ps
    t = starts[:, None] + np.rint(offs).astype(np.int64)[None, :]
    mean_rate = expected_detector_rates(s, t).mean(axis=1)
    g = _rng.stream(s.seed, "binned", bin_ps)
    return starts * 1e-12, g.poisson(mean_rate * bin_s)


def sweep_values(s: Scenario, key: str, values) -> list[Scenario]:
    """Scenarios with the dotted parameter ``key`` set to each value."""
    from .config import with_overrides

    base = s.to_dict()
    return [Scenario.from_dict(with_overrides(base, {key: v})) for v in values]
