"""Pockels phase shifter: voltage to phase, drive waveforms, bandwidth, DC drift."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import require


class Condition(str, Enum):
    """Operating condition selecting which measured half-wave voltage applies."""

    RT_AC = "rt_ac"
    CRYO_AC = "cryo_ac"
    CRYO_DC = "cryo_dc"


@dataclass(frozen=True)
class EomSpec:
    v_pi_rt_ac: float = 15.5
    v_pi_cryo_ac: float = 17.8
    v_pi_cryo_dc: float = 16.5
    electrode_length_mm: float = 1.7
    f3db_ghz: float = 4.0
    r33_pm_per_v: float = 30.0  # informational

    def __post_init__(self):
        for name in ("v_pi_rt_ac", "v_pi_cryo_ac", "v_pi_cryo_dc", "electrode_length_mm", "f3db_ghz"):
            require(getattr(self, name) > 0, name, "must be > 0")

    def v_pi(self, condition: Condition | str = Condition.CRYO_AC) -> float:
        return {
            Condition.RT_AC: self.v_pi_rt_ac,
            Condition.CRYO_AC: self.v_pi_cryo_ac,
            Condition.CRYO_DC: self.v_pi_cryo_dc,
        }[Condition(condition)]

    def v_pi_length_vcm(self, condition: Condition | str = Condition.CRYO_AC) -> float:
        return self.v_pi(condition) * self.electrode_length_mm / 10.0


def phase_from_voltage(eom: EomSpec, voltage, condition: Condition | str = Condition.CRYO_AC):
    return np.pi * np.asarray(voltage, dtype=float) / eom.v_pi(condition)


@dataclass(frozen=True)
class DriveWaveform:
    kind: str = "dc"
    vpp: float = 0.0
    frequency_hz: float = 1.0
    offset_volts: float = 0.0
    phase_offset_rad: float = 0.0

    def __post_init__(self):
        require(self.kind in ("dc", "ramp", "sine"), "kind", "must be one of dc, ramp, sine")
        require(self.vpp >= 0, "vpp", "must be >= 0")
        if self.kind != "dc":
            require(self.frequency_hz > 0, "frequency_hz", "must be > 0 for periodic drives")

    @property
    def periodic(self) -> bool:
        return self.kind != "dc"

    @property
    def period_ps(self) -> int:
        """Drive period rounded to the integer-picosecond timebase."""
        return int(round(1e12 / self.frequency_hz))


def _cycle_fraction(w: DriveWaveform, t_s):
    return np.mod(w.frequency_hz * t_s + w.phase_offset_rad / (2.0 * np.pi), 1.0)


def drive_voltage_at(w: DriveWaveform, t_s):
    """Instantaneous drive voltage at time(s) ``t_s`` in seconds.

    The ramp is a rising sawtooth spanning ``offset +- vpp/2``; its start is
    shifted by ``phase_offset_rad`` as a fraction of a cycle.
    """
    t = np.asarray(t_s, dtype=float)
    if w.kind == "dc":
        return np.full_like(t, w.offset_volts)
    if w.kind == "ramp":
        return w.offset_volts - w.vpp / 2.0 + w.vpp * _cycle_fraction(w, t)
    return w.offset_volts + 0.5 * w.vpp * np.sin(2.0 * np.pi * w.frequency_hz * t + w.phase_offset_rad)


def drive_voltage_at_ps(w: DriveWaveform, t_ps):
    """Like :func:`drive_voltage_at` for integer picosecond stamps.

    The time is reduced modulo the integer drive period before converting to
    float, so very long runs do not lose phase resolution.
    """
    t = np.asarray(t_ps, dtype=np.int64)
    if w.kind == "dc":
        return np.full(t.shape, float(w.offset_volts))
    period = w.period_ps
    frac = np.mod(t, period) / period
    if w.kind == "ramp":
        return w.offset_volts - w.vpp / 2.0 + w.vpp * np.mod(frac + w.phase_offset_rad / (2 * np.pi), 1.0)
    return w.offset_volts + 0.5 * w.vpp * np.sin(2.0 * np.pi * frac + w.phase_offset_rad)


def modulator_response(eom: EomSpec, f_hz):
    """First-order low-pass amplitude response |H(f)|."""
    f = np.asarray(f_hz, dtype=float)
    return 1.0 / np.sqrt(1.0 + (f / (eom.f3db_ghz * 1e9)) ** 2)


@dataclass(frozen=True)
class DriftModel:
    mode: str = "cryo_stable"
    tau_screen_s: float = 0.3

    def __post_init__(self):
        require(self.mode in ("cryo_stable", "rt_screened"), "mode", "must be cryo_stable or rt_screened")
        if self.mode == "rt_screened":
            require(self.tau_screen_s > 0, "tau_screen_s", "must be > 0 in rt_screened mode")


def apply_dc_drift(d: DriftModel, v_dc, t_since_applied_s):
    """Effective DC voltage after charge screening has acted for ``t`` seconds."""
    v = np.asarray(v_dc, dtype=float)
    if d.mode == "cryo_stable":
        return v * np.ones_like(np.asarray(t_since_applied_s, dtype=float))
    return v * np.exp(-np.asarray(t_since_applied_s, dtype=float) / d.tau_screen_s)


def effective_voltage_ps(w: DriveWaveform, d: DriftModel, eom: EomSpec, t_ps):
    """Voltage seen by the optical mode at ``t_ps``.

    The AC part is scaled by |H(f)| at the drive frequency; the DC offset is
    subject to the drift model, with the bias applied at t = 0.
    """
    t = np.asarray(t_ps, dtype=np.int64)
    dc = apply_dc_drift(d, w.offset_volts, t * 1e-12)
    if w.kind == "dc":
        return dc
    ac = drive_voltage_at_ps(w, t) - w.offset_volts
    return dc + ac * float(modulator_response(eom, w.frequency_hz))


def quadrature_visibility(vpp: float, v_pi: float, response: float = 1.0) -> tuple[float, float]:
    """Closed-form ``((max-min)/max, (max-min)/(max+min))`` of a cos^2 fringe
    driven sinusoidally about quadrature."""
    amp = math.pi * 0.5 * vpp * response / v_pi
    hi = math.cos((math.pi / 2 - amp) / 2) ** 2
    lo = math.cos((math.pi / 2 + amp) / 2) ** 2
    return (hi - lo) / hi, (hi - lo) / (hi + lo)
