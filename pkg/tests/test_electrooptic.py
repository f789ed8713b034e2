from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lnbench.electrooptic import (
    Condition,
    DriftModel,
    DriveWaveform,
    EomSpec,
    apply_dc_drift,
    drive_voltage_at,
    drive_voltage_at_ps,
    effective_voltage_ps,
    modulator_response,
    phase_from_voltage,
    quadrature_visibility,
)
from lnbench.errors import ConfigError

EOM = EomSpec()
volts = st.floats(-100, 100)


def test_phase_examples():
    assert float(phase_from_voltage(EOM, 17.8)) == pytest.approx(math.pi)
    assert float(phase_from_voltage(EOM, 0.0)) == 0.0
    assert float(phase_from_voltage(EOM, 20.0)) / math.pi == pytest.approx(1.1236, abs=1e-4)


def test_conditions_select_v_pi():
    assert EOM.v_pi(Condition.RT_AC) == 15.5
    assert EOM.v_pi("cryo_dc") == 16.5
    assert float(phase_from_voltage(EOM, 16.5, "cryo_dc")) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        EOM.v_pi("warm")


@pytest.mark.parametrize("cond", list(Condition))
def test_v_pi_length_in_range(cond):
    assert 2.5 <= EOM.v_pi_length_vcm(cond) <= 3.1


@given(volts, volts)
def test_phase_is_linear(v1, v2):
    assert float(phase_from_voltage(EOM, v1 + v2)) == pytest.approx(
        float(phase_from_voltage(EOM, v1) + phase_from_voltage(EOM, v2)), abs=1e-9
    )


def test_waveform_examples():
    ramp = DriveWaveform("ramp", 20.0, 1e3)
    assert float(drive_voltage_at(ramp, 0.25e-3)) == pytest.approx(-5.0)
    assert float(drive_voltage_at(ramp, 0.0)) == pytest.approx(-10.0)
    sine = DriveWaveform("sine", 5.0, 1e8)
    assert float(drive_voltage_at(sine, 1 / (4 * 1e8))) == pytest.approx(2.5)
    dc = DriveWaveform("dc", offset_volts=16.5)
    assert np.all(drive_voltage_at(dc, np.linspace(0, 43200, 7)) == 16.5)


def test_waveform_validation():
    with pytest.raises(ConfigError, match="kind"):
        DriveWaveform("square")
    with pytest.raises(ConfigError, match="frequency_hz"):
        DriveWaveform("sine", 1.0, 0.0)
    with pytest.raises(ConfigError, match="vpp"):
        DriveWaveform("ramp", -1.0, 1e3)


@given(st.sampled_from(["ramp", "sine"]), st.floats(0.1, 30), st.floats(1e2, 1e9), st.floats(0, 1), st.integers(-50, 50))
def test_periodic(kind, vpp, f, frac, n):
    w = DriveWaveform(kind, vpp, f)
    t = frac / f
    if kind == "ramp" and min(frac, 1 - frac) < 1e-6:
        return  # sawtooth reset
    assert float(drive_voltage_at(w, t + n / f)) == pytest.approx(float(drive_voltage_at(w, t)), abs=1e-12 * 1e6 * vpp)


@given(st.sampled_from(["ramp", "sine"]), st.integers(0, 10**16), st.integers(0, 1000))
def test_integer_clock_is_exactly_periodic(kind, t, n):
    w = DriveWaveform(kind, 20.0, 1e3)
    assert float(drive_voltage_at_ps(w, t + n * w.period_ps)) == float(drive_voltage_at_ps(w, t))


def test_integer_clock_matches_float_clock():
    w = DriveWaveform("sine", 5.0, 1e9)
    t = np.arange(0, 5000, 7)
    assert np.allclose(drive_voltage_at_ps(w, t), drive_voltage_at(w, t * 1e-12), atol=1e-9)


def test_response():
    assert float(modulator_response(EOM, 4e9)) == pytest.approx(1 / math.sqrt(2))
    assert float(modulator_response(EOM, 0.0)) == 1.0
    assert float(modulator_response(EOM, 1e9)) == pytest.approx(0.970, abs=5e-4)
    h = modulator_response(EOM, np.linspace(0, 50e9, 1001))
    assert np.all(np.diff(h) < 0)


def test_drift():
    cryo = DriftModel()
    assert float(apply_dc_drift(cryo, 16.5, 12 * 3600)) == 16.5
    rt = DriftModel("rt_screened", 0.3)
    assert float(apply_dc_drift(rt, 10.0, 0.0)) == 10.0
    assert float(apply_dc_drift(rt, 10.0, 1.0)) / 10.0 == pytest.approx(0.0357, abs=1e-4)
    with pytest.raises(ConfigError, match="mode"):
        DriftModel("warm")


@given(volts, st.floats(0, 1e6))
def test_cryo_drift_is_identity(v, t):
    assert float(apply_dc_drift(DriftModel(), v, t)) == v


def test_effective_voltage_scales_ac_part():
    w = DriveWaveform("sine", 5.0, 4e9, offset_volts=1.0)
    t = np.arange(0, 250, 1)
    v = effective_voltage_ps(w, DriftModel(), EOM, t)
    assert v.max() - 1.0 == pytest.approx(2.5 / math.sqrt(2), rel=1e-3)


def test_quadrature_visibility_oracle():
    assert quadrature_visibility(5.0, 17.8) == pytest.approx((0.598514, 0.427056), abs=1e-6)
    assert quadrature_visibility(5.0, 17.8, 1 / math.sqrt(1.0625)) == pytest.approx((0.586680, 0.415107), abs=1e-6)
    vp, vs = quadrature_visibility(5.0, 17.8)
    t = np.linspace(0, 1, 200001)
    p = (1 + np.cos(np.pi / 2 + np.pi * 2.5 / 17.8 * np.sin(2 * np.pi * t))) / 2
    assert vp == pytest.approx((p.max() - p.min()) / p.max(), abs=1e-9)
    assert vs == pytest.approx((p.max() - p.min()) / (p.max() + p.min()), abs=1e-9)
