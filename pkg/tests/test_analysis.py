from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lnbench.analysis import (
    CalibrationInputs,
    FitResult,
    calibrate_photon_flux,
    extinction_db,
    extract_vpi_from_ramp,
    fit_envelope_sinusoid_spectrum,
    fit_gaussian_peak,
    fit_lorentzian_resonance,
    fit_sinusoid,
    forward_calibration_powers,
    modulation_visibility,
)
from lnbench.electrooptic import DriveWaveform, drive_voltage_at
from lnbench.errors import FitError
from lnbench.optics import ResonatorSpec, resonator_transmission
from lnbench.photon_mc import photon_energy_j
from lnbench.snspd import FWHM_PER_SIGMA
from lnbench.timetag import Histogram, fold_histogram

RAMP = DriveWaveform("ramp", 20.0, 1e3)


def resonance(qi, qc, n=601, span=12.0):
    r = ResonatorSpec(intrinsic_q=qi, coupling_q=qc)
    lam = 1550.0 + np.linspace(-0.5, 0.5, n) * span * r.linewidth_nm
    return lam, resonator_transmission(r, lam)


def ramp_histogram(v_pi, total=None, phase0=0.3, bins=1000, background=0.0):
    period = RAMP.period_ps
    width = period // bins
    starts = np.arange(bins) * width
    v = drive_voltage_at(RAMP, (starts + width / 2) * 1e-12)
    y = 0.5 * (1 + np.cos(np.pi * v / v_pi + phase0)) + background
    if total is None:
        counts = np.rint(y * 1e9)
    else:
        counts = np.random.default_rng(1).poisson(y / y.sum() * total)
    return Histogram(width, 0, counts, period)


class TestLorentzian:
    @pytest.mark.parametrize("ql,qi", [(5.2e5, 1.04e6), (6.4e5, 1.28e6)])
    def test_critical_examples(self, ql, qi):
        lam, t = resonance(qi, qi)
        f = fit_lorentzian_resonance(lam, t)
        assert f.derived["loaded_q"] == pytest.approx(ql, rel=1e-6)
        assert f.derived["intrinsic_q"] == pytest.approx(qi, rel=1e-6)
        assert f.params["center_nm"] == pytest.approx(1550.0, abs=1e-9)
        assert f.derived["critical"] == 1.0

    def test_noiseless_undercoupled_recovery(self):
        lam, t = resonance(1e6, 3e6)
        f = fit_lorentzian_resonance(lam, t)
        r = ResonatorSpec(intrinsic_q=1e6, coupling_q=3e6)
        assert f.derived["loaded_q"] == pytest.approx(r.loaded_q, rel=1e-6)
        assert f.derived["min_transmission"] == pytest.approx(r.min_transmission, rel=1e-6)
        assert math.isnan(f.derived["intrinsic_q"])
        assert f.derived["intrinsic_q_under"] == pytest.approx(1e6, rel=1e-6)

    def test_noisy(self):
        lam, t = resonance(1.04e6, 1.04e6)
        y = np.random.default_rng(0).poisson(t * 1e4) / 1e4
        f = fit_lorentzian_resonance(lam, y)
        assert f.derived["loaded_q"] == pytest.approx(5.2e5, rel=0.01)
        assert f.sigmas["fwhm_nm"] > 0

    def test_flat_spectrum(self):
        lam = np.linspace(1549.9, 1550.1, 200)
        flat = 1 + np.random.default_rng(2).normal(0, 1e-3, lam.size)
        with pytest.raises(FitError, match="dip"):
            fit_lorentzian_resonance(lam, flat)

    def test_too_few_samples(self):
        with pytest.raises(FitError):
            fit_lorentzian_resonance(np.linspace(0, 1, 10), np.ones(10))

    def test_narrow_span(self):
        lam, t = resonance(1.04e6, 1.04e6, span=1.5)
        with pytest.raises(FitError, match="linewidth"):
            fit_lorentzian_resonance(lam, t)


class TestGaussianPeak:
    def test_sigma_ten(self):
        x = np.arange(-100, 101)
        counts = np.rint(1e5 * np.exp(-0.5 * (x / 10.0) ** 2))
        f = fit_gaussian_peak(Histogram(1, -100, counts))
        assert f.params["fwhm_ps"] == pytest.approx(23.548, abs=0.01)

    def test_fwhm_identity_exact(self):
        counts = np.random.default_rng(4).poisson(50 * np.exp(-0.5 * ((np.arange(200) - 90) / 7.2) ** 2) + 1)
        f = fit_gaussian_peak(Histogram(1, 0, counts))
        assert f.params["fwhm_ps"] == FWHM_PER_SIGMA * f.params["sigma_ps"]

    @settings(max_examples=10, deadline=None)
    @given(st.floats(3, 30), st.integers(0, 1000))
    def test_recovers_within_5pct(self, sigma, seed):
        g = np.random.default_rng(seed)
        h = np.histogram(g.normal(0, sigma, 100_000), bins=np.arange(-200, 201))[0]
        f = fit_gaussian_peak(Histogram(1, -200, h))
        assert f.params["fwhm_ps"] == pytest.approx(FWHM_PER_SIGMA * sigma, rel=0.05)

    def test_single_bin(self):
        f = fit_gaussian_peak(Histogram(10, 0, [0, 0, 500, 0]))
        assert f.derived["resolution_limited"] == 1.0
        assert f.params["fwhm_ps"] <= 10

    def test_empty(self):
        with pytest.raises(FitError, match="empty"):
            fit_gaussian_peak(Histogram(1, 0, np.zeros(10)))


class TestRamp:
    @pytest.mark.parametrize("v_pi", [17.8, 15.5])
    def test_noiseless_exact(self, v_pi):
        f = extract_vpi_from_ramp(ramp_histogram(v_pi), RAMP)
        assert f.params["v_pi"] == pytest.approx(v_pi, rel=1e-9)
        assert f.params["phase0"] == pytest.approx(0.3, abs=1e-8)

    def test_shot_noise(self):
        f = extract_vpi_from_ramp(ramp_histogram(17.8, total=1e6, background=0.01), RAMP)
        assert f.params["v_pi"] == pytest.approx(17.8, abs=0.4)
        assert 0 < f.sigmas["v_pi"] < 0.4

    def test_scale_invariance(self):
        h = ramp_histogram(17.8, total=1e6)
        a = extract_vpi_from_ramp(h, RAMP).params["v_pi"]
        b = extract_vpi_from_ramp(Histogram(h.bin_width_ps, 0, h.counts * 7, h.fold_period_ps), RAMP).params["v_pi"]
        assert b == pytest.approx(a, rel=1e-9)

    def test_less_than_half_fringe(self):
        small = DriveWaveform("ramp", 5.0, 1e3)
        period = small.period_ps
        starts = np.arange(500) * (period // 500)
        v = drive_voltage_at(small, (starts + period // 1000) * 1e-12)
        counts = np.rint(1e6 * 0.5 * (1 + np.cos(np.pi * v / 17.8 + 0.3)))
        with pytest.raises(FitError, match="identifiable"):
            extract_vpi_from_ramp(Histogram(period // 500, 0, counts, period), small)

    def test_requires_ramp(self):
        with pytest.raises(ValueError):
            extract_vpi_from_ramp(ramp_histogram(17.8), DriveWaveform("sine", 5, 1e3))


class TestVisibility:
    @staticmethod
    def sine_hist(amp_rad, bins=20, period=1000):
        t = (np.arange(bins) + 0.5) * period / bins
        p = 0.5 * (1 + np.cos(np.pi / 2 + amp_rad * np.sin(2 * np.pi * t / period)))
        return Histogram(period // bins, 0, np.rint(p * 1e8), period)

    def test_quadrature_closed_form(self):
        vp, vs = modulation_visibility(self.sine_hist(np.pi * 2.5 / 17.8))
        assert vp == pytest.approx(0.5985, abs=0.02)
        assert vs == pytest.approx(0.427, abs=0.02)

    def test_full_swing(self):
        h = Histogram(100, 0, np.rint(1e6 * (1 + np.cos(2 * np.pi * (np.arange(10) + 0.5) / 10))), 1000)
        assert modulation_visibility(h) == pytest.approx((1.0, 1.0), abs=1e-9)

    def test_flat(self):
        assert modulation_visibility(Histogram(10, 0, np.full(10, 100), 100)) == pytest.approx((0.0, 0.0), abs=1e-12)

    @given(st.lists(st.integers(0, 10**6), min_size=4, max_size=60))
    def test_bounds(self, counts):
        if sum(counts) == 0:
            return
        vp, vs = modulation_visibility(Histogram(1, 0, counts, len(counts)))
        assert 0 <= vs <= vp + 1e-12 <= 1 + 1e-12

    def test_fit_sinusoid_report(self):
        f = fit_sinusoid(self.sine_hist(1.0))
        assert f.converged and f.derived["max"] > f.derived["min"]


class TestEnvelope:
    @staticmethod
    def spectra(loss_db, counts=None, seed=0):
        lam = np.linspace(1500, 1600, 2001)
        env = np.exp(-0.5 * ((lam - 1552.0) / 18.0) ** 2)
        fringe = 0.5 * (1 + np.cos(2 * np.pi * 1550.0**2 / 2.0 / lam + 0.4))
        ref = env
        dev = 10 ** (-loss_db / 10) * env * fringe
        if counts is not None:
            g = np.random.default_rng(seed)
            ref = g.poisson(ref / ref.max() * counts) / counts * ref.max()
            dev = g.poisson(dev / ref.max() * counts) / counts * ref.max()
        return lam, ref, dev

    def test_noiseless(self):
        lam, ref, dev = self.spectra(0.82)
        f = fit_envelope_sinusoid_spectrum(lam, ref, lam, dev)
        assert f.derived["insertion_loss_db"] == pytest.approx(0.82, abs=1e-6)
        assert f.params["fringe_constant_nm"] == pytest.approx(1550.0**2 / 2.0, rel=1e-6)

    def test_identical(self):
        lam, ref, _ = self.spectra(0.0)
        f = fit_envelope_sinusoid_spectrum(lam, ref, lam, ref)
        # the fringe phase and period are unidentified here, so only the peak is checked
        assert f.derived["insertion_loss_db"] == pytest.approx(0.0, abs=1e-4)

    def test_shot_noise(self):
        lam, ref, dev = self.spectra(0.5, counts=1e5)
        f = fit_envelope_sinusoid_spectrum(lam, ref, lam, dev)
        assert f.derived["insertion_loss_db"] == pytest.approx(0.5, abs=0.1)

    def test_peak_outside_range(self):
        lam = np.linspace(1500, 1520, 400)
        env = np.exp(-0.5 * ((lam - 1550.0) / 10.0) ** 2)
        with pytest.raises(FitError, match="outside"):
            fit_envelope_sinusoid_spectrum(lam, env, lam, env)


class TestCalibration:
    def test_forward_inverse_example(self):
        eta, transmission, split = 10 ** -0.45, 10 ** -0.082, 0.5
        e = photon_energy_j(1550.0)
        p_in = 1e6 * e / (eta * transmission * split)
        p_out, p_det = forward_calibration_powers(p_in, eta, transmission, split)
        assert p_det / e == pytest.approx(1e6, rel=1e-12)
        flux, eta_hat = calibrate_photon_flux(CalibrationInputs(p_in, p_out, transmission, split))
        assert flux == pytest.approx(1e6, rel=1e-9)
        assert eta_hat == pytest.approx(eta, rel=1e-12)

    def test_zero_output(self):
        assert calibrate_photon_flux(CalibrationInputs(1e-6, 0.0, 0.8, 0.5))[0] == 0.0

    def test_homogeneity(self):
        a = calibrate_photon_flux(CalibrationInputs(1e-6, 1e-8, 0.8, 0.5))[0]
        b = calibrate_photon_flux(CalibrationInputs(2e-6, 2e-8, 0.8, 0.5))[0]
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_split_one(self):
        with pytest.raises(ZeroDivisionError):
            calibrate_photon_flux(CalibrationInputs(1e-6, 1e-8, 0.8, 1.0))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            CalibrationInputs(1e-6, 1e-8, 1.5, 0.5)

    @given(st.floats(0.01, 1.0), st.floats(0.05, 1.0), st.floats(0.01, 0.99), st.floats(1e-9, 1e-3), st.floats(500, 2000))
    def test_exact_inverse(self, eta, transmission, split, p_in, lam):
        p_out, p_det = forward_calibration_powers(p_in, eta, transmission, split)
        flux, eta_hat = calibrate_photon_flux(CalibrationInputs(p_in, p_out, transmission, split, lam))
        assert flux == pytest.approx(p_det / photon_energy_j(lam), rel=1e-9)
        assert eta_hat == pytest.approx(eta, rel=1e-9)


class TestExtinction:
    def test_ratio(self):
        e = extinction_db(1000.0, 1.0)
        assert e.db == pytest.approx(30.0) and not e.lower_bound

    def test_s056_model(self):
        assert extinction_db(1.0, 0.0144).db == pytest.approx(18.416, abs=1e-3)

    def test_floor(self):
        floor = 2.0 * 0.1
        e = extinction_db(30_000.0, 0.0, floor=floor)
        assert e.lower_bound and str(e).startswith("> ")
        assert e.db == pytest.approx(10 * math.log10(30_000 / 0.2))
        assert extinction_db(1.0, 0.0).db == math.inf

    def test_nonpositive_on(self):
        with pytest.raises(ValueError):
            extinction_db(0.0, 1.0)


def test_fit_result_json():
    f = FitResult("m", {"a": 1.0}, {"a": -0.5}, 0.1, False, {"b": 2.0})
    assert f.sigmas["a"] == 0.5 and not f.reliable
    d = json.loads(f.to_json())
    assert set(d) == {"model", "params", "sigmas", "residual_rms", "converged"}
    assert d["params"] == {"a": 1.0, "b": 2.0}


def test_fold_then_fit_pipeline():
    g = np.random.default_rng(8)
    period = 10**6
    t = np.sort(g.integers(0, 10**11, 200_000))
    keep = g.random(t.size) < 0.5 * (1 + 0.6 * np.sin(2 * np.pi * t / period))
    h = fold_histogram(t[keep], period, 0, period // 50)
    vp, _ = modulation_visibility(h)
    assert vp == pytest.approx(2 * 0.6 / 1.6, abs=0.03)
