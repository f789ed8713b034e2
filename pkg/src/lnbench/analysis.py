"""Curve fits and metric extraction on simulated (or measured) data.

All nonlinear fits go through :func:`least_squares_fit`, a damped
Levenberg-Marquardt solve (MINPACK via ``scipy.optimize.least_squares``)
with analytic Jacobians where they are cheap.  Parameter uncertainties come
from the linearized covariance at the optimum, scaled by the reduced
residual variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

from .electrooptic import DriveWaveform, drive_voltage_at
from .errors import FitError
from .optics import infer_intrinsic_q
from .photon_mc import LIGHT_SPEED, PLANCK
from .snspd import FWHM_PER_SIGMA
from .timetag import Histogram


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    sigmas: dict[str, float]
    residual_rms: float
    converged: bool
    derived: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.sigmas = {k: abs(v) for k, v in self.sigmas.items()}

    @property
    def reliable(self) -> bool:
        return self.converged

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": {**self.params, **self.derived},
            "sigmas": self.sigmas,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def least_squares_fit(
    residuals: Callable[[np.ndarray], np.ndarray],
    p0,
    *,
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    x_scale=None,
) -> tuple[np.ndarray, np.ndarray, float, bool]:
    """Minimize ``sum(residuals(p)**2)``; returns ``(p, cov, rms, converged)``."""
    p0 = np.asarray(p0, dtype=float)
    sol = least_squares(
        residuals,
        p0,
        jac=jac if jac is not None else "2-point",
        method="lm",
        x_scale=x_scale if x_scale is not None else "jac",
        ftol=1e-15,
        xtol=1e-15,
        gtol=1e-15,
        max_nfev=20000,
    )
    r = sol.fun
    n, k = r.size, p0.size
    dof = max(n - k, 1)
    s2 = float(r @ r) / dof
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.nan)
    return sol.x, cov, math.sqrt(float(r @ r) / n), bool(sol.success)


def _noise_sigma(y: np.ndarray) -> float:
    d = np.diff(y)
    return float(1.4826 * np.median(np.abs(d - np.median(d))) / math.sqrt(2.0))


# --- resonances --------------------------------------------------------------


def _lorentz_dip(p, x):
    c, w, depth, base = p
    u = 2.0 * (x - c) / w
    lor = 1.0 / (1.0 + u * u)
    return base * (1.0 - depth * lor), u, lor


def fit_lorentzian_resonance(wavelength_nm, transmission, *, critical_threshold: float = 0.05) -> FitResult:
    """Fit one all-pass resonance dip.

    Params: ``center_nm``, ``fwhm_nm``, ``depth`` (1 - normalized minimum),
    ``baseline``.  Derived: ``loaded_q``, ``min_transmission`` and, for a
    critically coupled dip, ``intrinsic_q``; otherwise ``intrinsic_q`` is NaN
    and both coupling solutions are reported.
    """
    lam = np.asarray(wavelength_nm, dtype=float)
    y = np.asarray(transmission, dtype=float)
    if lam.size < 20:
        raise FitError("need at least 20 samples")
    order = np.argsort(lam)
    lam, y = lam[order], y[order]
    ref = float(lam[np.argmin(y)])
    x = lam - ref

    edge = max(lam.size // 10, 2)
    base0 = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    noise = _noise_sigma(y)
    dip = base0 - float(y.min())
    if not base0 > 0 or dip <= max(5.0 * noise, 1e-9 * abs(base0)):
        raise FitError("no resonance dip above the noise floor")
    half = base0 - dip / 2.0
    below = np.flatnonzero(y <= half)
    w0 = max(float(x[below[-1]] - x[below[0]]), float(np.min(np.diff(lam))))

    def res(p):
        return _lorentz_dip(p, x)[0] - y

    def jac(p):
        c, w, depth, base = p
        _, u, lor = _lorentz_dip(p, x)
        return np.column_stack(
            [
                -4.0 * base * depth * u * lor**2 / w,
                -2.0 * base * depth * u * u * lor**2 / w,
                -base * lor,
                1.0 - depth * lor,
            ]
        )

    p, cov, rms, ok = least_squares_fit(
        res, [0.0, w0, dip / base0, base0], jac=jac, x_scale=[w0, w0, 1.0, base0]
    )
    c, w, depth, base = p
    w = abs(w)
    span = float(lam[-1] - lam[0])
    if span < 3.0 * w:
        raise FitError(f"sampled span {span:.3g} nm covers fewer than 3 linewidths")
    center = ref + c
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    q_loaded = center / w
    t_min = 1.0 - depth
    inference = infer_intrinsic_q(q_loaded, t_min, critical_threshold)
    q_sigma = q_loaded * math.hypot(sig[1] / w, sig[0] / center)
    return FitResult(
        model="lorentzian_dip",
        params={"center_nm": center, "fwhm_nm": w, "depth": depth, "baseline": base},
        sigmas={"center_nm": sig[0], "fwhm_nm": sig[1], "depth": sig[2], "baseline": sig[3], "loaded_q": q_sigma},
        residual_rms=rms,
        converged=ok,
        derived={
            "loaded_q": q_loaded,
            "min_transmission": t_min,
            "intrinsic_q": inference.q_intrinsic,
            "intrinsic_q_under": inference.q_intrinsic_under,
            "intrinsic_q_over": inference.q_intrinsic_over,
            "critical": float(inference.regime == "critical"),
        },
    )


# --- timing histograms -------------------------------------------------------


def fit_gaussian_peak(hist: Histogram) -> FitResult:
    """Gaussian plus flat background fitted to a timing histogram.

    With fewer than five populated bins the peak is unresolved: the result
    carries ``resolution_limited = 1`` and the FWHM is the populated span,
    an upper bound.
    """
    y = hist.counts.astype(float)
    if y.sum() <= 0:
        raise FitError("empty histogram")
    x = hist.bin_centers_ps
    populated = np.flatnonzero(y > 0)
    if populated.size < 5:
        span = float((populated[-1] - populated[0] + 1) * hist.bin_width_ps)
        center = float(np.average(x, weights=y))
        return FitResult(
            model="gaussian",
            params={"center_ps": center, "sigma_ps": span / FWHM_PER_SIGMA, "fwhm_ps": span},
            sigmas={},
            residual_rms=0.0,
            converged=True,
            derived={"resolution_limited": 1.0},
        )

    k = int(np.argmax(y))
    bg0 = float(np.median(y))
    peak = y[k] - bg0
    core = y - bg0 > peak / 2
    sigma0 = max(np.count_nonzero(core) * hist.bin_width_ps / FWHM_PER_SIGMA, hist.bin_width_ps / 2)
    wts = 1.0 / np.sqrt(np.maximum(y, 1.0))

    def model(p):
        a, c, s, b = p
        z = (x - c) / s
        g = np.exp(-0.5 * z * z)
        return a * g + b, z, g

    def res(p):
        return (model(p)[0] - y) * wts

    def jac(p):
        a, c, s, b = p
        _, z, g = model(p)
        return np.column_stack([g, a * g * z / s, a * g * z * z / s, np.ones_like(x)]) * wts[:, None]

    p, cov, rms, ok = least_squares_fit(
        res, [peak, x[k], sigma0, bg0], jac=jac, x_scale=[max(peak, 1.0), sigma0, sigma0, max(peak, 1.0)]
    )
    a, c, s, b = p
    s = abs(s)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        model="gaussian",
        params={"center_ps": c, "sigma_ps": s, "fwhm_ps": FWHM_PER_SIGMA * s, "amplitude": a, "background": b},
        sigmas={
            "center_ps": sig[1],
            "sigma_ps": sig[2],
            "fwhm_ps": FWHM_PER_SIGMA * sig[2],
            "amplitude": sig[0],
            "background": sig[3],
        },
        residual_rms=rms,
        converged=ok,
        derived={"resolution_limited": float(FWHM_PER_SIGMA * s <= hist.bin_width_ps)},
    )


# --- modulator characterization ----------------------------------------------


def _ramp_voltages(hist: Histogram, ramp: DriveWaveform) -> tuple[np.ndarray, np.ndarray]:
    period = hist.fold_period_ps if hist.fold_period_ps is not None else hist.counts.size * hist.bin_width_ps
    starts = hist.bin_starts_ps.astype(float)
    ends = np.minimum(starts + hist.bin_width_ps, hist.origin_ps + period)
    v0 = drive_voltage_at(ramp, starts * 1e-12)
    v1 = drive_voltage_at(ramp, (ends - 1e-3) * 1e-12)
    ok = v1 >= v0  # drop the bin holding the sawtooth reset
    return 0.5 * (v0 + v1), ok


def _cos_basis(v, v_pi):
    arg = np.pi * v / v_pi
    return np.column_stack([np.ones_like(v), np.cos(arg), np.sin(arg)])


def extract_vpi_from_ramp(hist: Histogram, ramp: DriveWaveform) -> FitResult:
    """Half-wave voltage from a count histogram folded on a ramp drive.

    Bin times are mapped to the instantaneous ramp voltage and the counts are
    fitted with ``A (1 + cos(pi V / Vpi + phi0)) + B``.
    """
    if ramp.kind != "ramp":
        raise ValueError("extract_vpi_from_ramp needs a ramp drive")
    v, ok = _ramp_voltages(hist, ramp)
    y = hist.counts.astype(float)
    v, y = v[ok], y[ok]
    if y.sum() <= 0:
        raise FitError("empty histogram")

    # coarse scan: the model is linear in (B + A, A cos phi0, -A sin phi0) for fixed Vpi
    grid = np.geomspace(ramp.vpp / 8.0, 4.0 * ramp.vpp, 600)
    best = None
    for vp in grid:
        basis = _cos_basis(v, vp)
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        r = float(np.sum((basis @ coef - y) ** 2))
        if best is None or r < best[0]:
            best = (r, vp, coef)
    _, vp0, (c0, c1, c2) = best
    a0 = math.hypot(c1, c2)
    phi0 = math.atan2(-c2, c1)

    def model(p):
        a, vp, ph, b = p
        return a * (1.0 + np.cos(np.pi * v / vp + ph)) + b

    def jac(p):
        a, vp, ph, b = p
        arg = np.pi * v / vp + ph
        s = np.sin(arg)
        return np.column_stack([1.0 + np.cos(arg), a * s * np.pi * v / vp**2, -a * s, np.ones_like(v)])

    scale = max(float(np.abs(y).max()), 1.0)
    p, cov, rms, conv = least_squares_fit(
        lambda p: model(p) - y, [a0, vp0, phi0, c0 - a0], jac=jac, x_scale=[scale, vp0, 1.0, scale]
    )
    a, vp, ph, b = p
    if a < 0:
        a, ph = -a, ph + math.pi
    vp = abs(vp)
    if ramp.vpp < vp:
        raise FitError(
            f"ramp of {ramp.vpp} Vpp spans less than half a fringe for Vpi = {vp:.3g} V; Vpi is not identifiable"
        )
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        model="ramp_cosine",
        params={"v_pi": vp, "amplitude": a, "phase0": math.remainder(ph, 2 * math.pi), "background": b},
        sigmas={"v_pi": sig[1], "amplitude": sig[0], "phase0": sig[2], "background": sig[3]},
        residual_rms=rms,
        converged=conv,
    )


def _sinusoid_lstsq(x, y, period):
    arg = 2.0 * np.pi * x / period
    basis = np.column_stack([np.ones_like(x), np.cos(arg), np.sin(arg)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return coef, basis


def modulation_visibility(hist: Histogram) -> tuple[float, float]:
    """Visibility of a folded histogram from its fitted first harmonic.

    Returns ``((max - min) / max, (max - min) / (max + min))``; the first is
    the headline convention used for the modulation measurements.
    """
    d = fit_sinusoid(hist).derived
    return d["v_over_max"], d["v_standard"]


def fit_sinusoid(hist: Histogram) -> FitResult:
    """Mean plus one harmonic at the fold period (linear least squares)."""
    y = hist.counts.astype(float)
    if y.size == 0:
        raise FitError("empty histogram")
    period = hist.fold_period_ps or hist.counts.size * hist.bin_width_ps
    x = hist.bin_centers_ps
    (m, c, s), basis = _sinusoid_lstsq(x, y, period)
    amp = math.hypot(c, s)
    hi, lo = m + amp, max(m - amp, 0.0)
    v_over_max = (hi - lo) / hi if hi > 0 else 0.0
    v_std = (hi - lo) / (hi + lo) if hi + lo > 0 else 0.0
    r = basis @ np.array([m, c, s]) - y
    dof = max(y.size - 3, 1)
    cov = np.linalg.pinv(basis.T @ basis) * float(r @ r) / dof
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        model="sinusoid",
        params={"mean": m, "amplitude": amp, "phase": math.atan2(-s, c), "period_ps": float(period)},
        sigmas={"mean": sig[0], "amplitude": float(math.hypot(sig[1], sig[2]) / math.sqrt(2))},
        residual_rms=float(math.sqrt(r @ r / y.size)),
        converged=True,
        derived={"max": hi, "min": lo, "v_over_max": v_over_max, "v_standard": v_std},
    )


# --- spectra -----------------------------------------------------------------


def _gauss(x, a, c, w):
    return a * np.exp(-0.5 * ((x - c) / w) ** 2)


def fit_gaussian_spectrum(wavelength_nm, power) -> FitResult:
    lam = np.asarray(wavelength_nm, dtype=float)
    y = np.asarray(power, dtype=float)
    k = int(np.argmax(y))
    a0 = float(y[k])
    w0 = max(float(np.sqrt(np.sum(y * (lam - lam[k]) ** 2) / np.sum(y))), float(np.ptp(lam)) / 50)
    ref = float(lam[k])
    p, cov, rms, ok = least_squares_fit(
        lambda p: _gauss(lam, p[0], ref + p[1], p[2]) - y, [a0, 0.0, w0], x_scale=[a0, w0, w0]
    )
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        model="gaussian_envelope",
        params={"peak": p[0], "center_nm": ref + p[1], "sigma_nm": abs(p[2])},
        sigmas={"peak": sig[0], "center_nm": sig[1], "sigma_nm": sig[2]},
        residual_rms=rms,
        converged=ok,
    )


def _fringe_guess(lam, ratio):
    """Fringe constant K (nm) for ``cos(2 pi K / lambda)`` from a resampled FFT,
    refined by a linear least-squares scan."""
    nu = 1.0 / lam
    order = np.argsort(nu)
    grid = np.linspace(nu[order][0], nu[order][-1], 4 * lam.size)
    r = np.interp(grid, nu[order], ratio[order])
    r = r - r.mean()
    spec = np.abs(np.fft.rfft(r * np.hanning(r.size)))
    freqs = np.fft.rfftfreq(r.size, d=grid[1] - grid[0])
    spec[0] = 0
    k0 = freqs[int(np.argmax(spec))]
    dk = freqs[1]
    best = None
    for kk in np.linspace(k0 - 2 * dk, k0 + 2 * dk, 401):
        arg = 2 * np.pi * kk * (nu - nu.mean())
        basis = np.column_stack([np.ones_like(nu), np.cos(arg), np.sin(arg)])
        coef, *_ = np.linalg.lstsq(basis, ratio, rcond=None)
        rr = float(np.sum((basis @ coef - ratio) ** 2))
        if best is None or rr < best[0]:
            best = (rr, kk, coef)
    return best[1], best[2]


def fit_envelope_sinusoid_spectrum(ref_wavelength_nm, ref_power, mzi_wavelength_nm, mzi_power) -> FitResult:
    """Insertion loss from a reference spectrum and a fringed device spectrum.

    The reference is fitted with a Gaussian; the device output with a
    Gaussian times ``(1 + v cos(2 pi K / lambda + psi)) / (1 + v)``, whose
    fringe maxima trace the Gaussian.  The loss is the dB ratio of the two
    Gaussian peaks.
    """
    ref = fit_gaussian_spectrum(ref_wavelength_nm, ref_power)
    lam = np.asarray(mzi_wavelength_nm, dtype=float)
    y = np.asarray(mzi_power, dtype=float)
    lo, hi = float(lam.min()), float(lam.max())
    if not lo <= ref.params["center_nm"] <= hi:
        raise FitError("reference envelope peak lies outside the sampled range")

    env0 = _gauss(lam, 1.0, ref.params["center_nm"], ref.params["sigma_nm"])
    k0, (c0, c1, c2) = _fringe_guess(lam, y / np.maximum(env0, 1e-12 * env0.max()))
    nu_mid = float(np.mean(1.0 / lam))
    amp = math.hypot(c1, c2)
    v0 = min(max(amp / c0, 1e-6), 0.999) if c0 > 0 else 0.5
    psi0 = math.atan2(-c2, c1)
    a0 = c0 + amp

    def model(p):
        a, c, w, v, k, psi = p
        fringe = (1.0 + v * np.cos(2 * np.pi * k * (1.0 / lam - nu_mid) + psi)) / (1.0 + v)
        return _gauss(lam, a, ref.params["center_nm"] + c, w) * fringe

    sw = ref.params["sigma_nm"]
    p, cov, rms, ok = least_squares_fit(
        lambda p: model(p) - y,
        [a0, 0.0, sw, v0, k0, psi0],
        x_scale=[a0, sw, sw, 0.1, max(abs(k0) * 1e-4, 1e-3), 0.1],
    )
    a, c, w, v, k, psi = p
    center = ref.params["center_nm"] + c
    if not lo <= center <= hi:
        raise FitError("device envelope peak lies outside the sampled range")
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    loss_db = 10.0 * math.log10(ref.params["peak"] / a)
    loss_sigma = 10.0 / math.log(10.0) * math.hypot(ref.sigmas["peak"] / ref.params["peak"], sig[0] / a)
    return FitResult(
        model="gaussian_times_sinusoid",
        params={
            "peak": a,
            "center_nm": center,
            "sigma_nm": abs(w),
            "visibility": v,
            "fringe_constant_nm": k,
            "fringe_phase": psi,
        },
        sigmas={"peak": sig[0], "center_nm": sig[1], "sigma_nm": sig[2], "insertion_loss_db": loss_sigma},
        residual_rms=rms,
        converged=ok and ref.converged,
        derived={"insertion_loss_db": loss_db, "reference_peak": ref.params["peak"]},
    )


# --- calibration and ratios --------------------------------------------------


@dataclass(frozen=True)
class CalibrationInputs:
    p_in_w: float
    p_out_w: float
    transmission: float
    split: float
    wavelength_nm: float = 1550.0

    def __post_init__(self):
        if not self.p_in_w > 0:
            raise ValueError("p_in_w must be > 0")
        if self.p_out_w < 0:
            raise ValueError("p_out_w must be >= 0")
        if not 0 < self.transmission <= 1:
            raise ValueError("transmission must lie in (0, 1]")
        if not 0 < self.split <= 1:
            raise ValueError("split must lie in (0, 1]")
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be > 0")


def calibrate_photon_flux(c: CalibrationInputs) -> tuple[float, float]:
    """Photon flux at the detector input and the per-grating-coupler efficiency.

    Assumes equal input and output grating efficiencies and that ``p_out_w``
    was measured with all MZI light routed to the measured output.
    """
    if c.split >= 1.0:
        raise ZeroDivisionError("split = 1 leaves no light at the output port")
    through = 1.0 - c.split
    photons_per_joule = c.wavelength_nm * 1e-9 / (PLANCK * LIGHT_SPEED)
    flux = photons_per_joule * math.sqrt(c.p_in_w * c.p_out_w * c.transmission / through) * c.split
    eta = math.sqrt(c.p_out_w / (c.p_in_w * c.transmission * through))
    return flux, eta


def forward_calibration_powers(p_in_w: float, eta: float, transmission: float, split: float) -> tuple[float, float]:
    """``(p_out_w, detector_power_w)`` of the calibration path for known parts."""
    on_chip = p_in_w * eta * transmission
    return on_chip * (1.0 - split) * eta, on_chip * split


@dataclass(frozen=True)
class Extinction:
    db: float
    lower_bound: bool

    def __str__(self) -> str:
        return f"> {self.db:.1f} dB" if self.lower_bound else f"{self.db:.2f} dB"


def extinction_db(p_on: float, p_off: float, floor: float | None = None) -> Extinction:
    """On/off ratio in dB.

    When ``p_off`` is at or below ``floor`` (e.g. the expected dark counts
    in the integration window) the floor is used and the value is flagged as
    a lower bound.
    """
    if not p_on > 0:
        raise ValueError("p_on must be > 0")
    if floor is not None and floor > 0 and p_off <= floor:
        return Extinction(10.0 * math.log10(p_on / floor), True)
    if p_off <= 0:
        return Extinction(math.inf, True)
    return Extinction(10.0 * math.log10(p_on / p_off), False)
