"""Waveguide-integrated superconducting nanowire detector.

A photon reaching the detector's input waveguide is absorbed along the
nanowire and registers with the bias-dependent efficiency.  Dark counts are
a homogeneous Poisson process.  Dead time is non-paralyzable and is applied
to the merged photon/dark stream in true time; each accepted click then gets
a Gaussian timing offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng as _rng
from .errors import DetectorLatchedError, require

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def waveguide_absorption_prob(rate_db_per_um: float, length_um: float) -> float:
    if rate_db_per_um < 0 or length_um < 0:
        raise ValueError("absorption rate and length must be >= 0")
    return 1.0 - 10.0 ** (-rate_db_per_um * length_um / 10.0)


@dataclass(frozen=True)
class DetectorSpec:
    critical_current_ua: float = 12.5
    bias_current_ua: float = 0.85 * 12.5
    absorption_db_per_um: float = 0.35
    nanowire_length_um: float = 100.0
    internal_eff_max: float = 0.27
    sigmoid_midpoint_ua: float = 0.6 * 12.5
    sigmoid_width_ua: float = 0.05 * 12.5
    dark_rate_cps: float = 2.0
    decay_time_ns: float = 6.0
    dead_time_ns: float = 18.0
    jitter_fwhm_ps: float = 17.0
    rise_time_ps: float = 300.0

    def __post_init__(self):
        require(self.critical_current_ua > 0, "critical_current_ua", "must be > 0")
        require(self.bias_current_ua >= 0, "bias_current_ua", "must be >= 0")
        require(0 < self.internal_eff_max <= 1, "internal_eff_max", "must lie in (0, 1]")
        require(self.sigmoid_width_ua > 0, "sigmoid_width_ua", "must be > 0")
        require(self.dark_rate_cps >= 0, "dark_rate_cps", "must be >= 0")
        require(self.decay_time_ns > 0, "decay_time_ns", "must be > 0")
        require(self.dead_time_ns >= 0, "dead_time_ns", "must be >= 0")
        require(self.jitter_fwhm_ps >= 0, "jitter_fwhm_ps", "must be >= 0")
        require(self.rise_time_ps >= 0, "rise_time_ps", "must be >= 0")

    @property
    def absorption_prob(self) -> float:
        return waveguide_absorption_prob(self.absorption_db_per_um, self.nanowire_length_um)

    @property
    def operable(self) -> bool:
        return 0 < self.bias_current_ua < self.critical_current_ua

    @property
    def jitter_sigma_ps(self) -> float:
        return self.jitter_fwhm_ps / FWHM_PER_SIGMA

    @classmethod
    def calibrated(
        cls,
        critical_current_ua: float,
        ocde: float,
        *,
        bias_fraction: float = 0.85,
        midpoint_fraction: float = 0.6,
        width_fraction: float = 0.05,
        **kw,
    ) -> "DetectorSpec":
        """Build a detector whose efficiency at ``bias_fraction * Ic`` is ``ocde``."""
        ic = critical_current_ua
        spec = cls(
            critical_current_ua=ic,
            bias_current_ua=bias_fraction * ic,
            sigmoid_midpoint_ua=midpoint_fraction * ic,
            sigmoid_width_ua=width_fraction * ic,
            internal_eff_max=1.0,
            **kw,
        )
        eta = ocde / detection_efficiency(spec, spec.bias_current_ua)
        require(eta <= 1.0, "ocde", f"{ocde} exceeds the absorption-limited maximum")
        return replace(spec, internal_eff_max=eta)


def detection_efficiency(spec: DetectorSpec, bias_current_ua) -> np.ndarray | float:
    """On-chip detection efficiency versus bias current (sigmoid onset)."""
    ib = np.asarray(bias_current_ua, dtype=float)
    if np.any(ib >= spec.critical_current_ua):
        raise DetectorLatchedError(
            f"bias {np.max(ib):.4g} uA >= critical current {spec.critical_current_ua:.4g} uA"
        )
    if np.any(ib < 0):
        raise ValueError("bias current must be >= 0")
    onset = 1.0 / (1.0 + np.exp(-(ib - spec.sigmoid_midpoint_ua) / spec.sigmoid_width_ua))
    eff = spec.absorption_prob * spec.internal_eff_max * onset
    return float(eff) if eff.ndim == 0 else eff


@dataclass(frozen=True)
class ClickStream:
    """Accepted clicks of one detector channel, ordered by true time."""

    channel: int
    true_ps: np.ndarray
    recorded_ps: np.ndarray
    is_dark: np.ndarray

    def __len__(self) -> int:
        return len(self.true_ps)

    def sorted_recorded(self) -> np.ndarray:
        return np.sort(self.recorded_ps, kind="stable")


def non_paralyzable_mask(times: np.ndarray, dead_ps: int) -> np.ndarray:
    """Boolean mask of events surviving a non-paralyzable dead time.

    An event whose predecessor is at least ``dead_ps`` earlier is always
    accepted, so the sequential pass only visits events inside clusters.
    """
    n = len(times)
    keep = np.ones(n, dtype=bool)
    if n < 2 or dead_ps <= 0:
        return keep
    close = np.flatnonzero(np.diff(times) < dead_ps) + 1
    last = None
    t = times
    for i in close.tolist():
        if keep[i - 1]:
            last = t[i - 1]
        if t[i] - last < dead_ps:
            keep[i] = False
    return keep


def process_arrivals(
    spec: DetectorSpec,
    arrivals_ps: np.ndarray,
    window_ps: tuple[int, int],
    seed: int,
    channel: int = 1,
) -> ClickStream:
    """Turn photon arrival times at the detector into accepted clicks.

    ``arrivals_ps`` must be sorted; dark counts are drawn over ``window_ps``
    (start inclusive, end exclusive).  The result is a deterministic function
    of the inputs and ``seed``.
    """
    if not spec.operable:
        raise DetectorLatchedError(
            f"channel {channel}: bias {spec.bias_current_ua} uA not in (0, {spec.critical_current_ua}) uA"
        )
    arrivals = np.asarray(arrivals_ps, dtype=np.int64)
    if arrivals.size > 1 and np.any(np.diff(arrivals) < 0):
        raise ValueError("arrival times must be sorted ascending")
    start, end = int(window_ps[0]), int(window_ps[1])
    if end < start:
        raise ValueError("window end precedes start")

    eff = detection_efficiency(spec, spec.bias_current_ua)
    hit = _rng.stream(seed, "snspd", channel, "efficiency").random(arrivals.size) < eff
    photons = arrivals[hit]

    g = _rng.stream(seed, "snspd", channel, "dark")
    n_dark = g.poisson(spec.dark_rate_cps * (end - start) * 1e-12)
    dark = np.sort(start + np.floor(g.random(n_dark) * (end - start)).astype(np.int64))

    true = np.concatenate([photons, dark])
    is_dark = np.concatenate([np.zeros(photons.size, bool), np.ones(dark.size, bool)])
    order = np.argsort(true, kind="stable")
    true, is_dark = true[order], is_dark[order]

    keep = non_paralyzable_mask(true, int(round(spec.dead_time_ns * 1e3)))
    true, is_dark = true[keep], is_dark[keep]

    jit = _rng.stream(seed, "snspd", channel, "jitter").normal(0.0, spec.jitter_sigma_ps, true.size)
    # tags are non-negative; clicks within a few sigma of t = 0 are clamped
    recorded = np.maximum(true + np.rint(jit).astype(np.int64), 0)
    return ClickStream(channel, true, recorded, is_dark)


def expected_click_rate(spec: DetectorSpec, photon_rate_cps: float) -> float:
    """Mean accepted click rate for Poisson light, including dead-time loss."""
    r = photon_rate_cps * detection_efficiency(spec, spec.bias_current_ua) + spec.dark_rate_cps
    return r / (1.0 + r * spec.dead_time_ns * 1e-9)


def output_pulse_trace(
    click_ps: int,
    sample_period_ps: float,
    *,
    decay_time_ns: float = 6.0,
    rise_time_ps: float = 300.0,
    span_ns: float = 40.0,
    start_ps: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized readout voltage of one click sampled on a regular grid.

    Linear rise from the click time to unit amplitude over ``rise_time_ps``,
    then exponential decay.  Returns ``(times_ps, volts)``.
    """
    if not sample_period_ps > 0:
        raise ValueError("sample period must be > 0")
    t0 = click_ps - 0.1 * span_ns * 1e3 if start_ps is None else start_ps
    t = t0 + sample_period_ps * np.arange(int(math.ceil(span_ns * 1e3 / sample_period_ps)) + 1)
    dt = t - click_ps
    v = np.zeros_like(t)
    if rise_time_ps > 0:
        rising = (dt >= 0) & (dt < rise_time_ps)
        v[rising] = dt[rising] / rise_time_ps
    after = dt >= rise_time_ps
    v[after] = np.exp(-(dt[after] - rise_time_ps) / (decay_time_ns * 1e3))
    return t, v


def decay_time_from_trace(times_ps: np.ndarray, volts: np.ndarray) -> float:
    """Time (ns) from the trace maximum to the first sample at or below 1/e of it."""
    i = int(np.argmax(volts))
    below = np.flatnonzero(volts[i:] <= volts[i] / math.e)
    if below.size == 0:
        raise ValueError("trace never decays to 1/e of its maximum")
    return (times_ps[i + below[0]] - times_ps[i]) * 1e-3


def compute_ocde(count_rate_cps: float, dark_rate_cps: float, flux_photons_per_s: float) -> float:
    if flux_photons_per_s == 0:
        raise ZeroDivisionError("photon flux is zero; efficiency undefined")
    if flux_photons_per_s < 0:
        raise ValueError("photon flux must be positive")
    if count_rate_cps < dark_rate_cps:
        raise ValueError("count rate below dark rate gives a negative efficiency")
    return (count_rate_cps - dark_rate_cps) / flux_photons_per_s
