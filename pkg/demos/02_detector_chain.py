"""
From photons to time tags
=========================

Feed a calibrated photon flux into the two detector models, recover the
on-chip detection efficiency from the count rates and look at the timing
jitter with a start-stop histogram against a pulsed laser.
"""

# %%
import numpy as np

from lnbench.analysis import fit_gaussian_peak
from lnbench.photon_mc import SourceSpec, generate_arrivals
from lnbench.snspd import DetectorSpec, compute_ocde, detection_efficiency, process_arrivals
from lnbench.timetag import count_rate, start_stop_histogram

det1 = DetectorSpec.calibrated(14.0, 0.24, jitter_fwhm_ps=50.0)
det2 = DetectorSpec.calibrated(12.5, 0.27, jitter_fwhm_ps=17.0)

# %%
# Efficiency rises with bias and saturates well below the critical current.
for frac in (0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95):
    e1 = detection_efficiency(det1, frac * det1.critical_current_ua)
    e2 = detection_efficiency(det2, frac * det2.critical_current_ua)
    print(f"I_b = {frac:.2f} I_c   Det1 {e1:.4f}   Det2 {e2:.4f}")

# %%
# One second at 1e6 photons/s into each detector.
duration_ps = 10**12
arrivals = generate_arrivals(SourceSpec(flux_photons_per_s=1e6), 1.0, seed=0)
for ch, det in ((1, det1), (2, det2)):
    clicks = process_arrivals(det, arrivals, (0, duration_ps), seed=0, channel=ch)
    rate = count_rate(clicks.recorded_ps, 0, duration_ps)
    print(f"Det{ch}: {rate:,.0f} cps -> OCDE {compute_ocde(rate, det.dark_rate_cps, 1e6):.4f}")

# %%
# Pulsed laser at 40 MHz, ~1 photon per 40 pulses. Each click starts the
# clock, the next laser reference stops it.
src = SourceSpec(kind="pulsed", rep_rate_hz=40e6, mean_photons_per_pulse=0.025, pulse_sigma_ps=1.0)
arr = generate_arrivals(src, 0.1, seed=1)
clicks = process_arrivals(det2, arr, (0, 10**11), seed=1, channel=2)
laser_ref = np.arange(0, 10**11, src.period_ps) + 5000
hist = start_stop_histogram(clicks.sorted_recorded(), laser_ref, 1, 10_000)
fit = fit_gaussian_peak(hist)
print(f"{hist.total} start-stop events, jitter FWHM {fit.params['fwhm_ps']:.2f} +- {fit.sigmas['fwhm_ps']:.2f} ps")
