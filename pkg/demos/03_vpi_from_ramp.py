"""
Half-wave voltage from a ramp
=============================

Drive the modulator with a 20 Vpp, 1 kHz ramp, fold the detector tags on
the function-generator trigger and fit the fringe to get V_pi. The same
run is available as ``bench run fig4ab``.
"""

# %%
import numpy as np

from lnbench.analysis import extract_vpi_from_ramp
from lnbench.electrooptic import DriveWaveform
from lnbench.harness import figure_scenario
from lnbench.photon_mc import run_scenario
from lnbench.timetag import fold_histogram

scenario = figure_scenario("fig4ab", seed=0, overrides={"duration_s": 2.0})
print("drive:", scenario.drive)
print(f"operating wavelength {scenario.source.wavelength_nm:.4f} nm")

# %%
result = run_scenario(scenario)
print({ch: tags.size for ch, tags in result.tags.items()})

# %%
ramp: DriveWaveform = scenario.drive
for ch in (1, 2):
    hist = fold_histogram(result.tags[ch], ramp.period_ps, 0, 10**6)
    fit = extract_vpi_from_ramp(hist, ramp)
    print(f"Det{ch}: V_pi = {fit.params['v_pi']:.3f} +- {fit.sigmas['v_pi']:.3f} V")

# %%
# A coarse text rendering of the Det2 fold: one row per 50 us.
hist = fold_histogram(result.tags[2], ramp.period_ps, 0, 5 * 10**7)
peak = hist.counts.max()
for start, c in zip(hist.bin_starts_ps, hist.counts):
    v = ramp.offset_volts - ramp.vpp / 2 + ramp.vpp * start / ramp.period_ps
    print(f"{v:6.1f} V  " + "#" * int(60 * c / peak))
print("mean counts per bin", np.mean(hist.counts))
