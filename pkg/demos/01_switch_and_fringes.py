"""
Switching light between the two on-chip detectors
=================================================

Walk through the static circuit: coupler splits, the MZI transfer, the
fringe left by a small arm imbalance, and the extinction a 56:44 coupler
pair can reach.
"""

# %%
import numpy as np

from lnbench.optics import (
    CircuitSpec,
    CouplerSpec,
    MziSpec,
    bar_extinction_ratio,
    device_spectrum,
    mzi_output_powers,
    operating_wavelength,
    port_fractions,
)

# %%
# An ideal 50:50 MZI sends everything to the cross port at zero phase and
# to the bar port at pi.
ideal = MziSpec(CouplerSpec(0.5), CouplerSpec(0.5), insertion_loss_db=0.0)
phi = np.linspace(0, 2 * np.pi, 9)
bar, cross = mzi_output_powers(ideal, phi)
for p, b, c in zip(phi, bar, cross):
    print(f"phi = {p / np.pi:4.2f} pi   bar {b:.3f}   cross {c:.3f}")

# %%
# With slightly unbalanced couplers the bar port never fully empties,
# while the cross port still nulls at pi.
for s in (0.5, 0.52, 0.56, 0.6):
    er = bar_extinction_ratio(s)
    print(f"S = {s:.2f}: bar extinction {10 * np.log10(er):6.2f} dB")

# %%
# The full circuit adds grating couplers, the MZI insertion loss and the
# detector taps. Routing fractions at each port always sum to one.
circuit = CircuitSpec()
names = ["det1", "det2", "out1", "out2", "lost"]
for phase in (0.0, np.pi / 2, np.pi):
    lam = operating_wavelength(circuit, phase)
    fr = port_fractions(circuit, lam, 0.0)
    row = "  ".join(f"{n} {f:.4f}" for n, f in zip(names, fr))
    print(f"{lam:9.4f} nm  {row}  sum {fr.sum():.12f}")

# %%
# A 2 nm fringe rides on the grating-coupler envelope.
lam = np.linspace(1545, 1555, 11)
sp = device_spectrum(circuit, lam)
for x, y in zip(lam, sp["out1"]):
    print(f"{x:7.1f} nm  out1 {y:.5f}  " + "#" * int(400 * y))
