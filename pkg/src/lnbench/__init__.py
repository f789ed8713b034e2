"""Simulation and analysis toolkit for a cryogenic lithium-niobate photonic
bench: thin-film LN circuits, electro-optic modulators, waveguide-integrated
superconducting nanowire detectors and a time-tagging readout."""

from __future__ import annotations

__version__ = "0.1.0"
