"""Passive optical circuit: couplers, the MZI, grating couplers and resonators.

Conventions
-----------
* A directional coupler is described by its **cross-port** power fraction
  ``split`` (S).  Its field matrix is ``[[t, i k], [i k, t]]`` with
  ``t = sqrt(1 - S)`` and ``k = sqrt(S)``, followed by a uniform excess-loss
  factor.  The measured "~56 %" coupler ratio is interpreted as S = 0.56;
  the extinction figures are symmetric under ``S -> 1 - S`` so either reading
  gives the same numbers.
* The electro-optic phase is applied to the bar arm of the MZI.
* The MZI bar output feeds the Det1/Out1 arm, the cross output feeds the
  Det2/Out2 arm.  Each arm has an observation tap whose cross fraction goes
  to the on-chip detector and whose through fraction goes to an output
  grating coupler.
* Wavelengths are in nm, resonator lengths in um, losses in dB/cm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, require

DEFAULT_CENTER_NM = 1550.0
DEFAULT_GROUP_INDEX = 2.13
DEFAULT_FRINGE_PERIOD_NM = 2.0
# Residual path imbalance giving a 2 nm fringe period at 1550 nm.
DEFAULT_OPD_UM = DEFAULT_CENTER_NM**2 / (DEFAULT_GROUP_INDEX * DEFAULT_FRINGE_PERIOD_NM) * 1e-3

DB_PER_NEPER = 10.0 * math.log10(math.e)

# Indices into the routing vector returned by :func:`port_fractions`.
DET1, DET2, OUT1, OUT2, LOST = range(5)
PORT_NAMES = ("det1", "det2", "out1", "out2", "lost")


def db_to_linear(db):
    """Power ratio for a gain in dB (negative dB is attenuation)."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class PortAmplitudes:
    a_bar: complex
    a_cross: complex

    @property
    def powers(self) -> tuple[float, float]:
        return abs(self.a_bar) ** 2, abs(self.a_cross) ** 2

    @property
    def total_power(self) -> float:
        return sum(self.powers)


@dataclass(frozen=True)
class CouplerSpec:
    split: float = 0.5
    excess_loss_db: float = 0.0

    def __post_init__(self):
        require(0.0 <= self.split <= 1.0, "split", f"must lie in [0, 1], got {self.split}")
        require(self.excess_loss_db >= 0.0, "excess_loss_db", "must be >= 0")

    @property
    def power_transmission(self) -> float:
        return float(db_to_linear(-self.excess_loss_db))


def coupler_matrix(c: CouplerSpec) -> np.ndarray:
    t = math.sqrt(1.0 - c.split)
    k = math.sqrt(c.split)
    amp = 10.0 ** (-c.excess_loss_db / 20.0)
    return amp * np.array([[t, 1j * k], [1j * k, t]])


def coupler_transfer(c: CouplerSpec, inp: PortAmplitudes) -> PortAmplitudes:
    out = coupler_matrix(c) @ np.array([inp.a_bar, inp.a_cross], dtype=complex)
    return PortAmplitudes(complex(out[0]), complex(out[1]))


@dataclass(frozen=True)
class WaveguideSegment:
    length_cm: float
    loss_db_per_cm: float
    kind: str = "straight"
    bend_radius_um: float | None = None

    def __post_init__(self):
        require(self.length_cm > 0, "length_cm", "must be > 0")
        require(self.loss_db_per_cm >= 0, "loss_db_per_cm", "must be >= 0")
        require(self.kind in ("straight", "bend"), "kind", "must be 'straight' or 'bend'")
        if self.kind == "bend":
            require(
                self.bend_radius_um is not None and self.bend_radius_um > 0,
                "bend_radius_um",
                "bends need a positive radius",
            )

    @property
    def power_transmission(self) -> float:
        return float(db_to_linear(-self.loss_db_per_cm * self.length_cm))


@dataclass(frozen=True)
class GratingCouplerSpec:
    """Fiber-to-chip grating coupler with a Gaussian spectral envelope."""

    peak_efficiency_db: float = -4.5
    center_wavelength_nm: float = DEFAULT_CENTER_NM
    fwhm_bandwidth_nm: float = 40.0

    def __post_init__(self):
        require(self.peak_efficiency_db <= 0, "peak_efficiency_db", "must be <= 0")
        require(self.fwhm_bandwidth_nm > 0, "fwhm_bandwidth_nm", "must be > 0")

    def efficiency(self, wavelength_nm):
        d = np.asarray(wavelength_nm, dtype=float) - self.center_wavelength_nm
        env = np.exp(-4.0 * math.log(2.0) * d**2 / self.fwhm_bandwidth_nm**2)
        return db_to_linear(self.peak_efficiency_db) * env


@dataclass(frozen=True)
class MziSpec:
    coupler_1: CouplerSpec = field(default_factory=lambda: CouplerSpec(0.56))
    coupler_2: CouplerSpec = field(default_factory=lambda: CouplerSpec(0.56))
    insertion_loss_db: float = 0.82
    residual_opd_um: float = DEFAULT_OPD_UM

    def __post_init__(self):
        require(self.insertion_loss_db >= 0, "insertion_loss_db", "must be >= 0")

    @property
    def transmission(self) -> float:
        return float(db_to_linear(-self.insertion_loss_db))


def mzi_output_powers(m: MziSpec, phi):
    """Bar and cross output powers for unit input into the bar port.

    ``phi`` is the phase on the bar arm (radians, scalar or array).  Coupler
    excess losses are folded in together with the MZI insertion loss.
    """
    t1, k1 = 1.0 - m.coupler_1.split, m.coupler_1.split
    t2, k2 = 1.0 - m.coupler_2.split, m.coupler_2.split
    scale = m.transmission * m.coupler_1.power_transmission * m.coupler_2.power_transmission
    e = np.exp(1j * np.asarray(phi, dtype=float))
    p_bar = np.abs(math.sqrt(t1 * t2) * e - math.sqrt(k1 * k2)) ** 2 * scale
    p_cross = np.abs(math.sqrt(t1 * k2) * e + math.sqrt(k1 * t2)) ** 2 * scale
    return p_bar, p_cross


def bar_extinction_ratio(split: float) -> float:
    """max/min of the bar output over phase for two identical couplers
    (infinite for a perfect 50:50 split)."""
    d = (1.0 - 2.0 * split) ** 2
    return math.inf if d == 0 else 1.0 / d


@dataclass(frozen=True)
class CircuitSpec:
    """Input grating coupler -> MZI -> two observation taps -> Det/Out ports."""

    grating: GratingCouplerSpec = field(default_factory=GratingCouplerSpec)
    mzi: MziSpec = field(default_factory=MziSpec)
    tap_1: CouplerSpec = field(default_factory=lambda: CouplerSpec(0.5))
    tap_2: CouplerSpec = field(default_factory=lambda: CouplerSpec(0.5))
    group_index: float = DEFAULT_GROUP_INDEX

    def __post_init__(self):
        require(self.group_index > 0, "group_index", "must be > 0")

    def fringe_phase(self, wavelength_nm):
        """Static MZI phase from the residual path imbalance."""
        lam = np.asarray(wavelength_nm, dtype=float)
        return 2.0 * np.pi * self.group_index * self.mzi.residual_opd_um * 1e3 / lam

    @property
    def max_detector_fraction(self) -> float:
        """Upper bound of (Det1 + Det2) routing probability at peak coupling."""
        g = float(db_to_linear(self.grating.peak_efficiency_db))
        s = max(
            self.tap_1.split * self.tap_1.power_transmission,
            self.tap_2.split * self.tap_2.power_transmission,
        )
        m = self.mzi
        return g * m.transmission * m.coupler_1.power_transmission * m.coupler_2.power_transmission * s

    def detector_reference_transmission(self, wavelength_nm: float) -> float:
        """Chip-input to Det1 transmission with all MZI light in the Det1 arm.

        This is the path assumed by the flux-calibration formula; a flux
        declared at the detector plane is converted with it.
        """
        m = self.mzi
        return float(
            self.grating.efficiency(wavelength_nm)
            * m.transmission
            * m.coupler_1.power_transmission
            * m.coupler_2.power_transmission
            * self.tap_1.split
            * self.tap_1.power_transmission
        )


def port_fractions(circuit: CircuitSpec, wavelength_nm, eo_phase):
    """Routing probabilities ``[det1, det2, out1, out2, lost]`` (last axis).

    The probabilities refer to a photon in the input fiber.  Out ports
    include the output grating coupler; the detectors sit on chip.
    """
    wl, ph = np.broadcast_arrays(
        np.asarray(wavelength_nm, dtype=float), np.asarray(eo_phase, dtype=float)
    )
    g = circuit.grating.efficiency(wl)
    p_bar, p_cross = mzi_output_powers(circuit.mzi, ph + circuit.fringe_phase(wl))
    a1 = g * p_bar * circuit.tap_1.power_transmission
    a2 = g * p_cross * circuit.tap_2.power_transmission
    out = np.empty(wl.shape + (5,))
    out[..., DET1] = a1 * circuit.tap_1.split
    out[..., DET2] = a2 * circuit.tap_2.split
    out[..., OUT1] = a1 * (1.0 - circuit.tap_1.split) * g
    out[..., OUT2] = a2 * (1.0 - circuit.tap_2.split) * g
    out[..., LOST] = 1.0 - out[..., :LOST].sum(axis=-1)
    return out


def device_spectrum(circuit: CircuitSpec, wavelength_nm, voltage: float = 0.0, *, v_pi: float = 16.5):
    """Transmission into each port for a wavelength sweep at a fixed voltage."""
    phase = math.pi * voltage / v_pi
    fr = port_fractions(circuit, wavelength_nm, phase)
    return {name: fr[..., i] for i, name in enumerate(PORT_NAMES)}


def operating_wavelength(circuit: CircuitSpec, target_phase: float, near_nm: float | None = None) -> float:
    """Wavelength closest to ``near_nm`` whose static fringe phase equals
    ``target_phase`` modulo 2 pi."""
    near = circuit.grating.center_wavelength_nm if near_nm is None else near_nm
    m = circuit.group_index * circuit.mzi.residual_opd_um * 1e3
    frac = (target_phase / (2.0 * math.pi)) % 1.0
    order = round(m / near - frac)
    candidates = [m / (k + frac) for k in (order - 1, order, order + 1) if k + frac > 0]
    return min(candidates, key=lambda lam: abs(lam - near))


# --- resonators --------------------------------------------------------------


@dataclass(frozen=True)
class ResonatorSpec:
    kind: str = "racetrack"
    bend_radius_um: float = 70.0
    straight_arm_um: float = 500.0
    group_index: float = DEFAULT_GROUP_INDEX
    intrinsic_q: float = 1.04e6
    coupling_q: float = 1.04e6
    resonance_nm: float = DEFAULT_CENTER_NM

    def __post_init__(self):
        require(self.kind in ("ring", "racetrack"), "kind", "must be 'ring' or 'racetrack'")
        if self.kind == "ring":
            require(self.straight_arm_um == 0, "straight_arm_um", "a ring has no straight arm")
        require(self.intrinsic_q > 0, "intrinsic_q", "must be > 0")
        require(self.coupling_q > 0, "coupling_q", "must be > 0")
        require(self.bend_radius_um > 0, "bend_radius_um", "must be > 0")

    @property
    def loaded_q(self) -> float:
        return 1.0 / (1.0 / self.intrinsic_q + 1.0 / self.coupling_q)

    @property
    def min_transmission(self) -> float:
        if math.isinf(self.coupling_q):
            return 1.0
        return ((self.intrinsic_q - self.coupling_q) / (self.intrinsic_q + self.coupling_q)) ** 2

    @property
    def linewidth_nm(self) -> float:
        return self.resonance_nm / self.loaded_q

    @property
    def perimeter_um(self) -> float:
        return 2.0 * self.straight_arm_um + 2.0 * math.pi * self.bend_radius_um


def resonator_transmission(r: ResonatorSpec, wavelength_nm):
    """All-pass Lorentzian dip around ``r.resonance_nm``."""
    x = 2.0 * (np.asarray(wavelength_nm, dtype=float) - r.resonance_nm) / r.linewidth_nm
    return 1.0 - (1.0 - r.min_transmission) / (1.0 + x * x)


def _check_positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise ConfigError(name, f"must be > 0, got {v}")


def loss_from_intrinsic_q(q_intrinsic: float, wavelength_nm: float, group_index: float) -> float:
    """Propagation loss in dB/cm implied by an intrinsic quality factor."""
    _check_positive(q_intrinsic=q_intrinsic, wavelength_nm=wavelength_nm, group_index=group_index)
    if math.isinf(q_intrinsic):
        return 0.0
    return 2.0 * math.pi * group_index / (q_intrinsic * wavelength_nm * 1e-7) * DB_PER_NEPER


def q_from_loss(alpha_db_per_cm: float, wavelength_nm: float, group_index: float) -> float:
    """Inverse of :func:`loss_from_intrinsic_q`; zero loss gives infinite Q."""
    _check_positive(wavelength_nm=wavelength_nm, group_index=group_index)
    if alpha_db_per_cm < 0:
        raise ConfigError("alpha_db_per_cm", "must be >= 0")
    if alpha_db_per_cm == 0:
        return math.inf
    return 2.0 * math.pi * group_index * DB_PER_NEPER / (alpha_db_per_cm * wavelength_nm * 1e-7)


def perimeter_average_loss(alpha_straight: float, alpha_bend: float, straight_arm_um: float, bend_radius_um: float) -> float:
    """Length-weighted loss of a racetrack (two straight arms, one full circle of bends)."""
    ls = 2.0 * straight_arm_um
    lb = 2.0 * math.pi * bend_radius_um
    return (ls * alpha_straight + lb * alpha_bend) / (ls + lb)


def extract_segment_losses(
    q_ring: float,
    q_racetrack: float,
    *,
    bend_radius_um: float = 70.0,
    straight_arm_um: float = 500.0,
    wavelength_nm: float = DEFAULT_CENTER_NM,
    group_index: float = DEFAULT_GROUP_INDEX,
) -> tuple[float, float]:
    """Separate straight and bend loss from a ring and a racetrack intrinsic Q.

    Returns ``(alpha_straight, alpha_bend)`` in dB/cm.  Raises
    :class:`ConfigError` when the pair implies a negative loss.
    """
    _check_positive(q_ring=q_ring, q_racetrack=q_racetrack)
    if not straight_arm_um > 0:
        raise ConfigError("straight_arm_um", "racetrack needs a straight section")
    a_ring = loss_from_intrinsic_q(q_ring, wavelength_nm, group_index)
    a_track = loss_from_intrinsic_q(q_racetrack, wavelength_nm, group_index)
    ls = 2.0 * straight_arm_um
    lb = 2.0 * math.pi * bend_radius_um
    # rows: ring average, racetrack average; unknowns: (alpha_straight, alpha_bend)
    a = np.array([[0.0, 1.0], [ls / (ls + lb), lb / (ls + lb)]])
    alpha_s, alpha_b = np.linalg.solve(a, np.array([a_ring, a_track]))
    if alpha_s < 0 or alpha_b < 0:
        raise ConfigError(
            "q_ring/q_racetrack",
            f"inconsistent pair gives negative loss (straight={alpha_s:.4g}, bend={alpha_b:.4g} dB/cm)",
        )
    return float(alpha_s), float(alpha_b)


class CouplingInference(NamedTuple):
    regime: str
    q_intrinsic: float
    q_intrinsic_under: float
    q_intrinsic_over: float


def infer_intrinsic_q(q_loaded: float, min_transmission: float, critical_threshold: float = 0.05) -> CouplingInference:
    """Intrinsic Q from a dip's loaded Q and on-resonance transmission.

    Dips deeper than ``critical_threshold`` are taken as critically coupled.
    Otherwise both the under- and over-coupled solutions are returned and
    ``q_intrinsic`` is NaN, since one spectrum cannot tell them apart.
    """
    root = math.sqrt(min(max(min_transmission, 0.0), 1.0))
    under = 2.0 * q_loaded / (1.0 + root)
    over = 2.0 * q_loaded / (1.0 - root) if root < 1 else math.inf
    if min_transmission < critical_threshold:
        return CouplingInference("critical", 2.0 * q_loaded, under, over)
    return CouplingInference("ambiguous", math.nan, under, over)
